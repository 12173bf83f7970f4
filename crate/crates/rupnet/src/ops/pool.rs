//! 2x2 max pooling over non-overlapping windows.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// Halves H and W; requires both even. The returned indices hold the flat
/// position (into `x.data()`) of each window maximum, first occurrence in
/// row-major window order on ties, which makes backward deterministic.
pub fn maxpool2x2<E: Scalar>(x: &TensorBase<E>) -> Result<(TensorBase<E>, Vec<usize>)> {
    let [n, c, h, w] = x.dims4()?;
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::InvalidShape(format!(
            "maxpool2x2 needs even spatial dims, got {h}x{w}"
        )));
    }
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut y = TensorBase::zeros(&[n, c, oh, ow])?;
    let mut argmax = vec![0usize; n * c * oh * ow];
    let yd = y.data_mut();
    for plane_idx in 0..n * c {
        let in_base = plane_idx * h * w;
        let out_base = plane_idx * oh * ow;
        for oi in 0..oh {
            for oj in 0..ow {
                let r0 = in_base + (2 * oi) * w + 2 * oj;
                let r1 = r0 + w;
                // scan order (0,0), (0,1), (1,0), (1,1); strict > keeps the first
                let mut best_idx = r0;
                let mut best = xd[r0];
                for idx in [r0 + 1, r1, r1 + 1] {
                    if xd[idx] > best {
                        best = xd[idx];
                        best_idx = idx;
                    }
                }
                yd[out_base + oi * ow + oj] = best;
                argmax[out_base + oi * ow + oj] = best_idx;
            }
        }
    }
    Ok((y, argmax))
}

/// Scatters the upstream gradient to the recorded argmax positions; every
/// other input position gets zero.
pub fn maxpool2x2_backward<E: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    upstream: &TensorBase<E>,
) -> Result<TensorBase<E>> {
    let [n, c, h, w] = TensorBase::<E>::zeros(input_shape)?.dims4()?;
    if upstream.shape() != [n, c, h / 2, w / 2] {
        return Err(Error::ShapeMismatch(format!(
            "maxpool backward: upstream {:?} for input {:?}",
            upstream.shape(),
            input_shape
        )));
    }
    if argmax.len() != upstream.len() {
        return Err(Error::ShapeMismatch(
            "maxpool backward: argmax length mismatch".into(),
        ));
    }
    let mut dx = TensorBase::zeros(input_shape)?;
    let dxd = dx.data_mut();
    for (&idx, &g) in argmax.iter().zip(upstream.data()) {
        dxd[idx] += g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn single_window() {
        let x = Tensor::from_vec(&[1, 1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let (y, idx) = maxpool2x2(&x).unwrap();
        assert_eq!(y.data(), &[4.0]);
        assert_eq!(idx, vec![3]);
    }

    #[test]
    fn constant_input_ties_break_first() {
        let x = Tensor::new(&[1, 2, 4, 4], 3.0).unwrap();
        let (y, idx) = maxpool2x2(&x).unwrap();
        assert!(y.data().iter().all(|&v| v == 3.0));
        // first-in-window: top-left corner of each 2x2 window
        let expected: Vec<usize> = (0..2)
            .flat_map(|p| {
                (0..2).flat_map(move |oi| (0..2).map(move |oj| p * 16 + oi * 2 * 4 + oj * 2))
            })
            .collect();
        assert_eq!(idx, expected);
    }

    #[test]
    fn odd_dims_rejected() {
        let x = Tensor::zeros(&[1, 1, 3, 4]).unwrap();
        assert!(matches!(maxpool2x2(&x), Err(Error::InvalidShape(_))));
    }

    #[test]
    fn exhaustive_window_scan_oracle() {
        let mut rng = crate::rng::Rng::new(17);
        let x: Tensor = rng.normal_tensor(&[1, 1, 4, 4], 0.0, 1.0).unwrap();
        let (y, _) = maxpool2x2(&x).unwrap();
        for oi in 0..2 {
            for oj in 0..2 {
                let mut best = f32::NEG_INFINITY;
                for di in 0..2 {
                    for dj in 0..2 {
                        best = best.max(x.data()[(2 * oi + di) * 4 + 2 * oj + dj]);
                    }
                }
                assert_eq!(y.data()[oi * 2 + oj], best);
            }
        }
    }

    #[test]
    fn backward_conserves_upstream_sum() {
        let mut rng = crate::rng::Rng::new(29);
        let x: Tensor = rng.normal_tensor(&[2, 3, 8, 8], 0.0, 1.0).unwrap();
        let (y, argmax) = maxpool2x2(&x).unwrap();
        let up: Tensor = rng.normal_tensor(y.shape(), 0.0, 1.0).unwrap();
        let dx = maxpool2x2_backward(x.shape(), &argmax, &up).unwrap();
        assert!((dx.sum() - up.sum()).abs() < 1e-4);
    }
}
