//! Bilinear upsampling with half-pixel centers and edge clamping.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// Source taps for one output coordinate: blend `frac` of `hi` with
/// `1 - frac` of `lo`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct AxisTap {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

/// Half-pixel-center source coordinates for resampling `in_len` to `out_len`:
/// s = (d + 0.5) * in/out - 0.5, clamped to [0, in_len - 1].
pub(crate) fn axis_taps(in_len: usize, out_len: usize) -> Vec<AxisTap> {
    let ratio = in_len as f64 / out_len as f64;
    (0..out_len)
        .map(|d| {
            let s = ((d as f64 + 0.5) * ratio - 0.5).clamp(0.0, (in_len - 1) as f64);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(in_len - 1);
            AxisTap {
                lo,
                hi,
                frac: s - lo as f64,
            }
        })
        .collect()
}

fn check_factor(factor: usize) -> Result<()> {
    if factor == 2 || factor == 4 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "bilinear_upsample supports factors 2 and 4, got {factor}"
        )))
    }
}

/// Scales H and W by `factor` (2 or 4), blending the four nearest source
/// texels per output position.
pub fn bilinear_upsample<E: Scalar>(x: &TensorBase<E>, factor: usize) -> Result<TensorBase<E>> {
    check_factor(factor)?;
    let [n, c, h, w] = x.dims4()?;
    let (oh, ow) = (h * factor, w * factor);
    let rows = axis_taps(h, oh);
    let cols = axis_taps(w, ow);
    let xd = x.data();
    let mut y = TensorBase::zeros(&[n, c, oh, ow])?;
    let yd = y.data_mut();
    for plane_idx in 0..n * c {
        let in_base = plane_idx * h * w;
        let out_base = plane_idx * oh * ow;
        for (oi, rt) in rows.iter().enumerate() {
            let ti = E::from_f64(rt.frac);
            let one_ti = E::one() - ti;
            let r_lo = in_base + rt.lo * w;
            let r_hi = in_base + rt.hi * w;
            let dst = out_base + oi * ow;
            for (oj, ct) in cols.iter().enumerate() {
                let tj = E::from_f64(ct.frac);
                let one_tj = E::one() - tj;
                yd[dst + oj] = one_ti * (one_tj * xd[r_lo + ct.lo] + tj * xd[r_lo + ct.hi])
                    + ti * (one_tj * xd[r_hi + ct.lo] + tj * xd[r_hi + ct.hi]);
            }
        }
    }
    Ok(y)
}

/// Transpose of the interpolation: scatter-adds each upstream value onto its
/// four source texels with the same weights.
pub fn bilinear_upsample_backward<E: Scalar>(
    input_shape: &[usize],
    factor: usize,
    upstream: &TensorBase<E>,
) -> Result<TensorBase<E>> {
    check_factor(factor)?;
    let [n, c, h, w] = TensorBase::<E>::zeros(input_shape)?.dims4()?;
    let (oh, ow) = (h * factor, w * factor);
    if upstream.shape() != [n, c, oh, ow] {
        return Err(Error::ShapeMismatch(format!(
            "bilinear backward: upstream {:?} for input {:?} factor {factor}",
            upstream.shape(),
            input_shape
        )));
    }
    let rows = axis_taps(h, oh);
    let cols = axis_taps(w, ow);
    let ud = upstream.data();
    let mut dx = TensorBase::zeros(input_shape)?;
    let dxd = dx.data_mut();
    for plane_idx in 0..n * c {
        let in_base = plane_idx * h * w;
        let out_base = plane_idx * oh * ow;
        for (oi, rt) in rows.iter().enumerate() {
            let ti = E::from_f64(rt.frac);
            let one_ti = E::one() - ti;
            let r_lo = in_base + rt.lo * w;
            let r_hi = in_base + rt.hi * w;
            let src = out_base + oi * ow;
            for (oj, ct) in cols.iter().enumerate() {
                let g = ud[src + oj];
                let tj = E::from_f64(ct.frac);
                let one_tj = E::one() - tj;
                dxd[r_lo + ct.lo] += one_ti * one_tj * g;
                dxd[r_lo + ct.hi] += one_ti * tj * g;
                dxd[r_hi + ct.lo] += ti * one_tj * g;
                dxd[r_hi + ct.hi] += ti * tj * g;
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn constant_preserving() {
        for factor in [2, 4] {
            let x = Tensor::new(&[1, 2, 3, 3], 0.7).unwrap();
            let y = bilinear_upsample(&x, factor).unwrap();
            assert_eq!(y.shape(), &[1, 2, 3 * factor, 3 * factor]);
            for &v in y.data() {
                assert!((v - 0.7).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn half_pixel_row_formula() {
        // row [1, 2] at factor 2 -> [1, 1.25, 1.75, 2]
        let x = Tensor::from_vec(&[1, 1, 1, 2], vec![1.0, 2.0]).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        // output is 2x4; both rows identical since H=1 clamps
        let expect = [1.0, 1.25, 1.75, 2.0];
        for r in 0..2 {
            for (j, e) in expect.iter().enumerate() {
                assert!((y.data()[r * 4 + j] - e).abs() < 1e-6, "{:?}", y.data());
            }
        }
    }

    #[test]
    fn output_bounded_by_input_extrema() {
        let mut rng = crate::rng::Rng::new(8);
        let x: Tensor = rng.normal_tensor(&[1, 1, 2, 2], 0.0, 1.0).unwrap();
        let y = bilinear_upsample(&x, 2).unwrap();
        let (lo, hi) = (x.min(), x.max());
        for &v in y.data() {
            assert!(v >= lo - 1e-6 && v <= hi + 1e-6);
        }
    }

    #[test]
    fn unsupported_factor_rejected() {
        let x = Tensor::zeros(&[1, 1, 2, 2]).unwrap();
        assert!(matches!(
            bilinear_upsample(&x, 3),
            Err(Error::InvalidArgument(_))
        ));
    }
}
