//! ReLU and numerically stable sigmoid.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

pub fn relu<E: Scalar>(x: &TensorBase<E>) -> TensorBase<E> {
    x.map(|v| v.max(E::zero()))
}

/// dx = upstream where x > 0, else 0.
pub fn relu_backward<E: Scalar>(
    x: &TensorBase<E>,
    upstream: &TensorBase<E>,
) -> Result<TensorBase<E>> {
    if x.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch(format!(
            "relu backward: upstream {:?} vs input {:?}",
            upstream.shape(),
            x.shape()
        )));
    }
    let data = x
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&xv, &g)| if xv > E::zero() { g } else { E::zero() })
        .collect();
    TensorBase::from_vec(x.shape(), data)
}

/// y = 1 / (1 + exp(-x)), evaluated without overflow for large |x|.
/// Outputs are strictly inside (0, 1).
pub fn sigmoid<E: Scalar>(x: &TensorBase<E>) -> TensorBase<E> {
    x.map(|v| {
        if v >= E::zero() {
            (E::one() + (-v).exp()).recip()
        } else {
            let e = v.exp();
            e / (E::one() + e)
        }
    })
}

/// dx = upstream * y * (1 - y), in terms of the forward output y.
pub fn sigmoid_backward<E: Scalar>(
    y: &TensorBase<E>,
    upstream: &TensorBase<E>,
) -> Result<TensorBase<E>> {
    if y.shape() != upstream.shape() {
        return Err(Error::ShapeMismatch(format!(
            "sigmoid backward: upstream {:?} vs output {:?}",
            upstream.shape(),
            y.shape()
        )));
    }
    let data = y
        .data()
        .iter()
        .zip(upstream.data())
        .map(|(&yv, &g)| g * yv * (E::one() - yv))
        .collect();
    TensorBase::from_vec(y.shape(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn relu_basic() {
        let x = Tensor::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
        let pos = Tensor::from_vec(&[2], vec![1.0, 3.0]).unwrap();
        assert_eq!(relu(&pos), pos);
        let neg = Tensor::from_vec(&[2], vec![-1.0, -3.0]).unwrap();
        assert_eq!(relu(&neg).data(), &[0.0, 0.0]);
    }

    #[test]
    fn sigmoid_midpoint_and_saturation() {
        let x = Tensor::from_vec(&[3], vec![0.0, 100.0, -100.0]).unwrap();
        let y = sigmoid(&x);
        assert_eq!(y.data()[0], 0.5);
        assert!((y.data()[1] - 1.0).abs() < 1e-6 && y.data()[1].is_finite());
        assert!(y.data()[2].abs() < 1e-6 && y.data()[2] > 0.0);
    }

    #[test]
    fn sigmoid_symmetry() {
        for v in [-3.0f32, -0.7, 0.2, 1.9] {
            let a = sigmoid(&Tensor::from_vec(&[1], vec![v]).unwrap()).data()[0];
            let b = sigmoid(&Tensor::from_vec(&[1], vec![-v]).unwrap()).data()[0];
            assert!((a + b - 1.0).abs() < 1e-7);
        }
    }
}
