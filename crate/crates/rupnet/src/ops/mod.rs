//! Layer primitives: forward and backward implementations of everything the
//! network uses, plus the [`OpRecord`] bookkeeping that backpropagation
//! replays.

mod activation;
mod batchnorm;
mod conv;
mod pool;
mod resize;

pub use activation::{relu, relu_backward, sigmoid, sigmoid_backward};
pub use batchnorm::{
    batchnorm_backward, batchnorm_infer, batchnorm_train, batchnorm_update_running,
    BatchNormState, BnBatchStats,
};
pub use conv::{conv2d, conv2d_backward};
pub use pool::{maxpool2x2, maxpool2x2_backward};
pub use resize::{bilinear_upsample, bilinear_upsample_backward};
pub(crate) use resize::axis_taps;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// Forward-pass mode. Train records state for backward and updates batch-norm
/// running statistics; infer touches no state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Saved inputs and intermediates for one forward op, enough to replay the
/// forward bitwise and to compute exact gradients.
#[derive(Debug, Clone)]
pub enum OpRecord<E: Scalar> {
    Conv2d {
        x: TensorBase<E>,
        w: TensorBase<E>,
        b: Option<TensorBase<E>>,
        pad: usize,
    },
    BatchNorm {
        x: TensorBase<E>,
        gamma: Vec<E>,
        beta: Vec<E>,
        stats: BnBatchStats<E>,
        eps: E,
    },
    Relu {
        x: TensorBase<E>,
    },
    MaxPool {
        x: TensorBase<E>,
        argmax: Vec<usize>,
    },
    Bilinear {
        x: TensorBase<E>,
        factor: usize,
    },
    Sigmoid {
        x: TensorBase<E>,
        y: TensorBase<E>,
    },
}

impl<E: Scalar> OpRecord<E> {
    /// Runs conv2d and captures the record. The record owns its input.
    pub fn conv2d(
        x: TensorBase<E>,
        w: TensorBase<E>,
        b: Option<TensorBase<E>>,
        pad: usize,
    ) -> Result<(TensorBase<E>, Self)> {
        let y = conv2d(&x, &w, b.as_ref(), pad)?;
        Ok((y, OpRecord::Conv2d { x, w, b, pad }))
    }

    pub fn batchnorm_train(
        x: TensorBase<E>,
        gamma: Vec<E>,
        beta: Vec<E>,
        eps: E,
    ) -> Result<(TensorBase<E>, Self)> {
        let (y, stats) = batchnorm_train(&x, &gamma, &beta, eps)?;
        Ok((
            y,
            OpRecord::BatchNorm {
                x,
                gamma,
                beta,
                stats,
                eps,
            },
        ))
    }

    pub fn relu(x: TensorBase<E>) -> (TensorBase<E>, Self) {
        let y = relu(&x);
        (y, OpRecord::Relu { x })
    }

    pub fn maxpool2x2(x: TensorBase<E>) -> Result<(TensorBase<E>, Self)> {
        let (y, argmax) = maxpool2x2(&x)?;
        Ok((y, OpRecord::MaxPool { x, argmax }))
    }

    pub fn bilinear_upsample(x: TensorBase<E>, factor: usize) -> Result<(TensorBase<E>, Self)> {
        let y = bilinear_upsample(&x, factor)?;
        Ok((y, OpRecord::Bilinear { x, factor }))
    }

    pub fn sigmoid(x: TensorBase<E>) -> (TensorBase<E>, Self) {
        let y = sigmoid(&x);
        (y.clone(), OpRecord::Sigmoid { x, y })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OpRecord::Conv2d { .. } => "conv2d",
            OpRecord::BatchNorm { .. } => "batchnorm",
            OpRecord::Relu { .. } => "relu",
            OpRecord::MaxPool { .. } => "maxpool2x2",
            OpRecord::Bilinear { .. } => "bilinear_upsample",
            OpRecord::Sigmoid { .. } => "sigmoid",
        }
    }

    /// Recomputes the forward output from the saved inputs. Reproduces the
    /// original output bitwise (same code path, same accumulation order).
    pub fn forward_replay(&self) -> Result<TensorBase<E>> {
        match self {
            OpRecord::Conv2d { x, w, b, pad } => conv2d(x, w, b.as_ref(), *pad),
            OpRecord::BatchNorm {
                x, gamma, beta, eps, ..
            } => Ok(batchnorm_train(x, gamma, beta, *eps)?.0),
            OpRecord::Relu { x } => Ok(relu(x)),
            OpRecord::MaxPool { x, .. } => Ok(maxpool2x2(x)?.0),
            OpRecord::Bilinear { x, factor } => bilinear_upsample(x, *factor),
            OpRecord::Sigmoid { x, .. } => Ok(sigmoid(x)),
        }
    }

    /// Exact analytic gradients: returns the input gradient and any parameter
    /// gradients (conv: dw then db; batchnorm: dgamma then dbeta).
    pub fn backward(
        &self,
        upstream: &TensorBase<E>,
    ) -> Result<(TensorBase<E>, Vec<TensorBase<E>>)> {
        match self {
            OpRecord::Conv2d { x, w, b, pad } => {
                let (dx, dw, db) = conv2d_backward(x, w, *pad, b.is_some(), upstream)?;
                let mut params = vec![dw];
                if let Some(db) = db {
                    params.push(db);
                }
                Ok((dx, params))
            }
            OpRecord::BatchNorm {
                x,
                gamma,
                stats,
                eps,
                ..
            } => {
                let (dx, dgamma, dbeta) = batchnorm_backward(x, gamma, stats, *eps, upstream)?;
                Ok((dx, vec![dgamma, dbeta]))
            }
            OpRecord::Relu { x } => Ok((relu_backward(x, upstream)?, vec![])),
            OpRecord::MaxPool { x, argmax } => Ok((
                maxpool2x2_backward(x.shape(), argmax, upstream)?,
                vec![],
            )),
            OpRecord::Bilinear { x, factor } => Ok((
                bilinear_upsample_backward(x.shape(), *factor, upstream)?,
                vec![],
            )),
            OpRecord::Sigmoid { y, .. } => Ok((sigmoid_backward(y, upstream)?, vec![])),
        }
    }
}

/// Shape-checked upstream helper shared by backward entry points.
pub(crate) fn ensure_same_shape<E: Scalar>(
    what: &str,
    a: &TensorBase<E>,
    b: &TensorBase<E>,
) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{what}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::tensor::Tensor;

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = Rng::new(11);
        let x: Tensor = rng.normal_tensor(&[1, 2, 4, 4], 0.0, 1.0).unwrap();
        let w: Tensor = rng.normal_tensor(&[3, 2, 3, 3], 0.0, 1.0).unwrap();
        let (y, rec) = OpRecord::conv2d(x, w, None, 1).unwrap();
        let zero = Tensor::zeros(y.shape()).unwrap();
        let (dx, params) = rec.backward(&zero).unwrap();
        assert!(dx.data().iter().all(|&v| v == 0.0));
        assert!(params[0].data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn replay_reproduces_output_bitwise() {
        let mut rng = Rng::new(12);
        let x: Tensor = rng.normal_tensor(&[2, 3, 4, 4], 0.0, 1.0).unwrap();
        let w: Tensor = rng.normal_tensor(&[2, 3, 3, 3], 0.0, 1.0).unwrap();

        let (y, rec) = OpRecord::conv2d(x.clone(), w, None, 1).unwrap();
        assert_eq!(rec.forward_replay().unwrap(), y);

        let (y, rec) =
            OpRecord::batchnorm_train(x.clone(), vec![1.0; 3], vec![0.0; 3], 1e-5).unwrap();
        assert_eq!(rec.forward_replay().unwrap(), y);

        let (y, rec) = OpRecord::maxpool2x2(x.clone()).unwrap();
        assert_eq!(rec.forward_replay().unwrap(), y);

        let (y, rec) = OpRecord::bilinear_upsample(x.clone(), 2).unwrap();
        assert_eq!(rec.forward_replay().unwrap(), y);

        let (y, rec) = OpRecord::relu(x.clone());
        assert_eq!(rec.forward_replay().unwrap(), y);

        let (y, rec) = OpRecord::sigmoid(x);
        assert_eq!(rec.forward_replay().unwrap(), y);
    }
}
