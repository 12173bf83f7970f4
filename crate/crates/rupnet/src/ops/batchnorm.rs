//! Batch normalization over (batch, height, width) per channel.
//!
//! Train mode normalizes with batch statistics (biased variance) and folds
//! them into the running statistics; infer mode normalizes with the running
//! statistics and mutates nothing.

use crate::error::{Error, Result};
use crate::ops::Mode;
use crate::tensor::{Scalar, TensorBase};

/// Per-channel batch statistics captured during a train-mode forward.
#[derive(Debug, Clone, PartialEq)]
pub struct BnBatchStats<E> {
    pub mean: Vec<E>,
    pub var: Vec<E>,
}

/// Owned batch-norm state: learned affine parameters plus running inference
/// statistics.
#[derive(Debug, Clone)]
pub struct BatchNormState<E: Scalar> {
    pub gamma: TensorBase<E>,
    pub beta: TensorBase<E>,
    pub running_mean: TensorBase<E>,
    pub running_var: TensorBase<E>,
    pub momentum: E,
    pub eps: E,
}

impl<E: Scalar> BatchNormState<E> {
    pub fn new(channels: usize, eps: E, momentum: E) -> Result<Self> {
        if eps <= E::zero() {
            return Err(Error::InvalidArgument("batchnorm eps must be > 0".into()));
        }
        Ok(Self {
            gamma: TensorBase::new(&[channels], E::one())?,
            beta: TensorBase::zeros(&[channels])?,
            running_mean: TensorBase::zeros(&[channels])?,
            running_var: TensorBase::new(&[channels], E::one())?,
            momentum,
            eps,
        })
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x`. Train mode also updates the running statistics.
    pub fn forward(&mut self, x: &TensorBase<E>, mode: Mode) -> Result<TensorBase<E>> {
        match mode {
            Mode::Train => {
                let (y, stats) = batchnorm_train(x, self.gamma.data(), self.beta.data(), self.eps)?;
                batchnorm_update_running(
                    &stats,
                    self.running_mean.data_mut(),
                    self.running_var.data_mut(),
                    self.momentum,
                );
                Ok(y)
            }
            Mode::Infer => batchnorm_infer(
                x,
                self.gamma.data(),
                self.beta.data(),
                self.running_mean.data(),
                self.running_var.data(),
                self.eps,
            ),
        }
    }
}

fn check_channels<E: Scalar>(x: &TensorBase<E>, params: &[&[E]]) -> Result<[usize; 4]> {
    let dims = x.dims4()?;
    for p in params {
        if p.len() != dims[1] {
            return Err(Error::ShapeMismatch(format!(
                "batchnorm: input has {} channels, parameter has {}",
                dims[1],
                p.len()
            )));
        }
    }
    Ok(dims)
}

/// Train-mode forward: returns the normalized output and the batch
/// statistics used, which the caller needs for both the running-stat update
/// and the backward pass.
pub fn batchnorm_train<E: Scalar>(
    x: &TensorBase<E>,
    gamma: &[E],
    beta: &[E],
    eps: E,
) -> Result<(TensorBase<E>, BnBatchStats<E>)> {
    let [n, c, h, w] = check_channels(x, &[gamma, beta])?;
    let plane = h * w;
    let m = E::from_usize(n * plane);
    let xd = x.data();
    let mut mean = vec![E::zero(); c];
    let mut var = vec![E::zero(); c];
    for ci in 0..c {
        let mut acc = E::zero();
        for ni in 0..n {
            let p = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            for v in p {
                acc += *v;
            }
        }
        let mu = acc / m;
        let mut vacc = E::zero();
        for ni in 0..n {
            let p = &xd[(ni * c + ci) * plane..(ni * c + ci + 1) * plane];
            for v in p {
                let d = *v - mu;
                vacc += d * d;
            }
        }
        mean[ci] = mu;
        var[ci] = vacc / m;
    }
    let mut y = TensorBase::zeros(x.shape())?;
    let yd = y.data_mut();
    for ci in 0..c {
        let inv_std = (var[ci] + eps).sqrt().recip();
        let g = gamma[ci] * inv_std;
        let b = beta[ci];
        let mu = mean[ci];
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for k in 0..plane {
                yd[base + k] = (xd[base + k] - mu) * g + b;
            }
        }
    }
    Ok((y, BnBatchStats { mean, var }))
}

/// running <- (1 - momentum) * running + momentum * batch
pub fn batchnorm_update_running<E: Scalar>(
    stats: &BnBatchStats<E>,
    running_mean: &mut [E],
    running_var: &mut [E],
    momentum: E,
) {
    let keep = E::one() - momentum;
    for (r, &b) in running_mean.iter_mut().zip(&stats.mean) {
        *r = keep * *r + momentum * b;
    }
    for (r, &b) in running_var.iter_mut().zip(&stats.var) {
        *r = keep * *r + momentum * b;
    }
}

/// Infer-mode forward using running statistics; mutates nothing.
pub fn batchnorm_infer<E: Scalar>(
    x: &TensorBase<E>,
    gamma: &[E],
    beta: &[E],
    running_mean: &[E],
    running_var: &[E],
    eps: E,
) -> Result<TensorBase<E>> {
    let [n, c, h, w] = check_channels(x, &[gamma, beta, running_mean, running_var])?;
    let plane = h * w;
    let xd = x.data();
    let mut y = TensorBase::zeros(x.shape())?;
    let yd = y.data_mut();
    for ci in 0..c {
        let inv_std = (running_var[ci] + eps).sqrt().recip();
        let g = gamma[ci] * inv_std;
        let b = beta[ci];
        let mu = running_mean[ci];
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for k in 0..plane {
                yd[base + k] = (xd[base + k] - mu) * g + b;
            }
        }
    }
    Ok(y)
}

/// Full train-mode gradient including the mean and variance terms:
/// dx = gamma * inv_std / m * (m * dy - sum(dy) - xhat * sum(dy * xhat)).
/// Returns (dx, dgamma, dbeta).
pub fn batchnorm_backward<E: Scalar>(
    x: &TensorBase<E>,
    gamma: &[E],
    stats: &BnBatchStats<E>,
    eps: E,
    upstream: &TensorBase<E>,
) -> Result<(TensorBase<E>, TensorBase<E>, TensorBase<E>)> {
    let [n, c, h, w] = check_channels(x, &[gamma])?;
    if upstream.shape() != x.shape() {
        return Err(Error::ShapeMismatch(format!(
            "batchnorm backward: upstream {:?} vs input {:?}",
            upstream.shape(),
            x.shape()
        )));
    }
    let plane = h * w;
    let m = E::from_usize(n * plane);
    let xd = x.data();
    let ud = upstream.data();
    let mut dx = TensorBase::zeros(x.shape())?;
    let mut dgamma = TensorBase::zeros(&[c])?;
    let mut dbeta = TensorBase::zeros(&[c])?;
    for ci in 0..c {
        let mu = stats.mean[ci];
        let inv_std = (stats.var[ci] + eps).sqrt().recip();
        let mut sum_dy = E::zero();
        let mut sum_dy_xhat = E::zero();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for k in 0..plane {
                let dy = ud[base + k];
                let xhat = (xd[base + k] - mu) * inv_std;
                sum_dy += dy;
                sum_dy_xhat += dy * xhat;
            }
        }
        dgamma.data_mut()[ci] = sum_dy_xhat;
        dbeta.data_mut()[ci] = sum_dy;
        let scale = gamma[ci] * inv_std / m;
        let dxd = dx.data_mut();
        for ni in 0..n {
            let base = (ni * c + ci) * plane;
            for k in 0..plane {
                let dy = ud[base + k];
                let xhat = (xd[base + k] - mu) * inv_std;
                dxd[base + k] = scale * (m * dy - sum_dy - xhat * sum_dy_xhat);
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}
