//! Binary cross-entropy and dice loss, with analytic gradients with respect
//! to the prediction.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// BCE probability clamp bound.
const CLAMP: f64 = 1e-7;

fn check_pair<E: Scalar>(pred: &TensorBase<E>, target: &TensorBase<E>) -> Result<()> {
    if pred.shape() != target.shape() {
        return Err(Error::ShapeMismatch(format!(
            "loss: pred {:?} vs target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if target
        .data()
        .iter()
        .any(|&t| t != E::zero() && t != E::one())
    {
        return Err(Error::InvalidArgument(
            "loss target must be strictly binary".into(),
        ));
    }
    Ok(())
}

/// Mean over all elements of -[t ln p + (1-t) ln(1-p)], with p clamped to
/// [1e-7, 1 - 1e-7].
pub fn bce_loss<E: Scalar>(pred: &TensorBase<E>, target: &TensorBase<E>) -> Result<E> {
    Ok(bce_loss_grad(pred, target)?.0)
}

/// BCE value plus dL/dpred. The gradient is zero where the clamp is active.
pub fn bce_loss_grad<E: Scalar>(
    pred: &TensorBase<E>,
    target: &TensorBase<E>,
) -> Result<(E, TensorBase<E>)> {
    check_pair(pred, target)?;
    let lo = E::from_f64(CLAMP);
    let hi = E::one() - lo;
    let n = E::from_usize(pred.len());
    let mut acc = E::zero();
    let mut grad = TensorBase::zeros(pred.shape())?;
    let gd = grad.data_mut();
    for (i, (&p, &t)) in pred.data().iter().zip(target.data()).enumerate() {
        let pc = p.max(lo).min(hi);
        acc += -(t * pc.ln() + (E::one() - t) * (E::one() - pc).ln());
        if p > lo && p < hi {
            gd[i] = (pc - t) / (pc * (E::one() - pc) * n);
        }
    }
    Ok((acc / n, grad))
}

/// Per image: 1 - (2 sum(p t) + smooth) / (sum p + sum t + smooth), averaged
/// over the batch. Rank-4 input treats dim 0 as the batch; lower ranks are a
/// single image.
pub fn dice_loss<E: Scalar>(
    pred: &TensorBase<E>,
    target: &TensorBase<E>,
    smooth: f64,
) -> Result<E> {
    Ok(dice_loss_grad(pred, target, smooth)?.0)
}

/// Dice value plus dL/dpred.
pub fn dice_loss_grad<E: Scalar>(
    pred: &TensorBase<E>,
    target: &TensorBase<E>,
    smooth: f64,
) -> Result<(E, TensorBase<E>)> {
    check_pair(pred, target)?;
    if !(smooth > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dice smooth must be > 0, got {smooth}"
        )));
    }
    let s = E::from_f64(smooth);
    let batch = if pred.rank() == 4 { pred.shape()[0] } else { 1 };
    let per_image = pred.len() / batch;
    let bn = E::from_usize(batch);
    let mut total = E::zero();
    let mut grad = TensorBase::zeros(pred.shape())?;
    for b in 0..batch {
        let range = b * per_image..(b + 1) * per_image;
        let p = &pred.data()[range.clone()];
        let t = &target.data()[range.clone()];
        let mut inter = E::zero();
        let mut sum_p = E::zero();
        let mut sum_t = E::zero();
        for (&pv, &tv) in p.iter().zip(t) {
            inter += pv * tv;
            sum_p += pv;
            sum_t += tv;
        }
        let num = E::from_f64(2.0) * inter + s;
        let den = sum_p + sum_t + s;
        total += E::one() - num / den;
        let gd = &mut grad.data_mut()[range];
        for (g, &tv) in gd.iter_mut().zip(t) {
            // d/dp of -(num/den): num' = 2 t, den' = 1
            *g = -(E::from_f64(2.0) * tv * den - num) / (den * den * bn);
        }
    }
    Ok((total / bn, grad))
}

/// w_bce * bce + w_dice * dice.
pub fn combined_loss<E: Scalar>(
    pred: &TensorBase<E>,
    target: &TensorBase<E>,
    w_bce: f64,
    w_dice: f64,
    smooth: f64,
) -> Result<E> {
    Ok(combined_loss_grad(pred, target, w_bce, w_dice, smooth)?.0)
}

/// Combined value plus dL/dpred.
pub fn combined_loss_grad<E: Scalar>(
    pred: &TensorBase<E>,
    target: &TensorBase<E>,
    w_bce: f64,
    w_dice: f64,
    smooth: f64,
) -> Result<(E, TensorBase<E>)> {
    if w_bce < 0.0 || w_dice < 0.0 || (w_bce == 0.0 && w_dice == 0.0) {
        return Err(Error::InvalidArgument(
            "loss weights must be >= 0 and not both zero".into(),
        ));
    }
    let (bce, bce_grad) = bce_loss_grad(pred, target)?;
    let (dice, dice_grad) = dice_loss_grad(pred, target, smooth)?;
    let wb = E::from_f64(w_bce);
    let wd = E::from_f64(w_dice);
    let value = wb * bce + wd * dice;
    let grad = bce_grad.scale(wb).add(&dice_grad.scale(wd))?;
    Ok((value, grad))
}
