//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Scalar;

/// Step counter and hyperparameters; the per-parameter moment tensors live in
/// the parameter store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamState {
    fn default() -> Self {
        Self {
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// One update over every trainable parameter:
/// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2;
/// theta <- theta - lr * mhat / (sqrt(vhat) + eps), then gradients are
/// zeroed. A non-finite gradient aborts with the offending parameter's name.
pub fn adam_step<E: Scalar>(
    store: &mut ParamStore<E>,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for entry in store.entries() {
        if entry.trainable && !entry.grad.all_finite() {
            return Err(Error::NonFinite {
                context: format!("gradient of parameter `{}`", entry.name),
            });
        }
    }
    state.t += 1;
    let b1 = E::from_f64(state.beta1);
    let b2 = E::from_f64(state.beta2);
    let one = E::one();
    let bc1 = one - E::from_f64(state.beta1.powi(state.t as i32));
    let bc2 = one - E::from_f64(state.beta2.powi(state.t as i32));
    let lr = E::from_f64(lr);
    let eps = E::from_f64(state.eps);
    for entry in store.entries_mut() {
        if !entry.trainable {
            continue;
        }
        let g = entry.grad.data();
        let m = entry.adam_m.data_mut();
        let v = entry.adam_v.data_mut();
        let theta = entry.value.data_mut();
        for i in 0..g.len() {
            m[i] = b1 * m[i] + (one - b1) * g[i];
            v[i] = b2 * v[i] + (one - b2) * g[i] * g[i];
            let mhat = m[i] / bc1;
            let vhat = v[i] / bc2;
            theta[i] -= lr * mhat / (vhat.sqrt() + eps);
        }
    }
    store.zero_grads();
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn store_with(value: f32, grad: f32) -> ParamStore<f32> {
        let mut store = ParamStore::new();
        let idx = store
            .insert("theta", Tensor::from_vec(&[1], vec![value]).unwrap(), true)
            .unwrap();
        store
            .accumulate_grad(idx, &Tensor::from_vec(&[1], vec![grad]).unwrap())
            .unwrap();
        store
    }

    #[test]
    fn first_step_hand_evaluation() {
        // theta=0, g=1, lr=1e-3: bias-corrected mhat=vhat=1 -> theta ~ -0.001
        let mut store = store_with(0.0, 1.0);
        let mut state = AdamState::default();
        adam_step(&mut store, &mut state, 1e-3).unwrap();
        let theta = store.value(0).data()[0];
        assert!((theta + 1e-3).abs() < 1e-8, "{theta}");
        assert_eq!(state.t, 1);
        // gradients zeroed afterwards
        assert_eq!(store.entry(0).grad.data()[0], 0.0);
    }

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut store = store_with(1.5, 0.0);
        let mut state = AdamState::default();
        adam_step(&mut store, &mut state, 1e-2).unwrap();
        assert_eq!(store.value(0).data()[0], 1.5);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut store = store_with(0.0, f32::NAN);
        let mut state = AdamState::default();
        match adam_step(&mut store, &mut state, 1e-3) {
            Err(Error::NonFinite { context }) => assert!(context.contains("theta"), "{context}"),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn non_trainable_entries_untouched() {
        let mut store = ParamStore::<f32>::new();
        store
            .insert("bn.running_mean", Tensor::from_vec(&[1], vec![0.3]).unwrap(), false)
            .unwrap();
        let idx = store
            .insert("w", Tensor::from_vec(&[1], vec![1.0]).unwrap(), true)
            .unwrap();
        store
            .accumulate_grad(idx, &Tensor::from_vec(&[1], vec![1.0]).unwrap())
            .unwrap();
        let mut state = AdamState::default();
        adam_step(&mut store, &mut state, 1e-3).unwrap();
        assert_eq!(store.value(0).data()[0], 0.3);
        assert!(store.value(1).data()[0] < 1.0);
    }
}
