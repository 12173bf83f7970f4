//! Named parameter storage with paired gradient and Adam moment buffers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, TensorBase};

/// One named tensor with its gradient and optimizer state. Non-trainable
/// entries (batch-norm running statistics) keep the same layout so
/// checkpoints can serialize the store uniformly.
#[derive(Debug, Clone)]
pub struct ParamEntry<E: Scalar> {
    pub name: String,
    pub value: TensorBase<E>,
    pub grad: TensorBase<E>,
    pub adam_m: TensorBase<E>,
    pub adam_v: TensorBase<E>,
    pub trainable: bool,
}

/// Ordered map from parameter name to tensors. Insertion order is the
/// serialization order and is stable across runs with equal config.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<E: Scalar> {
    entries: Vec<ParamEntry<E>>,
    index: HashMap<String, usize>,
}

impl<E: Scalar> ParamStore<E> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, value: TensorBase<E>, trainable: bool) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name `{name}`"
            )));
        }
        let shape = value.shape().to_vec();
        let zeros = TensorBase::zeros(&shape)?;
        let idx = self.entries.len();
        self.entries.push(ParamEntry {
            name: name.to_string(),
            value,
            grad: zeros.clone(),
            adam_m: zeros.clone(),
            adam_v: zeros,
            trainable,
        });
        self.index.insert(name.to_string(), idx);
        Ok(idx)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry<E>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<E>] {
        &mut self.entries
    }

    pub fn entry(&self, idx: usize) -> &ParamEntry<E> {
        &self.entries[idx]
    }

    pub fn lookup(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn value(&self, idx: usize) -> &TensorBase<E> {
        &self.entries[idx].value
    }

    /// Replaces a value; the shape must match the existing tensor.
    pub fn set_value(&mut self, idx: usize, value: TensorBase<E>) -> Result<()> {
        let entry = &mut self.entries[idx];
        if entry.value.shape() != value.shape() {
            return Err(Error::ShapeMismatch(format!(
                "parameter `{}`: cannot replace {:?} with {:?}",
                entry.name,
                entry.value.shape(),
                value.shape()
            )));
        }
        entry.value = value;
        Ok(())
    }

    /// grad[idx] += g
    pub fn accumulate_grad(&mut self, idx: usize, g: &TensorBase<E>) -> Result<()> {
        let entry = &mut self.entries[idx];
        if entry.grad.shape() != g.shape() {
            return Err(Error::ShapeMismatch(format!(
                "gradient for `{}`: {:?} vs {:?}",
                entry.name,
                g.shape(),
                entry.grad.shape()
            )));
        }
        for (dst, src) in entry.grad.data_mut().iter_mut().zip(g.data()) {
            *dst += *src;
        }
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for entry in &mut self.entries {
            for v in entry.grad.data_mut() {
                *v = E::zero();
            }
        }
    }

    /// Number of trainable scalars (running statistics excluded).
    pub fn trainable_scalars(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn duplicate_name_rejected() {
        let mut store = ParamStore::<f32>::new();
        store
            .insert("w", Tensor::zeros(&[2, 2]).unwrap(), true)
            .unwrap();
        assert!(store
            .insert("w", Tensor::zeros(&[2, 2]).unwrap(), true)
            .is_err());
    }

    #[test]
    fn trainable_scalar_count_skips_stats() {
        let mut store = ParamStore::<f32>::new();
        store
            .insert("w", Tensor::zeros(&[2, 3]).unwrap(), true)
            .unwrap();
        store
            .insert("running_mean", Tensor::zeros(&[4]).unwrap(), false)
            .unwrap();
        assert_eq!(store.trainable_scalars(), 6);
    }
}
