//! Dense tensor storage and elementwise arithmetic.
//!
//! Tensors are rank 1-4, row-major, laid out batch x channel x height x width
//! with the innermost index running over width. Storage is a contiguous
//! `Vec<E>`; there are no strides or views, every operation copies. `E` is
//! `f32` for training and inference and `f64` for finite-difference gradient
//! checking.

use crate::error::{Error, Result};

/// Scalar element type: `f32` for the production path, `f64` for gradient
/// checking.
pub trait Scalar:
    num_traits::Float
    + std::ops::AddAssign
    + std::ops::SubAssign
    + std::ops::MulAssign
    + std::ops::DivAssign
    + std::fmt::Debug
    + std::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    const NAME: &'static str;

    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn from_f32(v: f32) -> Self;
    fn to_f32(self) -> f32;
    fn from_usize(v: usize) -> Self {
        Self::from_f64(v as f64)
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn from_f64(v: f64) -> Self {
        v as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f32(v: f32) -> Self {
        v
    }
    fn to_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f32(v: f32) -> Self {
        v as f64
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}

/// Elementwise binary operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Mul,
}

/// Dense rank 1-4 tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorBase<E> {
    shape: Vec<usize>,
    data: Vec<E>,
}

/// The production-path tensor.
pub type Tensor = TensorBase<f32>;

fn validate_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.len() > 4 {
        return Err(Error::InvalidShape(format!(
            "rank must be 1..=4, got {:?}",
            shape
        )));
    }
    if shape.iter().any(|&d| d == 0) {
        return Err(Error::InvalidShape(format!(
            "all dims must be >= 1, got {:?}",
            shape
        )));
    }
    Ok(shape.iter().product())
}

impl<E: Scalar> TensorBase<E> {
    /// Tensor of the given shape with every element set to `fill`.
    pub fn new(shape: &[usize], fill: E) -> Result<Self> {
        let n = validate_shape(shape)?;
        if !fill.is_finite() {
            return Err(Error::NonFinite {
                context: "tensor fill value".into(),
            });
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: vec![fill; n],
        })
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::new(shape, E::zero())
    }

    /// Takes ownership of `data`; length must equal the product of dims.
    pub fn from_vec(shape: &[usize], data: Vec<E>) -> Result<Self> {
        let n = validate_shape(shape)?;
        if data.len() != n {
            return Err(Error::InvalidShape(format!(
                "shape {:?} needs {} elements, got {}",
                shape,
                n,
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[E] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [E] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<E> {
        self.data
    }

    /// Shape as `[n, c, h, w]`; errors unless rank is exactly 4.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.shape[..] {
            [n, c, h, w] => Ok([n, c, h, w]),
            _ => Err(Error::InvalidShape(format!(
                "expected rank-4 tensor, got {:?}",
                self.shape
            ))),
        }
    }

    /// Shape as `[c, h, w]`; errors unless rank is exactly 3.
    pub fn dims3(&self) -> Result<[usize; 3]> {
        match self.shape[..] {
            [c, h, w] => Ok([c, h, w]),
            _ => Err(Error::InvalidShape(format!(
                "expected rank-3 tensor, got {:?}",
                self.shape
            ))),
        }
    }

    /// Same data, new shape of equal element count.
    pub fn reshaped(&self, shape: &[usize]) -> Result<Self> {
        let n = validate_shape(shape)?;
        if n != self.data.len() {
            return Err(Error::InvalidShape(format!(
                "cannot reshape {:?} into {:?}",
                self.shape, shape
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: self.data.clone(),
        })
    }

    pub fn map(&self, f: impl Fn(E) -> E) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// result[i] = op(a[i], b[i]); shapes must match exactly.
    pub fn elementwise(&self, other: &Self, op: BinOp) -> Result<Self> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch(format!(
                "elementwise {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| match op {
                BinOp::Add => a + b,
                BinOp::Mul => a * b,
            })
            .collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinOp::Add)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.elementwise(other, BinOp::Mul)
    }

    pub fn scale(&self, k: E) -> Self {
        self.map(|v| v * k)
    }

    pub fn sum(&self) -> E {
        self.data.iter().fold(E::zero(), |acc, &v| acc + v)
    }

    pub fn min(&self) -> E {
        self.data.iter().fold(E::infinity(), |acc, &v| acc.min(v))
    }

    pub fn max(&self) -> E {
        self.data
            .iter()
            .fold(E::neg_infinity(), |acc, &v| acc.max(v))
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Converts element type; used when serializing f64 tensors to f32 storage.
    pub fn cast<F: Scalar>(&self) -> TensorBase<F> {
        TensorBase {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| F::from_f64(v.to_f64())).collect(),
        }
    }
}

/// Concatenates rank-4 tensors along the channel axis. All inputs must share
/// batch, height, and width; channel order follows input order.
pub fn concat_channels<E: Scalar>(inputs: &[&TensorBase<E>]) -> Result<TensorBase<E>> {
    let first = inputs
        .first()
        .ok_or_else(|| Error::InvalidArgument("concat_channels needs at least one input".into()))?;
    let [n, _, h, w] = first.dims4()?;
    let mut c_total = 0usize;
    for t in inputs {
        let [tn, tc, th, tw] = t.dims4()?;
        if tn != n || th != h || tw != w {
            return Err(Error::ShapeMismatch(format!(
                "concat_channels: {:?} does not match leading {:?}",
                t.shape(),
                first.shape()
            )));
        }
        c_total += tc;
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(n * c_total * plane);
    for ni in 0..n {
        for t in inputs {
            let tc = t.shape()[1];
            let start = ni * tc * plane;
            data.extend_from_slice(&t.data()[start..start + tc * plane]);
        }
    }
    TensorBase::from_vec(&[n, c_total, h, w], data)
}

/// Splits a rank-4 tensor along the channel axis into parts of the given
/// sizes; `parts` must sum to the channel count.
pub fn split_channels<E: Scalar>(
    t: &TensorBase<E>,
    parts: &[usize],
) -> Result<Vec<TensorBase<E>>> {
    let [n, c, h, w] = t.dims4()?;
    if parts.iter().sum::<usize>() != c || parts.iter().any(|&p| p == 0) {
        return Err(Error::InvalidArgument(format!(
            "split_channels: parts {:?} do not partition {} channels",
            parts, c
        )));
    }
    let plane = h * w;
    let mut out: Vec<TensorBase<E>> = parts
        .iter()
        .map(|&p| TensorBase::zeros(&[n, p, h, w]).expect("valid split shape"))
        .collect();
    for ni in 0..n {
        let mut offset = 0usize;
        for (piece, &p) in out.iter_mut().zip(parts) {
            let src = ni * c * plane + offset * plane;
            let dst = ni * p * plane;
            piece.data_mut()[dst..dst + p * plane]
                .copy_from_slice(&t.data()[src..src + p * plane]);
            offset += p;
        }
    }
    Ok(out)
}
