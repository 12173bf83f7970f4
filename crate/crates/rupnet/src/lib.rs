//! RUPNet: a lightweight residual encoder-decoder network for binary image
//! segmentation, implemented from first principles.
//!
//! The crate covers the full pipeline: tensor math and seeded RNG, layer
//! primitives with exact analytic gradients, the network itself with
//! checkpoint persistence, BCE+dice training with Adam, netpbm dataset I/O
//! and a synthetic-data generator, segmentation metrics with an FPS
//! benchmark harness, and a finite-difference gradient-check suite. The
//! `rupnet` binary wires everything into a CLI.

pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod ops;
pub mod rng;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{Scalar, Tensor, TensorBase};
