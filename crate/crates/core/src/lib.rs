//! Fine- versus coarse-grained training of small networks on hierarchically
//! labeled data.
//!
//! A softmax model trained on `K` fine classes is compared with a sigmoid
//! model trained directly on the binary coarse task, both scored on coarse
//! accuracy. The crate provides the model and its losses, dataset readers and
//! a synthetic generator, and a sweep harness.

pub mod data;
pub mod error;
pub mod harness;
pub mod io;
pub mod losses;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod seed;

pub use error::{Error, Result};
pub use matrix::Matrix;
