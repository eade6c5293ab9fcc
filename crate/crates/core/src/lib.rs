//! Input-cell attention LSTMs and gradient saliency for multivariate time
//! series.
//!
//! The crate contains a small reverse-mode autodiff engine ([`autodiff`]),
//! standard and input-cell attention LSTM classifiers ([`cells`]), saliency
//! maps and gradient-decay profiles ([`saliency`]), synthetic box datasets
//! and an MNIST adapter ([`data`]), evaluation metrics ([`metrics`]), a
//! trainer ([`train`]) and the experiment suites built on top of them
//! ([`experiment`]).

pub mod autodiff;
pub mod cells;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod rng;
pub mod saliency;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
