//! Position-free transformer forecasting for single-target multivariate time
//! series with extreme events.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense `f64` tensors and a reverse-mode tape
//! - [`dataio`]: CSV ingestion, grid alignment, windowing, splits, scaling,
//!   moment statistics and a synthetic skewed-series generator
//! - [`sampler`]: 1-D Gaussian mixture and the extreme-event oversampling policy
//! - [`efe`], [`aee`], [`model`]: the embeddings and the encoder/decoder network
//! - [`training`]: multi-objective loss, λ schedule, Adam, early stopping
//! - [`evalkit`]: metrics, rolling evaluation protocol and parameter sweeps
//! - [`pipeline`] and [`cli`]: end-to-end drivers

pub mod aee;
pub mod cli;
pub mod config;
pub mod dataio;
pub mod efe;
pub mod error;
pub mod evalkit;
pub mod model;
pub mod pipeline;
pub mod nn;
pub mod sampler;
pub mod tensor;
pub mod training;

pub use config::PfConfig;
pub use error::{Error, Result};
pub use tensor::{Tape, Tensor, Var};
