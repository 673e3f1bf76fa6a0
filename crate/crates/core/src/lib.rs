//! Multivariate time-series forecaster with learnable frequency-domain
//! trend/seasonal decomposition, autocorrelation-gated encoders and
//! multi-scale fusion, plus the data, metric and training tooling around it.

pub mod autodiff;
pub mod commands;
pub mod config;
pub mod data;
pub mod decomposition;
pub mod encoder;
pub mod error;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
pub use model::{Model, ModelConfig};
pub use numerics::Tensor3;
