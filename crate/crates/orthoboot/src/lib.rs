//! Bayesian-bootstrap posterior sampling for parameters defined by orthogonal
//! moment restrictions with machine-learned nuisance components.

pub mod data;
pub mod dgp;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod nuisance;
pub mod posterior;
pub mod scalar;
pub mod scores;
pub mod stats;
pub mod stream;
pub mod weights;

pub use error::{Error, Result};

/// Concrete double-precision aliases; the default working types.
pub type Matrix = data::Matrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type WeightVector = weights::WeightVector<f64>;
pub type PredictorHandle = nuisance::PredictorHandle<f64>;
pub type NuisanceFit = scores::NuisanceFit<f64>;
