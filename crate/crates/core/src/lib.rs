//! Fault monitoring for passive optical networks from OTDR traces.
//!
//! * [`otdr`] synthesizes OTDR traces of multi-branch PONs under fault scenarios.
//! * [`dataset`] turns traces into the labeled network-level and window-level datasets.
//! * [`nn`] is a small deterministic recurrent-network kernel (GRU, LSTM, dense, Adam).
//! * [`models`] holds the three classifiers, their training loop and evaluation metrics.
//! * [`monitor`] compares incoming traces against a reference and reports faulty branches.

pub mod config;
pub mod dataset;
pub mod error;
pub mod models;
pub mod monitor;
pub mod nn;
pub mod otdr;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Tensor64 = nn::Tensor<f64>;
pub type Tensor32 = nn::Tensor<f32>;
pub type Dense64 = nn::Dense<f64>;
pub type Dense32 = nn::Dense<f32>;
pub type Gru64 = nn::Gru<f64>;
pub type Gru32 = nn::Gru<f32>;
pub type Lstm64 = nn::Lstm<f64>;
pub type Lstm32 = nn::Lstm<f32>;
pub type BranchClassifier64 = models::BranchClassifier<f64>;
pub type BranchClassifier32 = models::BranchClassifier<f32>;
pub type GenericModelA64 = models::GenericModelA<f64>;
pub type GenericModelA32 = models::GenericModelA<f32>;
pub type GenericModelB64 = models::GenericModelB<f64>;
pub type GenericModelB32 = models::GenericModelB<f32>;
