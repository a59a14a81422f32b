//! Soft-sensor development toolkit.
//!
//! The pipeline cleans laboratory and plant-sensor time series, aligns them,
//! derives SARIMA error budgets, trains a multilayer-perceptron soft sensor
//! and explains it with Shapley values:
//!
//! ```text
//! ingest -> lab_prep -> sensor_prep -> align -> sarima -> mlp -> evalreport
//!                                                       \-> shap
//! ```
//!
//! Data-parallel loops honour an [`exec::Execution`] mode; with the
//! `parallel` feature disabled everything runs sequentially with identical
//! results.

pub mod align;
mod binio;
pub mod error;
pub mod evalreport;
pub mod exec;
pub mod ingest;
pub mod lab_prep;
pub mod mlp;
pub mod sarima;
pub mod sensor_prep;
pub mod shap;
pub mod stats;

pub use error::{Error, Result};
