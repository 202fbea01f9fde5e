//! Simulation toolkit for studying how imbalance corrections (undersampling,
//! oversampling, SMOTE) affect the calibration and discrimination of logistic
//! risk models.
//!
//! The crate is organised around a pipeline: generate data from a known
//! logistic truth ([`datagen`]), optionally rebalance the training set
//! ([`resample`]), fit standard or ridge logistic models ([`glm`]), score them
//! on a large common test set ([`metrics`]), and aggregate over many Monte
//! Carlo runs ([`sim`]). [`report`] holds the CLI-facing plumbing: config
//! parsing, CSV output, the case-study pipeline and SVG plots.

pub mod data;
pub mod datagen;
pub mod error;
pub mod features;
pub mod glm;
pub mod linalg;
pub mod loess;
pub mod metrics;
pub mod num;
pub mod optim;
pub mod report;
pub mod resample;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};
