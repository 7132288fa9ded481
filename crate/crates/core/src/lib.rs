//! Two-lead ECG arrhythmia classification.
//!
//! The pipeline runs in the order the modules are listed:
//!
//! - [`dataio`]: WFDB (format 212 + MIT annotations) and CSV ingestion.
//! - [`preprocess`]: median baseline removal and rational resampling.
//! - [`qrs`]: Pan-Tompkins R-peak detection and annotation matching.
//! - [`features`]: 300-sample beat segmentation, AR(4) + moment features.
//! - [`classify`]: SVM (SMO), KNN, MLP and Gaussian naive Bayes.
//! - [`eval`]: splitting, metrics and the experiment drivers.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The aliases at the
//! crate root fix the scalar to `f64`, which is what the experiment drivers and
//! the model file format use.
// NaN-rejecting checks are written as `!(x > 0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod dataio;
pub mod error;
pub mod eval;
pub mod features;
pub mod matrix;
pub mod num;
pub mod preprocess;
pub mod qrs;

pub use error::{Error, Result};
pub use num::Scalar;

pub use dataio::{BeatAnnotation, BeatClass};

/// Multi-lead record with `f64` samples.
pub type Record = dataio::EcgRecord<f64>;
/// Single lead with `f64` samples.
pub type Signal = dataio::LeadSignal<f64>;
/// Single lead with `f32` samples.
pub type Signal32 = dataio::LeadSignal<f32>;
/// Heartbeat segment with `f64` samples.
pub type Beat = features::Heartbeat<f64>;
/// Feature vector with `f64` values.
pub type Features = features::FeatureVector<f64>;
/// Row-major feature matrix with `f64` values.
pub type FeatureMatrix = matrix::Matrix<f64>;
/// Feature matrix with `f32` values.
pub type FeatureMatrix32 = matrix::Matrix<f32>;
/// Trained classifier with `f64` parameters.
pub type Model = classify::TrainedModel<f64>;
/// Trained classifier with `f32` parameters.
pub type Model32 = classify::TrainedModel<f32>;
