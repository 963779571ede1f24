//! Evaluation toolkit for single-object tracking in first-person video:
//! dataset formats, overlap metrics, evaluation protocols, baseline
//! trackers, an external-tracker runner and report generation.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod protocols;
pub mod report;
pub mod runner;

pub use error::{Error, Result};
