//! Fairness auditing and fair learning.
//!
//! The crate covers four related jobs:
//!
//! * group-fairness metrics for binary classifiers ([`metrics`], built on
//!   [`confusion`]), plus certification of which fairness criteria can hold
//!   together on a joint distribution ([`compatibility`]);
//! * one-dimensional optimal transport: Wasserstein-2 distances, barycenters,
//!   total/random data repair and price-of-fairness estimators ([`transport`]);
//! * the closed-form optimal equality-of-odds linear predictor under a
//!   Gaussian linear model, with a Monte Carlo excess-risk harness
//!   ([`gaussian_eo`]);
//! * the optimal equality-of-odds classifier obtained by recalibrating the
//!   Bayes rule ([`eo_classifier`]).
//!
//! The `fairprice` binary exposes all of it on CSV/JSON files, see [`cli`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod compatibility;
pub mod confusion;
pub mod covariance;
pub mod dataset;
pub mod eo_classifier;
pub mod error;
pub mod gaussian_eo;
pub mod measure;
pub mod metrics;
pub mod report;
pub mod transport;

pub use confusion::{confusion_by_group, GroupConfusion, Rate};
pub use covariance::CovarianceModel;
pub use dataset::{load_dataset, Dataset, Schema};
pub use error::{Error, Result};
pub use measure::EmpiricalMeasure1D;

/// Version of every JSON document written by this crate.
pub const SCHEMA_VERSION: u32 = 1;
