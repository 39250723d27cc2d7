//! Closed-loop dynamics of classifiers retrained on model-annotated and
//! human-annotated data while strategic agents best-respond to every
//! deployed model.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is pure
//! computation over explicit, seeded random streams; file formats, the
//! parallel trial runner and the command-line interface live in the
//! `stratloop` crate.
//!
//! Module map:
//! - [`population`]: agent populations, systematic annotation bias, the
//!   monotone-likelihood check.
//! - [`response`]: quadratic-cost best response plus a grid-search oracle.
//! - [`learner`]: linear threshold models, SGD logistic regression, the
//!   ground-truth scorer.
//! - [`retrain`]: the retraining loop for a single group.
//! - [`multigroup`]: lock-stepped groups with fairness policies.
//! - [`analytics`]: training-set recursions, improvement integral, trace
//!   aggregation.
//! - [`fairness`]: demographic-parity threshold tuning, early stopping,
//!   the intervention flip check.
//! - [`fit`]: Beta, KDE and logistic fits used to build populations from data.
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod analytics;
mod error;
pub mod fairness;
pub mod fit;
pub mod learner;
pub mod linalg;
pub mod math;
pub mod multigroup;
pub mod population;
pub mod response;
pub mod retrain;
pub mod rng;

pub use error::{Error, Result};
pub use learner::{LinearModel, TrainSettings};
pub use population::{Distribution1D, GroupSpec, LabelFn, PopulationSpec};
pub use response::CostModel;
pub use retrain::{RetrainConfig, RoundRecord, TrainingSet};

/// Current version of the serialized population and config documents.
pub const SPEC_VERSION: u32 = 1;
