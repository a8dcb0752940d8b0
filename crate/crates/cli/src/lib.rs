//! The `bslab` experiment harness: configuration, experiment drivers,
//! reports and the on-disk pairing cache.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod config;
pub mod error;
pub mod experiments;
pub mod report;
pub mod svg;

pub use config::ExperimentConfig;
pub use error::{HarnessError, Result};
pub use experiments::{run_experiment, Context, Experiment};
pub use report::{Metric, Outcome};
