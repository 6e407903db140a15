//! Experiment orchestration for the `jkoflow` library: configuration,
//! pipelines, convergence studies, plot data and the acceptance criteria.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accept;
pub mod config;
pub mod convergence;
pub mod pipeline;
pub mod plotdata;

pub use config::ExperimentConfig;
