//! Quantile based prediction (QBP) for binary classification from continuous
//! biomarkers, together with classical comparators, ROC/AUC evaluation, a
//! synthetic biomarker generator and cross-validation harnesses.
//!
//! The crate is `no_std` and only needs an allocator. File formats, parallel
//! execution and the command-line tool live in the `qbplab` crate.

#![no_std]

extern crate alloc;

pub mod baselines;
pub mod cv;
pub mod data;
pub mod error;
pub mod method;
pub mod metrics;
pub mod qbp;
pub mod quantiles;
pub mod simgen;

pub use data::{Dataset, FoldAssignment, Standardizer};
pub use error::{Error, Result};
pub use method::{FittedModel, Method, MethodOptions, Params};
pub use qbp::{fit_qbp, FittedQbp, QbpConfig};
