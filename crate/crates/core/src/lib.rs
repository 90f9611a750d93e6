//! Label-free performance estimation for deployed binary classifiers under
//! covariate shift.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod cli;
pub mod data;
pub mod density_ratio;
pub mod error;
pub mod estimators;
pub mod evaluation;
pub mod learners;
pub mod metrics;
pub mod seed;

pub use error::{Error, Result};
pub mod synthetic;
