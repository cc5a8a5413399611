//! Harness around `gsit-core`: run configuration, synthetic data, training,
//! the information-disorder demonstrator, weight statistics, checkpoints,
//! reports and the verification suites behind the `gsit` binary.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod disorder;
mod error;
pub mod report;
pub mod stats;
pub mod suites;
pub mod train;

pub use error::{LabError, Result};
