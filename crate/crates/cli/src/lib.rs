//! Experiment runner for mtrace studies: JSON configuration, study
//! execution and report writing.

pub mod catalog;
pub mod config;
pub mod error;
pub mod run;
pub mod studies;

pub use config::{Experiment, Study};
pub use error::CliError;
pub use run::{run, RunSummary};
