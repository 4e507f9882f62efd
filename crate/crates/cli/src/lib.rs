//! File formats, experiment orchestration and the `denoise` command line
//! for the `denoise-core` anomaly detector.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod tu;

pub use error::CliError;
