//! File formats, configuration, parallel execution and the `dynct` command
//! line on top of `dynct-core`.

pub mod commands;
pub mod config;
pub mod error;
pub mod export;
pub mod formats;
pub mod memo;
pub mod parallel;
pub mod selftest;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use parallel::RayonExecutor;
