//! File formats, configuration and commands around `fractoseg-core`.
//!
//! The binary exposes five subcommands (`dataset-build`, `train`, `predict`,
//! `evaluate`, `report`); each is also callable as a function from
//! [`commands`]. Exit codes: 0 success, 2 configuration error, 3 data error,
//! 4 numeric failure.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod image_io;
pub mod manifest;
pub mod via;
pub mod weights_io;

pub use error::{CliError, Result};
