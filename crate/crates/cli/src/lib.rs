//! Command-line driver and HTTP service for the footlab pipeline.

pub mod api;
pub mod commands;

pub use commands::{error_line, run, Cli};
