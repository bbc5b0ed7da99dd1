//! Command-line driver and HTTP service over `uxprop-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod service;

pub use config::RunConfig;
pub use error::CliError;
