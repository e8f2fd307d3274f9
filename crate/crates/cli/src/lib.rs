//! Image ingestion, dataset handling and the subcommands of the `scatter`
//! tool.

pub mod commands;
pub mod config_file;
pub mod dataset;
pub mod error;
pub mod ingest;

pub use error::{CliError, Result};
