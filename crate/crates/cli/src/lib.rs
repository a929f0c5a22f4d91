//! Library side of the `cogmac` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod figures;
pub mod output;

pub use error::CliError;
