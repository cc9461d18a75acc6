//! Benchmark driver: loss comparison tables, loss-curve and scatter data, and
//! cross-dataset summaries.

pub mod cli;
pub mod commands;
pub mod error;
pub mod report;

pub use cli::Cli;
pub use error::CliError;
