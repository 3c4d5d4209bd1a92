//! Library side of the `nextword` command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;

pub use cli::run;
pub use config::RunConfig;
pub use error::{CliError, CliResult};
