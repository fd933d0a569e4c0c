//! Configuration, experiment runners and file output for the `harvest`
//! command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;

pub use commands::{run, validate, Outcome, Summary};
pub use config::RunConfig;
pub use error::CliError;
