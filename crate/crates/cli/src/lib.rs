//! Command-line front end: run configuration, versioned CSV outputs, SVG
//! plots and the `airpid` subcommands.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod error;
pub mod map;
pub mod plot;

pub use commands::{run, Cli};
pub use config::RunConfig;
pub use error::AppError;
