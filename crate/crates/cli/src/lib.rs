//! Command-line front end: argument parsing, file formats and run manifests.

pub mod commands;
pub mod error;
pub mod io;

pub use commands::{run, Cli};
pub use error::{CliError, CliResult};
