//! Command-line driver and file formats for `maint-core`: raw log parsing,
//! dataset directories, checkpoint files, run configuration, reports with
//! significance tests, and the commands behind the `maint` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod report;

pub use config::RunConfig;
pub use error::{CliError, ExitCode, Result};
