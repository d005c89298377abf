//! Config loading, artifact emission and the command implementations behind
//! the `tmreadout` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, Outcome, RunContext};
pub use config::{EmitFormat, LoadedConfig, RunConfig};
pub use error::{CliError, Result};
