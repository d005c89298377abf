use thiserror::Error;
use tmreadout_core::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// Process exit status: 1 IO, 2 config, 3 numerical, 4 statistics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                CoreError::Domain { .. } | CoreError::Config(_) => 2,
                CoreError::Statistics(_) => 4,
                _ => 3,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
