use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unknown suite `{0}` (expected one of: {1})")]
    UnknownSuite(String, String),
    #[error("solver error: {0}")]
    Solver(#[from] evoinc_core::Error),
    #[error("solution escaped |u| > threshold at t = {time}")]
    BlowUp { time: f64 },
    #[error("suite `{0}` had failing checks")]
    SuiteFailed(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Process exit status: 64 for bad input, 2 for a reported blow-up, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::UnknownSuite(..) => 64,
            CliError::BlowUp { .. } => 2,
            CliError::Solver(evoinc_core::Error::BlowUp { .. }) => 2,
            _ => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(std::io::Error::other(e))
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
