use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {msg}")]
    Config { path: String, msg: String },
    #[error("output error: {0}")]
    Output(String),
    #[error(transparent)]
    Core(#[from] redps_core::Error),
}

impl CliError {
    pub fn config(path: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config { path: path.into(), msg: msg.into() }
    }

    /// 2 for bad input, 3 for numerical failure, 4 for a vacuous requested bound.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Output(_) => 2,
            CliError::Core(redps_core::Error::VacuousBound { .. }) => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Output(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
