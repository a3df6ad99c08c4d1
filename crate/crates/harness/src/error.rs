use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("engine failure: {0}")]
    Engine(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit status for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Engine(_) => 3,
            HarnessError::Io(_) => 1,
        }
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

pub type HarnessResult<T> = std::result::Result<T, HarnessError>;

pub(crate) fn engine(e: abpf_core::Error) -> HarnessError {
    HarnessError::Engine(e.to_string())
}
