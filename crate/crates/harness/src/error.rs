use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("bad input: {0}")]
    BadInput(String),

    #[error("infeasible configuration: {0}")]
    Infeasible(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] crn_share::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Process exit code: 1 validation failure, 2 infeasible configuration,
    /// 3 bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 1,
            HarnessError::Infeasible(_) => 2,
            HarnessError::BadInput(_) | HarnessError::Core(_) => 3,
            HarnessError::Io(_) | HarnessError::Csv(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
