use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {field}: {message}")]
    Config { field: String, message: String },
    #[error("numerical failure: {0}")]
    Numerical(#[from] simovar_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        ExperimentError::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for config errors, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config { .. } => 2,
            ExperimentError::Numerical(_) => 3,
            ExperimentError::Io(_) | ExperimentError::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, ExperimentError>;
