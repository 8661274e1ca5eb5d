use boolkernel::Error as CoreError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const BAD_CONFIG: i32 = 2;
    pub const GUARD: i32 = 3;
    pub const ASSERTION: i32 = 4;
    pub const PARAMETER: i32 = 5;
    pub const GENERATION: i32 = 6;
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("bad configuration: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Core(e) => match e {
                CoreError::GuardExceeded { .. } => exit::GUARD,
                CoreError::AssertionFailure { .. } => exit::ASSERTION,
                CoreError::ParameterViolation(_) => exit::PARAMETER,
                CoreError::GenerationFailed { .. } => exit::GENERATION,
                _ => exit::BAD_CONFIG,
            },
            HarnessError::Config(_) | HarnessError::Json(_) => exit::BAD_CONFIG,
            HarnessError::Io { .. } | HarnessError::Csv(_) => exit::OTHER,
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
