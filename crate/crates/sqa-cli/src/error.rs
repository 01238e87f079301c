//! Harness-level errors.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] sqa_core::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid bench spec: {0}")]
    Spec(String),

    #[error("csv: {0}")]
    Csv(String),

    #[error("missing baseline cell: {0}")]
    MissingBaseline(String),

    #[error("training diverged (loss became non-finite) at step {step}")]
    Diverged { step: usize },
}
