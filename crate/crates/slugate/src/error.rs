use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum SlugateError {
    /// A config, catalog, or argument failed validation. The field name is
    /// always included so callers can point at the offending setting.
    #[error("invalid {field}: {message}")]
    Validation { field: String, message: String },

    /// A serialized artifact (dataset line, checkpoint, report) could not be
    /// parsed.
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A required artifact (models, splits) does not exist yet.
    #[error("missing prerequisite artifact: {path}")]
    MissingArtifact { path: PathBuf },

    /// A domain had no training utterances.
    #[error("domain {domain} has no training utterances")]
    EmptyDomain { domain: String },

    /// Decision outputs did not cover the gold set exactly.
    #[error("output ids do not match gold ids: {message}")]
    IdMismatch { message: String },

    /// No grid point satisfies an operating-point target.
    #[error("no threshold satisfies the target; achievable {metric} range is [{min:.4}, {max:.4}]")]
    TargetUnreachable {
        metric: &'static str,
        min: f64,
        max: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SlugateError {
    pub fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Validation {
            field: field.into(),
            message: message.into(),
        }
    }

    /// Process exit code the CLI maps this error onto.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Validation { .. } => 2,
            Self::MissingArtifact { .. } => 3,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, SlugateError>;
