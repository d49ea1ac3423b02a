use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the evaluators, integrators and persistence layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("pole at s = {0}")]
    Pole(String),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("convergence error: {0}")]
    Convergence(String),

    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("corrupt file {path}: {detail}")]
    Corruption { path: PathBuf, detail: String },

    #[error("incompatible file {path}: {detail}")]
    Incompatible { path: PathBuf, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
