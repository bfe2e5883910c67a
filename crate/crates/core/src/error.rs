use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("dimension mismatch: {0}")]
    Dimensions(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("zero variance over {0} in-FoV pixels")]
    ZeroVariance(usize),
    #[error("fibre {0} has an empty sampling region")]
    EmptyCell(usize),
    #[error("layout error: {0}")]
    Layout(String),
    #[error("degenerate image: {0}")]
    Degenerate(String),
    #[error("id mismatch: {0}")]
    IdMismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
