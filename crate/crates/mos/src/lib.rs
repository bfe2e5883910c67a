//! Blinded mean-opinion-score study: survey bundles with a private
//! unblinding key, an HTTP rating service with an append-only score log,
//! and offline aggregation per method and question.

pub mod bundle;
pub mod export;
pub mod server;
pub mod store;

use std::path::PathBuf;

pub use bundle::{prepare_survey, Bundle, BundleCase, Key, SurveyInputs, SurveyOptions};
pub use export::{export_mos, MosExport, MosRow, RaterDiagnostic};
pub use server::{router, serve, AppState};
pub use store::{ScoreLog, ScoreRecord, ScoreSubmission};

/// The three questions, asked for every candidate.
pub const QUESTIONS: [&str; 3] = [
    "Are there any artefacts/noise in the image?",
    "Can you see an improvement in contrast with respect to the input?",
    "Can you see an improvement in the details with respect to the input?",
];

pub const SCALE: [&str; 5] = ["strongly disagree", "disagree", "neutral", "agree", "strongly agree"];

pub const CANDIDATES_PER_CASE: usize = 4;

#[derive(Debug, thiserror::Error)]
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
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NotFound(String),
    #[error(transparent)]
    Core(#[from] pcle_core::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
