use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by model construction, sampling and I/O.
#[derive(Debug, Error)]
pub enum TabpError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed distribution spec: offending token `{token}` ({reason})")]
    DistSpec { token: String, reason: String },

    #[error("invalid tail table: {0}")]
    InvalidTable(String),

    #[error("full-line window not simulable: a.s. entire line covered (grain mean is infinite)")]
    FullLineInfiniteMean,

    #[error("germs are not sorted by position (index {index})")]
    UnsortedGerms { index: usize },

    #[error("point {t} lies outside the window [0, {window}]")]
    OutsideWindow { t: f64, window: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TabpError>;

pub(crate) fn invalid(msg: impl Into<String>) -> TabpError {
    TabpError::InvalidParameter(msg.into())
}
