use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown floating-point format `{0}` (expected bf16, fp16, tf32, fp32 or fp64)")]
    UnknownFormat(String),

    #[error("invalid action `{0}`: expected four formats joined by `|`")]
    InvalidAction(String),

    #[error("action `{0}` violates u_f <= u <= u_g <= u_r")]
    NonMonotoneAction(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown weight preset `{0}` (valid presets: W1, W2)")]
    UnknownPreset(String),

    #[error("q-table format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed q-table: {0}")]
    MalformedTable(String),

    #[error("q-table shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed matrix market data in {path}: {reason}")]
    MatrixMarket { path: PathBuf, reason: String },

    #[error("checksum mismatch for {path}: manifest has {expected}, file has {found}")]
    Checksum {
        path: PathBuf,
        expected: String,
        found: String,
    },

    #[error("malformed manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("nothing to report: {0}")]
    NothingToReport(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
