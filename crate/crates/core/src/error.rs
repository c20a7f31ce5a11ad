use std::path::PathBuf;

use thiserror::Error;

use crate::facs::Region;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cell ({row}, {col}) is outside a {dim}x{dim} lattice")]
    InvalidCell { row: usize, col: usize, dim: usize },

    #[error("lattice dimension {0} is outside 1..=6")]
    InvalidDimension(usize),

    #[error("rule number {0} is outside 0..=511")]
    InvalidRule(u32),

    #[error("AU {au} does not belong to region {region}")]
    ForeignAu { region: Region, au: u8 },

    #[error("unknown AU code {code}; valid codes are {valid}")]
    UnknownAu { code: String, valid: String },

    #[error("pattern parse error at byte {offset}: {message}")]
    PatternParse { offset: usize, message: String },

    #[error("expression formula parse error at byte {offset}: {message}")]
    FormulaParse { offset: usize, message: String },

    #[error("image format error: {0}")]
    ImageFormat(String),

    #[error("expected {expected} image, got {actual}")]
    Channels {
        expected: &'static str,
        actual: &'static str,
    },

    #[error("size error: {0}")]
    Size(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("model error: {0}")]
    Model(String),

    #[error("model file error at byte {offset}: {message}")]
    ModelFile { offset: usize, message: String },

    #[error("index integrity error at byte {offset}: {message}")]
    Integrity { offset: usize, message: String },

    #[error("index version {found} is newer than supported version {supported}")]
    FutureVersion { found: u32, supported: u32 },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable code, used by the CLI's `ERROR <code>: ...` lines.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidCell { .. } => "invalid-cell",
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::InvalidRule(_) => "invalid-rule",
            Error::ForeignAu { .. } | Error::UnknownAu { .. } => "unknown-au",
            Error::PatternParse { .. } => "pattern-parse",
            Error::FormulaParse { .. } => "formula-parse",
            Error::ImageFormat(_) => "image-format",
            Error::Channels { .. } => "channels",
            Error::Size(_) => "size",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::Model(_) => "model",
            Error::ModelFile { .. } => "model-file",
            Error::Integrity { .. } => "integrity",
            Error::FutureVersion { .. } => "future-version",
            Error::Manifest(_) => "manifest",
            Error::Config { .. } => "config",
            Error::Evaluation(_) => "evaluation",
            Error::Io { .. } => "io",
        }
    }
}
