use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used to pick process exit codes and FFI status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic {found:?}, expected \"HXC1\"")]
    BadMagic { found: [u8; 4] },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("unknown dtype code {0}")]
    UnknownDtype(u8),

    #[error("cube dimensions must be nonzero, got {height}x{width}x{bands}")]
    ZeroDimension {
        height: usize,
        width: usize,
        bands: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("kernel of size {size} does not fit in a {height}x{width} image")]
    KernelTooLarge {
        size: usize,
        height: usize,
        width: usize,
    },

    #[error("image {height}x{width} is not divisible by ratio {ratio}")]
    NotDivisible {
        height: usize,
        width: usize,
        ratio: usize,
    },

    #[error("invalid kernel size {0}")]
    InvalidKernelSize(usize),

    #[error("kernel shift ({0}, {1}) leaves the {2}x{2} support")]
    ShiftOutOfSupport(i64, i64, usize),

    #[error("non-finite sample in {0}")]
    NonFiniteSample(&'static str),

    #[error("CSV parse error at line {line}: {message}")]
    CsvParse { line: usize, message: String },

    #[error("ragged CSV: line {line} has {found} fields, expected {expected}")]
    RaggedRows {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("negative spectral response entry at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize },

    #[error("spectral response row {0} is all zeros")]
    ZeroRow(usize),

    #[error("band {0} of the reference cube has zero mean")]
    ZeroBandMean(usize),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::BadMagic { .. }
            | Error::Truncated { .. }
            | Error::UnknownDtype(_) => ErrorKind::Io,
            Error::Numerical(_) => ErrorKind::Numerical,
            _ => ErrorKind::Validation,
        }
    }
}
