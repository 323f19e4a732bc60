use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Caller-supplied values violate a precondition.
    #[error("invalid input: {0}")]
    Input(String),

    /// A model or run configuration cannot be realized.
    #[error("configuration error: {0}")]
    Config(String),

    /// Two internal artifacts that must agree (cache, indices) do not.
    #[error("internal consistency error: {0}")]
    Consistency(String),

    #[error("training diverged: non-finite loss at epoch {epoch}, batch {batch}")]
    Divergence { epoch: usize, batch: usize },

    #[error(transparent)]
    Pgm(#[from] PgmError),

    #[error(transparent)]
    WeightFile(#[from] WeightFileError),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while parsing a binary 16-bit PGM stream.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("bad magic at byte 0: expected \"P5\"")]
    BadMagic,
    #[error("malformed header at byte {offset}: {reason}")]
    Header { offset: usize, reason: String },
    #[error("unsupported maxval {maxval} at byte {offset}: only 65535 is accepted")]
    UnsupportedMaxval { offset: usize, maxval: u32 },
    #[error("truncated pixel data at byte {offset}: expected {expected} bytes, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
}

/// Failures while reading a serialized weight file.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum WeightFileError {
    #[error("corrupt weight file header: {0}")]
    CorruptHeader(String),
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u16),
    #[error("weight file config mismatch: {0}")]
    ConfigMismatch(String),
    #[error("truncated weight file: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}
