//! Crate-wide error type.

use std::path::PathBuf;

/// Everything that can go wrong across dataset handling, training,
/// evaluation and model persistence.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A data file line failed to parse.
    #[error("{}:{line}: parse error: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// An interaction value fell outside the declared rating range.
    #[error("value {value} outside [{r_min}, {r_max}]")]
    ValueOutOfRange { value: f64, r_min: f64, r_max: f64 },

    /// Duplicate (user, item) pair under `DedupPolicy::Error`.
    #[error("duplicate interaction for user {user:?} item {item:?}")]
    DuplicatePair { user: String, item: String },

    /// Vector/matrix dimensions disagree.
    #[error("shape mismatch in {what}: expected {expected}, got {got}")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),

    /// Training produced a non-finite quantity.
    #[error("numeric error in {what} (epoch {epoch}, batch {batch})")]
    Numeric {
        what: String,
        epoch: usize,
        batch: usize,
    },

    /// A model file is malformed or of an unexpected mode.
    #[error("model format error in {}: {msg}", path.display())]
    ModelFormat { path: PathBuf, msg: String },

    /// A raw user/item id is absent from the index maps.
    #[error("unknown {kind} id {id:?}")]
    UnknownId { kind: &'static str, id: String },

    /// An index is outside [0, M) or [0, N).
    #[error("{kind} index {index} out of range (size {size})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        size: usize,
    },

    /// An operation received an empty input it cannot handle.
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
