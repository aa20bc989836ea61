use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix dimension {dim} exceeds eigensolver limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },

    #[error("jacobi eigensolver did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("not enough neighbors: requested {requested}, only {available} eligible rows")]
    NotEnoughNeighbors { requested: usize, available: usize },

    #[error("bad set width {width} for dimension {dim}")]
    BadWidth { width: usize, dim: usize },

    #[error("plan mismatch: model expects dimension {expected}, query has {found}")]
    PlanMismatch { expected: usize, found: usize },

    #[error("dimension error: {0}")]
    DimensionError(String),

    #[error("bad spec: {0}")]
    BadSpec(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("labels are degenerate: need at least one of each class")]
    DegenerateLabels,

    #[error("model file checksum mismatch (stored {stored:#018x}, computed {computed:#018x})")]
    ChecksumMismatch { stored: u64, computed: u64 },

    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u16),

    #[error("model file is truncated")]
    TruncatedFile,

    #[error("not a model file (bad magic)")]
    BadMagic,

    #[error(transparent)]
    Io(#[from] io::Error),
}
