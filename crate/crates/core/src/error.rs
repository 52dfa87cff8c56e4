use std::io;

use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size {n} is too small (minimum {min})")]
    GridTooSmall { n: usize, min: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parameter `{name}` = {value} outside allowed range [{lo}, {hi}]")]
    ParameterOutOfRange {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("parameter `{0}` is not applicable to this sequence")]
    ParameterNotApplicable(String),

    #[error("echo time {te_ms} ms is too short, minimum feasible TE is {min_te_ms} ms")]
    EchoTimeTooShort { te_ms: f64, min_te_ms: f64 },

    #[error("infeasible timing: {0}")]
    Timing(String),

    #[error("invalid timeline: {0}")]
    InvalidTimeline(String),

    #[error("k-space location (line {line}, column {column}) written twice")]
    KSpaceCollision { line: usize, column: usize },

    #[error("invariant violated for `{field}` at voxel ({x}, {y}): {value} ({reason})")]
    MapInvariant {
        field: &'static str,
        x: usize,
        y: usize,
        value: f64,
        reason: &'static str,
    },

    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static [u8] },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("unexpected end of file")]
    UnexpectedEof,

    #[error("corrupt record {index}: {reason}")]
    CorruptRecord { index: usize, reason: String },

    #[error("record {index}: {source}")]
    RecordIo {
        index: usize,
        #[source]
        source: io::Error,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Maps an `UnexpectedEof` I/O error onto the dedicated variant.
    pub(crate) fn from_read(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            Error::UnexpectedEof
        } else {
            Error::Io(e)
        }
    }
}
