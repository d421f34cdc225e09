use thiserror::Error;

/// Errors produced by platform validation, the simulated machine, and the
/// factorization kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("platform has no levels")]
    EmptyPlatform,

    #[error("invalid level {level}: {reason}")]
    InvalidLevel { level: usize, reason: String },

    #[error("buffer constraint violated at level {level}: need {lower} <= B = {buffer} <= {upper}")]
    BufferConstraintViolation {
        level: usize,
        buffer: f64,
        lower: f64,
        upper: f64,
    },

    #[error("network kind {kind} at level {level} is inconsistent with buffer size {buffer}: {reason}")]
    NetworkKindMismatch {
        level: usize,
        kind: String,
        buffer: f64,
        reason: String,
    },

    #[error("level {level} out of range 1..={depth}")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("memory overflow: {words} words per processing element exceed M_1 = {capacity}")]
    MemoryOverflow { words: f64, capacity: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("zero pivot at elimination step {step}")]
    SingularPivot { step: usize },

    #[error("singular panel: zero pivot at global column {column}")]
    SingularPanel { column: usize },

    #[error("shape error: {0}")]
    ShapeError(String),

    #[error("platform has {levels} levels but the schedule provides {blocks} block sizes")]
    PlatformTooDeep { levels: usize, blocks: usize },

    #[error("grid at level {level} is {p_rows}x{p_cols}, Cannon needs a square grid")]
    NonSquareGrid {
        level: usize,
        p_rows: usize,
        p_cols: usize,
    },

    #[error("generator {name} does not support order {n}")]
    UnsupportedOrder { name: String, n: usize },

    #[error("unknown matrix generator: {0}")]
    UnknownGenerator(String),

    #[error("no open region to close")]
    NoOpenRegion,

    #[error("ledger has {open} unclosed regions")]
    UnbalancedRegions { open: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
