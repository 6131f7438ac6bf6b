use thiserror::Error;

/// Errors shared by all modules of the crate.
///
/// The CLI maps these onto exit-code classes: [`Error::Format`] and
/// [`Error::Io`] are input problems (exit 3), everything else is a numerical
/// failure (exit 4).
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    InvalidDimensions { rows: usize, cols: usize },

    #[error("entry buffer has length {got}, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("shape mismatch: expected {expected_rows}x{expected_cols}, got {rows}x{cols}")]
    ShapeMismatch {
        expected_rows: usize,
        expected_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("{a_rows}x{a_cols} does not divide the ambient {rows}x{cols}")]
    NotADivisor {
        a_rows: usize,
        a_cols: usize,
        rows: usize,
        cols: usize,
    },

    #[error("result dimensions overflow: {rows} * {cols}")]
    DimensionOverflow { rows: usize, cols: usize },

    #[error("rank {rank} out of range for a {rows}x{cols} matrix")]
    RankOutOfRange { rank: usize, rows: usize, cols: usize },

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("SVD failed to converge")]
    SvdFailed,

    #[error("configuration list is empty")]
    EmptyConfigs,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
