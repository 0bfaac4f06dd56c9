use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ppm parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("transform learning failed: {0}")]
    Learning(String),

    #[error("plane {rows}x{cols} is too small for {levels} wavelet levels")]
    TooSmallForLevels {
        rows: usize,
        cols: usize,
        levels: usize,
    },

    #[error("selected atom is linearly dependent on the current selection")]
    DegenerateSelection,

    #[error("array {rows}x{cols} is not divisible into {side}x{side} blocks")]
    IndivisibleDims {
        rows: usize,
        cols: usize,
        side: usize,
    },

    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },

    #[error("invalid quantiser parameters: {0}")]
    InvalidQuant(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("correlation undefined: channel {0} is constant")]
    UndefinedCorrelation(usize),

    #[error("count must be at least 1")]
    ZeroCount,

    #[error("empty prototype atom")]
    EmptyPrototype,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bitstream format error: {0}")]
    Format(String),

    #[error("target PSNR {target:.2} dB unreachable, best achieved {achieved:.2} dB")]
    TargetUnreachable { target: f64, achieved: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
