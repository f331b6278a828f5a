use thiserror::Error;

/// Errors raised anywhere in the transmit/receive/measurement chain.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bit count {got} does not match block budget {expected}")]
    BitCount { expected: usize, got: usize },
    #[error("block length {0} must be even")]
    OddBlockLength(usize),
    #[error("block length {0} too small for cyclic-prefix continuity (need >= 4)")]
    BlockTooShort(usize),
    #[error("transition pair ({0}, {1}) is not in the mapping table")]
    UnknownPair(i8, i8),
    #[error("terminal pair inconsistent with prior phase (quarter turn {0})")]
    TerminalMismatch(u8),
    #[error("invalid mapping table: {0}")]
    InvalidTable(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("too few samples: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("tap delay {delay} not shorter than frame length {len}")]
    DelayTooLong { delay: usize, len: usize },
    #[error("lowest drive level already violates {0}")]
    LowestDriveFails(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
