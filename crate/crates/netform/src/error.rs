use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by the library. Domain errors (bounds, malformed input)
/// map to CLI exit code 1, I/O errors to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("node {node} out of range for {n} nodes")]
    NodeOutOfRange { node: u32, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(u32),
    #[error("edge {0}-{1} already present")]
    DuplicateEdge(u32, u32),
    #[error("edge {0}-{1} not present")]
    MissingEdge(u32, u32),
    #[error("negative traffic {value} for pair {i}->{j}")]
    NegativeTraffic { i: u32, j: u32, value: f64 },
    #[error("pi must be positive (got {0}); use GameSetting::unchecked for exploratory settings")]
    NonPositivePi(f64),
    #[error("beta {beta} is below the connection-dominance bound {min}; use Beta::Unchecked to override")]
    BetaTooSmall { beta: f64, min: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("illegal deviation: {0}")]
    IllegalDeviation(String),
    #[error("invalid contracting rule: {0}")]
    InvalidRule(String),
    #[error("degree {degree} exceeds the brute-force bound {bound}")]
    DegreeBound { degree: usize, bound: usize },
    #[error("instance size {n} exceeds the enumeration bound {bound}")]
    SizeBound { n: usize, bound: usize },
    #[error("malformed instance: {0}")]
    MalformedInstance(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}
