use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("identifier width {0} is not in 1..=256")]
    UnsupportedWidth(u32),
    #[error("value does not fit in {bits} bits")]
    OutOfRange { bits: u32 },
    #[error("mismatched identifier widths: {left} vs {right} bits")]
    WidthMismatch { left: u32, right: u32 },
    #[error("an identifier has no bucket relative to itself")]
    SameId,
    #[error("bucket index {index} out of range for {bits}-bit ids")]
    BucketOutOfRange { index: u32, bits: u32 },
    #[error("malformed hex identifier {0:?}")]
    BadHex(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> ParseError {
        ParseError { line, message: message.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("parallel edge {0} -> {1}")]
    ParallelEdge(usize, usize),
    #[error("source and sink are the same vertex ({0})")]
    SameEndpoints(usize),
    #[error("vertices {0} and {1} are adjacent")]
    Adjacent(usize, usize),
    #[error("graph needs at least {needed} vertices, has {actual}")]
    TooSmall { needed: usize, actual: usize },
    #[error("graph has no edges")]
    NoEdges,
    #[error("reduction fraction {0} is not in (0, 1]")]
    BadFraction(f64),
    #[error("brute force limited to {limit} vertices, graph has {actual}")]
    TooLarge { limit: usize, actual: usize },
    #[error("source must be an outgoing vertex and sink an incoming vertex")]
    WrongSide,
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("need at least {needed} samples at or after the churn start, found {found}")]
    NotEnoughSamples { needed: usize, found: usize },
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("two scenarios share the tag {0}")]
    DuplicateTag(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}
