use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("CycleDetected: the edge list contains a directed cycle")]
    CycleDetected,
    #[error("BadIndex: node {node} is outside 1..={m}")]
    BadIndex { node: usize, m: usize },
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("EmptyKeepSet: induced subgraph needs at least one node")]
    EmptyKeepSet,
    #[error("SizeMismatch: graphs have {left} and {right} nodes")]
    SizeMismatch { left: usize, right: usize },
    #[error("TooLarge: {m} nodes exceeds the supported maximum {max}")]
    TooLarge { m: usize, max: usize },
    #[error("TooSmall: {m} nodes is below the supported minimum {min}")]
    TooSmall { m: usize, min: usize },

    #[error("EdgeMismatch: {0}")]
    EdgeMismatch(String),
    #[error("parameter point has kind {found}, expected {expected}")]
    KindMismatch { expected: String, found: String },
    #[error("invalid parameter point: {0}")]
    InvalidParam(String),
    #[error("sampling bound must be at least 2, got {0}")]
    InvalidBound(u64),
    #[error("SingularSubmatrix: parent covariance of node {node} is singular")]
    SingularSubmatrix { node: usize },

    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("NotSpearman: matrix is not a Spearman matrix")]
    NotSpearman,
    #[error("NotCoSpearman: matrix is not a coSpearman matrix")]
    NotCoSpearman,

    #[error("MissingCache: no verdicts available for {m}-node graphs")]
    MissingCache { m: usize },
    #[error("ConsistencyError on graph {key}: {message}")]
    Consistency { key: String, message: String },
    #[error("certificate replay failed: {0}")]
    Replay(String),
    #[error("serialization error: {0}")]
    Serialization(String),
}
