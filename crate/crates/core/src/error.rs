//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("face {face} references vertex {vertex} but only {vertex_count} vertices exist")]
    VertexIndex {
        face: usize,
        vertex: usize,
        vertex_count: usize,
    },

    #[error("unsupported element at line {line}: {msg}")]
    UnsupportedElement { line: usize, msg: String },

    #[error("degenerate face {face}: {msg}")]
    DegenerateFace { face: usize, msg: String },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size limit exceeded: {0}")]
    SizeLimit(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("vertex {0} has zero degree")]
    ZeroDegree(usize),

    #[error("pid sets differ: missing {missing:?}, unexpected {unexpected:?}")]
    PidMismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("R^2 is undefined for a constant truth vector")]
    RSquaredUndefined,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },

    #[error("field generation error: {0}")]
    FieldGeneration(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
