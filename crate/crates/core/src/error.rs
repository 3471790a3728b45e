use thiserror::Error;

/// Errors raised by the library operations.
///
/// Variants carry enough context (offending index, value or pair) to be
/// surfaced verbatim in audit certificates.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("point ({x}, {y}) is trivial (y = 0)")]
    TrivialPoint { x: String, y: String },

    #[error("point ({x}, {y}) is not on the curve")]
    NotOnCurve { x: String, y: String },

    #[error("structure error: {0}")]
    Structure(String),

    #[error("validation failed: product {product} is not {expected}")]
    Validation { product: String, expected: String },

    #[error("term {index} of the progression is zero")]
    DegenerateTerm { index: usize },

    #[error("index {index} out of range for {len} terms")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("data error: {0}")]
    Data(String),

    #[error("audit error: identity `{identity}` fails: {detail}")]
    Audit { identity: String, detail: String },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("input error at line {line}, field `{field}`: {message}")]
    Input {
        line: usize,
        field: String,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
