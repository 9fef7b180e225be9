//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operands fed to an array op do not have compatible shapes.
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// A text input could not be parsed; `line` is 1-based.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Input data violates a documented precondition.
    #[error("data error: {0}")]
    Data(String),

    /// A configuration file or key is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// A parameter became NaN/Inf during optimization.
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// Malformed binary container (dataset or checkpoint file).
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
