//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("degenerate state: all slits closed")]
    DegenerateState,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature did not converge: relative change {achieved:.3e} exceeds {required:.3e}; raise samples_per_lobe")]
    QuadratureNotConverged { achieved: f64, required: f64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config error: {0}")]
    ConfigGeneral(String),

    #[error("root not bracketed: target {target} outside achievable range [{lo}, {hi}]")]
    RootNotBracketed { target: f64, lo: f64, hi: f64 },

    #[error("wire protocol error: {0}")]
    Wire(String),

    #[error("peer mismatch in HELLO: {0}")]
    HelloMismatch(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
