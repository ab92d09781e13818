use std::fmt;

use thiserror::Error;

use crate::network::Violation;

/// Errors surfaced by the library and mapped onto CLI exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input shape error: expected {expected} values, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("invalid network: {}", ViolationList(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("invalid lumping: {0}")]
    InvalidLumping(String),

    #[error("invalid chain: {0}")]
    InvalidChain(String),

    #[error("invalid elimination: {0}")]
    InvalidElimination(String),

    #[error("invalid plant spec: {0}")]
    InvalidSpec(String),

    #[error("malformed document at `{path}`: {message}")]
    Malformed { path: String, message: String },

    #[error("non-finite number at `{path}`")]
    NonFinite { path: String },

    #[error("shape-chain violation: {0}")]
    ShapeChain(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant failure: {0}")]
    Internal(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

struct ViolationList<'a>(&'a [Violation]);

impl fmt::Display for ViolationList<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}
