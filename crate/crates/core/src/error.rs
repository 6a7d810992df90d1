use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum EomError {
    /// An argument violated a documented precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// An evaluation point fell outside the function's domain.
    #[error("{what} = {value} is outside [{lo}, {hi}]")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    /// A size or degree guard was exceeded.
    #[error("validation failed: {0}")]
    Validation(String),

    /// A non-finite number showed up where a finite one was required.
    #[error("non-finite value at x = {x}: {context}")]
    Numeric { x: f64, context: String },

    /// A linear system could not be solved.
    #[error("singular matrix: {0}")]
    Singular(String),

    /// Newton's method hit its iteration cap.
    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    /// The reference integrator could not advance.
    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },

    /// The problem description is incomplete or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serialize(String),
}

pub type Result<T> = std::result::Result<T, EomError>;

pub(crate) fn check_unit_interval(what: &'static str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(EomError::Domain {
            what,
            value: x,
            lo: 0.0,
            hi: 1.0,
        })
    }
}
