use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A state component left its admissible domain (e.g. a nonpositive temperature).
    #[error("domain error at index {index}: {what} = {value}")]
    Domain {
        index: usize,
        what: &'static str,
        value: f64,
    },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// The integrator could not continue; `last_time` is the time of the last accepted step.
    #[error("integration failed at t = {last_time}: {reason}")]
    Integration {
        reason: String,
        last_time: f64,
        last_state: Vec<f64>,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error(
        "Newton iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last_iterate: Vec<f64>,
    },

    #[error("heading undefined for oscillator {0}: zero velocity")]
    DegenerateHeading(usize),

    #[error("decay fit failed: {reason}")]
    Fit { reason: String, floor_reached: bool },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error{}: {message}", location_suffix(.line, .field))]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },

    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location_suffix(line: &Option<usize>, field: &Option<String>) -> String {
    match (line, field) {
        (Some(l), Some(f)) => format!(" (line {l}, field `{f}`)"),
        (Some(l), None) => format!(" (line {l})"),
        (None, Some(f)) => format!(" (field `{f}`)"),
        (None, None) => String::new(),
    }
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            line: None,
            field: Some(field.into()),
            message: message.into(),
        }
    }
}
