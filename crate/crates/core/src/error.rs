use std::path::PathBuf;

use thiserror::Error;

use crate::df::RegimeCase;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid weight spec `{spec}`: {reason}")]
    InvalidWeight { spec: String, reason: String },

    #[error("weight function leaves [0, 1]: p({x}) = {value}")]
    WeightOutOfRange { x: f64, value: f64 },

    #[error("cannot read weight table {path}: {reason}")]
    WeightTable { path: PathBuf, reason: String },

    #[error("grid mismatch: expected N = {expected}, got N = {actual}")]
    GridMismatch { expected: usize, actual: usize },

    #[error("grid function is malformed: {0}")]
    MalformedGrid(String),

    #[error("malformed CDF: {0}")]
    MalformedCdf(String),

    #[error("operation requires regime {expected}, weight is in regime {actual} (p(0) = {p0}, q(1) = {q1})")]
    Regime {
        expected: &'static str,
        actual: RegimeCase,
        p0: f64,
        q1: f64,
    },

    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
        /// Last iterate, kept so callers can inspect accumulation behaviour.
        last: Box<Vec<f64>>,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
