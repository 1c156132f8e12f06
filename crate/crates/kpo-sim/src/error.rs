//! Crate-wide error type.
//!
//! Variants are grouped by how the CLI maps them to exit codes: configuration and
//! validation problems (exit 1), solver failures (exit 2). Partial sweep failure is
//! reported by the harness itself, not through this type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix or state dimension is unusable (too small, mismatched, out of range).
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    /// A Fock-space cutoff is too small for the requested amplitude.
    #[error(
        "truncation insufficient for alpha = {alpha}: n_max = {n_max}, need at least {suggested}"
    )]
    Truncation {
        alpha: f64,
        n_max: usize,
        suggested: usize,
    },

    /// A physical parameter is outside its admissible range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Config file could not be read, parsed, or validated.
    #[error("config error: {0}")]
    Config(String),

    /// An iterative routine exhausted its iteration budget. Carries the best iterate so
    /// callers can inspect how close it got.
    #[error("no convergence after {iterations} iterations (best objective {best_objective})")]
    Convergence {
        iterations: usize,
        best_objective: f64,
        best_point: Vec<f64>,
    },

    /// Adaptive step size collapsed; the problem looks stiff at the reported time.
    #[error("step size underflow at t = {t} (h = {h}); problem appears stiff: {detail}")]
    Stiffness { t: f64, h: f64, detail: String },

    /// A monitored state invariant (trace, Hermiticity, positivity, norm) broke far
    /// beyond its tolerance.
    #[error("state integrity violated at t = {t}: {detail}")]
    Integrity { t: f64, detail: String },

    /// An internal cross-check failed (e.g. a triggered quantum jump with zero total
    /// jump rate).
    #[error("numerical consistency failure: {0}")]
    NumericalConsistency(String),

    /// Result file could not be parsed back.
    #[error("result parse error: {0}")]
    ResultParse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
