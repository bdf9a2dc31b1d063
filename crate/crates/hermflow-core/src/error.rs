//! Error types shared by the whole crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by fiber construction, tangent algebra and the geodesic
/// integrator.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a structural precondition (symmetry, skewness,
    /// tracelessness, dimension, finiteness, mismatched anchors, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Input is too close to singular or indefinite to operate on.
    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    /// A `(g, omega)` pair failed validation; names the failed invariant.
    #[error("compatibility violation ({invariant}): residual {residual:.3e}")]
    CompatibilityViolation { invariant: &'static str, residual: f64 },

    /// Seeded generation could not produce a usable sample.
    #[error("generation failure: {0}")]
    GenerationFailure(String),

    /// A linear solve or factorization broke down unexpectedly.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A trajectory left the constraint surface beyond the breach tolerance.
    #[error("numerical drift at t = {time}: {what} residual {residual:.3e}")]
    Drift { time: f64, what: &'static str, residual: f64 },

    /// Evaluation outside the domain of a closed-form curve.
    #[error("domain error: {0}")]
    Domain(String),

    /// Field-level aggregation over trajectories with differing time grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// One or more per-point operations failed inside a field map; each
    /// failure keeps its point id.
    #[error("{} field point(s) failed: {}", failures.len(), format_failures(failures))]
    FieldPoints { failures: Vec<(u64, Error)> },
}

fn format_failures(failures: &[(u64, Error)]) -> String {
    failures
        .iter()
        .map(|(id, err)| format!("[{id}] {err}"))
        .collect::<Vec<_>>()
        .join("; ")
}
