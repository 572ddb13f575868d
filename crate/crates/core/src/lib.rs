//! Spectral toolkit for canonical one-dimensional Dirac operators.
//!
//! The operator is the first-order 2x2 system
//!
//! ```text
//! B y' + Omega(x) y = lambda y,   B = [[0, 1], [-1, 0]],
//! Omega(x) = [[p(x), q(x)], [q(x), -p(x)]],
//! ```
//!
//! with separated boundary conditions parametrized by angles `alpha` (at 0)
//! and `beta` (at the right end). The crate computes discrete spectra and
//! norming constants by shooting, evaluates eigenvalue gradients with
//! respect to the boundary angles and the two potential channels, applies
//! rank-one isospectral deformations on the finite interval, and performs
//! spectral surgery (add / remove / rescale a level) on a truncated
//! half-line window.

pub mod gradient;
pub mod isospectral;
pub mod model;
pub mod ode;
pub mod spectrum;
pub mod surgery;

mod xform;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position {x} outside the potential domain [0, {domain_end}]")]
    Domain { x: f64, domain_end: f64 },

    #[error("invalid {what}: {why}")]
    Invalid { what: &'static str, why: String },

    #[error("matrix field is not canonical at node {index}: {why}")]
    Structure { index: usize, why: String },

    #[error("grid mismatch: {0}")]
    Shape(String),

    #[error("integration overflowed near x = {x} (lambda = {lambda})")]
    Overflow { x: f64, lambda: f64 },

    #[error("eigenvalue enumeration failed: {why}; roots found: {roots:?}")]
    Enumeration { why: String, roots: Vec<f64> },

    #[error("root refinement did not converge in [{lo}, {hi}]")]
    Root { lo: f64, hi: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient tail data: {0}")]
    Range(String),

    #[error("eigenvalue tracking failed: {0}")]
    Tracking(String),

    #[error("theta fell below the floor at x = {x} (theta = {theta})")]
    Singularity { x: f64, theta: f64 },

    #[error("fit diverged: {0}")]
    Fit(String),

    #[error("surgery step {index} failed: {source}")]
    SurgeryStep {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
