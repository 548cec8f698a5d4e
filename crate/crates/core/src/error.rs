//! Crate-wide error type.
//!
//! Numeric payloads are stored as `f64` regardless of the working scalar so
//! that errors stay a single non-generic type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FkError {
    /// State norm exceeded the divergence bound during integration.
    /// Carries the last valid time and state.
    #[error("trajectory diverged at t = {t:.6e} (|x| = {norm:.3e})")]
    Divergence { t: f64, state: Vec<f64>, norm: f64 },

    /// Adaptive step size shrank below the representable floor; the problem
    /// is too stiff for the explicit integrator.
    #[error("step size underflow at t = {t:.6e}; system too stiff")]
    Stiffness { t: f64 },

    /// Integration exceeded its step budget.
    #[error("integration exceeded {max_steps} steps at t = {t:.6e}")]
    MaxSteps { t: f64, max_steps: usize },

    /// Newton iteration did not reach tolerance. Carries the last iterate.
    #[error("no fixed point found: Newton stalled after {iters} iterations (residual {residual:.3e})")]
    NoFixedPoint {
        iters: usize,
        residual: f64,
        last: Vec<f64>,
    },

    /// Jacobian was numerically singular, usually because the iterate sits
    /// near a bifurcation.
    #[error("singular Jacobian near iterate; likely close to a bifurcation")]
    NearBifurcation { at: Vec<f64> },

    /// Eigenvalue routines cover n <= 4 only.
    #[error("unsupported dimension {n}: eigenvalues implemented for n <= 4")]
    UnsupportedDimension { n: usize },

    /// A finite-difference stencil evaluation failed at a perturbed point.
    #[error("map evaluation failed at stencil point {point:?}: {source}")]
    Stencil {
        point: Vec<f64>,
        #[source]
        source: Box<FkError>,
    },

    /// Invalid argument (negative tau, empty window, dimension mismatch...).
    #[error("invalid input: {0}")]
    Invalid(String),

    /// System spec file could not be parsed.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    /// Continuation could not produce any point beyond the seed.
    #[error("continuation failed: {0}")]
    Continuation(String),
}

pub type Result<V> = std::result::Result<V, FkError>;

impl FkError {
    /// Wraps an error with the stencil point that triggered it.
    pub(crate) fn at_stencil(self, point: Vec<f64>) -> FkError {
        FkError::Stencil {
            point,
            source: Box::new(self),
        }
    }
}
