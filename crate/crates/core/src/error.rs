//! Error types shared by every solver layer.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The pulse ordering does not match the requested technique
    /// (e.g. T = t_sw - t_tw <= 0 for an adiabatic-passage run).
    #[error("invalid pulse sequence: {0}")]
    InvalidSequence(String),

    /// A closed-form expression was evaluated outside its validity range.
    #[error("formula out of validity: {0}")]
    OutOfValidity(String),

    /// Mixing angle requested with both Rabi frequencies exactly zero.
    #[error("mixing angle undefined: both Rabi frequencies are zero")]
    UndefinedAngle,

    /// Level-scheme description is inconsistent (bad indices, conflicting
    /// frame shifts, coupling without a driving field, ...).
    #[error("invalid level scheme: {0}")]
    InvalidScheme(String),

    /// Scenario configuration is missing required entries.
    #[error("configuration incomplete: {0}")]
    IncompleteConfig(String),

    /// The adaptive integrator could not proceed at its step-size floor.
    #[error(
        "integration stalled at t = {t:.6e} (step {h:.3e} under the floor); \
         the problem is stiffer than tol = {tol:.1e} supports, try tol >= {suggested_tol:.1e}"
    )]
    Stiffness { t: f64, h: f64, tol: f64, suggested_tol: f64 },

    /// Fixed-step propagation asked for a step that cannot resolve the
    /// fastest coupling or the grid's kinetic bandwidth.
    #[error("step size too large: {0}")]
    StepSize(String),

    /// No distinguishable peak in a sampled profile.
    #[error("no distinguishable peak: contrast {contrast:.3e} below {min_contrast:.1e}")]
    NoPeak { contrast: f64, min_contrast: f64 },

    /// The Liouvillian null space has dimension > 1.
    #[error("steady state not unique: Liouvillian null space has dimension {0}")]
    NonUniqueSteadyState(usize),

    /// An iterative solver ran out of iterations.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// A solver error that occurred while scanning, annotated with the
    /// transverse position it happened at.
    #[error("at x = {x:.9e} m: {source}")]
    AtPosition {
        x: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the scan position it occurred at.
    pub fn at_position(self, x: f64) -> Self {
        Error::AtPosition { x, source: Box::new(self) }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
