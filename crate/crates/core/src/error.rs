use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("position radius {radius:.1} m is degenerate (below half the equatorial radius)")]
    DegenerateRadius { radius: f64 },

    #[error("zero-length vector where a direction is required")]
    ZeroVector,

    #[error("non-positive vehicle mass {mass:.3} kg at t = {t:.3} s")]
    NonPositiveMass { mass: f64, t: f64 },

    #[error("phase {phase}: burn needs {needed:.3} kg propellant but only {available:.3} kg remain")]
    PropellantDepleted {
        phase: usize,
        needed: f64,
        available: f64,
    },

    #[error("forward Keplerian arc never descends to the surface (perigee {perigee_alt:.1} m)")]
    NoImpact { perigee_alt: f64 },

    #[error("angular momentum too small for orbital element extraction")]
    RectilinearOrbit,

    #[error("staging problem infeasible: capability {capability:.1} m/s < required {required:.1} m/s")]
    InfeasibleStaging { capability: f64, required: f64 },

    #[error("root bracketing failed in {context}")]
    BracketFailure { context: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("quadratic subproblem failed: {0}")]
    QpFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;
