//! Launch vehicle conceptual design library: stage sizing and ascent
//! trajectory shaping in a single constrained nonlinear program, with the
//! traditional staging/trajectory iteration available as a baseline.
//!
//! The main entry points are:
//!
//! - [`staging::optimal_staging`] — closed-form/root-found optimal stage
//!   sizing for a required velocity increment,
//! - [`dynamics::simulate`] — 3-DOF point-mass flight simulation over a
//!   phase schedule,
//! - [`optimizer::solve_simultaneous`] — combined mass/attitude optimization
//!   under insertion, gravity-turn, dynamic-pressure and impact-point
//!   constraints,
//! - [`baseline::solve_sequential`] — the iterative staging/trajectory
//!   comparison method.

pub mod baseline;
pub mod control;
pub mod dynamics;
pub mod earth;
pub mod error;
pub mod mission;
pub mod optimizer;
pub mod outputs;
pub mod phases;
pub mod staging;
pub mod vehicle;

pub use error::{Error, Result};

/// 3-component double vector used throughout (ECI/ECEF positions, velocities).
pub type Vec3 = nalgebra::Vector3<f64>;
