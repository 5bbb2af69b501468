//! Combined stage-sizing/trajectory optimization: minimize lift-off mass
//! over structural masses and discretized attitude nodes, under target-orbit
//! insertion, gravity-turn, dynamic-pressure and impact-point constraints.

mod problem;
mod qp;
mod sqp;

pub use problem::{
    AscentProblem, ConstraintId, DecisionLayout, DecisionVector, EvalOutput, Gradients, MASS_SCALE,
};
pub use sqp::{SolveStatus, SqpOptions};

use crate::control::{AttitudeLaw, LaunchFrame};
use crate::dynamics::{simulate, Trajectory, VelocityLosses};
use crate::earth::Environment;
use crate::error::{Error, Result};
use crate::mission::MissionSpec;
use crate::phases::{Phase, PhaseConfig, PhaseSchedule};
use crate::vehicle::VehicleSpec;
use crate::Vec3;
use nalgebra::DVector;
use std::time::Instant;

/// Options shared by the simultaneous solver and the baseline's inner
/// trajectory solver.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Scaled KKT and equality tolerance.
    pub tol: f64,
    /// Scaled inequality-violation tolerance.
    pub ineq_tol: f64,
    pub max_iter: usize,
    /// Integration steps per phase.
    pub steps_per_phase: usize,
    /// Run an attitude-only feasibility pass before the main solve.
    pub presolve: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-6,
            ineq_tol: 1e-8,
            max_iter: 250,
            steps_per_phase: 50,
            presolve: true,
        }
    }
}

/// Outcome of a design optimization run.
#[derive(Debug, Clone)]
pub struct OptimizationResult {
    pub decision: DecisionVector,
    /// Vehicle rebuilt from the decision.
    pub vehicle: VehicleSpec,
    /// Lift-off mass, kg.
    pub m_liftoff: f64,
    /// Realized velocity increment per stage, m/s.
    pub dv_stages: Vec<f64>,
    pub losses: VelocityLosses,
    /// Scaled equality residuals at the solution.
    pub eq_residuals: DVector<f64>,
    /// Largest scaled inequality violation.
    pub ineq_violation: f64,
    pub kkt_residual: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub trajectory: Trajectory,
}

impl OptimizationResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    /// Payload over lift-off mass.
    pub fn payload_ratio(&self) -> f64 {
        self.vehicle.m_payload / self.m_liftoff
    }
}

/// Open-loop seed controller: vertical rise, a short pitch-over kick, then
/// thrust along the Earth-relative velocity (a pure gravity turn).
struct GravityTurnSeed<'a> {
    frame: &'a LaunchFrame,
    omega: f64,
    vertical_until: f64,
    kick_until: f64,
    kick: f64,
}

impl AttitudeLaw for GravityTurnSeed<'_> {
    fn attitude(&self, _phase: &Phase, t: f64, r: &Vec3, v: &Vec3) -> (f64, f64) {
        if t <= self.vertical_until {
            return (std::f64::consts::FRAC_PI_2, 0.0);
        }
        if t <= self.kick_until {
            let f = (t - self.vertical_until) / (self.kick_until - self.vertical_until);
            return (std::f64::consts::FRAC_PI_2 - f * self.kick, 0.0);
        }
        let omega_vec = Vec3::new(0.0, 0.0, self.omega);
        let v_rel = v - omega_vec.cross(r);
        if v_rel.norm() < 1.0 {
            return (std::f64::consts::FRAC_PI_2, 0.0);
        }
        self.frame.angles_of(&v_rel)
    }
}

/// Build seed attitude nodes by flying kick-angle variants of an open-loop
/// gravity turn and keeping the one whose end state comes closest to the
/// target altitude at a shallow flight path angle. Returns the (theta, psi)
/// node per free phase.
pub fn seed_attitude_nodes(
    template: &VehicleSpec,
    mission: &MissionSpec,
    phase_config: &PhaseConfig,
    env: &Environment,
    steps_per_phase: usize,
) -> Result<Vec<(f64, f64)>> {
    let schedule = PhaseSchedule::build(template, phase_config)?;
    let frame = LaunchFrame::new(&mission.site, mission.azimuth(), &env.earth);
    let vertical_until = phase_config.vertical_rise_s;

    // the pitch-over is knife-edge sensitive at realistic thrust-to-weight
    // ratios: scan kick angles geometrically over two decades
    let mut best: Option<(f64, Trajectory)> = None;
    let v_req = mission.v_req(&env.earth);
    for step in 0..40 {
        let kick = (0.02 * (3.0f64 / 0.02).powf(step as f64 / 39.0)).to_radians();
        let law = GravityTurnSeed {
            frame: &frame,
            omega: env.earth.omega,
            vertical_until,
            kick_until: vertical_until + 12.0,
            kick,
        };
        let Ok(traj) = simulate(
            template,
            &schedule,
            &law,
            env,
            &frame,
            &mission.site,
            steps_per_phase,
        ) else {
            continue;
        };
        let terminal = traj.terminal();
        let rn = terminal.r.norm();
        let altitude = rn - env.earth.r_eq;
        if altitude < 0.0 {
            continue;
        }
        let gamma = (terminal.v.dot(&terminal.r) / (terminal.v.norm() * rn))
            .clamp(-1.0, 1.0)
            .asin();
        let score = ((altitude - mission.h_req()) / 1.0e5).powi(2)
            + (gamma / 0.1).powi(2)
            + ((terminal.v.norm() - v_req) / 500.0).powi(2);
        if best.as_ref().map_or(true, |(s, _)| score < *s) {
            best = Some((score, traj));
        }
    }
    let (_, traj) = best.ok_or(Error::BracketFailure {
        context: "gravity-turn seed",
    })?;

    // sample the flown attitude at each free phase end
    let nodes = schedule
        .free_attitude_phases()
        .iter()
        .map(|&p| {
            let s = traj.phase_end(p);
            (s.theta, s.psi)
        })
        .collect();
    Ok(nodes)
}

/// Solve the simultaneous design problem from the template initial guess (or
/// a caller-supplied one).
pub fn solve_simultaneous(
    template: &VehicleSpec,
    mission: &MissionSpec,
    phase_config: &PhaseConfig,
    env: &Environment,
    x0: Option<DecisionVector>,
    options: &SolverOptions,
) -> Result<OptimizationResult> {
    let start = Instant::now();
    let problem = AscentProblem::simultaneous(
        template.clone(),
        mission.clone(),
        phase_config.clone(),
        env.clone(),
        options.steps_per_phase,
    )?;

    let decision0 = match x0 {
        Some(d) => d,
        None => {
            let mut nodes =
                seed_attitude_nodes(template, mission, phase_config, env, options.steps_per_phase)?;
            if options.presolve {
                nodes = presolve_attitude(template, mission, phase_config, env, nodes, options)?;
            }
            DecisionVector {
                m_s: template.stages.iter().map(|s| s.m_s / MASS_SCALE).collect(),
                payload: None,
                theta: nodes.iter().map(|n| n.0).collect(),
                psi: nodes.iter().map(|n| n.1).collect(),
            }
        }
    };

    let x = decision0.pack(&problem.layout)?;
    let sqp_options = SqpOptions {
        tol: options.tol,
        ineq_tol: options.ineq_tol,
        max_iter: options.max_iter,
        ..SqpOptions::default()
    };
    let outcome = sqp::solve(&problem, x, &sqp_options);
    package_result(&problem, outcome, start)
}

/// Attitude-only feasibility pass: drive the insertion and gravity-turn
/// equalities down while the stage masses stay at the template values.
fn presolve_attitude(
    template: &VehicleSpec,
    mission: &MissionSpec,
    phase_config: &PhaseConfig,
    env: &Environment,
    nodes: Vec<(f64, f64)>,
    options: &SolverOptions,
) -> Result<Vec<(f64, f64)>> {
    let problem = AscentProblem::attitude_only(
        template.clone(),
        mission.clone(),
        phase_config.clone(),
        env.clone(),
        options.steps_per_phase,
        false,
    )?;
    let decision = DecisionVector {
        m_s: vec![],
        payload: None,
        theta: nodes.iter().map(|n| n.0).collect(),
        psi: nodes.iter().map(|n| n.1).collect(),
    };
    let x = decision.pack(&problem.layout)?;
    let sqp_options = SqpOptions {
        tol: options.tol.max(1e-5),
        ineq_tol: options.ineq_tol,
        max_iter: 80,
        ..SqpOptions::default()
    };
    let outcome = sqp::solve(&problem, x, &sqp_options);
    let solved = DecisionVector::unpack(&outcome.x, &problem.layout)?;
    Ok(solved
        .theta
        .iter()
        .zip(&solved.psi)
        .map(|(&t, &p)| (t, p))
        .collect())
}

/// Attitude-only solve used by the sequential baseline: stage masses frozen,
/// payload free, objective = maximize payload.
pub fn solve_attitude_for_payload(
    vehicle: &VehicleSpec,
    mission: &MissionSpec,
    phase_config: &PhaseConfig,
    env: &Environment,
    nodes0: Vec<(f64, f64)>,
    payload0: f64,
    options: &SolverOptions,
) -> Result<OptimizationResult> {
    let start = Instant::now();
    let problem = AscentProblem::attitude_only(
        vehicle.clone(),
        mission.clone(),
        phase_config.clone(),
        env.clone(),
        options.steps_per_phase,
        true,
    )?;
    let decision = DecisionVector {
        m_s: vec![],
        payload: Some(payload0 / MASS_SCALE),
        theta: nodes0.iter().map(|n| n.0).collect(),
        psi: nodes0.iter().map(|n| n.1).collect(),
    };
    let x = decision.pack(&problem.layout)?;
    let sqp_options = SqpOptions {
        tol: options.tol,
        ineq_tol: options.ineq_tol,
        max_iter: options.max_iter,
        ..SqpOptions::default()
    };
    let outcome = sqp::solve(&problem, x, &sqp_options);
    package_result(&problem, outcome, start)
}

fn package_result(
    problem: &AscentProblem,
    outcome: sqp::SqpOutcome,
    start: Instant,
) -> Result<OptimizationResult> {
    let decision = DecisionVector::unpack(&outcome.x, &problem.layout)?;
    let (vehicle, _) = problem.build_vehicle(&decision)?;
    let trajectory = outcome.output.trajectory.clone().ok_or_else(|| {
        Error::InvalidSpec("solution trajectory unavailable (penalized evaluation)".into())
    })?;
    Ok(OptimizationResult {
        m_liftoff: vehicle.liftoff_mass(),
        dv_stages: trajectory.stage_dv.clone(),
        losses: trajectory.loss_totals,
        eq_residuals: outcome.output.eq.clone(),
        ineq_violation: outcome.ineq_violation,
        kkt_residual: outcome.kkt_residual,
        status: outcome.status,
        iterations: outcome.iterations,
        wall_time_s: start.elapsed().as_secs_f64(),
        decision,
        vehicle,
        trajectory,
    })
}
