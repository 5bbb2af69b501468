//! The traditional comparison method: alternate optimal stage sizing (ideal
//! loss-free shares plus per-stage loss assignments) with attitude-only
//! trajectory optimization until the lift-off mass settles, with divergence
//! detection.

use crate::dynamics::Trajectory;
use crate::earth::Environment;
use crate::error::Result;
use crate::mission::MissionSpec;
use crate::optimizer::{
    seed_attitude_nodes, solve_attitude_for_payload, OptimizationResult, SolveStatus,
    SolverOptions,
};
use crate::phases::{PhaseConfig, PhaseKind, PhaseSchedule};
use crate::staging::{
    optimal_staging, required_dv, size_stages_for_dv, FairingPlan, StagingProblem,
};
use crate::vehicle::VehicleSpec;

/// One pass of the staging/trajectory loop.
#[derive(Debug, Clone)]
pub struct BaselineIteration {
    /// 1-based iteration index.
    pub index: usize,
    /// Losses assumed by the sizing step, m/s per stage.
    pub assumed_losses: Vec<f64>,
    /// Structural masses from the sizing step, kg.
    pub m_s: Vec<f64>,
    /// Propellant masses from the sizing step, kg.
    pub m_p: Vec<f64>,
    /// Lift-off mass of the sized vehicle, kg.
    pub m_liftoff: f64,
    /// Maximum payload found by the trajectory sub-problem, kg.
    pub max_payload: Option<f64>,
    /// Losses computed from the optimal trajectory, m/s per stage.
    pub computed_losses: Option<Vec<f64>>,
    /// Inner solver status.
    pub inner_status: Option<SolveStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BaselineStatus {
    Converged,
    Diverged { reason: String },
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub iterations: Vec<BaselineIteration>,
    pub status: BaselineStatus,
    /// Final design (sized vehicle) when the loop converged.
    pub vehicle: Option<VehicleSpec>,
    /// Final inner trajectory solution when the loop converged.
    pub inner: Option<OptimizationResult>,
}

impl BaselineResult {
    pub fn converged(&self) -> bool {
        self.status == BaselineStatus::Converged
    }

    pub fn final_liftoff(&self) -> Option<f64> {
        self.vehicle.as_ref().map(|v| v.liftoff_mass())
    }
}

#[derive(Debug, Clone)]
pub struct BaselineOptions {
    /// Relative lift-off-mass change below which the loop has converged.
    pub convergence_tol: f64,
    pub max_iter: usize,
    /// Damping on the loss update (0 = undamped, as the comparison runs).
    pub damping: f64,
    pub inner: SolverOptions,
}

impl Default for BaselineOptions {
    fn default() -> Self {
        BaselineOptions {
            convergence_tol: 1e-3,
            max_iter: 50,
            damping: 0.0,
            inner: SolverOptions::default(),
        }
    }
}

/// Split a trajectory's loss totals into per-stage buckets: each accumulator
/// increment over a stage's burn phases lands in that stage's bucket; coast
/// increments go to the following burn stage (a trailing coast to the last
/// stage). The buckets always sum to the trajectory total.
pub fn attribute_losses(
    trajectory: &Trajectory,
    schedule: &PhaseSchedule,
    n_stages: usize,
) -> Vec<f64> {
    let mut per_stage = vec![0.0; n_stages];
    for (phase_idx, &(start, end)) in trajectory.phase_ranges.iter().enumerate() {
        let increment =
            trajectory.samples[end].losses.total() - trajectory.samples[start].losses.total();
        let stage = match schedule.phases[phase_idx].kind {
            PhaseKind::Burn { stage } => stage,
            PhaseKind::Coast => schedule.phases[phase_idx + 1..]
                .iter()
                .find_map(|p| match p.kind {
                    PhaseKind::Burn { stage } => Some(stage),
                    PhaseKind::Coast => None,
                })
                .unwrap_or(n_stages - 1),
        };
        per_stage[stage] += increment;
    }
    per_stage
}

/// Run the sequential staging/trajectory iteration.
///
/// Each pass sizes the stages for the ideal loss-free shares plus the
/// per-stage losses assumed so far (fairing carried until its separation
/// point), then solves the attitude-only payload-maximization problem on the
/// sized vehicle, recomputes the losses from that trajectory, and feeds them
/// back. Convergence is declared when the sized lift-off mass changes by
/// less than the tolerance; divergence when the change grows three passes in
/// a row or the trajectory sub-problem fails.
pub fn solve_sequential(
    template: &VehicleSpec,
    mission: &MissionSpec,
    phase_config: &PhaseConfig,
    env: &Environment,
    options: &BaselineOptions,
) -> Result<BaselineResult> {
    let n = template.n_stages();
    let v_ex: Vec<f64> = template.stages.iter().map(|s| s.v_ex).collect();
    let eps: Vec<f64> = template.stages.iter().map(|s| s.eps()).collect();
    let dv_ideal = required_dv(mission.target.altitude, &mission.site, &env.earth);

    // ideal loss-free allocation: fixed across iterations
    let ideal = optimal_staging(&StagingProblem {
        v_ex: v_ex.clone(),
        eps: eps.clone(),
        dv_req: dv_ideal,
        m_payload: template.m_payload + template.m_fairing,
    })?;

    // fairing separation point implied by the phase layout
    let fairing_fraction = {
        let k = phase_config.fairing_stage;
        phase_config.fairing_subphase as f64 / phase_config.subphases[k].max(1) as f64
    };
    let fairing = FairingPlan {
        mass: template.m_fairing,
        stage: phase_config.fairing_stage,
        burn_fraction: fairing_fraction,
    };

    let mut assumed = vec![0.0; n];
    let mut iterations: Vec<BaselineIteration> = Vec::new();
    let mut warm_nodes: Option<Vec<(f64, f64)>> = None;
    let mut warm_payload = template.m_payload;
    let mut prev_liftoff: Option<f64> = None;
    let mut prev_change: Option<f64> = None;
    let mut growth_streak = 0usize;

    for index in 1..=options.max_iter {
        // (a) stage sizing with per-stage loss add-on
        let dv_stages: Vec<f64> = ideal
            .dv
            .iter()
            .zip(&assumed)
            .map(|(d, l)| d + l)
            .collect();
        let sized = match size_stages_for_dv(&dv_stages, &v_ex, &eps, template.m_payload, &fairing)
        {
            Ok(s) => s,
            Err(e) => {
                iterations.push(BaselineIteration {
                    index,
                    assumed_losses: assumed.clone(),
                    m_s: vec![],
                    m_p: vec![],
                    m_liftoff: f64::NAN,
                    max_payload: None,
                    computed_losses: None,
                    inner_status: None,
                });
                return Ok(BaselineResult {
                    iterations,
                    status: BaselineStatus::Diverged {
                        reason: format!("stage sizing failed: {e}"),
                    },
                    vehicle: None,
                    inner: None,
                });
            }
        };
        let vehicle = template.with_structural_masses(&sized.m_s)?;
        let m_liftoff = vehicle.liftoff_mass();

        let mut record = BaselineIteration {
            index,
            assumed_losses: assumed.clone(),
            m_s: sized.m_s.clone(),
            m_p: sized.m_p.clone(),
            m_liftoff,
            max_payload: None,
            computed_losses: None,
            inner_status: None,
        };

        // (b) attitude-only trajectory optimization, masses frozen
        let nodes0 = match &warm_nodes {
            Some(nodes) => nodes.clone(),
            None => seed_attitude_nodes(
                &vehicle,
                mission,
                phase_config,
                env,
                options.inner.steps_per_phase,
            )?,
        };
        let inner = solve_attitude_for_payload(
            &vehicle,
            mission,
            phase_config,
            env,
            nodes0,
            warm_payload,
            &options.inner,
        );
        let inner = match inner {
            Ok(r) => r,
            Err(e) => {
                record.inner_status = None;
                iterations.push(record);
                return Ok(BaselineResult {
                    iterations,
                    status: BaselineStatus::Diverged {
                        reason: format!("trajectory sub-problem failed: {e}"),
                    },
                    vehicle: None,
                    inner: None,
                });
            }
        };
        record.inner_status = Some(inner.status);
        record.max_payload = Some(inner.vehicle.m_payload);

        if inner.status != SolveStatus::Converged {
            iterations.push(record);
            return Ok(BaselineResult {
                iterations,
                status: BaselineStatus::Diverged {
                    reason: format!(
                        "trajectory sub-problem infeasible at iteration {index} \
                         (status {:?}, eq residual {:.2e})",
                        inner.status,
                        inner.eq_residuals.amax()
                    ),
                },
                vehicle: None,
                inner: None,
            });
        }

        // (c) recompute the per-stage losses from the optimal trajectory
        let schedule = PhaseSchedule::build(&inner.vehicle, phase_config)?;
        let computed = attribute_losses(&inner.trajectory, &schedule, n);
        record.computed_losses = Some(computed.clone());
        iterations.push(record);

        // (d) convergence on the lift-off mass
        if let Some(prev) = prev_liftoff {
            let change = (m_liftoff - prev).abs() / prev;
            if change <= options.convergence_tol {
                return Ok(BaselineResult {
                    iterations,
                    status: BaselineStatus::Converged,
                    vehicle: Some(vehicle),
                    inner: Some(inner),
                });
            }
            if let Some(pc) = prev_change {
                if change > pc {
                    growth_streak += 1;
                    if growth_streak >= 3 {
                        return Ok(BaselineResult {
                            iterations,
                            status: BaselineStatus::Diverged {
                                reason: format!(
                                    "lift-off mass change grew for three passes \
                                     (latest {:.3}%)",
                                    100.0 * change
                                ),
                            },
                            vehicle: None,
                            inner: None,
                        });
                    }
                } else {
                    growth_streak = 0;
                }
            }
            prev_change = Some(change);
        }
        prev_liftoff = Some(m_liftoff);

        // loss update with optional damping
        for k in 0..n {
            assumed[k] = options.damping * assumed[k] + (1.0 - options.damping) * computed[k];
        }
        warm_nodes = Some(
            inner
                .decision
                .theta
                .iter()
                .zip(&inner.decision.psi)
                .map(|(&t, &p)| (t, p))
                .collect(),
        );
        warm_payload = inner.vehicle.m_payload;
    }

    Ok(BaselineResult {
        iterations,
        status: BaselineStatus::MaxIterations,
        vehicle: None,
        inner: None,
    })
}
