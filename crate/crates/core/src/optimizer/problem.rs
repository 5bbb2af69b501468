//! Problem formulation for the combined stage/trajectory optimization:
//! decision-vector packing, trajectory-backed evaluation of the objective
//! and constraints, and parallel finite-difference Jacobians.

use crate::control::{ControlProfile, LaunchFrame};
use crate::dynamics::{simulate, Trajectory};
use crate::earth::Environment;
use crate::error::{Error, Result};
use crate::mission::MissionSpec;
use crate::outputs::{aero_angles, iip_of_state};
use crate::phases::{PhaseConfig, PhaseSchedule};
use crate::vehicle::VehicleSpec;
use crate::Vec3;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Scaling constants: the solver works in megagrams and radians, constraint
/// residuals are scaled to order one.
pub const MASS_SCALE: f64 = 1.0e3; // kg per Mg
pub const H_SCALE: f64 = 1.0e5; // m
pub const V_SCALE: f64 = 1.0e3; // m/s
pub const Q_SCALE: f64 = 1.0e4; // Pa

/// Which blocks of the flat vector are present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionLayout {
    /// Number of structural-mass variables (0 when masses are frozen).
    pub n_masses: usize,
    /// Whether the payload mass is a variable (baseline inner problem).
    pub payload_free: bool,
    /// Phase indices whose end-node attitude is free, in packing order.
    pub free_phases: Vec<usize>,
}

impl DecisionLayout {
    pub fn len(&self) -> usize {
        self.n_masses + usize::from(self.payload_free) + 2 * self.free_phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Unpacked decision variables, stored in solver units (Mg, rad) so the
/// pack/unpack round trip is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    /// Structural masses, Mg.
    pub m_s: Vec<f64>,
    /// Payload mass, Mg (baseline inner problem only).
    pub payload: Option<f64>,
    /// Pitch node per free phase, rad.
    pub theta: Vec<f64>,
    /// Yaw node per free phase, rad.
    pub psi: Vec<f64>,
}

impl DecisionVector {
    /// Flatten: masses, payload, pitch nodes, yaw nodes.
    pub fn pack(&self, layout: &DecisionLayout) -> Result<DVector<f64>> {
        if self.m_s.len() != layout.n_masses
            || self.payload.is_some() != layout.payload_free
            || self.theta.len() != layout.free_phases.len()
            || self.psi.len() != layout.free_phases.len()
        {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: self.m_s.len() + 2 * self.theta.len(),
            });
        }
        let mut x = Vec::with_capacity(layout.len());
        x.extend_from_slice(&self.m_s);
        if let Some(p) = self.payload {
            x.push(p);
        }
        x.extend_from_slice(&self.theta);
        x.extend_from_slice(&self.psi);
        Ok(DVector::from_vec(x))
    }

    pub fn unpack(x: &DVector<f64>, layout: &DecisionLayout) -> Result<DecisionVector> {
        if x.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                got: x.len(),
            });
        }
        let n = layout.n_masses;
        let p = usize::from(layout.payload_free);
        let k = layout.free_phases.len();
        Ok(DecisionVector {
            m_s: x.as_slice()[0..n].to_vec(),
            payload: layout.payload_free.then(|| x[n]),
            theta: x.as_slice()[n + p..n + p + k].to_vec(),
            psi: x.as_slice()[n + p + k..n + p + 2 * k].to_vec(),
        })
    }
}

/// Labels for constraint reporting.
#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintId {
    TerminalAltitude,
    TerminalFlightPath,
    TerminalSpeed,
    TerminalInclination,
    /// Zero angle of attack at the end of a gravity-turn phase.
    GravityTurnAlpha { phase: usize },
    MassLowerBound { stage: usize },
    PayloadLowerBound,
    DynamicPressure { sample: usize },
    IipBound { stage: usize, which: &'static str },
}

/// Everything evaluate() returns for one decision vector.
#[derive(Debug, Clone)]
pub struct EvalOutput {
    /// Lift-off mass, kg.
    pub objective_kg: f64,
    /// Objective in solver units (payload-max problems negate it).
    pub objective: f64,
    /// Scaled equality residuals (zero when satisfied).
    pub eq: DVector<f64>,
    /// Scaled inequality slacks (non-negative when satisfied).
    pub ineq: DVector<f64>,
    pub trajectory: Option<Trajectory>,
    /// The simulation failed and the outputs are penalty values.
    pub penalized: bool,
}

/// The ascent design problem bound to a vehicle template, mission, phase
/// layout and environment. Pure: evaluation has no side effects, so
/// gradient probes fan out across threads.
pub struct AscentProblem {
    pub template: VehicleSpec,
    pub mission: MissionSpec,
    pub phase_config: PhaseConfig,
    pub env: Environment,
    pub frame: LaunchFrame,
    pub layout: DecisionLayout,
    pub steps_per_phase: usize,
    /// Lower bounds on the structural masses, Mg.
    pub mass_lower_bounds: Vec<f64>,
    /// Lower bound on the payload when it is free, Mg.
    pub payload_lower_bound: f64,
    /// Maximize payload instead of minimizing lift-off mass.
    pub maximize_payload: bool,
}

impl AscentProblem {
    /// Layout for the full simultaneous problem (masses + attitude nodes).
    pub fn simultaneous(
        template: VehicleSpec,
        mission: MissionSpec,
        phase_config: PhaseConfig,
        env: Environment,
        steps_per_phase: usize,
    ) -> Result<AscentProblem> {
        template.validate()?;
        mission.validate()?;
        let schedule = PhaseSchedule::build(&template, &phase_config)?;
        let layout = DecisionLayout {
            n_masses: template.n_stages(),
            payload_free: false,
            free_phases: schedule.free_attitude_phases(),
        };
        let frame = LaunchFrame::new(&mission.site, mission.azimuth(), &env.earth);
        let mass_lower_bounds = default_mass_bounds(&template, &phase_config);
        Ok(AscentProblem {
            template,
            mission,
            phase_config,
            env,
            frame,
            layout,
            steps_per_phase,
            mass_lower_bounds,
            payload_lower_bound: 0.01,
            maximize_payload: false,
        })
    }

    /// Layout for attitude-only problems (stage masses frozen at the
    /// template). With `payload_free` the payload becomes a variable and the
    /// objective switches to payload maximization.
    pub fn attitude_only(
        template: VehicleSpec,
        mission: MissionSpec,
        phase_config: PhaseConfig,
        env: Environment,
        steps_per_phase: usize,
        payload_free: bool,
    ) -> Result<AscentProblem> {
        template.validate()?;
        mission.validate()?;
        let schedule = PhaseSchedule::build(&template, &phase_config)?;
        let layout = DecisionLayout {
            n_masses: 0,
            payload_free,
            free_phases: schedule.free_attitude_phases(),
        };
        let frame = LaunchFrame::new(&mission.site, mission.azimuth(), &env.earth);
        Ok(AscentProblem {
            template,
            mission,
            phase_config,
            env,
            frame,
            layout,
            steps_per_phase,
            mass_lower_bounds: vec![],
            payload_lower_bound: 0.01,
            maximize_payload: payload_free,
        })
    }

    /// Rebuild the vehicle and schedule for a decision vector.
    pub fn build_vehicle(&self, decision: &DecisionVector) -> Result<(VehicleSpec, PhaseSchedule)> {
        let mut vehicle = self.template.clone();
        if self.layout.n_masses > 0 {
            let masses_kg: Vec<f64> = decision.m_s.iter().map(|m| m * MASS_SCALE).collect();
            if masses_kg.iter().any(|&m| !(m > 0.0)) {
                return Err(Error::InvalidSpec("non-positive structural mass".into()));
            }
            vehicle = vehicle.with_structural_masses(&masses_kg)?;
        }
        if let Some(p) = decision.payload {
            if !(p > 0.0) {
                return Err(Error::InvalidSpec("non-positive payload".into()));
            }
            vehicle = vehicle.with_payload(p * MASS_SCALE);
        }
        let schedule = PhaseSchedule::build(&vehicle, &self.phase_config)?;
        Ok((vehicle, schedule))
    }

    /// Build the control profile for a decision vector: free nodes from the
    /// decision, fixed phases pinned by the profile itself.
    fn build_controls(
        &self,
        schedule: &PhaseSchedule,
        decision: &DecisionVector,
    ) -> Result<ControlProfile> {
        let mut nodes = vec![(0.0, 0.0); schedule.n_phases()];
        // carry fixed-phase values forward as placeholders; ControlProfile
        // pins them anyway
        for (slot, &phase) in self.layout.free_phases.iter().enumerate() {
            nodes[phase] = (decision.theta[slot], decision.psi[slot]);
        }
        ControlProfile::new(schedule, (std::f64::consts::FRAC_PI_2, 0.0), nodes)
    }

    /// Number of equality constraints.
    pub fn n_eq(&self) -> usize {
        let schedule = PhaseSchedule::build(&self.template, &self.phase_config)
            .expect("template schedule is valid by construction");
        4 + schedule.gravity_turn_phases().len()
    }

    /// Evaluate objective and constraints. Simulation failures produce a
    /// penalized output instead of an error, keeping line searches total.
    pub fn evaluate(&self, x: &DVector<f64>, want_trajectory: bool) -> EvalOutput {
        match self.try_evaluate(x, want_trajectory) {
            Ok(out) => out,
            Err(_) => self.penalty_output(),
        }
    }

    fn penalty_output(&self) -> EvalOutput {
        let n_eq = self.n_eq();
        EvalOutput {
            objective_kg: f64::INFINITY,
            objective: 1.0e6,
            eq: DVector::from_element(n_eq, 1.0e3),
            ineq: DVector::from_element(self.n_bound_rows(), -1.0e3),
            trajectory: None,
            penalized: true,
        }
    }

    fn n_bound_rows(&self) -> usize {
        self.layout.n_masses + usize::from(self.layout.payload_free)
    }

    fn try_evaluate(&self, x: &DVector<f64>, want_trajectory: bool) -> Result<EvalOutput> {
        let decision = DecisionVector::unpack(x, &self.layout)?;
        let (vehicle, schedule) = self.build_vehicle(&decision)?;
        let controls = self.build_controls(&schedule, &decision)?;
        let traj = simulate(
            &vehicle,
            &schedule,
            &controls,
            &self.env,
            &self.frame,
            &self.mission.site,
            self.steps_per_phase,
        )?;

        let earth = &self.env.earth;
        let terminal = traj.terminal();
        let rn = terminal.r.norm();
        let vn = terminal.v.norm();
        if !(rn.is_finite() && vn.is_finite()) {
            return Err(Error::InvalidSpec("non-finite terminal state".into()));
        }

        // terminal insertion equalities
        let gamma = (terminal.v.dot(&terminal.r) / (vn * rn)).clamp(-1.0, 1.0).asin();
        let h_vec = terminal.r.cross(&terminal.v);
        let inclination = (h_vec.z / h_vec.norm()).clamp(-1.0, 1.0).acos();
        let mut eq = vec![
            (rn - earth.r_eq - self.mission.h_req()) / H_SCALE,
            gamma - self.mission.gamma_req(),
            (vn - self.mission.v_req(earth)) / V_SCALE,
            inclination - self.mission.i_req(),
        ];

        // zero angle of attack at the end of every gravity-turn phase
        let omega_vec = Vec3::new(0.0, 0.0, earth.omega);
        for phase in schedule.gravity_turn_phases() {
            let s = traj.phase_end(phase);
            let e_t = self.frame.thrust_direction(s.theta, s.psi);
            let v_rel = s.v - omega_vec.cross(&s.r);
            let (alpha, _) = aero_angles(&e_t, &v_rel, &s.r);
            eq.push(alpha);
        }

        // inequality slacks: bounds first, then path and impact constraints
        let mut ineq = Vec::new();
        for (k, lb) in self.mass_lower_bounds.iter().enumerate() {
            ineq.push(decision.m_s[k] - lb);
        }
        if let Some(p) = decision.payload {
            ineq.push(p - self.payload_lower_bound);
        }
        if let Some(q_max) = self.mission.q_max {
            for s in &traj.samples {
                let v_rel = s.v - omega_vec.cross(&s.r);
                let rho = self.env.atmosphere.at(s.r.norm() - earth.r_eq).density;
                let q = 0.5 * rho * v_rel.norm_squared();
                ineq.push((q_max - q) / Q_SCALE);
            }
        }
        for bound in &self.mission.iip_bounds {
            let Some(state) = traj.separation_state(bound.stage) else {
                continue;
            };
            match iip_of_state(state, earth) {
                Ok(iip) => {
                    if let Some(hi) = bound.lon_max {
                        ineq.push(hi - iip.longitude);
                    }
                    if let Some(lo) = bound.lon_min {
                        ineq.push(iip.longitude - lo);
                    }
                    if let Some(hi) = bound.lat_max {
                        ineq.push(hi - iip.latitude);
                    }
                    if let Some(lo) = bound.lat_min {
                        ineq.push(iip.latitude - lo);
                    }
                }
                Err(_) => {
                    // no ballistic impact: the bound cannot bind
                    let rows = [bound.lon_max, bound.lon_min, bound.lat_max, bound.lat_min]
                        .iter()
                        .filter(|b| b.is_some())
                        .count();
                    ineq.extend(std::iter::repeat(1.0).take(rows));
                }
            }
        }

        let objective_kg = vehicle.liftoff_mass();
        let objective = if self.maximize_payload {
            -vehicle.m_payload / MASS_SCALE
        } else {
            objective_kg / MASS_SCALE
        };

        let eq = DVector::from_vec(eq);
        let ineq = DVector::from_vec(ineq);
        if !eq.iter().all(|v| v.is_finite())
            || !ineq.iter().all(|v| v.is_finite())
            || !objective.is_finite()
        {
            return Err(Error::InvalidSpec("non-finite residuals".into()));
        }

        Ok(EvalOutput {
            objective_kg,
            objective,
            eq,
            ineq,
            trajectory: want_trajectory.then_some(traj),
            penalized: false,
        })
    }

    /// Human-readable labels in the same order as the residual vectors.
    pub fn constraint_ids(&self) -> (Vec<ConstraintId>, Vec<ConstraintId>) {
        let schedule = PhaseSchedule::build(&self.template, &self.phase_config)
            .expect("template schedule is valid by construction");
        let mut eq = vec![
            ConstraintId::TerminalAltitude,
            ConstraintId::TerminalFlightPath,
            ConstraintId::TerminalSpeed,
            ConstraintId::TerminalInclination,
        ];
        for phase in schedule.gravity_turn_phases() {
            eq.push(ConstraintId::GravityTurnAlpha { phase });
        }
        let mut ineq = Vec::new();
        for stage in 0..self.layout.n_masses {
            ineq.push(ConstraintId::MassLowerBound { stage });
        }
        if self.layout.payload_free {
            ineq.push(ConstraintId::PayloadLowerBound);
        }
        (eq, ineq)
    }

    /// Central finite-difference gradient of the objective and Jacobians of
    /// the constraints, with a per-variable relative step. Probe evaluations
    /// run in parallel; a non-finite probe falls back to a one-sided
    /// difference.
    pub fn gradient(&self, x: &DVector<f64>, base: &EvalOutput) -> Gradients {
        let n = x.len();
        let steps: Vec<f64> = (0..n).map(|i| 1e-6 * x[i].abs().max(1.0)).collect();

        let columns: Vec<(DVector<f64>, DVector<f64>, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let h = steps[i];
                let mut xp = x.clone();
                xp[i] += h;
                let mut xm = x.clone();
                xm[i] -= h;
                let fp = self.evaluate(&xp, false);
                let fm = self.evaluate(&xm, false);
                match (fp.penalized, fm.penalized) {
                    (false, false) => (
                        (&fp.eq - &fm.eq) / (2.0 * h),
                        (&fp.ineq - &fm.ineq) / (2.0 * h),
                        (fp.objective - fm.objective) / (2.0 * h),
                    ),
                    (false, true) => (
                        (&fp.eq - &base.eq) / h,
                        (&fp.ineq - &base.ineq) / h,
                        (fp.objective - base.objective) / h,
                    ),
                    (true, false) => (
                        (&base.eq - &fm.eq) / h,
                        (&base.ineq - &fm.ineq) / h,
                        (base.objective - fm.objective) / h,
                    ),
                    (true, true) => (
                        DVector::zeros(base.eq.len()),
                        DVector::zeros(base.ineq.len()),
                        0.0,
                    ),
                }
            })
            .collect();

        let mut grad = DVector::zeros(n);
        let mut j_eq = DMatrix::zeros(base.eq.len(), n);
        let mut j_ineq = DMatrix::zeros(base.ineq.len(), n);
        for (i, (ceq, cin, g)) in columns.into_iter().enumerate() {
            grad[i] = g;
            j_eq.set_column(i, &ceq);
            j_ineq.set_column(i, &cin);
        }
        Gradients { grad, j_eq, j_ineq }
    }
}

/// Objective gradient and constraint Jacobians at one point.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub grad: DVector<f64>,
    pub j_eq: DMatrix<f64>,
    pub j_ineq: DMatrix<f64>,
}

/// Default structural-mass lower bounds: enough stage-1 propellant to cover
/// the vertical rise with margin, a small floor elsewhere.
fn default_mass_bounds(template: &VehicleSpec, config: &PhaseConfig) -> Vec<f64> {
    template
        .stages
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let eps = s.eps();
            if k == 0 {
                let min_prop = 1.5 * s.mdot * config.vertical_rise_s;
                (min_prop * eps / (1.0 - eps) / MASS_SCALE).max(0.05)
            } else {
                0.05
            }
        })
        .collect()
}
