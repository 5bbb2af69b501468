//! 3-DOF point-mass flight simulation: phase-structured fixed-step RK4
//! integration of the translational dynamics with mass bookkeeping and the
//! four velocity-loss accumulators.
//!
//! The loss accumulators are the projections of the corresponding force
//! terms onto the inertial velocity direction, which makes the velocity
//! budget close exactly: |v|(t_f) - |v|(t_0) = sum_k v_ex,k ln(mu_k) - sum
//! of the four losses, up to the small non-radial J2 component.

use crate::control::{AttitudeLaw, LaunchFrame};
use crate::earth::Environment;
use crate::error::{Error, Result};
use crate::phases::{FlightEvent, Phase, PhaseKind, PhaseSchedule};
use crate::vehicle::{StageSpec, VehicleSpec};
use crate::Vec3;

/// Accumulated velocity losses, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VelocityLosses {
    /// Nozzle back-pressure loss.
    pub pressure: f64,
    /// Aerodynamic drag loss.
    pub drag: f64,
    /// Gravity loss.
    pub gravity: f64,
    /// Thrust-vector steering loss.
    pub steering: f64,
}

impl VelocityLosses {
    pub fn total(&self) -> f64 {
        self.pressure + self.drag + self.gravity + self.steering
    }
}

impl std::ops::Sub for VelocityLosses {
    type Output = VelocityLosses;
    fn sub(self, rhs: VelocityLosses) -> VelocityLosses {
        VelocityLosses {
            pressure: self.pressure - rhs.pressure,
            drag: self.drag - rhs.drag,
            gravity: self.gravity - rhs.gravity,
            steering: self.steering - rhs.steering,
        }
    }
}

/// Dense trajectory sample.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    /// Time since ignition, s.
    pub t: f64,
    /// Inertial position, m.
    pub r: Vec3,
    /// Inertial velocity, m/s.
    pub v: Vec3,
    /// Remaining propellant per stage, kg.
    pub m_p: Vec<f64>,
    pub fairing_attached: bool,
    pub losses: VelocityLosses,
    /// Phase this sample belongs to.
    pub phase: usize,
    /// Commanded pitch/yaw at this sample, rad.
    pub theta: f64,
    pub psi: f64,
    /// Total vehicle mass, kg.
    pub mass: f64,
}

/// Simulated flight: dense samples, event times, per-stage velocity
/// increments and loss totals.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<StateVector>,
    /// Sample index range [start, end] per phase (boundary samples shared).
    pub phase_ranges: Vec<(usize, usize)>,
    /// Events with their times.
    pub events: Vec<(FlightEvent, f64)>,
    /// Realized velocity increment per stage: v_ex,k ln(m_ignition/m_burnout).
    pub stage_dv: Vec<f64>,
    pub loss_totals: VelocityLosses,
}

impl Trajectory {
    pub fn initial(&self) -> &StateVector {
        &self.samples[0]
    }

    pub fn terminal(&self) -> &StateVector {
        self.samples.last().expect("trajectory has samples")
    }

    /// Last sample of a phase (the state at its end event).
    pub fn phase_end(&self, phase: usize) -> &StateVector {
        &self.samples[self.phase_ranges[phase].1]
    }

    /// State at a stage-separation event.
    pub fn separation_state(&self, stage: usize) -> Option<&StateVector> {
        let t = self
            .events
            .iter()
            .find(|(e, _)| *e == FlightEvent::StageSeparation(stage))
            .map(|&(_, t)| t)?;
        self.samples
            .iter()
            .rfind(|s| (s.t - t).abs() < 1e-6)
            .or(Some(self.terminal()))
    }

    /// Velocity-budget closure error: |v_f| - |v_0| - (sum dv_k - losses),
    /// m/s. Small by construction; see the module docs.
    pub fn dv_identity_error(&self) -> f64 {
        let gain = self.terminal().v.norm() - self.initial().v.norm();
        let budget: f64 = self.stage_dv.iter().sum::<f64>() - self.loss_totals.total();
        gain - budget
    }
}

/// Mass attached above and including stage `active` (payload, fairing when
/// attached, upper structural+propellant masses), excluding the active
/// stage's remaining propellant.
fn dry_base_mass(vehicle: &VehicleSpec, active: usize, fairing_attached: bool, m_p: &[f64]) -> f64 {
    let mut m = vehicle.m_payload;
    if fairing_attached {
        m += vehicle.m_fairing;
    }
    for k in active..vehicle.n_stages() {
        m += vehicle.stages[k].m_s;
        if k > active {
            m += m_p[k];
        }
    }
    m
}

/// Thrust, aerodynamic and gravity force vectors (N) for one state.
pub fn forces(
    r: &Vec3,
    v: &Vec3,
    mass: f64,
    burning: Option<&StageSpec>,
    aero_stage: &StageSpec,
    e_t: &Vec3,
    env: &Environment,
) -> Result<(Vec3, Vec3, Vec3)> {
    forces_with_air(r, v, mass, burning, aero_stage, e_t, env).map(|(t, a, g, _)| (t, a, g))
}

fn forces_with_air(
    r: &Vec3,
    v: &Vec3,
    mass: f64,
    burning: Option<&StageSpec>,
    aero_stage: &StageSpec,
    e_t: &Vec3,
    env: &Environment,
) -> Result<(Vec3, Vec3, Vec3, crate::earth::AtmosphereSample)> {
    if mass <= 0.0 {
        return Err(Error::NonPositiveMass { mass, t: f64::NAN });
    }
    let altitude = r.norm() - env.earth.r_eq;
    let air = env.atmosphere.at(altitude);

    let f_thrust = match burning {
        Some(stage) => (stage.vacuum_thrust() - stage.a_exit * air.pressure) * e_t,
        None => Vec3::zeros(),
    };

    let omega_vec = Vec3::new(0.0, 0.0, env.earth.omega);
    let v_rel = v - omega_vec.cross(r);
    let f_aero = if air.density > 0.0 && v_rel.norm() > 0.0 {
        let mach = v_rel.norm() / air.speed_of_sound;
        let cd = aero_stage.cd_table.cd(mach);
        -0.5 * air.density * cd * aero_stage.s_ref * v_rel.norm() * v_rel
    } else {
        Vec3::zeros()
    };

    let f_gravity = mass * env.earth.gravity(r)?;
    Ok((f_thrust, f_aero, f_gravity, air))
}

/// Integration state layout: r(3), v(3), active-stage propellant, four loss
/// accumulators.
type OdeState = nalgebra::SVector<f64, 11>;

struct PhaseContext<'a> {
    vehicle: &'a VehicleSpec,
    env: &'a Environment,
    frame: &'a LaunchFrame,
    phase: &'a Phase,
    /// Attached-stack mass excluding the active stage's propellant, kg.
    dry_base: f64,
    /// Active (lowest attached) stage index.
    active: usize,
}

fn derivatives(ctx: &PhaseContext, t: f64, y: &OdeState, law: &dyn AttitudeLaw) -> Result<OdeState> {
    let r = Vec3::new(y[0], y[1], y[2]);
    let v = Vec3::new(y[3], y[4], y[5]);
    let m_p_active = y[6];
    let mass = ctx.dry_base + m_p_active.max(0.0);
    if mass <= 0.0 {
        return Err(Error::NonPositiveMass { mass, t });
    }

    let (theta, psi) = law.attitude(ctx.phase, t, &r, &v);
    let e_t = ctx.frame.thrust_direction(theta, psi);
    let burning = match ctx.phase.kind {
        PhaseKind::Burn { stage } => Some(&ctx.vehicle.stages[stage]),
        PhaseKind::Coast => None,
    };
    let aero_stage = &ctx.vehicle.stages[ctx.active];
    let (f_t, f_a, f_g, air) = forces_with_air(&r, &v, mass, burning, aero_stage, &e_t, ctx.env)?;

    let accel = (f_t + f_a + f_g) / mass;
    let mdot = burning.map_or(0.0, |s| s.mdot);

    // Loss rates: projections onto the inertial velocity direction, so that
    // the per-stage Tsiolkovsky increments minus the accumulated losses
    // reproduce the inertial speed gain.
    let vn = v.norm();
    let (d_pressure, d_drag, d_gravity, d_steering) = if vn > 1e-9 {
        let v_hat = v / vn;
        let d_pressure = burning.map_or(0.0, |s| air.pressure * s.a_exit / mass);
        let d_drag = -f_a.dot(&v_hat) / mass;
        let d_gravity = -f_g.dot(&v_hat) / mass;
        let d_steering = f_t.norm() * (1.0 - e_t.dot(&v_hat)).max(0.0) / mass;
        (d_pressure, d_drag, d_gravity, d_steering)
    } else {
        (0.0, 0.0, 0.0, 0.0)
    };

    let mut dy = OdeState::zeros();
    dy[0] = v.x;
    dy[1] = v.y;
    dy[2] = v.z;
    dy[3] = accel.x;
    dy[4] = accel.y;
    dy[5] = accel.z;
    dy[6] = -mdot;
    dy[7] = d_pressure;
    dy[8] = d_drag;
    dy[9] = d_gravity;
    dy[10] = d_steering;
    Ok(dy)
}

/// Classical fixed-step RK4 over one phase. Returns the dense states at the
/// step boundaries, including both endpoints. Burn phases check propellant
/// up front and land on exactly zero remaining when the phase consumes the
/// stage's full load.
pub fn integrate_phase(
    state0: &StateVector,
    phase: &Phase,
    law: &dyn AttitudeLaw,
    vehicle: &VehicleSpec,
    env: &Environment,
    frame: &LaunchFrame,
    steps: usize,
) -> Result<Vec<StateVector>> {
    let steps = steps.max(1);
    // lowest attached stage: the burning one, or (coasting) the lowest stage
    // with propellant left — separated stages carry exactly zero
    let active = match phase.kind {
        PhaseKind::Burn { stage } => stage,
        PhaseKind::Coast => state0
            .m_p
            .iter()
            .position(|&m| m > 0.0)
            .unwrap_or(vehicle.n_stages() - 1),
    };

    if let PhaseKind::Burn { stage } = phase.kind {
        let needed = vehicle.stages[stage].mdot * phase.duration;
        let available = state0.m_p[stage];
        if needed > available + 1e-6 {
            return Err(Error::PropellantDepleted {
                phase: phase.index,
                needed,
                available,
            });
        }
    }

    let ctx = PhaseContext {
        vehicle,
        env,
        frame,
        phase,
        dry_base: dry_base_mass(vehicle, active, state0.fairing_attached, &state0.m_p),
        active,
    };

    let mut y = OdeState::zeros();
    y[0] = state0.r.x;
    y[1] = state0.r.y;
    y[2] = state0.r.z;
    y[3] = state0.v.x;
    y[4] = state0.v.y;
    y[5] = state0.v.z;
    y[6] = state0.m_p[active];
    y[7] = state0.losses.pressure;
    y[8] = state0.losses.drag;
    y[9] = state0.losses.gravity;
    y[10] = state0.losses.steering;

    let h = phase.duration / steps as f64;
    let mut t = state0.t;
    let t_end = state0.t + phase.duration;
    let mut out = Vec::with_capacity(steps + 1);

    let emit = |t: f64, y: &OdeState, ctx: &PhaseContext, state0: &StateVector| -> StateVector {
        let r = Vec3::new(y[0], y[1], y[2]);
        let v = Vec3::new(y[3], y[4], y[5]);
        let (theta, psi) = law.attitude(ctx.phase, t, &r, &v);
        let mut m_p = state0.m_p.clone();
        m_p[ctx.active] = y[6].max(0.0);
        StateVector {
            t,
            r,
            v,
            mass: ctx.dry_base + m_p[ctx.active],
            m_p,
            fairing_attached: state0.fairing_attached,
            losses: VelocityLosses {
                pressure: y[7],
                drag: y[8],
                gravity: y[9],
                steering: y[10],
            },
            phase: ctx.phase.index,
            theta,
            psi,
        }
    };

    out.push(emit(t, &y, &ctx, state0));
    for step in 0..steps {
        let k1 = derivatives(&ctx, t, &y, law)?;
        let k2 = derivatives(&ctx, t + 0.5 * h, &(y + 0.5 * h * k1), law)?;
        let k3 = derivatives(&ctx, t + 0.5 * h, &(y + 0.5 * h * k2), law)?;
        let k4 = derivatives(&ctx, t + h, &(y + h * k3), law)?;
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = if step + 1 == steps {
            t_end
        } else {
            state0.t + (step + 1) as f64 * h
        };
        if step + 1 == steps {
            if let PhaseKind::Burn { stage } = phase.kind {
                // constant mass flow: remaining propellant at phase end is
                // exact up to roundoff; pin it
                let exact = state0.m_p[stage] - vehicle.stages[stage].mdot * phase.duration;
                y[6] = if exact.abs() < 1e-6 { 0.0 } else { exact };
            }
        }
        out.push(emit(t, &y, &ctx, state0));
    }
    Ok(out)
}

/// Chain [`integrate_phase`] over a full schedule, applying phase-boundary
/// continuity, stage/fairing jettisons at phase ends, and recording events,
/// per-stage velocity increments and loss totals.
pub fn simulate(
    vehicle: &VehicleSpec,
    schedule: &PhaseSchedule,
    law: &dyn AttitudeLaw,
    env: &Environment,
    frame: &LaunchFrame,
    site: &crate::earth::GeodeticPoint,
    steps_per_phase: usize,
) -> Result<Trajectory> {
    let (r0, v0) = env.earth.launch_initial_state(site);
    let m_p0: Vec<f64> = vehicle.stages.iter().map(|s| s.m_p).collect();
    let mut state = StateVector {
        t: 0.0,
        r: r0,
        v: v0,
        mass: vehicle.liftoff_mass(),
        m_p: m_p0,
        fairing_attached: vehicle.m_fairing > 0.0,
        losses: VelocityLosses::default(),
        phase: 0,
        theta: std::f64::consts::FRAC_PI_2,
        psi: 0.0,
    };

    let mut samples: Vec<StateVector> = Vec::new();
    let mut phase_ranges = Vec::with_capacity(schedule.n_phases());
    let mut events = Vec::new();
    // realized increment per stage, accumulated phase by phase so mass drops
    // at phase boundaries (fairing separation) do not inflate the ratio
    let mut stage_dv = vec![0.0; vehicle.n_stages()];

    for phase in &schedule.phases {
        let mass_at_phase_start = match phase.kind {
            PhaseKind::Burn { stage } => {
                dry_base_mass(vehicle, stage, state.fairing_attached, &state.m_p) + state.m_p[stage]
            }
            PhaseKind::Coast => 0.0,
        };
        let mut phase_samples = integrate_phase(&state, phase, law, vehicle, env, frame, steps_per_phase)?;
        state = phase_samples.last().expect("phase produced samples").clone();
        if let PhaseKind::Burn { stage } = phase.kind {
            stage_dv[stage] +=
                vehicle.stages[stage].v_ex * (mass_at_phase_start / state.mass).ln();
        }

        let start = if samples.is_empty() {
            samples.append(&mut phase_samples);
            0
        } else {
            // boundary sample continues the previous phase's end state
            samples.extend(phase_samples.into_iter().skip(1));
            phase_ranges.last().map(|&(_, e)| e).unwrap_or(0)
        };
        phase_ranges.push((start, samples.len() - 1));

        for event in &phase.end_events {
            events.push((*event, state.t));
            match event {
                FlightEvent::StageSeparation(k) => {
                    state.m_p[*k] = 0.0;
                    state.mass = dry_base_mass(vehicle, k + 1, state.fairing_attached, &state.m_p)
                        + state.m_p[k + 1];
                }
                FlightEvent::FairingSeparation => {
                    state.fairing_attached = false;
                    state.mass -= vehicle.m_fairing;
                }
                FlightEvent::OrbitInsertion => {}
            }
        }
        // reflect post-event mass in the boundary sample of the next phase
    }

    let loss_totals = samples.last().expect("non-empty trajectory").losses;
    Ok(Trajectory {
        samples,
        phase_ranges,
        events,
        stage_dv,
        loss_totals,
    })
}
