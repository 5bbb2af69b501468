//! Flight phases: ordered time intervals between flight events. Burn-phase
//! durations follow from propellant mass and flow rate; coast durations are
//! fixed inputs. Events fire only at phase ends.

use crate::error::{Error, Result};
use crate::vehicle::VehicleSpec;

/// Event at the end of a phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlightEvent {
    /// Jettison the structural mass of stage `k` (0-based).
    StageSeparation(usize),
    FairingSeparation,
    OrbitInsertion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseKind {
    /// Stage `k` (0-based) burning at constant mass flow.
    Burn { stage: usize },
    Coast,
}

/// One flight phase.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub index: usize,
    pub kind: PhaseKind,
    /// Duration, s.
    pub duration: f64,
    pub end_events: Vec<FlightEvent>,
    /// Member of the gravity-turn set (zero angle of attack enforced at the
    /// phase end by the optimizer).
    pub gravity_turn: bool,
    /// Fixed pitch/yaw for the whole phase (vertical rise), rad.
    pub fixed_attitude: Option<(f64, f64)>,
}

/// How the flight is cut into phases. All vehicle-independent knobs live
/// here; durations are derived per vehicle when the schedule is built.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    /// Initial vertical-rise duration (pitch held at 90 deg), s. Consumes
    /// stage-1 propellant.
    pub vertical_rise_s: f64,
    /// Number of attitude sub-phases per stage burn (after the vertical rise
    /// for stage 1).
    pub subphases: Vec<usize>,
    /// Fixed-duration coasts inserted after the separation of a stage
    /// (0-based stage index, duration s).
    pub coasts: Vec<(usize, f64)>,
    /// Stage whose burn carries the fairing separation (0-based).
    pub fairing_stage: usize,
    /// Sub-phase of that stage at whose end the fairing separates (1-based).
    pub fairing_subphase: usize,
    /// Stage flown as a gravity turn (its sub-phases join the gravity-turn
    /// set), 0-based.
    pub gravity_turn_stage: usize,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        PhaseConfig {
            vertical_rise_s: 8.0,
            subphases: vec![3, 3, 3],
            coasts: vec![(1, 100.0)],
            fairing_stage: 1,
            fairing_subphase: 1,
            gravity_turn_stage: 0,
        }
    }
}

/// Ordered phases covering launch to orbit insertion.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub phases: Vec<Phase>,
}

impl PhaseSchedule {
    /// Build the schedule for a vehicle. Burn-phase durations are derived
    /// from the vehicle's propellant masses, so the schedule must be rebuilt
    /// whenever stage masses change.
    pub fn build(vehicle: &VehicleSpec, config: &PhaseConfig) -> Result<PhaseSchedule> {
        if config.subphases.len() != vehicle.n_stages() {
            return Err(Error::DimensionMismatch {
                expected: vehicle.n_stages(),
                got: config.subphases.len(),
            });
        }
        if config.fairing_stage >= vehicle.n_stages() {
            return Err(Error::InvalidSpec(format!(
                "fairing stage {} out of range",
                config.fairing_stage
            )));
        }
        if config.fairing_subphase == 0 || config.fairing_subphase > config.subphases[config.fairing_stage]
        {
            return Err(Error::InvalidSpec(format!(
                "fairing sub-phase {} out of range for stage {}",
                config.fairing_subphase, config.fairing_stage
            )));
        }
        let mut phases = Vec::new();
        for (stage_idx, stage) in vehicle.stages.iter().enumerate() {
            let mut remaining = stage.burn_duration();
            if stage_idx == 0 {
                if remaining <= config.vertical_rise_s {
                    return Err(Error::InvalidSpec(format!(
                        "stage 1 burns only {remaining:.2} s, shorter than the {:.2} s vertical rise",
                        config.vertical_rise_s
                    )));
                }
                phases.push(Phase {
                    index: 0,
                    kind: PhaseKind::Burn { stage: 0 },
                    duration: config.vertical_rise_s,
                    end_events: vec![],
                    gravity_turn: false,
                    fixed_attitude: Some((std::f64::consts::FRAC_PI_2, 0.0)),
                });
                remaining -= config.vertical_rise_s;
            }
            let n_sub = config.subphases[stage_idx].max(1);
            let sub_duration = remaining / n_sub as f64;
            for sub in 1..=n_sub {
                let mut end_events = Vec::new();
                if stage_idx == config.fairing_stage && sub == config.fairing_subphase {
                    end_events.push(FlightEvent::FairingSeparation);
                }
                if sub == n_sub {
                    if stage_idx + 1 < vehicle.n_stages() {
                        end_events.push(FlightEvent::StageSeparation(stage_idx));
                    } else {
                        end_events.push(FlightEvent::OrbitInsertion);
                    }
                }
                phases.push(Phase {
                    index: phases.len(),
                    kind: PhaseKind::Burn { stage: stage_idx },
                    duration: sub_duration,
                    end_events,
                    gravity_turn: stage_idx == config.gravity_turn_stage,
                    fixed_attitude: None,
                });
            }
            for &(after_stage, coast_s) in &config.coasts {
                if after_stage == stage_idx && coast_s > 0.0 {
                    phases.push(Phase {
                        index: phases.len(),
                        kind: PhaseKind::Coast,
                        duration: coast_s,
                        end_events: vec![],
                        gravity_turn: false,
                        fixed_attitude: None,
                    });
                }
            }
        }
        Ok(PhaseSchedule { phases })
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    /// Total flight time, s.
    pub fn total_duration(&self) -> f64 {
        self.phases.iter().map(|p| p.duration).sum()
    }

    /// Start time of each phase plus the final time (length n_phases + 1).
    pub fn boundary_times(&self) -> Vec<f64> {
        let mut times = Vec::with_capacity(self.phases.len() + 1);
        let mut t = 0.0;
        times.push(t);
        for p in &self.phases {
            t += p.duration;
            times.push(t);
        }
        times
    }

    /// Phase indices whose end-node attitude is a free optimization variable
    /// (everything except fixed-attitude phases).
    pub fn free_attitude_phases(&self) -> Vec<usize> {
        self.phases
            .iter()
            .filter(|p| p.fixed_attitude.is_none())
            .map(|p| p.index)
            .collect()
    }

    /// Phase indices in the gravity-turn set.
    pub fn gravity_turn_phases(&self) -> Vec<usize> {
        self.phases
            .iter()
            .filter(|p| p.gravity_turn)
            .map(|p| p.index)
            .collect()
    }
}
