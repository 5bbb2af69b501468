//! Vehicle description: per-stage propulsion, structure and aerodynamics,
//! plus payload and fairing masses.

use crate::error::{Error, Result};

/// Piecewise-linear drag coefficient over Mach number, clamped at both ends.
#[derive(Debug, Clone, PartialEq)]
pub struct DragTable {
    points: Vec<(f64, f64)>,
}

impl DragTable {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("drag table needs at least one point".into()));
        }
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::InvalidSpec(format!(
                    "drag table Mach values must be strictly increasing ({} then {})",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(DragTable { points })
    }

    /// Subsonic 0.35, transonic peak 1.1 near Mach 1.2, relaxing back to
    /// 0.35 by Mach 5.
    pub fn default_profile() -> Self {
        DragTable {
            points: vec![(0.0, 0.35), (0.8, 0.35), (1.2, 1.1), (5.0, 0.35)],
        }
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn cd(&self, mach: f64) -> f64 {
        let pts = &self.points;
        if mach <= pts[0].0 {
            return pts[0].1;
        }
        if mach >= pts[pts.len() - 1].0 {
            return pts[pts.len() - 1].1;
        }
        for w in pts.windows(2) {
            if mach <= w[1].0 {
                let f = (mach - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + f * (w[1].1 - w[0].1);
            }
        }
        pts[pts.len() - 1].1
    }
}

/// One stage of the launch vehicle.
#[derive(Debug, Clone, PartialEq)]
pub struct StageSpec {
    /// Effective exhaust velocity, m/s.
    pub v_ex: f64,
    /// Propellant mass flow, kg/s.
    pub mdot: f64,
    /// Nozzle exit area, m^2.
    pub a_exit: f64,
    /// Structural mass, kg.
    pub m_s: f64,
    /// Propellant mass, kg.
    pub m_p: f64,
    /// Aerodynamic reference area, m^2.
    pub s_ref: f64,
    /// Drag coefficient over Mach.
    pub cd_table: DragTable,
}

impl StageSpec {
    /// Structural mass fraction m_s / (m_s + m_p).
    pub fn eps(&self) -> f64 {
        self.m_s / (self.m_s + self.m_p)
    }

    /// Full-burn duration m_p / mdot, s.
    pub fn burn_duration(&self) -> f64 {
        self.m_p / self.mdot
    }

    /// Vacuum thrust v_ex * mdot, N.
    pub fn vacuum_thrust(&self) -> f64 {
        self.v_ex * self.mdot
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("v_ex", self.v_ex),
            ("mdot", self.mdot),
            ("m_s", self.m_s),
            ("m_p", self.m_p),
            ("s_ref", self.s_ref),
        ] {
            if !(value > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "stage field {name} must be positive, got {value}"
                )));
            }
        }
        if self.a_exit < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "nozzle exit area must be non-negative, got {}",
                self.a_exit
            )));
        }
        Ok(())
    }
}

/// Complete vehicle: stages ordered bottom-up, payload and fairing masses.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSpec {
    /// Stage 1 first.
    pub stages: Vec<StageSpec>,
    /// Payload mass, kg.
    pub m_payload: f64,
    /// Fairing mass, kg (rides until the fairing separation event).
    pub m_fairing: f64,
}

impl VehicleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidSpec("vehicle needs at least one stage".into()));
        }
        if !(self.m_payload > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "payload mass must be positive, got {}",
                self.m_payload
            )));
        }
        if self.m_fairing < 0.0 {
            return Err(Error::InvalidSpec(format!(
                "fairing mass must be non-negative, got {}",
                self.m_fairing
            )));
        }
        for stage in &self.stages {
            stage.validate()?;
        }
        Ok(())
    }

    pub fn n_stages(&self) -> usize {
        self.stages.len()
    }

    /// Total mass on the pad, kg.
    pub fn liftoff_mass(&self) -> f64 {
        self.m_payload
            + self.m_fairing
            + self.stages.iter().map(|s| s.m_s + s.m_p).sum::<f64>()
    }

    /// Rebuild the vehicle with new structural masses, holding each stage's
    /// structural mass fraction fixed (so m_p follows from m_s).
    pub fn with_structural_masses(&self, m_s: &[f64]) -> Result<VehicleSpec> {
        if m_s.len() != self.stages.len() {
            return Err(Error::DimensionMismatch {
                expected: self.stages.len(),
                got: m_s.len(),
            });
        }
        let mut out = self.clone();
        for (stage, &ms) in out.stages.iter_mut().zip(m_s) {
            let eps = stage.eps();
            stage.m_s = ms;
            stage.m_p = ms * (1.0 - eps) / eps;
        }
        Ok(out)
    }

    pub fn with_payload(&self, m_payload: f64) -> VehicleSpec {
        let mut out = self.clone();
        out.m_payload = m_payload;
        out
    }

    /// Reference design used by the bundled scenarios (three-stage vehicle,
    /// 3000 kg payload, 900 kg fairing).
    pub fn reference_kslv2() -> VehicleSpec {
        let cd = DragTable::default_profile();
        VehicleSpec {
            stages: vec![
                StageSpec {
                    v_ex: 2923.0,
                    mdot: 1017.0,
                    a_exit: 3.6,
                    m_s: 14_900.0,
                    m_p: 128_200.0,
                    s_ref: 9.6,
                    cd_table: cd.clone(),
                },
                StageSpec {
                    v_ex: 3093.0,
                    mdot: 240.0,
                    a_exit: 0.9,
                    m_s: 5300.0,
                    m_p: 36_600.0,
                    s_ref: 5.3,
                    cd_table: cd.clone(),
                },
                StageSpec {
                    v_ex: 3188.0,
                    mdot: 21.5,
                    a_exit: 0.2,
                    m_s: 1800.0,
                    m_p: 10_800.0,
                    s_ref: 5.3,
                    cd_table: cd,
                },
            ],
            m_payload: 3000.0,
            m_fairing: 900.0,
        }
    }
}
