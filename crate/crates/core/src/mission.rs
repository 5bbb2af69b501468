//! Mission definition: launch site, circular target orbit, and the optional
//! operational constraints (dynamic pressure, impact-point bounds).

use crate::earth::{EarthModel, GeodeticPoint};
use crate::error::{Error, Result};

/// Circular target orbit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetOrbit {
    /// Altitude above the equatorial radius, m.
    pub altitude: f64,
    /// Inclination, rad.
    pub inclination: f64,
}

/// Impact-point box for one stage-separation event. Bounds left `None` are
/// inactive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IipBound {
    /// 0-based stage whose separation state is constrained.
    pub stage: usize,
    pub lat_min: Option<f64>,
    pub lat_max: Option<f64>,
    pub lon_min: Option<f64>,
    pub lon_max: Option<f64>,
}

/// Full mission description consumed by the optimizer and the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct MissionSpec {
    pub site: GeodeticPoint,
    pub target: TargetOrbit,
    /// Dynamic-pressure ceiling, Pa. `None` leaves the path unconstrained.
    pub q_max: Option<f64>,
    pub iip_bounds: Vec<IipBound>,
    /// Launch azimuth, rad clockwise from north. `None` derives the
    /// southward prograde azimuth from the target inclination.
    pub launch_azimuth: Option<f64>,
}

impl MissionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.target.altitude > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "target altitude must be positive, got {}",
                self.target.altitude
            )));
        }
        if !(0.0..=std::f64::consts::PI).contains(&self.target.inclination) {
            return Err(Error::InvalidSpec(format!(
                "inclination {} rad outside [0, pi]",
                self.target.inclination
            )));
        }
        if let Some(q) = self.q_max {
            if !(q > 0.0) {
                return Err(Error::InvalidSpec(format!("q_max must be positive, got {q}")));
            }
        }
        for b in &self.iip_bounds {
            if let (Some(lo), Some(hi)) = (b.lat_min, b.lat_max) {
                if lo > hi {
                    return Err(Error::InvalidSpec("IIP latitude bounds crossed".into()));
                }
            }
            if let (Some(lo), Some(hi)) = (b.lon_min, b.lon_max) {
                if lo > hi {
                    return Err(Error::InvalidSpec("IIP longitude bounds crossed".into()));
                }
            }
        }
        Ok(())
    }

    /// Required terminal altitude, m.
    pub fn h_req(&self) -> f64 {
        self.target.altitude
    }

    /// Required terminal flight path angle (circular orbit), rad.
    pub fn gamma_req(&self) -> f64 {
        0.0
    }

    /// Required terminal inertial speed, m/s.
    pub fn v_req(&self, earth: &EarthModel) -> f64 {
        (earth.mu / (earth.r_eq + self.target.altitude)).sqrt()
    }

    /// Required inclination, rad.
    pub fn i_req(&self) -> f64 {
        self.target.inclination
    }

    /// Launch azimuth (rad from north): the explicit value when given,
    /// otherwise the southward prograde azimuth reaching the target
    /// inclination from the site latitude.
    pub fn azimuth(&self) -> f64 {
        if let Some(az) = self.launch_azimuth {
            return az;
        }
        let ratio = self.target.inclination.cos() / self.site.latitude.cos();
        let east = ratio.clamp(-1.0, 1.0).asin();
        std::f64::consts::PI - east
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mission() -> MissionSpec {
        MissionSpec {
            site: GeodeticPoint::from_degrees(34.4, 127.5, 140.0).unwrap(),
            target: TargetOrbit {
                altitude: 300_000.0,
                inclination: 80.0_f64.to_radians(),
            },
            q_max: None,
            iip_bounds: vec![],
            launch_azimuth: None,
        }
    }

    #[test]
    fn circular_orbit_speed() {
        let earth = EarthModel::default();
        assert_relative_eq!(mission().v_req(&earth), 7725.76, max_relative = 1e-5);
    }

    #[test]
    fn derived_azimuth_is_southward_prograde() {
        let m = mission();
        let az = m.azimuth();
        assert!(az > std::f64::consts::FRAC_PI_2 && az < std::f64::consts::PI);
        // inclination recovered from cos i = cos(lat) sin(az)
        let i = (m.site.latitude.cos() * az.sin()).acos();
        assert_relative_eq!(i, m.target.inclination, max_relative = 1e-9);
    }

    #[test]
    fn validation_rejects_crossed_bounds() {
        let mut m = mission();
        m.iip_bounds.push(IipBound {
            stage: 0,
            lon_min: Some(1.0),
            lon_max: Some(0.5),
            ..IipBound::default()
        });
        assert!(m.validate().is_err());
    }
}
