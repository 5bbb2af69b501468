//! Thrust-direction control: the launch-centered inertial frame frozen at
//! ignition, pitch/yaw node profiles with linear interpolation, and the
//! attitude-law abstraction the integrator consumes.

use crate::earth::{EarthModel, GeodeticPoint};
use crate::error::{Error, Result};
use crate::phases::{Phase, PhaseSchedule};
use crate::Vec3;

/// Launch-centered inertial frame, frozen at the ignition epoch:
/// x = horizontal along the launch azimuth, z = local up at the site,
/// y completes the right-handed triad. Pitch is measured from the x axis
/// toward z, yaw out of the xz plane toward y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaunchFrame {
    x: Vec3,
    y: Vec3,
    z: Vec3,
}

impl LaunchFrame {
    /// Build the frame for a site and a launch azimuth (rad, clockwise from
    /// north).
    pub fn new(site: &GeodeticPoint, azimuth: f64, earth: &EarthModel) -> LaunchFrame {
        let r = earth.geodetic_to_ecef(site);
        let up = r.normalize();
        let east = Vec3::new(0.0, 0.0, 1.0).cross(&up);
        let east = if east.norm() < 1e-12 {
            // polar site: pick east along +y by convention
            Vec3::new(0.0, 1.0, 0.0)
        } else {
            east.normalize()
        };
        let north = up.cross(&east);
        let x = azimuth.sin() * east + azimuth.cos() * north;
        let y = up.cross(&x);
        LaunchFrame { x, y, z: up }
    }

    /// Unit thrust direction in inertial axes for pitch `theta` and yaw
    /// `psi` (rad).
    pub fn thrust_direction(&self, theta: f64, psi: f64) -> Vec3 {
        theta.cos() * psi.cos() * self.x + psi.sin() * self.y + theta.sin() * psi.cos() * self.z
    }

    /// Pitch/yaw of an inertial direction, inverse of
    /// [`LaunchFrame::thrust_direction`] for unit input.
    pub fn angles_of(&self, dir: &Vec3) -> (f64, f64) {
        let u = dir.normalize();
        let psi = u.dot(&self.y).clamp(-1.0, 1.0).asin();
        let theta = u.dot(&self.z).atan2(u.dot(&self.x));
        (theta, psi)
    }

    pub fn x_axis(&self) -> Vec3 {
        self.x
    }
    pub fn y_axis(&self) -> Vec3 {
        self.y
    }
    pub fn z_axis(&self) -> Vec3 {
        self.z
    }
}

/// Attitude command source sampled by the integrator at every stage of the
/// Runge-Kutta step. Implementations must be pure.
pub trait AttitudeLaw {
    /// Pitch/yaw (rad) at absolute time `t` inside `phase`, given the current
    /// inertial state.
    fn attitude(&self, phase: &Phase, t: f64, r: &Vec3, v: &Vec3) -> (f64, f64);
}

/// Piecewise-linear pitch/yaw profile over phase boundaries: the angle at any
/// interior time interpolates between the adjacent boundary nodes, so the
/// profile is continuous across phases by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProfile {
    /// Attitude at ignition (t = 0), rad.
    pub initial: (f64, f64),
    /// Attitude at the end of each phase, rad; length equals the phase count.
    pub end_nodes: Vec<(f64, f64)>,
    /// Phase start times plus final time, cached from the schedule.
    boundary_times: Vec<f64>,
}

impl ControlProfile {
    pub fn new(
        schedule: &PhaseSchedule,
        initial: (f64, f64),
        end_nodes: Vec<(f64, f64)>,
    ) -> Result<ControlProfile> {
        if end_nodes.len() != schedule.n_phases() {
            return Err(Error::DimensionMismatch {
                expected: schedule.n_phases(),
                got: end_nodes.len(),
            });
        }
        let mut profile = ControlProfile {
            initial,
            end_nodes,
            boundary_times: schedule.boundary_times(),
        };
        // fixed-attitude phases pin both of their boundary nodes
        for phase in &schedule.phases {
            if let Some(fixed) = phase.fixed_attitude {
                profile.end_nodes[phase.index] = fixed;
                if phase.index == 0 {
                    profile.initial = fixed;
                }
            }
        }
        Ok(profile)
    }

    /// Profile holding a single attitude over the whole flight.
    pub fn constant(schedule: &PhaseSchedule, theta: f64, psi: f64) -> ControlProfile {
        ControlProfile::new(schedule, (theta, psi), vec![(theta, psi); schedule.n_phases()])
            .expect("node count matches by construction")
    }

    fn node_at_start(&self, phase_index: usize) -> (f64, f64) {
        if phase_index == 0 {
            self.initial
        } else {
            self.end_nodes[phase_index - 1]
        }
    }
}

impl AttitudeLaw for ControlProfile {
    fn attitude(&self, phase: &Phase, t: f64, _r: &Vec3, _v: &Vec3) -> (f64, f64) {
        let t0 = self.boundary_times[phase.index];
        let t1 = self.boundary_times[phase.index + 1];
        let f = if t1 > t0 {
            ((t - t0) / (t1 - t0)).clamp(0.0, 1.0)
        } else {
            1.0
        };
        let (th0, ps0) = self.node_at_start(phase.index);
        let (th1, ps1) = self.end_nodes[phase.index];
        (th0 + f * (th1 - th0), ps0 + f * (ps1 - ps0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phases::PhaseConfig;
    use crate::vehicle::VehicleSpec;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use std::f64::consts::FRAC_PI_2;

    fn frame() -> LaunchFrame {
        let earth = EarthModel::default();
        let site = GeodeticPoint::from_degrees(34.4, 127.5, 140.0).unwrap();
        LaunchFrame::new(&site, 167.85_f64.to_radians(), &earth)
    }

    #[test]
    fn vertical_pitch_is_local_up() {
        let earth = EarthModel::default();
        let site = GeodeticPoint::from_degrees(34.4, 127.5, 140.0).unwrap();
        let f = frame();
        let up = earth.geodetic_to_ecef(&site).normalize();
        let e_t = f.thrust_direction(FRAC_PI_2, 0.0);
        assert_relative_eq!(e_t, up, max_relative = 1e-12);
    }

    #[test]
    fn zero_pitch_is_downrange_horizontal() {
        let f = frame();
        let e_t = f.thrust_direction(0.0, 0.0);
        assert_relative_eq!(e_t, f.x_axis(), max_relative = 1e-12);
        assert_abs_diff_eq!(e_t.dot(&f.z_axis()), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn thrust_direction_is_unit_and_invertible() {
        let f = frame();
        for &(theta, psi) in &[(0.3, 0.1), (-0.7, -0.2), (1.2, 0.4), (0.0, 0.0)] {
            let e_t = f.thrust_direction(theta, psi);
            assert_abs_diff_eq!(e_t.norm(), 1.0, epsilon = 1e-12);
            let (th, ps) = f.angles_of(&e_t);
            assert_abs_diff_eq!(th, theta, epsilon = 1e-12);
            assert_abs_diff_eq!(ps, psi, epsilon = 1e-12);
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        let f = frame();
        assert_abs_diff_eq!(f.x_axis().dot(&f.y_axis()), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.x_axis().dot(&f.z_axis()), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(f.y_axis().dot(&f.z_axis()), 0.0, epsilon = 1e-14);
        assert_relative_eq!(f.x_axis().cross(&f.y_axis()), f.z_axis(), max_relative = 1e-12);
    }

    #[test]
    fn profile_interpolates_linearly_and_is_continuous() {
        let vehicle = VehicleSpec::reference_kslv2();
        let schedule = PhaseSchedule::build(&vehicle, &PhaseConfig::default()).unwrap();
        let n = schedule.n_phases();
        let nodes: Vec<(f64, f64)> = (0..n).map(|i| (1.0 - 0.1 * i as f64, 0.01 * i as f64)).collect();
        let profile = ControlProfile::new(&schedule, (FRAC_PI_2, 0.0), nodes).unwrap();
        let times = schedule.boundary_times();

        // vertical-rise phase is pinned to 90 deg
        let (th, _) = profile.attitude(&schedule.phases[0], 0.5 * times[1], &Vec3::zeros(), &Vec3::zeros());
        assert_abs_diff_eq!(th, FRAC_PI_2, epsilon = 1e-15);

        // continuity at interior boundaries
        for p in 1..n {
            let (a, b) = (
                profile.attitude(&schedule.phases[p - 1], times[p], &Vec3::zeros(), &Vec3::zeros()),
                profile.attitude(&schedule.phases[p], times[p], &Vec3::zeros(), &Vec3::zeros()),
            );
            assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-12);
            assert_abs_diff_eq!(a.1, b.1, epsilon = 1e-12);
        }

        // midpoint of a free phase is the node average
        let p = 2;
        let mid = 0.5 * (times[p] + times[p + 1]);
        let (th, ps) = profile.attitude(&schedule.phases[p], mid, &Vec3::zeros(), &Vec3::zeros());
        let (th0, ps0) = profile.end_nodes[p - 1];
        let (th1, ps1) = profile.end_nodes[p];
        assert_abs_diff_eq!(th, 0.5 * (th0 + th1), epsilon = 1e-12);
        assert_abs_diff_eq!(ps, 0.5 * (ps0 + ps1), epsilon = 1e-12);
    }
}
