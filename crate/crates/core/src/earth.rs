//! Physical environment: Earth constants, J2 gravity, the 1976 U.S. standard
//! atmosphere, and the coordinate/geodesy transforms shared by every other
//! module.
//!
//! Geodesy is spherical (geocentric latitude, altitude above the equatorial
//! radius); the oblateness enters only through the J2 gravity term.

use crate::error::{Error, Result};
use crate::Vec3;

/// Standard gravitational parameter of the Earth, m^3/s^2.
pub const MU_EARTH: f64 = 3.986004418e14;
/// Equatorial radius, m.
pub const R_EQUATOR: f64 = 6_378_137.0;
/// Second zonal harmonic coefficient.
pub const J2_EARTH: f64 = 1.08263e-3;
/// Rotation rate, rad/s.
pub const OMEGA_EARTH: f64 = 7.2921159e-5;
/// Standard gravity, m/s^2.
pub const G0: f64 = 9.80665;
/// Specific gas constant of dry air, J/(kg K).
pub const R_AIR: f64 = 287.053;
/// Ratio of specific heats of air.
pub const GAMMA_AIR: f64 = 1.4;

/// Earth model constants. `Default` yields the standard set above.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthModel {
    /// Gravitational parameter, m^3/s^2.
    pub mu: f64,
    /// Equatorial radius, m.
    pub r_eq: f64,
    /// J2 coefficient, dimensionless.
    pub j2: f64,
    /// Rotation rate, rad/s.
    pub omega: f64,
    /// Standard gravity, m/s^2.
    pub g0: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        EarthModel {
            mu: MU_EARTH,
            r_eq: R_EQUATOR,
            j2: J2_EARTH,
            omega: OMEGA_EARTH,
            g0: G0,
        }
    }
}

impl EarthModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.r_eq > 0.0 && self.j2 > 0.0 && self.omega > 0.0 && self.g0 > 0.0)
        {
            return Err(Error::InvalidSpec(
                "Earth model fields must be strictly positive".into(),
            ));
        }
        if self.j2 >= 0.01 {
            return Err(Error::InvalidSpec(format!(
                "J2 = {} is out of range (expected < 0.01)",
                self.j2
            )));
        }
        Ok(())
    }

    /// Central plus J2-perturbed gravitational acceleration at an inertial
    /// position, expressed in the same inertial axes.
    pub fn gravity(&self, r: &Vec3) -> Result<Vec3> {
        let rn = r.norm();
        if rn <= 0.5 * self.r_eq {
            return Err(Error::DegenerateRadius { radius: rn });
        }
        let central = -(self.mu / (rn * rn * rn)) * r;
        let zr = r.z / rn;
        let k = 1.5 * self.j2 * (self.mu / (rn * rn)) * (self.r_eq / rn).powi(2);
        let perturbation = Vec3::new(
            k * (5.0 * zr * zr - 1.0) * r.x / rn,
            k * (5.0 * zr * zr - 1.0) * r.y / rn,
            k * (5.0 * zr * zr - 3.0) * r.z / rn,
        );
        Ok(central + perturbation)
    }

    /// Rotate an inertial state into Earth-fixed axes at time `t` since the
    /// epoch at which the two frames coincide. The velocity picks up the
    /// usual transport term.
    pub fn eci_to_ecef(&self, r: &Vec3, v: &Vec3, t: f64) -> (Vec3, Vec3) {
        let omega_vec = Vec3::new(0.0, 0.0, self.omega);
        let r_ecef = rot_z(-self.omega * t) * r;
        let v_ecef = rot_z(-self.omega * t) * (v - omega_vec.cross(r));
        (r_ecef, v_ecef)
    }

    /// Inverse of [`EarthModel::eci_to_ecef`].
    pub fn ecef_to_eci(&self, r_ecef: &Vec3, v_ecef: &Vec3, t: f64) -> (Vec3, Vec3) {
        let omega_vec = Vec3::new(0.0, 0.0, self.omega);
        let r = rot_z(self.omega * t) * r_ecef;
        let v = rot_z(self.omega * t) * v_ecef + omega_vec.cross(&r);
        (r, v)
    }

    /// Spherical-Earth geodetic conversion: geocentric latitude, longitude in
    /// (-pi, pi], altitude above the equatorial radius.
    pub fn ecef_to_geodetic(&self, r_ecef: &Vec3) -> Result<GeodeticPoint> {
        let rn = r_ecef.norm();
        if rn == 0.0 {
            return Err(Error::ZeroVector);
        }
        let latitude = (r_ecef.z / rn).clamp(-1.0, 1.0).asin();
        let longitude = normalize_longitude(r_ecef.y.atan2(r_ecef.x));
        GeodeticPoint::new(latitude, longitude, rn - self.r_eq)
    }

    /// Inverse of [`EarthModel::ecef_to_geodetic`].
    pub fn geodetic_to_ecef(&self, point: &GeodeticPoint) -> Vec3 {
        let rn = self.r_eq + point.altitude;
        Vec3::new(
            rn * point.latitude.cos() * point.longitude.cos(),
            rn * point.latitude.cos() * point.longitude.sin(),
            rn * point.latitude.sin(),
        )
    }

    /// Inertial position and velocity of a surface-fixed launch site at the
    /// frame-alignment epoch: the velocity is the Earth-rotation velocity
    /// omega x r.
    pub fn launch_initial_state(&self, site: &GeodeticPoint) -> (Vec3, Vec3) {
        let r = self.geodetic_to_ecef(site);
        let omega_vec = Vec3::new(0.0, 0.0, self.omega);
        (r, omega_vec.cross(&r))
    }
}

fn rot_z(angle: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Map an angle to (-pi, pi].
pub fn normalize_longitude(lon: f64) -> f64 {
    let mut x = lon.rem_euclid(std::f64::consts::TAU);
    if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

/// Geocentric latitude / longitude / altitude triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodeticPoint {
    /// Geocentric latitude, rad, in [-pi/2, pi/2].
    pub latitude: f64,
    /// Longitude, rad, normalized to (-pi, pi].
    pub longitude: f64,
    /// Altitude above the equatorial radius, m.
    pub altitude: f64,
}

impl GeodeticPoint {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        if !(-std::f64::consts::FRAC_PI_2..=std::f64::consts::FRAC_PI_2).contains(&latitude) {
            return Err(Error::InvalidSpec(format!(
                "latitude {latitude} rad outside [-pi/2, pi/2]"
            )));
        }
        Ok(GeodeticPoint {
            latitude,
            longitude: normalize_longitude(longitude),
            altitude,
        })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64, altitude: f64) -> Result<Self> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians(), altitude)
    }
}

/// Atmospheric state at one altitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtmosphereSample {
    /// Kinetic temperature, K.
    pub temperature: f64,
    /// Static pressure, Pa.
    pub pressure: f64,
    /// Density, kg/m^3.
    pub density: f64,
    /// Speed of sound, m/s.
    pub speed_of_sound: f64,
}

/// 1976 U.S. standard atmosphere, layered profile for 0-86 km geometric
/// altitude with the geometric-to-geopotential conversion; hard vacuum
/// (p = rho = 0) above the cutoff.
#[derive(Debug, Clone)]
pub struct Atmosphere {
    /// Base geopotential altitudes of the seven layers, m'.
    base_altitude: [f64; 7],
    /// Temperature lapse rates, K/m'.
    lapse: [f64; 7],
    /// Base temperatures, K.
    base_temperature: [f64; 7],
    /// Base pressures, Pa (computed recursively from sea level).
    base_pressure: [f64; 7],
    /// Top of the profile in geopotential altitude, m'.
    top_geopotential: f64,
    /// Vacuum cutoff in geometric altitude, m.
    vacuum_cutoff: f64,
    /// Effective Earth radius of the geopotential conversion, m.
    r_geopotential: f64,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Self::standard()
    }
}

impl Atmosphere {
    /// Build the standard profile, integrating the hydrostatic relation layer
    /// by layer from sea level.
    pub fn standard() -> Self {
        let base_altitude = [0.0, 11_000.0, 20_000.0, 32_000.0, 47_000.0, 51_000.0, 71_000.0];
        let lapse = [-6.5e-3, 0.0, 1.0e-3, 2.8e-3, 0.0, -2.8e-3, -2.0e-3];
        let mut base_temperature = [0.0; 7];
        let mut base_pressure = [0.0; 7];
        base_temperature[0] = 288.15;
        base_pressure[0] = 101_325.0;
        for i in 1..7 {
            let dh = base_altitude[i] - base_altitude[i - 1];
            base_temperature[i] = base_temperature[i - 1] + lapse[i - 1] * dh;
            base_pressure[i] = pressure_step(
                base_pressure[i - 1],
                base_temperature[i - 1],
                lapse[i - 1],
                dh,
            );
        }
        Atmosphere {
            base_altitude,
            lapse,
            base_temperature,
            base_pressure,
            top_geopotential: 84_852.0,
            vacuum_cutoff: 86_000.0,
            r_geopotential: 6_356_766.0,
        }
    }

    /// Geometric vacuum cutoff altitude, m.
    pub fn vacuum_cutoff(&self) -> f64 {
        self.vacuum_cutoff
    }

    /// Sample the atmosphere at a geometric altitude (m). Total function:
    /// inputs below -1000 m are clamped, anything at or above the vacuum
    /// cutoff returns zero pressure and density (temperature and speed of
    /// sound are held at the profile top so Mach stays well defined).
    pub fn at(&self, altitude: f64) -> AtmosphereSample {
        let z = altitude.max(-1000.0);
        if z >= self.vacuum_cutoff {
            let top = self.sample_geopotential(self.top_geopotential);
            return AtmosphereSample {
                temperature: top.temperature,
                pressure: 0.0,
                density: 0.0,
                speed_of_sound: top.speed_of_sound,
            };
        }
        let h = self.r_geopotential * z / (self.r_geopotential + z);
        self.sample_geopotential(h.min(self.top_geopotential))
    }

    fn sample_geopotential(&self, h: f64) -> AtmosphereSample {
        let mut i = 0;
        while i < 6 && h >= self.base_altitude[i + 1] {
            i += 1;
        }
        let dh = h - self.base_altitude[i];
        let temperature = self.base_temperature[i] + self.lapse[i] * dh;
        let pressure = pressure_step(self.base_pressure[i], self.base_temperature[i], self.lapse[i], dh);
        let density = pressure / (R_AIR * temperature);
        AtmosphereSample {
            temperature,
            pressure,
            density,
            speed_of_sound: (GAMMA_AIR * R_AIR * temperature).sqrt(),
        }
    }
}

/// Hydrostatic pressure change across `dh` of a layer with the given base
/// temperature and lapse rate.
fn pressure_step(p_base: f64, t_base: f64, lapse: f64, dh: f64) -> f64 {
    if lapse.abs() < 1e-12 {
        p_base * (-G0 * dh / (R_AIR * t_base)).exp()
    } else {
        p_base * ((t_base + lapse * dh) / t_base).powf(-G0 / (lapse * R_AIR))
    }
}

/// Earth constants plus the standard atmosphere, passed around as one unit.
#[derive(Debug, Clone, Default)]
pub struct Environment {
    pub earth: EarthModel,
    pub atmosphere: Atmosphere,
}
