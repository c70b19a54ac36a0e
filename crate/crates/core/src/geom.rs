//! Rotation and frame mathematics shared by the filter, the simulator and
//! the flow pipeline.
//!
//! Conventions fixed for the whole crate:
//! - quaternions are scalar-first `(q0, q1, q2, q3)` and rotate body vectors
//!   into the local North-East-Down frame;
//! - Euler angles use the Z-Y-X (yaw, pitch, roll) sequence;
//! - positions are stored internally in N, E, D order.

use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::Mul;

use nalgebra::{Matrix3, Matrix4, Vector2, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Standard gravity, m/s^2.
pub const GRAVITY: f64 = 9.80665;

/// Gravity vector in NED (down positive).
pub fn gravity_ned() -> Vec3 {
    Vec3::new(0.0, 0.0, GRAVITY)
}

/// Below this rotation magnitude the exponential and logarithm maps switch
/// to their series expansions.
const SMALL_ANGLE: f64 = 1e-8;

/// Scalar-first attitude quaternion, body to NED.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion {
    pub q0: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion {
        q0: 1.0,
        q1: 0.0,
        q2: 0.0,
        q3: 0.0,
    };

    pub const fn new(q0: f64, q1: f64, q2: f64, q3: f64) -> Self {
        Self { q0, q1, q2, q3 }
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Self::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_vector(self) -> Vector4<f64> {
        Vector4::new(self.q0, self.q1, self.q2, self.q3)
    }

    pub fn vector_part(&self) -> Vec3 {
        Vec3::new(self.q1, self.q2, self.q3)
    }

    pub fn norm(&self) -> f64 {
        (self.q0 * self.q0 + self.q1 * self.q1 + self.q2 * self.q2 + self.q3 * self.q3).sqrt()
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.q0, -self.q1, -self.q2, -self.q3)
    }

    pub fn is_finite(&self) -> bool {
        self.q0.is_finite() && self.q1.is_finite() && self.q2.is_finite() && self.q3.is_finite()
    }

    /// Returns the unit quaternion in the same direction.
    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidInput(format!(
                "cannot normalize quaternion with norm {n}"
            )));
        }
        Ok(Self::new(
            self.q0 / n,
            self.q1 / n,
            self.q2 / n,
            self.q3 / n,
        ))
    }

    /// Sign-canonical form (q0 >= 0); q and -q are the same rotation.
    pub fn canonical(&self) -> Self {
        if self.q0 < 0.0 {
            Self::new(-self.q0, -self.q1, -self.q2, -self.q3)
        } else {
            *self
        }
    }

    /// Exponential map of a rotation vector (rad).
    pub fn from_rotation_vector(dtheta: &Vec3) -> Self {
        let angle_sq = dtheta.norm_squared();
        let angle = angle_sq.sqrt();
        if angle < SMALL_ANGLE {
            let s = 0.5 * (1.0 - angle_sq / 24.0);
            return Self::new(
                1.0 - angle_sq / 8.0,
                dtheta.x * s,
                dtheta.y * s,
                dtheta.z * s,
            );
        }
        let half = 0.5 * angle;
        let s = half.sin() / angle;
        Self::new(half.cos(), dtheta.x * s, dtheta.y * s, dtheta.z * s)
    }

    /// Logarithm map: the rotation vector of the shortest equivalent rotation.
    pub fn to_rotation_vector(&self) -> Vec3 {
        let q = self.canonical();
        let v = q.vector_part();
        let vn = v.norm();
        if vn < SMALL_ANGLE {
            // 2 atan(vn / q0) / vn ~ 2 / q0 (1 - vn^2 / (3 q0^2))
            return v * (2.0 / q.q0) * (1.0 - vn * vn / (3.0 * q.q0 * q.q0));
        }
        v * (2.0 * vn.atan2(q.q0) / vn)
    }

    /// Rotation matrix taking body vectors to NED. Assumes a unit quaternion;
    /// use [`quat_to_rot`] for unnormalized input.
    pub fn rotation_matrix(&self) -> Mat3 {
        let (q0, q1, q2, q3) = (self.q0, self.q1, self.q2, self.q3);
        Mat3::new(
            1.0 - 2.0 * (q2 * q2 + q3 * q3),
            2.0 * (q1 * q2 - q0 * q3),
            2.0 * (q1 * q3 + q0 * q2),
            2.0 * (q1 * q2 + q0 * q3),
            1.0 - 2.0 * (q1 * q1 + q3 * q3),
            2.0 * (q2 * q3 - q0 * q1),
            2.0 * (q1 * q3 - q0 * q2),
            2.0 * (q2 * q3 + q0 * q1),
            1.0 - 2.0 * (q1 * q1 + q2 * q2),
        )
    }

    /// Rotates a body-frame vector into NED.
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation_matrix() * v
    }

    /// Rotates an NED vector into the body frame.
    pub fn inverse_rotate(&self, v: &Vec3) -> Vec3 {
        self.rotation_matrix().transpose() * v
    }

    /// Z-Y-X composition `qz(yaw) * qy(pitch) * qx(roll)`.
    pub fn from_euler(e: &EulerAngles) -> Self {
        let (sr, cr) = (0.5 * e.roll).sin_cos();
        let (sp, cp) = (0.5 * e.pitch).sin_cos();
        let (sy, cy) = (0.5 * e.yaw).sin_cos();
        Self::new(
            cr * cp * cy + sr * sp * sy,
            sr * cp * cy - cr * sp * sy,
            cr * sp * cy + sr * cp * sy,
            cr * cp * sy - sr * sp * cy,
        )
    }

    /// Z-Y-X Euler angles of a unit quaternion.
    pub fn euler(&self) -> EulerAngles {
        let r = self.rotation_matrix();
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let pitch = -r[(2, 0)].clamp(-1.0, 1.0).asin();
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        EulerAngles { roll, pitch, yaw }
    }

    /// Best-fit quaternion of an orthonormal rotation matrix (Shepperd's method).
    pub fn from_rotation_matrix(r: &Mat3) -> Self {
        let trace = r.trace();
        let q = if trace > 0.0 {
            let s = 2.0 * (1.0 + trace).sqrt();
            Self::new(
                0.25 * s,
                (r[(2, 1)] - r[(1, 2)]) / s,
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(1, 0)] - r[(0, 1)]) / s,
            )
        } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt();
            Self::new(
                (r[(2, 1)] - r[(1, 2)]) / s,
                0.25 * s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
            )
        } else if r[(1, 1)] > r[(2, 2)] {
            let s = 2.0 * (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt();
            Self::new(
                (r[(0, 2)] - r[(2, 0)]) / s,
                (r[(0, 1)] + r[(1, 0)]) / s,
                0.25 * s,
                (r[(1, 2)] + r[(2, 1)]) / s,
            )
        } else {
            let s = 2.0 * (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt();
            Self::new(
                (r[(1, 0)] - r[(0, 1)]) / s,
                (r[(0, 2)] + r[(2, 0)]) / s,
                (r[(1, 2)] + r[(2, 1)]) / s,
                0.25 * s,
            )
        };
        q.canonical()
    }

    /// Left-multiplication matrix: `self * b == L(self) b` on coefficient vectors.
    pub fn left_matrix(&self) -> Matrix4<f64> {
        let (w, x, y, z) = (self.q0, self.q1, self.q2, self.q3);
        Matrix4::new(
            w, -x, -y, -z, //
            x, w, -z, y, //
            y, z, w, -x, //
            z, -y, x, w,
        )
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product.
    fn mul(self, b: Quaternion) -> Quaternion {
        let a = self;
        Quaternion::new(
            a.q0 * b.q0 - a.q1 * b.q1 - a.q2 * b.q2 - a.q3 * b.q3,
            a.q0 * b.q1 + a.q1 * b.q0 + a.q2 * b.q3 - a.q3 * b.q2,
            a.q0 * b.q2 - a.q1 * b.q3 + a.q2 * b.q0 + a.q3 * b.q1,
            a.q0 * b.q3 + a.q1 * b.q2 - a.q2 * b.q1 + a.q3 * b.q0,
        )
    }
}

/// Roll, pitch and yaw in radians (Z-Y-X sequence).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn is_principal(&self) -> bool {
        self.roll.abs() <= PI && self.pitch.abs() <= FRAC_PI_2 && self.yaw.abs() <= PI
    }
}

pub fn quat_mul(a: Quaternion, b: Quaternion) -> Quaternion {
    a * b
}

pub fn quat_from_delta_angle(dtheta: &Vec3) -> Quaternion {
    Quaternion::from_rotation_vector(dtheta)
}

pub fn quat_normalize(q: &Quaternion) -> Result<Quaternion> {
    q.normalize()
}

pub fn quat_to_rot(q: &Quaternion) -> Result<Mat3> {
    Ok(q.normalize()?.rotation_matrix())
}

pub fn euler_from_quat(q: &Quaternion) -> Result<EulerAngles> {
    Ok(q.normalize()?.euler())
}

pub fn quat_from_euler(e: &EulerAngles) -> Quaternion {
    Quaternion::from_euler(e)
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_pi(a: f64) -> f64 {
    let mut x = (a + PI).rem_euclid(2.0 * PI) - PI;
    if x <= -PI {
        x += 2.0 * PI;
    }
    x
}

/// WGS-84 semi-major axis, m.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS-84 flattening.
pub const WGS84_F: f64 = 1.0 / 298.257_223_563;

/// Maximum horizontal distance accepted by the flat-earth conversion, m.
pub const FLAT_EARTH_LIMIT: f64 = 10_000.0;

/// Geodetic anchor of the local NED tangent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoOrigin {
    /// rad
    pub latitude: f64,
    /// rad
    pub longitude: f64,
    /// m, ellipsoidal
    pub altitude: f64,
}

impl GeoOrigin {
    pub fn new(latitude: f64, longitude: f64, altitude: f64) -> Result<Self> {
        if !(latitude.abs() <= FRAC_PI_2) || !(longitude.abs() <= PI) || !altitude.is_finite() {
            return Err(Error::InvalidInput(format!(
                "geodetic origin out of range: lat {latitude}, lon {longitude}, alt {altitude}"
            )));
        }
        Ok(Self {
            latitude,
            longitude,
            altitude,
        })
    }

    /// Meridian (north-south) and prime-vertical radii of curvature at the
    /// origin latitude.
    pub fn radii(&self) -> (f64, f64) {
        let e2 = WGS84_F * (2.0 - WGS84_F);
        let s = self.latitude.sin();
        let w = 1.0 - e2 * s * s;
        let normal = WGS84_A / w.sqrt();
        let meridian = WGS84_A * (1.0 - e2) / (w * w.sqrt());
        (meridian, normal)
    }
}

/// Flat-earth geodetic to local NED conversion, valid within 10 km of the origin.
pub fn lla_to_ned(
    latitude: f64,
    longitude: f64,
    altitude: f64,
    origin: &GeoOrigin,
) -> Result<Vec3> {
    let (meridian, normal) = origin.radii();
    let north = (latitude - origin.latitude) * meridian;
    let east = wrap_pi(longitude - origin.longitude) * normal * origin.latitude.cos();
    let down = -(altitude - origin.altitude);
    if !north.is_finite() || !east.is_finite() || !down.is_finite() {
        return Err(Error::InvalidInput("non-finite geodetic position".into()));
    }
    let horizontal = north.hypot(east);
    if horizontal >= FLAT_EARTH_LIMIT {
        return Err(Error::Range(format!(
            "point is {horizontal:.0} m from the origin; flat-earth limit is {FLAT_EARTH_LIMIT} m"
        )));
    }
    Ok(Vec3::new(north, east, down))
}

/// Inverse of [`lla_to_ned`]: local NED to (latitude rad, longitude rad, altitude m).
pub fn ned_to_lla(ned: &Vec3, origin: &GeoOrigin) -> Result<(f64, f64, f64)> {
    if !ned.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("non-finite NED position".into()));
    }
    let horizontal = ned.x.hypot(ned.y);
    if horizontal >= FLAT_EARTH_LIMIT {
        return Err(Error::Range(format!(
            "point is {horizontal:.0} m from the origin; flat-earth limit is {FLAT_EARTH_LIMIT} m"
        )));
    }
    let (meridian, normal) = origin.radii();
    let latitude = origin.latitude + ned.x / meridian;
    let longitude = wrap_pi(origin.longitude + ned.y / (normal * origin.latitude.cos()));
    Ok((latitude, longitude, origin.altitude - ned.z))
}
