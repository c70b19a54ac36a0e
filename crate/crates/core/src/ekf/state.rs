use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::geom::{EulerAngles, Quaternion, Vec2, Vec3};

pub const STATE_DIM: usize = 24;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type CovMatrix = SMatrix<f64, STATE_DIM, STATE_DIM>;

/// Offsets of each block in the flat state vector.
pub mod idx {
    pub const QUAT: usize = 0;
    pub const VEL: usize = 4;
    pub const POS: usize = 7;
    pub const DANG_BIAS: usize = 10;
    pub const DVEL_BIAS: usize = 13;
    pub const WIND: usize = 16;
    pub const MAG_EARTH: usize = 18;
    pub const MAG_BODY: usize = 21;
}

/// Column names of the flat state, in storage order.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "q0", "q1", "q2", "q3", "vn", "ve", "vd", "pn", "pe", "pd", "dang_bx", "dang_by", "dang_bz",
    "dvel_bx", "dvel_by", "dvel_bz", "wind_n", "wind_e", "mag_n", "mag_e", "mag_d", "mag_bx",
    "mag_by", "mag_bz",
];

/// Sanity bound on each delta-angle bias component, rad per IMU interval.
pub const MAX_DANG_BIAS: f64 = 0.05;
/// Sanity bound on each delta-velocity bias component, m/s per IMU interval.
pub const MAX_DVEL_BIAS: f64 = 2.0;

/// Full navigation state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NavState {
    /// body to NED
    pub q: Quaternion,
    /// NED, m/s
    pub v: Vec3,
    /// NED, m
    pub p: Vec3,
    /// rad per IMU interval
    pub b_dang: Vec3,
    /// m/s per IMU interval
    pub b_dvel: Vec3,
    /// north, east, m/s
    pub wind: Vec2,
    /// NED, gauss
    pub mag_earth: Vec3,
    /// body, gauss
    pub mag_body: Vec3,
}

impl Default for NavState {
    fn default() -> Self {
        Self {
            q: Quaternion::IDENTITY,
            v: Vec3::zeros(),
            p: Vec3::zeros(),
            b_dang: Vec3::zeros(),
            b_dvel: Vec3::zeros(),
            wind: Vec2::zeros(),
            mag_earth: Vec3::zeros(),
            mag_body: Vec3::zeros(),
        }
    }
}

impl NavState {
    pub fn to_vector(&self) -> StateVector {
        let mut x = StateVector::zeros();
        x.fixed_rows_mut::<4>(idx::QUAT)
            .copy_from(&self.q.to_vector());
        x.fixed_rows_mut::<3>(idx::VEL).copy_from(&self.v);
        x.fixed_rows_mut::<3>(idx::POS).copy_from(&self.p);
        x.fixed_rows_mut::<3>(idx::DANG_BIAS)
            .copy_from(&self.b_dang);
        x.fixed_rows_mut::<3>(idx::DVEL_BIAS)
            .copy_from(&self.b_dvel);
        x.fixed_rows_mut::<2>(idx::WIND).copy_from(&self.wind);
        x.fixed_rows_mut::<3>(idx::MAG_EARTH)
            .copy_from(&self.mag_earth);
        x.fixed_rows_mut::<3>(idx::MAG_BODY)
            .copy_from(&self.mag_body);
        x
    }

    pub fn from_vector(x: &StateVector) -> Self {
        Self {
            q: Quaternion::from_vector(&x.fixed_rows::<4>(idx::QUAT).into_owned()),
            v: x.fixed_rows::<3>(idx::VEL).into_owned(),
            p: x.fixed_rows::<3>(idx::POS).into_owned(),
            b_dang: x.fixed_rows::<3>(idx::DANG_BIAS).into_owned(),
            b_dvel: x.fixed_rows::<3>(idx::DVEL_BIAS).into_owned(),
            wind: x.fixed_rows::<2>(idx::WIND).into_owned(),
            mag_earth: x.fixed_rows::<3>(idx::MAG_EARTH).into_owned(),
            mag_body: x.fixed_rows::<3>(idx::MAG_BODY).into_owned(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }

    /// Re-normalizes the quaternion and clamps the biases to their sanity bounds.
    pub(crate) fn tidy(&mut self) {
        if let Ok(q) = self.q.normalize() {
            self.q = q;
        }
        self.b_dang
            .apply(|b| *b = b.clamp(-MAX_DANG_BIAS, MAX_DANG_BIAS));
        self.b_dvel
            .apply(|b| *b = b.clamp(-MAX_DVEL_BIAS, MAX_DVEL_BIAS));
    }

    pub fn euler(&self) -> EulerAngles {
        self.q.euler()
    }
}

/// 24x24 state covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct NavCovariance(pub CovMatrix);

impl NavCovariance {
    pub fn from_diagonal(d: &StateVector) -> Self {
        Self(CovMatrix::from_diagonal(d))
    }

    pub fn matrix(&self) -> &CovMatrix {
        &self.0
    }

    pub fn diagonal(&self) -> StateVector {
        self.0.diagonal()
    }

    pub fn symmetrize(&mut self) {
        let m = &mut self.0;
        for i in 0..STATE_DIM {
            for j in (i + 1)..STATE_DIM {
                let a = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = a;
                m[(j, i)] = a;
            }
        }
    }

    pub fn max_asymmetry(&self) -> f64 {
        (self.0 - self.0.transpose()).abs().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.0
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// True when `P + eps I` admits a Cholesky factorization, i.e. the
    /// smallest eigenvalue exceeds `-eps`.
    pub fn is_psd_within(&self, eps: f64) -> bool {
        let shifted = self.0 + CovMatrix::identity() * eps;
        shifted.cholesky().is_some()
    }

    /// Position block (N, E, D).
    pub fn position_block(&self) -> nalgebra::Matrix3<f64> {
        self.0.fixed_view::<3, 3>(idx::POS, idx::POS).into_owned()
    }
}

/// The externally reported navigation outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputVector {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub vn: f64,
    pub vd: f64,
    pub ve: f64,
    pub pn: f64,
    pub pd: f64,
    pub pe: f64,
    /// gyro biases, rad/s
    pub gx: f64,
    pub gy: f64,
    pub gz: f64,
}

impl OutputVector {
    /// Column names in export order (velocity and position are reported as
    /// North, Down, East).
    pub const NAMES: [&'static str; 12] = [
        "roll", "pitch", "yaw", "vn", "vd", "ve", "pn", "pd", "pe", "gx", "gy", "gz",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.roll, self.pitch, self.yaw, self.vn, self.vd, self.ve, self.pn, self.pd, self.pe,
            self.gx, self.gy, self.gz,
        ]
    }
}

/// Maps a state to its reported outputs; gyro biases are the delta-angle
/// biases divided by the nominal IMU interval.
pub fn output_vector(state: &NavState, nominal_imu_dt: f64) -> OutputVector {
    let e = state.q.normalize().unwrap_or(Quaternion::IDENTITY).euler();
    let g = state.b_dang / nominal_imu_dt;
    OutputVector {
        roll: e.roll,
        pitch: e.pitch,
        yaw: e.yaw,
        vn: state.v.x,
        vd: state.v.z,
        ve: state.v.y,
        pn: state.p.x,
        pd: state.p.z,
        pe: state.p.y,
        gx: g.x,
        gy: g.y,
        gz: g.z,
    }
}
