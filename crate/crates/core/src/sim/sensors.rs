use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::SensorNoiseConfig;
use super::rng::Stream;
use super::trajectory::TruthTrajectory;
use crate::ekf::ImuSample;
use crate::error::{Error, Result};
use crate::geom::{ned_to_lla, GeoOrigin, Vec3};

/// One line of the sensor stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SensorSample {
    /// delta angle (rad) then delta velocity (m/s), body axes
    Imu { t: f64, values: [f64; 6], dt: f64 },
    /// latitude (deg), longitude (deg), altitude (m), then NED velocity (m/s)
    Gps { t: f64, values: [f64; 6] },
    /// altitude above the local origin, m
    Baro { t: f64, values: [f64; 1] },
    /// body field, gauss
    Mag { t: f64, values: [f64; 3] },
    /// index of the frame in the scenario's frame list
    Camera { t: f64, frame: usize },
}

/// Stream classes in tie-break order for equal timestamps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamKind {
    Imu,
    Baro,
    Mag,
    Gps,
    Camera,
}

impl StreamKind {
    pub const ALL: [StreamKind; 5] = [
        StreamKind::Imu,
        StreamKind::Baro,
        StreamKind::Mag,
        StreamKind::Gps,
        StreamKind::Camera,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Imu => "imu",
            StreamKind::Baro => "baro",
            StreamKind::Mag => "mag",
            StreamKind::Gps => "gps",
            StreamKind::Camera => "camera",
        }
    }
}

impl std::fmt::Display for StreamKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl SensorSample {
    pub fn t(&self) -> f64 {
        match *self {
            SensorSample::Imu { t, .. }
            | SensorSample::Gps { t, .. }
            | SensorSample::Baro { t, .. }
            | SensorSample::Mag { t, .. }
            | SensorSample::Camera { t, .. } => t,
        }
    }

    pub fn stream(&self) -> StreamKind {
        match self {
            SensorSample::Imu { .. } => StreamKind::Imu,
            SensorSample::Gps { .. } => StreamKind::Gps,
            SensorSample::Baro { .. } => StreamKind::Baro,
            SensorSample::Mag { .. } => StreamKind::Mag,
            SensorSample::Camera { .. } => StreamKind::Camera,
        }
    }

    pub fn is_finite(&self) -> bool {
        let t = self.t().is_finite();
        t && match self {
            SensorSample::Imu { values, dt, .. } => {
                dt.is_finite() && values.iter().all(|v| v.is_finite())
            }
            SensorSample::Gps { values, .. } => values.iter().all(|v| v.is_finite()),
            SensorSample::Baro { values, .. } => values[0].is_finite(),
            SensorSample::Mag { values, .. } => values.iter().all(|v| v.is_finite()),
            SensorSample::Camera { .. } => true,
        }
    }

    pub fn imu(&self) -> Option<ImuSample> {
        match *self {
            SensorSample::Imu { t, values, dt } => Some(ImuSample::new(
                t,
                Vec3::new(values[0], values[1], values[2]),
                Vec3::new(values[3], values[4], values[5]),
                dt,
            )),
            _ => None,
        }
    }
}

impl From<ImuSample> for SensorSample {
    fn from(s: ImuSample) -> Self {
        let (a, v) = (s.delta_angle, s.delta_velocity);
        SensorSample::Imu {
            t: s.timestamp,
            values: [a.x, a.y, a.z, v.x, v.y, v.z],
            dt: s.dt,
        }
    }
}

fn gauss(rng: &mut Stream) -> Vec3 {
    Vec3::new(
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
        rng.sample(StandardNormal),
    )
}

/// IMU increments over the truth interval ending at `t`, with constant bias
/// and white noise of the configured densities.
pub fn sample_imu(
    truth: &TruthTrajectory,
    t: f64,
    noise: &SensorNoiseConfig,
    rng: &mut Stream,
) -> Result<ImuSample> {
    let k = truth.index_at(t)?;
    if k == 0 {
        return Err(Error::Range(
            "the first IMU interval ends at the second truth sample".into(),
        ));
    }
    let s = &truth.samples[k];
    let dt = truth.dt();
    let sq = dt.sqrt();
    let dang = (s.rate + noise.gyro_bias()) * dt + gauss(rng) * (noise.gyro_noise * sq);
    let dvel = (s.specific_force + noise.accel_bias()) * dt + gauss(rng) * (noise.accel_noise * sq);
    Ok(ImuSample::new(s.t, dang, dvel, dt))
}

/// GPS receiver error model: first-order Gauss-Markov wander plus white
/// noise on position, white noise on velocity.
#[derive(Debug, Clone)]
pub struct GpsErrorModel {
    wander: Option<(f64, Vec3)>,
}

impl Default for GpsErrorModel {
    fn default() -> Self {
        Self::new()
    }
}

impl GpsErrorModel {
    pub fn new() -> Self {
        Self { wander: None }
    }

    /// Advances the correlated error to time `t` and returns it.
    pub fn wander(&mut self, t: f64, noise: &SensorNoiseConfig, rng: &mut Stream) -> Vec3 {
        let sigma = Vec3::new(
            noise.gps_pos_std_h,
            noise.gps_pos_std_h,
            noise.gps_pos_std_v,
        );
        let w = gauss(rng);
        let e = match self.wander {
            None => sigma.component_mul(&w),
            Some(_) if noise.gps_correlation_time == 0.0 => sigma.component_mul(&w),
            Some((t0, e0)) => {
                let phi = (-(t - t0).max(0.0) / noise.gps_correlation_time).exp();
                e0 * phi + sigma.component_mul(&w) * (1.0 - phi * phi).sqrt()
            }
        };
        self.wander = Some((t, e));
        e
    }
}

/// GPS fix at `t`: geodetic position and NED velocity.
pub fn sample_gps(
    truth: &TruthTrajectory,
    t: f64,
    noise: &SensorNoiseConfig,
    model: &mut GpsErrorModel,
    origin: &GeoOrigin,
    rng: &mut Stream,
) -> Result<SensorSample> {
    let s = truth.at(t)?;
    let wander = model.wander(s.t, noise, rng);
    let white = gauss(rng).component_mul(&Vec3::new(
        noise.gps_white_std_h,
        noise.gps_white_std_h,
        noise.gps_white_std_v,
    ));
    let v = s.v + gauss(rng) * noise.gps_vel_std;
    let (lat, lon, alt) = ned_to_lla(&(s.p + wander + white), origin)?;
    Ok(SensorSample::Gps {
        t: s.t,
        values: [lat.to_degrees(), lon.to_degrees(), alt, v.x, v.y, v.z],
    })
}

/// Barometric altitude above the origin.
pub fn sample_baro(
    truth: &TruthTrajectory,
    t: f64,
    noise: &SensorNoiseConfig,
    rng: &mut Stream,
) -> Result<SensorSample> {
    let s = truth.at(t)?;
    let n: f64 = rng.sample(StandardNormal);
    Ok(SensorSample::Baro {
        t: s.t,
        values: [-s.p.z + n * noise.baro_std],
    })
}

/// Earth field seen in body axes.
pub fn sample_mag(
    truth: &TruthTrajectory,
    t: f64,
    noise: &SensorNoiseConfig,
    earth_field: &Vec3,
    rng: &mut Stream,
) -> Result<SensorSample> {
    let s = truth.at(t)?;
    let m = s.q.inverse_rotate(earth_field) + gauss(rng) * noise.mag_std;
    Ok(SensorSample::Mag {
        t: s.t,
        values: [m.x, m.y, m.z],
    })
}
