use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

/// Upper bound on a single IMU integration interval, s.
pub const MAX_IMU_DT: f64 = 0.1;

/// One IMU interval: integrated angle and velocity increments in body axes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    /// end of the interval, s
    pub timestamp: f64,
    /// rad
    pub delta_angle: Vec3,
    /// m/s
    pub delta_velocity: Vec3,
    /// s
    pub dt: f64,
}

impl ImuSample {
    pub fn new(timestamp: f64, delta_angle: Vec3, delta_velocity: Vec3, dt: f64) -> Self {
        Self {
            timestamp,
            delta_angle,
            delta_velocity,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_IMU_DT) {
            return Err(Error::InvalidInput(format!(
                "IMU interval {} s outside (0, {MAX_IMU_DT}]",
                self.dt
            )));
        }
        let finite = self.timestamp.is_finite()
            && self.delta_angle.iter().all(|v| v.is_finite())
            && self.delta_velocity.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput(format!(
                "non-finite IMU sample at t = {}",
                self.timestamp
            )));
        }
        Ok(())
    }

    /// Average angular rate over the interval, rad/s.
    pub fn rate(&self) -> Vec3 {
        self.delta_angle / self.dt
    }

    /// Average specific force over the interval, m/s^2.
    pub fn specific_force(&self) -> Vec3 {
        self.delta_velocity / self.dt
    }
}

/// Aiding sensor class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    GpsPos,
    GpsVel,
    Baro,
    Mag,
    Flow,
}

impl SensorKind {
    pub fn name(self) -> &'static str {
        match self {
            SensorKind::GpsPos => "gps_pos",
            SensorKind::GpsVel => "gps_vel",
            SensorKind::Baro => "baro",
            SensorKind::Mag => "mag",
            SensorKind::Flow => "flow",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            SensorKind::Baro => 1,
            SensorKind::Flow => 2,
            _ => 3,
        }
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Observed quantity of an aiding measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeasurementKind {
    /// NED position, m
    GpsPos(Vec3),
    /// NED velocity, m/s
    GpsVel(Vec3),
    /// altitude (-p_D), m
    Baro(f64),
    /// body field, gauss
    Mag(Vec3),
    /// body horizontal velocity, m/s, with the height above ground it was derived at
    FlowVel { velocity: Vec2, h_agl: f64 },
}

impl MeasurementKind {
    pub fn sensor(&self) -> SensorKind {
        match self {
            MeasurementKind::GpsPos(_) => SensorKind::GpsPos,
            MeasurementKind::GpsVel(_) => SensorKind::GpsVel,
            MeasurementKind::Baro(_) => SensorKind::Baro,
            MeasurementKind::Mag(_) => SensorKind::Mag,
            MeasurementKind::FlowVel { .. } => SensorKind::Flow,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            MeasurementKind::GpsPos(v) | MeasurementKind::GpsVel(v) | MeasurementKind::Mag(v) => {
                v.iter().copied().collect()
            }
            MeasurementKind::Baro(a) => vec![*a],
            MeasurementKind::FlowVel { velocity, .. } => vec![velocity.x, velocity.y],
        }
    }
}

/// Aiding measurement with its per-component noise standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub timestamp: f64,
    pub kind: MeasurementKind,
    pub noise_std: Vec<f64>,
}

impl Measurement {
    pub fn new(timestamp: f64, kind: MeasurementKind, noise_std: Vec<f64>) -> Result<Self> {
        let m = Self {
            timestamp,
            kind,
            noise_std,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn gps_pos(timestamp: f64, p: Vec3, std_h: f64, std_v: f64) -> Result<Self> {
        Self::new(
            timestamp,
            MeasurementKind::GpsPos(p),
            vec![std_h, std_h, std_v],
        )
    }

    pub fn gps_vel(timestamp: f64, v: Vec3, std: f64) -> Result<Self> {
        Self::new(timestamp, MeasurementKind::GpsVel(v), vec![std; 3])
    }

    pub fn baro(timestamp: f64, altitude: f64, std: f64) -> Result<Self> {
        Self::new(timestamp, MeasurementKind::Baro(altitude), vec![std])
    }

    pub fn mag(timestamp: f64, field: Vec3, std: f64) -> Result<Self> {
        Self::new(timestamp, MeasurementKind::Mag(field), vec![std; 3])
    }

    pub fn flow(timestamp: f64, velocity: Vec2, h_agl: f64, std: f64) -> Result<Self> {
        Self::new(
            timestamp,
            MeasurementKind::FlowVel { velocity, h_agl },
            vec![std; 2],
        )
    }

    pub fn sensor(&self) -> SensorKind {
        self.kind.sensor()
    }

    pub fn dim(&self) -> usize {
        self.sensor().dim()
    }

    pub fn validate(&self) -> Result<()> {
        let sensor = self.sensor();
        if self.noise_std.len() != sensor.dim() {
            return Err(Error::InvalidInput(format!(
                "{sensor} measurement needs {} noise values, got {}",
                sensor.dim(),
                self.noise_std.len()
            )));
        }
        if let Some(s) = self
            .noise_std
            .iter()
            .find(|s| !(**s > 0.0 && s.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "{sensor} noise std must be positive, got {s}"
            )));
        }
        let mut finite =
            self.timestamp.is_finite() && self.kind.values().iter().all(|v| v.is_finite());
        if let MeasurementKind::FlowVel { h_agl, .. } = self.kind {
            finite &= h_agl.is_finite();
        }
        if !finite {
            return Err(Error::InvalidInput(format!(
                "non-finite {sensor} measurement at t = {}",
                self.timestamp
            )));
        }
        Ok(())
    }
}
