use serde::{Deserialize, Serialize};

use super::texture::GroundTexture;
use crate::error::{Error, Result};
use crate::geom::{GeoOrigin, Vec3};
use crate::optflow::CameraIntrinsics;

/// Noise, bias and rate settings of the simulated sensors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorNoiseConfig {
    /// rad/s/sqrt(Hz)
    pub gyro_noise: f64,
    /// m/s^2/sqrt(Hz)
    pub accel_noise: f64,
    /// constant, rad/s
    pub gyro_bias: [f64; 3],
    /// constant, m/s^2
    pub accel_bias: [f64; 3],
    /// Gauss-Markov position error std, m
    pub gps_pos_std_h: f64,
    pub gps_pos_std_v: f64,
    /// s; zero makes the error white
    pub gps_correlation_time: f64,
    /// white position noise on top of the Gauss-Markov error, m
    pub gps_white_std_h: f64,
    pub gps_white_std_v: f64,
    /// m/s
    pub gps_vel_std: f64,
    /// Hz
    pub gps_rate: f64,
    /// m
    pub baro_std: f64,
    pub baro_rate: f64,
    /// gauss
    pub mag_std: f64,
    pub mag_rate: f64,
    pub imu_rate: f64,
    pub camera_rate: f64,
}

impl Default for SensorNoiseConfig {
    fn default() -> Self {
        Self {
            gyro_noise: 1e-3,
            accel_noise: 0.03,
            gyro_bias: [1e-3, -5e-4, 8e-4],
            accel_bias: [0.02, -0.01, 0.03],
            gps_pos_std_h: 1.2,
            gps_pos_std_v: 2.5,
            gps_correlation_time: 3.0,
            gps_white_std_h: 0.3,
            gps_white_std_v: 0.8,
            gps_vel_std: 1.0,
            gps_rate: 5.0,
            baro_std: 0.8,
            baro_rate: 20.0,
            mag_std: 0.005,
            mag_rate: 10.0,
            imu_rate: 100.0,
            camera_rate: 15.0,
        }
    }
}

impl SensorNoiseConfig {
    /// Default rates with every noise and bias term zeroed.
    pub fn zero() -> Self {
        Self {
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias: [0.0; 3],
            accel_bias: [0.0; 3],
            gps_pos_std_h: 0.0,
            gps_pos_std_v: 0.0,
            gps_white_std_h: 0.0,
            gps_white_std_v: 0.0,
            gps_vel_std: 0.0,
            baro_std: 0.0,
            mag_std: 0.0,
            ..Self::default()
        }
    }

    pub fn gyro_bias(&self) -> Vec3 {
        Vec3::from(self.gyro_bias)
    }

    pub fn accel_bias(&self) -> Vec3 {
        Vec3::from(self.accel_bias)
    }

    pub fn validate(&self) -> Result<()> {
        let stds = [
            ("gyro_noise", self.gyro_noise),
            ("accel_noise", self.accel_noise),
            ("gps_pos_std_h", self.gps_pos_std_h),
            ("gps_pos_std_v", self.gps_pos_std_v),
            ("gps_white_std_h", self.gps_white_std_h),
            ("gps_white_std_v", self.gps_white_std_v),
            ("gps_vel_std", self.gps_vel_std),
            ("baro_std", self.baro_std),
            ("mag_std", self.mag_std),
            ("gps_correlation_time", self.gps_correlation_time),
        ];
        for (name, v) in stds {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "noise.{name} must be non-negative, got {v}"
                )));
            }
        }
        for (name, b) in [
            ("gyro_bias", self.gyro_bias),
            ("accel_bias", self.accel_bias),
        ] {
            if !b.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "noise.{name} must be finite"
                )));
            }
        }
        for (name, v) in [("imu_rate", self.imu_rate)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "noise.{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("gps_rate", self.gps_rate),
            ("baro_rate", self.baro_rate),
            ("mag_rate", self.mag_rate),
            ("camera_rate", self.camera_rate),
        ] {
            if !(v > 0.0 && v <= self.imu_rate) {
                return Err(Error::InvalidParameter(format!(
                    "noise.{name} must lie in (0, imu_rate = {}], got {v}",
                    self.imu_rate
                )));
            }
        }
        Ok(())
    }
}

/// Station-keeping scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HoverConfig {
    /// s
    pub duration: f64,
    /// NED, m
    pub hold_position: [f64; 3],
    /// horizontal position dither std, m (vertical uses half)
    pub dither_std: f64,
    /// Hz
    pub dither_bandwidth: f64,
    /// motionless time before the dither starts, s
    pub settle_time: f64,
    /// s
    pub dither_ramp: f64,
}

impl Default for HoverConfig {
    fn default() -> Self {
        Self {
            duration: 60.0,
            hold_position: [0.0, 0.0, -10.0],
            dither_std: 0.15,
            dither_bandwidth: 0.5,
            settle_time: 3.0,
            dither_ramp: 3.0,
        }
    }
}

/// Waypoint mission flown with stop-and-go straight segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissionConfig {
    /// NED, m
    pub waypoints: Vec<[f64; 3]>,
    /// m/s
    pub cruise_speed: f64,
    /// speed on purely vertical segments, m/s
    pub climb_speed: f64,
    /// peak acceleration of the speed ramps, m/s^2
    pub max_accel: f64,
    /// peak yaw rate of heading turns, rad/s
    pub yaw_rate: f64,
    /// motionless time before the first segment, s
    pub pre_roll: f64,
    /// motionless time after the last segment, s
    pub post_roll: f64,
}

impl Default for MissionConfig {
    fn default() -> Self {
        Self {
            waypoints: vec![
                [0.0, 0.0, 0.0],
                [0.0, 0.0, -10.0],
                [45.0, 0.0, -10.0],
                [85.0, 0.0, -10.0],
                [0.0, 0.0, -10.0],
                [0.0, 0.0, 0.0],
            ],
            cruise_speed: 2.5,
            climb_speed: 1.0,
            max_accel: 1.0,
            yaw_rate: 0.8,
            pre_roll: 5.0,
            post_roll: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TrajectoryConfig {
    Hover(HoverConfig),
    Mission(MissionConfig),
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig::Hover(HoverConfig::default())
    }
}

/// Downward camera model and rendering policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    /// pixels
    pub focal: f64,
    pub width: usize,
    pub height: usize,
    /// frames are only produced above this height, m
    pub min_agl: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            focal: 64.0,
            width: 64,
            height: 64,
            min_agl: 1.0,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        CameraIntrinsics::centered(self.focal, self.width, self.height)
    }
}

/// Ground pattern; the texture seed is derived from the scenario seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureConfig {
    /// m
    pub base_cell: f64,
    pub octaves: u32,
    pub persistence: f64,
}

impl Default for TextureConfig {
    fn default() -> Self {
        let t = GroundTexture::default();
        Self {
            base_cell: t.base_cell,
            octaves: t.octaves,
            persistence: t.persistence,
        }
    }
}

/// Complete description of one simulated flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub trajectory: TrajectoryConfig,
    pub noise: SensorNoiseConfig,
    pub camera: CameraConfig,
    pub texture: TextureConfig,
    /// NED, gauss
    pub earth_field: [f64; 3],
    /// geodetic origin of the local frame, degrees and m
    pub origin_lat_deg: f64,
    pub origin_lon_deg: f64,
    pub origin_alt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "hover".into(),
            seed: 1,
            trajectory: TrajectoryConfig::default(),
            noise: SensorNoiseConfig::default(),
            camera: CameraConfig::default(),
            texture: TextureConfig::default(),
            earth_field: [0.22, 0.0, 0.41],
            origin_lat_deg: 47.3977,
            origin_lon_deg: 8.5456,
            origin_alt: 488.0,
        }
    }
}

impl ScenarioConfig {
    pub fn hover() -> Self {
        Self::default()
    }

    pub fn mission() -> Self {
        Self {
            name: "mission".into(),
            trajectory: TrajectoryConfig::Mission(MissionConfig::default()),
            ..Self::default()
        }
    }

    pub fn origin(&self) -> Result<GeoOrigin> {
        GeoOrigin::new(
            self.origin_lat_deg.to_radians(),
            self.origin_lon_deg.to_radians(),
            self.origin_alt,
        )
    }

    pub fn earth_field(&self) -> Vec3 {
        Vec3::from(self.earth_field)
    }

    pub fn texture(&self) -> GroundTexture {
        GroundTexture {
            seed: self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0x5445_5854,
            base_cell: self.texture.base_cell,
            octaves: self.texture.octaves,
            persistence: self.texture.persistence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.noise.validate()?;
        self.origin()?;
        if !self.earth_field.iter().all(|v| v.is_finite()) || self.earth_field() == Vec3::zeros() {
            return Err(Error::InvalidParameter(
                "earth_field must be finite and non-zero".into(),
            ));
        }
        let c = &self.camera;
        if c.width < crate::optflow::MIN_FRAME_SIDE || c.height < crate::optflow::MIN_FRAME_SIDE {
            return Err(Error::InvalidParameter(format!(
                "camera must be at least {0}x{0} pixels",
                crate::optflow::MIN_FRAME_SIDE
            )));
        }
        c.intrinsics().validate()?;
        if !(c.min_agl > 0.5) {
            return Err(Error::InvalidParameter(format!(
                "camera.min_agl must exceed 0.5 m, got {}",
                c.min_agl
            )));
        }
        let t = &self.texture;
        if !(t.base_cell > 0.0) || t.octaves == 0 || !(t.persistence > 0.0) {
            return Err(Error::InvalidParameter(
                "texture needs positive base_cell, octaves and persistence".into(),
            ));
        }
        match &self.trajectory {
            TrajectoryConfig::Hover(h) => {
                let pos = [
                    ("duration", h.duration),
                    ("dither_bandwidth", h.dither_bandwidth),
                ];
                for (name, v) in pos {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "trajectory.{name} must be positive, got {v}"
                        )));
                    }
                }
                for (name, v) in [
                    ("dither_std", h.dither_std),
                    ("settle_time", h.settle_time),
                    ("dither_ramp", h.dither_ramp),
                ] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "trajectory.{name} must be non-negative, got {v}"
                        )));
                    }
                }
                if !h.hold_position.iter().all(|v| v.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "trajectory.hold_position must be finite".into(),
                    ));
                }
            }
            TrajectoryConfig::Mission(m) => {
                for (name, v) in [
                    ("cruise_speed", m.cruise_speed),
                    ("climb_speed", m.climb_speed),
                    ("max_accel", m.max_accel),
                    ("yaw_rate", m.yaw_rate),
                ] {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "trajectory.{name} must be positive, got {v}"
                        )));
                    }
                }
                for (name, v) in [("pre_roll", m.pre_roll), ("post_roll", m.post_roll)] {
                    if !(v >= 0.0 && v.is_finite()) {
                        return Err(Error::InvalidParameter(format!(
                            "trajectory.{name} must be non-negative, got {v}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
