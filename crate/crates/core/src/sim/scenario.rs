use super::camera::{render_ground_image, RenderedFrame};
use super::config::{ScenarioConfig, TrajectoryConfig};
use super::rng::stream;
use super::sensors::{
    sample_baro, sample_gps, sample_imu, sample_mag, GpsErrorModel, SensorSample,
};
use super::trajectory::{hover_trajectory, reference_path, waypoint_trajectory, TruthTrajectory};
use crate::error::Result;
use crate::geom::Vec3;

/// A generated flight: truth, the merged sensor stream and the camera frames
/// referenced by its camera samples.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub truth: TruthTrajectory,
    pub samples: Vec<SensorSample>,
    pub frames: Vec<RenderedFrame>,
}

impl Scenario {
    /// Horizontal reference path (mission waypoints, or the hold point).
    pub fn reference_path(&self) -> Vec<[f64; 2]> {
        self.config.reference_path()
    }
}

impl ScenarioConfig {
    /// Horizontal reference path (mission waypoints, or the hold point).
    pub fn reference_path(&self) -> Vec<[f64; 2]> {
        match &self.trajectory {
            TrajectoryConfig::Hover(h) => vec![[h.hold_position[0], h.hold_position[1]]],
            TrajectoryConfig::Mission(m) => {
                let w: Vec<Vec3> = m.waypoints.iter().map(|p| Vec3::from(*p)).collect();
                reference_path(&w)
            }
        }
    }
}

/// True when a sensor at `rate` fires on truth sample `k` of a grid at
/// `base_rate`: at k = 0 and whenever `k * rate / base_rate` crosses an
/// integer.
fn fires(k: usize, rate: f64, base_rate: f64) -> bool {
    if k == 0 {
        return true;
    }
    let count = |i: usize| (i as f64 * rate / base_rate + 1e-9).floor();
    count(k) > count(k - 1)
}

pub fn truth_for(config: &ScenarioConfig) -> Result<TruthTrajectory> {
    let rate = config.noise.imu_rate;
    match &config.trajectory {
        TrajectoryConfig::Hover(h) => hover_trajectory(
            h.duration,
            Vec3::from(h.hold_position),
            h,
            rate,
            config.seed,
        ),
        TrajectoryConfig::Mission(m) => {
            let w: Vec<Vec3> = m.waypoints.iter().map(|p| Vec3::from(*p)).collect();
            waypoint_trajectory(&w, m, rate)
        }
    }
}

/// Generates the full scenario. Each sensor draws from its own named
/// random stream, so the output is a pure function of the configuration.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let truth = truth_for(config)?;
    let noise = &config.noise;
    let origin = config.origin()?;
    let earth = config.earth_field();
    let texture = config.texture();
    let intr = config.camera.intrinsics();

    let mut imu_rng = stream(config.seed, "imu");
    let mut gps_rng = stream(config.seed, "gps");
    let mut baro_rng = stream(config.seed, "baro");
    let mut mag_rng = stream(config.seed, "mag");
    let mut gps_model = GpsErrorModel::new();

    let mut samples = Vec::new();
    let mut frames = Vec::new();
    let base = noise.imu_rate;
    for (k, s) in truth.samples.iter().enumerate() {
        let t = s.t;
        if k > 0 {
            samples.push(sample_imu(&truth, t, noise, &mut imu_rng)?.into());
        }
        if fires(k, noise.baro_rate, base) {
            samples.push(sample_baro(&truth, t, noise, &mut baro_rng)?);
        }
        if fires(k, noise.mag_rate, base) {
            samples.push(sample_mag(&truth, t, noise, &earth, &mut mag_rng)?);
        }
        if fires(k, noise.gps_rate, base) {
            samples.push(sample_gps(
                &truth,
                t,
                noise,
                &mut gps_model,
                &origin,
                &mut gps_rng,
            )?);
        }
        if fires(k, noise.camera_rate, base) && -s.p.z >= config.camera.min_agl {
            frames.push(render_ground_image(s, &texture, &intr)?);
            samples.push(SensorSample::Camera {
                t,
                frame: frames.len() - 1,
            });
        }
    }
    Ok(Scenario {
        config: config.clone(),
        truth,
        samples,
        frames,
    })
}
