use std::collections::VecDeque;

use super::timeline::SensorTimeline;
use crate::ekf::{
    init_state, Ekf, FilterConfig, InitialUncertainty, InnovationRecord, Measurement,
    MeasurementNoise, OutputVector, ProcessNoise, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::geom::{lla_to_ned, GeoOrigin, Vec3, GRAVITY};
use crate::optflow::{
    farneback_flow_prepared, flow_to_body_velocity, mean_flow_rate, CameraIntrinsics, FlowParams,
    ImageFrame, PreparedFrame, MIN_FLOW_AGL,
};
use crate::sim::{RenderedFrame, ScenarioConfig, SensorNoiseConfig, SensorSample};

/// Random access to the frames referenced by camera events.
pub trait FrameSource {
    fn frame(&self, index: usize) -> Result<ImageFrame>;
}

impl FrameSource for [ImageFrame] {
    fn frame(&self, index: usize) -> Result<ImageFrame> {
        self.get(index)
            .cloned()
            .ok_or_else(|| Error::InvalidInput(format!("camera frame {index} does not exist")))
    }
}

impl FrameSource for [RenderedFrame] {
    fn frame(&self, index: usize) -> Result<ImageFrame> {
        self.get(index)
            .map(|f| f.frame.clone())
            .ok_or_else(|| Error::InvalidInput(format!("camera frame {index} does not exist")))
    }
}

/// Smallest standard deviation handed to the filter when the simulated
/// sensor is noise-free.
pub const NOISE_FLOOR: f64 = 1e-6;

/// Filter tuning whose noise levels match a simulated sensor suite.
pub fn matched_filter_config(noise: &SensorNoiseConfig, earth_field: [f64; 3]) -> FilterConfig {
    let f = |v: f64| v.max(NOISE_FLOOR);
    // a correlated error carries fewer independent samples than the GPS
    // rate suggests; inflate it to its equivalent white-noise std
    let inflation = (1.0 + 2.0 * noise.gps_correlation_time * noise.gps_rate).sqrt();
    let pos_h = (noise.gps_pos_std_h * inflation).hypot(noise.gps_white_std_h);
    let pos_v = (noise.gps_pos_std_v * inflation).hypot(noise.gps_white_std_v);
    let init_h = noise.gps_pos_std_h.hypot(noise.gps_white_std_h);
    let init_v = noise.gps_pos_std_v.hypot(noise.gps_white_std_v);
    let max_abs = |b: [f64; 3]| b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let field = Vec3::from(earth_field);
    let horizontal = field.xy().norm().max(1e-3);
    // tilt from the accelerometer bias, heading from magnetometer noise
    let tilt = noise.accel_bias().xy().norm() / GRAVITY;
    let heading = noise.mag_std / horizontal;
    let defaults = FilterConfig::default();
    FilterConfig {
        process: ProcessNoise {
            gyro_noise: noise.gyro_noise,
            accel_noise: noise.accel_noise,
            ..ProcessNoise::default()
        },
        measurement: MeasurementNoise {
            gps_pos_h: f(pos_h),
            gps_pos_v: f(pos_v),
            gps_vel: f(noise.gps_vel_std),
            baro: f(noise.baro_std),
            mag: f(noise.mag_std),
            flow: defaults.measurement.flow,
        },
        initial: InitialUncertainty {
            attitude: f(tilt.max(heading)),
            velocity: f(noise.gps_vel_std),
            position_h: f(init_h),
            position_v: f(init_v),
            gyro_bias: f(max_abs(noise.gyro_bias)),
            accel_bias: f(max_abs(noise.accel_bias)),
            ..InitialUncertainty::default()
        },
        earth_field,
        nominal_imu_dt: 1.0 / noise.imu_rate,
        ..defaults
    }
}

/// Settings of one fusion run.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub use_flow: bool,
    pub filter: FilterConfig,
    pub flow: FlowParams,
    pub intrinsics: CameraIntrinsics,
    /// geodetic origin of the local NED frame
    pub origin: GeoOrigin,
    /// pixels ignored at each image border when aggregating flow
    pub border_margin: usize,
    /// frame pairs further apart than this are not differenced, s
    pub max_frame_gap: f64,
    /// flow fields with a lower texture strength are discarded
    pub min_texture_strength: f64,
    /// IMU samples averaged for the initial attitude
    pub init_imu_samples: usize,
}

impl FusionConfig {
    /// Matched configuration for a simulated scenario.
    pub fn for_scenario(config: &ScenarioConfig, use_flow: bool) -> Result<Self> {
        Ok(Self {
            use_flow,
            filter: matched_filter_config(&config.noise, config.earth_field),
            flow: FlowParams::default(),
            intrinsics: config.camera.intrinsics(),
            origin: config.origin()?,
            border_margin: 8,
            max_frame_gap: 0.2,
            min_texture_strength: 1e-9,
            init_imu_samples: 50,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.flow.validate()?;
        self.intrinsics.validate()?;
        if self.init_imu_samples == 0 {
            return Err(Error::InvalidParameter(
                "init_imu_samples must be positive".into(),
            ));
        }
        if !(self.max_frame_gap > 0.0) || !(self.min_texture_strength >= 0.0) {
            return Err(Error::InvalidParameter(
                "max_frame_gap must be positive and min_texture_strength non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Filter output after all events of one IMU epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct NavRecord {
    pub t: f64,
    pub output: OutputVector,
    /// full state in storage order
    pub state: [f64; STATE_DIM],
    pub variance: [f64; STATE_DIM],
    /// NED position covariance
    pub position_cov: [[f64; 3]; 3],
}

impl NavRecord {
    /// Estimated NED position.
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.output.pn, self.output.pe, self.output.pd)
    }

    /// Estimated NED velocity.
    pub fn velocity(&self) -> Vec3 {
        Vec3::new(self.output.vn, self.output.ve, self.output.vd)
    }
}

/// Optical-flow bookkeeping of a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlowStats {
    /// frames prepared plus frame pairs differenced
    pub computations: usize,
    pub updates: usize,
    pub skipped_texture: usize,
    pub skipped_gap: usize,
    pub skipped_height: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NavLog {
    pub records: Vec<NavRecord>,
    pub innovations: Vec<InnovationRecord>,
    pub flow: FlowStats,
    /// time the filter was initialised, s
    pub init_time: f64,
}

/// Pre-initialisation buffer.
struct Initializer {
    accel: VecDeque<Vec3>,
    gps: Option<(Measurement, Measurement)>,
    mag: Option<Measurement>,
}

struct FlowTracker {
    previous: Option<PreparedFrame>,
    delta_angle: Vec3,
    elapsed: f64,
}

fn gps_measurements(
    t: f64,
    values: &[f64; 6],
    config: &FusionConfig,
) -> Result<(Measurement, Measurement)> {
    let m = &config.filter.measurement;
    let p = lla_to_ned(
        values[0].to_radians(),
        values[1].to_radians(),
        values[2],
        &config.origin,
    )?;
    let v = Vec3::new(values[3], values[4], values[5]);
    Ok((
        Measurement::gps_pos(t, p, m.gps_pos_h, m.gps_pos_v)?,
        Measurement::gps_vel(t, v, m.gps_vel)?,
    ))
}

fn record(ekf: &Ekf) -> NavRecord {
    let b = ekf.cov.position_block();
    NavRecord {
        t: ekf.time,
        output: ekf.output(),
        state: ekf.state.to_vector().into(),
        variance: ekf.cov.diagonal().into(),
        position_cov: [
            [b[(0, 0)], b[(0, 1)], b[(0, 2)]],
            [b[(1, 0)], b[(1, 1)], b[(1, 2)]],
            [b[(2, 0)], b[(2, 1)], b[(2, 2)]],
        ],
    }
}

/// Replays a timeline through the filter. IMU events predict, GPS, baro and
/// magnetometer events update, and with `use_flow` each camera frame is
/// differenced against the previous one into a body-velocity update.
pub fn run_fusion<F: FrameSource + ?Sized>(
    timeline: &SensorTimeline,
    frames: &F,
    config: &FusionConfig,
) -> Result<NavLog> {
    config.validate()?;
    let mut log = NavLog::default();
    let mut init = Initializer {
        accel: VecDeque::with_capacity(config.init_imu_samples),
        gps: None,
        mag: None,
    };
    let mut flow = FlowTracker {
        previous: None,
        delta_angle: Vec3::zeros(),
        elapsed: 0.0,
    };
    let mut ekf: Option<Ekf> = None;
    let mut pending = false;

    for event in timeline.events() {
        let Some(filter) = ekf.as_mut() else {
            match event {
                SensorSample::Imu { .. } => {
                    let imu = event.imu().expect("imu event");
                    imu.validate()?;
                    if init.accel.len() == config.init_imu_samples {
                        init.accel.pop_front();
                    }
                    init.accel.push_back(imu.specific_force());
                }
                SensorSample::Gps { t, values } => {
                    init.gps = Some(gps_measurements(*t, values, config)?);
                }
                SensorSample::Mag { t, values } => {
                    init.mag = Some(Measurement::mag(
                        *t,
                        Vec3::from(*values),
                        config.filter.measurement.mag,
                    )?);
                }
                _ => {}
            }
            let ready = matches!(event, SensorSample::Imu { .. })
                && init.accel.len() == config.init_imu_samples;
            if let (true, Some((pos, vel)), Some(mag)) = (ready, &init.gps, &init.mag) {
                let mean = init.accel.iter().sum::<Vec3>() / init.accel.len() as f64;
                let (state, cov) = init_state(pos, Some(vel), mag, &mean, &config.filter)?;
                let filter = Ekf::new(config.filter, state, cov, event.t())?;
                log.init_time = event.t();
                ekf = Some(filter);
                pending = true;
            }
            continue;
        };

        match event {
            SensorSample::Imu { .. } => {
                if pending {
                    log.records.push(record(filter));
                }
                let imu = event.imu().expect("imu event");
                filter.predict(&imu).map_err(|e| match e {
                    Error::NumericalHealth { .. } | Error::Fault(_) => e,
                    other => Error::Fault(format!("IMU sample at t = {}: {other}", imu.timestamp)),
                })?;
                flow.delta_angle += imu.delta_angle;
                flow.elapsed += imu.dt;
                pending = true;
            }
            SensorSample::Gps { t, values } => {
                let (pos, vel) = gps_measurements(*t, values, config)?;
                log.innovations.push(filter.update(&pos)?);
                log.innovations.push(filter.update(&vel)?);
            }
            SensorSample::Baro { t, values } => {
                let m = Measurement::baro(*t, values[0], config.filter.measurement.baro)?;
                log.innovations.push(filter.update(&m)?);
            }
            SensorSample::Mag { t, values } => {
                let m = Measurement::mag(*t, Vec3::from(*values), config.filter.measurement.mag)?;
                log.innovations.push(filter.update(&m)?);
            }
            SensorSample::Camera { t, frame } => {
                if !config.use_flow {
                    continue;
                }
                if let Some(rec) =
                    flow_update(filter, &mut flow, &mut log.flow, *t, *frame, frames, config)?
                {
                    log.innovations.push(rec);
                }
            }
        }
    }
    match ekf {
        Some(filter) => {
            if pending {
                log.records.push(record(&filter));
            }
            Ok(log)
        }
        None => Err(Error::Fault(format!(
            "filter never initialised: needs a GPS fix, a magnetometer sample and {} IMU samples",
            config.init_imu_samples
        ))),
    }
}

fn flow_update<F: FrameSource + ?Sized>(
    filter: &mut Ekf,
    tracker: &mut FlowTracker,
    stats: &mut FlowStats,
    t: f64,
    index: usize,
    frames: &F,
    config: &FusionConfig,
) -> Result<Option<InnovationRecord>> {
    let mut image = frames.frame(index)?;
    image.timestamp = t;
    let current = PreparedFrame::new(&image, &config.flow)?;
    let previous = tracker.previous.replace(current);
    let (delta_angle, elapsed) = (tracker.delta_angle, tracker.elapsed);
    tracker.delta_angle = Vec3::zeros();
    tracker.elapsed = 0.0;

    let Some(previous) = previous else {
        return Ok(None);
    };
    let current = tracker.previous.as_ref().expect("just stored");
    let gap = t - previous.timestamp;
    if !(gap > 0.0 && gap <= config.max_frame_gap) || !(elapsed > 0.0) {
        stats.skipped_gap += 1;
        return Ok(None);
    }
    let field = farneback_flow_prepared(&previous, current, &config.flow)?;
    stats.computations += 1;
    if !(field.texture_strength >= config.min_texture_strength) {
        stats.skipped_texture += 1;
        return Ok(None);
    }
    let h_agl = -filter.state.p.z;
    if !(h_agl > MIN_FLOW_AGL) {
        stats.skipped_height += 1;
        return Ok(None);
    }
    let rate = mean_flow_rate(&field, config.border_margin)?;
    // mean body rate over the frame interval, bias removed
    let steps = elapsed / config.filter.nominal_imu_dt;
    let gyro = (delta_angle - filter.state.b_dang * steps) / elapsed;
    let v = flow_to_body_velocity(&rate, &gyro, h_agl, &config.intrinsics)?;
    let m = Measurement::flow(t, v, h_agl, config.filter.measurement.flow)?;
    stats.updates += 1;
    filter.update(&m).map(Some)
}
