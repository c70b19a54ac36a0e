use std::sync::OnceLock;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::measurement::{ImuSample, Measurement, MeasurementKind, SensorKind};
use super::state::{
    idx, output_vector, CovMatrix, NavCovariance, NavState, OutputVector, StateVector, STATE_DIM,
};
use crate::error::{Error, Result};
use crate::geom::{gravity_ned, wrap_pi, EulerAngles, Quaternion, Vec2, Vec3, GRAVITY};

/// Continuous noise densities driving the covariance propagation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessNoise {
    /// rad/s/sqrt(Hz)
    pub gyro_noise: f64,
    /// m/s^2/sqrt(Hz)
    pub accel_noise: f64,
    /// rad/s^2/sqrt(Hz)
    pub gyro_bias_rw: f64,
    /// m/s^3/sqrt(Hz)
    pub accel_bias_rw: f64,
    /// m/s^2/sqrt(Hz)
    pub wind_rw: f64,
    /// gauss/s/sqrt(Hz)
    pub mag_earth_rw: f64,
    /// gauss/s/sqrt(Hz)
    pub mag_body_rw: f64,
}

impl Default for ProcessNoise {
    fn default() -> Self {
        Self {
            gyro_noise: 1.5e-3,
            accel_noise: 0.05,
            gyro_bias_rw: 1e-5,
            accel_bias_rw: 1e-3,
            wind_rw: 1e-6,
            mag_earth_rw: 1e-4,
            mag_body_rw: 1e-4,
        }
    }
}

impl ProcessNoise {
    pub fn zero() -> Self {
        Self {
            gyro_noise: 0.0,
            accel_noise: 0.0,
            gyro_bias_rw: 0.0,
            accel_bias_rw: 0.0,
            wind_rw: 0.0,
            mag_earth_rw: 0.0,
            mag_body_rw: 0.0,
        }
    }
}

/// Standard deviations assigned to aiding measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MeasurementNoise {
    /// m
    pub gps_pos_h: f64,
    /// m
    pub gps_pos_v: f64,
    /// m/s
    pub gps_vel: f64,
    /// m
    pub baro: f64,
    /// gauss
    pub mag: f64,
    /// m/s
    pub flow: f64,
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self {
            gps_pos_h: 1.2,
            gps_pos_v: 2.5,
            gps_vel: 0.3,
            baro: 0.8,
            mag: 0.01,
            flow: 0.15,
        }
    }
}

/// One-sigma initial uncertainties, in physical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InitialUncertainty {
    /// rad, per axis
    pub attitude: f64,
    /// m/s
    pub velocity: f64,
    /// m
    pub position_h: f64,
    /// m
    pub position_v: f64,
    /// rad/s
    pub gyro_bias: f64,
    /// m/s^2
    pub accel_bias: f64,
    /// m/s
    pub wind: f64,
    /// gauss
    pub mag_earth: f64,
    /// gauss
    pub mag_body: f64,
}

impl Default for InitialUncertainty {
    fn default() -> Self {
        Self {
            attitude: 0.05,
            velocity: 0.5,
            position_h: 1.2,
            position_v: 2.5,
            gyro_bias: 0.005,
            accel_bias: 0.1,
            wind: 0.01,
            mag_earth: 0.01,
            mag_body: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub process: ProcessNoise,
    pub measurement: MeasurementNoise,
    pub initial: InitialUncertainty,
    /// local earth field, NED gauss
    pub earth_field: [f64; 3],
    /// s
    pub nominal_imu_dt: f64,
    pub gate_probability: f64,
    pub fd_step: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            process: ProcessNoise::default(),
            measurement: MeasurementNoise::default(),
            initial: InitialUncertainty::default(),
            earth_field: [0.22, 0.0, 0.41],
            nominal_imu_dt: 0.01,
            gate_probability: 0.99,
            fd_step: 1e-6,
        }
    }
}

impl FilterConfig {
    pub fn earth_field(&self) -> Vec3 {
        Vec3::from(self.earth_field)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.process;
        let m = &self.measurement;
        let i = &self.initial;
        let nonneg = [
            ("gyro_noise", p.gyro_noise),
            ("accel_noise", p.accel_noise),
            ("gyro_bias_rw", p.gyro_bias_rw),
            ("accel_bias_rw", p.accel_bias_rw),
            ("wind_rw", p.wind_rw),
            ("mag_earth_rw", p.mag_earth_rw),
            ("mag_body_rw", p.mag_body_rw),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        let positive = [
            ("gps_pos_h", m.gps_pos_h),
            ("gps_pos_v", m.gps_pos_v),
            ("gps_vel", m.gps_vel),
            ("baro", m.baro),
            ("mag", m.mag),
            ("flow", m.flow),
            ("initial attitude", i.attitude),
            ("initial velocity", i.velocity),
            ("initial position_h", i.position_h),
            ("initial position_v", i.position_v),
            ("initial gyro_bias", i.gyro_bias),
            ("initial accel_bias", i.accel_bias),
            ("initial wind", i.wind),
            ("initial mag_earth", i.mag_earth),
            ("initial mag_body", i.mag_body),
            ("nominal_imu_dt", self.nominal_imu_dt),
            ("fd_step", self.fd_step),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.gate_probability > 0.0 && self.gate_probability < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gate probability must lie in (0, 1), got {}",
                self.gate_probability
            )));
        }
        if !self.earth_field.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite earth field".into()));
        }
        Ok(())
    }
}

/// Chi-square quantile used as the innovation gate.
pub fn gate_threshold(dim: usize, probability: f64) -> f64 {
    static TABLE: OnceLock<[f64; 3]> = OnceLock::new();
    let compute = |d: usize, p: f64| {
        ChiSquared::new(d as f64)
            .expect("positive degrees of freedom")
            .inverse_cdf(p)
    };
    if probability == 0.99 && (1..=3).contains(&dim) {
        let t = TABLE.get_or_init(|| [compute(1, 0.99), compute(2, 0.99), compute(3, 0.99)]);
        t[dim - 1]
    } else {
        compute(dim, probability)
    }
}

/// Outcome of one measurement update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovationRecord {
    pub timestamp: f64,
    pub sensor: SensorKind,
    /// z - h(x)
    pub innovation: Vec<f64>,
    /// diagonal of the innovation covariance
    pub variance: Vec<f64>,
    /// normalized innovation squared
    pub nis: f64,
    pub gate: f64,
    pub accepted: bool,
}

/// Covariance health tolerance: `P + eps I` must stay positive definite.
const HEALTH_EPS: f64 = 1e-6;
/// Floor applied to initial variances.
const MIN_VARIANCE: f64 = 1e-12;

/// Tilt from the averaged specific force (body FRD, a level static vehicle
/// reads `(0, 0, -g)`).
pub fn roll_pitch_from_accel(accel: &Vec3) -> (f64, f64) {
    let roll = (-accel.y).atan2(-accel.z);
    let pitch = accel
        .x
        .atan2((accel.y * accel.y + accel.z * accel.z).sqrt());
    (roll, pitch)
}

/// Heading from a body-frame field after removing the tilt, referenced to
/// the declination of `earth_field`.
pub fn yaw_from_mag(mag_body: &Vec3, roll: f64, pitch: f64, earth_field: &Vec3) -> f64 {
    let tilt = Quaternion::from_euler(&EulerAngles::new(roll, pitch, 0.0));
    let level = tilt.rotate(mag_body);
    let declination = earth_field.y.atan2(earth_field.x);
    wrap_pi((-level.y).atan2(level.x) + declination)
}

/// Static alignment from the first GPS fix (and optional GPS velocity), the
/// first magnetometer sample and the averaged accelerometer.
pub fn init_state(
    first_gps: &Measurement,
    first_gps_vel: Option<&Measurement>,
    first_mag: &Measurement,
    accel_avg: &Vec3,
    config: &FilterConfig,
) -> Result<(NavState, NavCovariance)> {
    config.validate()?;
    let MeasurementKind::GpsPos(p) = first_gps.kind else {
        return Err(Error::InvalidInput(format!(
            "initialization needs a GPS position, got {}",
            first_gps.sensor()
        )));
    };
    let MeasurementKind::Mag(m) = first_mag.kind else {
        return Err(Error::InvalidInput(format!(
            "initialization needs a magnetometer sample, got {}",
            first_mag.sensor()
        )));
    };
    let v = match first_gps_vel.map(|g| g.kind) {
        Some(MeasurementKind::GpsVel(v)) => v,
        Some(_) => {
            return Err(Error::InvalidInput(
                "initial velocity must come from a GPS velocity".into(),
            ))
        }
        None => Vec3::zeros(),
    };
    let magnitude = accel_avg.norm();
    if !(0.8 * GRAVITY..=1.2 * GRAVITY).contains(&magnitude) {
        return Err(Error::NotStatic { magnitude });
    }

    let (roll, pitch) = roll_pitch_from_accel(accel_avg);
    let earth = config.earth_field();
    let yaw = yaw_from_mag(&m, roll, pitch, &earth);
    let q = Quaternion::from_euler(&EulerAngles::new(roll, pitch, yaw));
    let state = NavState {
        q,
        v,
        p,
        b_dang: Vec3::zeros(),
        b_dvel: Vec3::zeros(),
        wind: Vec2::zeros(),
        mag_earth: earth,
        mag_body: Vec3::zeros(),
    };
    Ok((state, initial_covariance(&q, config)))
}

/// Diagonal-block initial covariance; the attitude uncertainty is mapped
/// into quaternion space through the small-rotation Jacobian.
pub fn initial_covariance(q: &Quaternion, config: &FilterConfig) -> NavCovariance {
    let i = &config.initial;
    let dt = config.nominal_imu_dt;
    let mut p = CovMatrix::zeros();

    // dq = 0.5 * q (x) [0, dtheta]
    let l = q.left_matrix();
    let j = 0.5 * l.fixed_view::<4, 3>(0, 1);
    let pq = j * j.transpose() * (i.attitude * i.attitude);
    p.fixed_view_mut::<4, 4>(idx::QUAT, idx::QUAT)
        .copy_from(&pq);

    let mut set = |start: usize, n: usize, sigma: f64| {
        for k in start..start + n {
            p[(k, k)] += sigma * sigma;
        }
    };
    set(idx::VEL, 3, i.velocity);
    set(idx::POS, 2, i.position_h);
    set(idx::POS + 2, 1, i.position_v);
    set(idx::DANG_BIAS, 3, i.gyro_bias * dt);
    set(idx::DVEL_BIAS, 3, i.accel_bias * dt);
    set(idx::WIND, 2, i.wind);
    set(idx::MAG_EARTH, 3, i.mag_earth);
    set(idx::MAG_BODY, 3, i.mag_body);
    for k in 0..STATE_DIM {
        p[(k, k)] = p[(k, k)].max(MIN_VARIANCE);
    }
    NavCovariance(p)
}

fn quat_of(x: &StateVector) -> Quaternion {
    Quaternion::from_vector(&x.fixed_rows::<4>(idx::QUAT).into_owned())
}

/// Re-normalizes the quaternion block in place (no-op for a zero block).
fn normalize_quat_block(x: &mut StateVector) {
    let n = x.fixed_rows::<4>(idx::QUAT).norm();
    if n > 0.0 && n.is_finite() {
        x.fixed_rows_mut::<4>(idx::QUAT).unscale_mut(n);
    }
}

/// Strapdown mechanization `f(x, u)` on the flat state. `u` holds the raw
/// delta angle and delta velocity.
fn mechanize(x: &StateVector, u: &SVector<f64, 6>, dt: f64, nominal_dt: f64) -> StateVector {
    let scale = dt / nominal_dt;
    let dang = u.fixed_rows::<3>(0) - x.fixed_rows::<3>(idx::DANG_BIAS) * scale;
    let dvel = u.fixed_rows::<3>(3) - x.fixed_rows::<3>(idx::DVEL_BIAS) * scale;

    let q = quat_of(x) * Quaternion::from_rotation_vector(&dang);
    let q = q.normalize().unwrap_or(q);
    let v_prev: Vec3 = x.fixed_rows::<3>(idx::VEL).into_owned();
    let v = v_prev + q.rotate(&dvel) + gravity_ned() * dt;
    let p = x.fixed_rows::<3>(idx::POS) + (v_prev + v) * (0.5 * dt);

    let mut out = *x;
    out.fixed_rows_mut::<4>(idx::QUAT).copy_from(&q.to_vector());
    out.fixed_rows_mut::<3>(idx::VEL).copy_from(&v);
    out.fixed_rows_mut::<3>(idx::POS).copy_from(&p);
    out
}

fn imu_input(imu: &ImuSample) -> SVector<f64, 6> {
    let mut u = SVector::<f64, 6>::zeros();
    u.fixed_rows_mut::<3>(0).copy_from(&imu.delta_angle);
    u.fixed_rows_mut::<3>(3).copy_from(&imu.delta_velocity);
    u
}

/// State transition Jacobian by central differences, with the quaternion
/// re-normalized inside each perturbation.
pub fn transition_jacobian(
    state: &NavState,
    imu: &ImuSample,
    nominal_dt: f64,
    step: f64,
) -> CovMatrix {
    let x = state.to_vector();
    let u = imu_input(imu);
    let mut f = CovMatrix::zeros();
    for j in 0..STATE_DIM {
        let mut xp = x;
        let mut xm = x;
        xp[j] += step;
        xm[j] -= step;
        normalize_quat_block(&mut xp);
        normalize_quat_block(&mut xm);
        let d = (mechanize(&xp, &u, imu.dt, nominal_dt) - mechanize(&xm, &u, imu.dt, nominal_dt))
            / (2.0 * step);
        f.set_column(j, &d);
    }
    f
}

/// Discrete process noise: IMU noise mapped through the input Jacobian plus
/// random walks on the slowly varying states.
fn process_noise(x: &StateVector, imu: &ImuSample, config: &FilterConfig) -> CovMatrix {
    let pn = &config.process;
    let dt = imu.dt;
    let nominal = config.nominal_imu_dt;
    let mut q = CovMatrix::zeros();

    let var_dang = pn.gyro_noise * pn.gyro_noise * dt;
    let var_dvel = pn.accel_noise * pn.accel_noise * dt;
    if var_dang > 0.0 || var_dvel > 0.0 {
        let u = imu_input(imu);
        let h = config.fd_step;
        let mut g = SMatrix::<f64, STATE_DIM, 6>::zeros();
        for j in 0..6 {
            let mut up = u;
            let mut um = u;
            up[j] += h;
            um[j] -= h;
            let d = (mechanize(x, &up, dt, nominal) - mechanize(x, &um, dt, nominal)) / (2.0 * h);
            g.set_column(j, &d);
        }
        let qu = SVector::<f64, 6>::new(var_dang, var_dang, var_dang, var_dvel, var_dvel, var_dvel);
        q += g * SMatrix::<f64, 6, 6>::from_diagonal(&qu) * g.transpose();
    }

    let mut add = |start: usize, n: usize, var: f64| {
        for k in start..start + n {
            q[(k, k)] += var;
        }
    };
    add(idx::DANG_BIAS, 3, (pn.gyro_bias_rw * nominal).powi(2) * dt);
    add(idx::DVEL_BIAS, 3, (pn.accel_bias_rw * nominal).powi(2) * dt);
    add(idx::WIND, 2, pn.wind_rw.powi(2) * dt);
    add(idx::MAG_EARTH, 3, pn.mag_earth_rw.powi(2) * dt);
    add(idx::MAG_BODY, 3, pn.mag_body_rw.powi(2) * dt);
    q
}

fn check_health(state: &NavState, cov: &NavCovariance, time: f64) -> Result<()> {
    if !state.is_finite() || !cov.0.iter().all(|v| v.is_finite()) {
        return Err(Error::NumericalHealth {
            time,
            reason: "non-finite state or covariance".into(),
        });
    }
    if !cov.is_psd_within(HEALTH_EPS) {
        return Err(Error::NumericalHealth {
            time,
            reason: format!("covariance eigenvalue below -{HEALTH_EPS}"),
        });
    }
    Ok(())
}

/// Propagates state and covariance over one IMU interval.
pub fn predict(
    state: &NavState,
    cov: &NavCovariance,
    imu: &ImuSample,
    config: &FilterConfig,
) -> Result<(NavState, NavCovariance)> {
    imu.validate().map_err(|e| Error::Fault(e.to_string()))?;
    if !state.is_finite() {
        return Err(Error::Fault(format!(
            "non-finite state before prediction at t = {}",
            imu.timestamp
        )));
    }
    let nominal = config.nominal_imu_dt;
    let x = state.to_vector();
    let x_new = mechanize(&x, &imu_input(imu), imu.dt, nominal);
    let f = transition_jacobian(state, imu, nominal, config.fd_step);
    let q = process_noise(&x, imu, config);

    let mut next = NavState::from_vector(&x_new);
    next.tidy();
    let mut p = NavCovariance(f * cov.0 * f.transpose() + q);
    p.symmetrize();
    check_health(&next, &p, imu.timestamp)?;
    Ok((next, p))
}

/// Body-frame field predicted by the magnetometer model.
fn mag_model(s: &NavState) -> Vec3 {
    s.q.inverse_rotate(&s.mag_earth) + s.mag_body
}

/// Body-frame horizontal velocity predicted for the flow sensor.
fn flow_model(s: &NavState) -> Vec2 {
    s.q.inverse_rotate(&s.v).xy()
}

/// Fuses one aiding measurement. A gated measurement leaves state and
/// covariance untouched and is reported through the record.
pub fn update(
    state: &NavState,
    cov: &NavCovariance,
    meas: &Measurement,
    config: &FilterConfig,
) -> Result<(NavState, NavCovariance, InnovationRecord)> {
    meas.validate()?;
    match meas.kind {
        MeasurementKind::GpsPos(z) => update_fixed(state, cov, meas, z, |s| s.p, config),
        MeasurementKind::GpsVel(z) => update_fixed(state, cov, meas, z, |s| s.v, config),
        MeasurementKind::Baro(a) => update_fixed(
            state,
            cov,
            meas,
            SVector::<f64, 1>::new(a),
            |s| SVector::<f64, 1>::new(-s.p.z),
            config,
        ),
        MeasurementKind::Mag(z) => update_fixed(state, cov, meas, z, mag_model, config),
        MeasurementKind::FlowVel { velocity, .. } => {
            update_fixed(state, cov, meas, velocity, flow_model, config)
        }
    }
}

/// Measurement Jacobian by central differences.
pub fn measurement_jacobian<const M: usize>(
    state: &NavState,
    h: impl Fn(&NavState) -> SVector<f64, M>,
    step: f64,
) -> SMatrix<f64, M, STATE_DIM> {
    let x = state.to_vector();
    let mut jac = SMatrix::<f64, M, STATE_DIM>::zeros();
    for j in 0..STATE_DIM {
        let mut xp = x;
        let mut xm = x;
        xp[j] += step;
        xm[j] -= step;
        normalize_quat_block(&mut xp);
        normalize_quat_block(&mut xm);
        let d = (h(&NavState::from_vector(&xp)) - h(&NavState::from_vector(&xm))) / (2.0 * step);
        jac.set_column(j, &d);
    }
    jac
}

fn update_fixed<const M: usize>(
    state: &NavState,
    cov: &NavCovariance,
    meas: &Measurement,
    z: SVector<f64, M>,
    h: impl Fn(&NavState) -> SVector<f64, M>,
    config: &FilterConfig,
) -> Result<(NavState, NavCovariance, InnovationRecord)> {
    let time = meas.timestamp;
    let hx = h(state);
    let jac = measurement_jacobian(state, &h, config.fd_step);
    let r = SMatrix::<f64, M, M>::from_diagonal(&SVector::<f64, M>::from_iterator(
        meas.noise_std.iter().map(|s| s * s),
    ));
    let pht = cov.0 * jac.transpose();
    let mut s = jac * pht + r;
    s = (s + s.transpose()) * 0.5;
    let y = z - hx;
    let chol = s.cholesky().ok_or_else(|| Error::NumericalHealth {
        time,
        reason: format!("singular {} innovation covariance", meas.sensor()),
    })?;
    let nis = y.dot(&chol.solve(&y));
    let gate = gate_threshold(M, config.gate_probability);
    let mut record = InnovationRecord {
        timestamp: time,
        sensor: meas.sensor(),
        innovation: y.iter().copied().collect(),
        variance: s.diagonal().iter().copied().collect(),
        nis,
        gate,
        accepted: nis.is_finite() && nis <= gate,
    };
    if !record.accepted {
        return Ok((*state, cov.clone(), record));
    }

    // K = P H^T S^-1, computed as (S^-1 H P)^T
    let k = chol.solve(&pht.transpose()).transpose();
    let x = state.to_vector() + k * y;
    let mut next = NavState::from_vector(&x);
    next.tidy();

    let ikh = CovMatrix::identity() - k * jac;
    let mut p = NavCovariance(ikh * cov.0 * ikh.transpose() + k * r * k.transpose());
    p.symmetrize();
    check_health(&next, &p, time)?;
    record.accepted = true;
    Ok((next, p, record))
}

/// Filter instance: state, covariance, configuration and current time.
#[derive(Debug, Clone)]
pub struct Ekf {
    pub state: NavState,
    pub cov: NavCovariance,
    pub time: f64,
    config: FilterConfig,
}

impl Ekf {
    pub fn new(
        config: FilterConfig,
        state: NavState,
        cov: NavCovariance,
        time: f64,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            state,
            cov,
            time,
            config,
        })
    }

    pub fn config(&self) -> &FilterConfig {
        &self.config
    }

    pub fn predict(&mut self, imu: &ImuSample) -> Result<()> {
        let (s, p) = predict(&self.state, &self.cov, imu, &self.config)?;
        self.state = s;
        self.cov = p;
        self.time = imu.timestamp;
        Ok(())
    }

    pub fn update(&mut self, meas: &Measurement) -> Result<InnovationRecord> {
        let (s, p, rec) = update(&self.state, &self.cov, meas, &self.config)?;
        self.state = s;
        self.cov = p;
        Ok(rec)
    }

    pub fn output(&self) -> OutputVector {
        output_vector(&self.state, self.config.nominal_imu_dt)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            timestamp: self.time,
            state: self.state.to_vector().into(),
            variance: self.cov.diagonal().into(),
        }
    }
}

/// Serializable state row: timestamp, the 24 states, their 24 variances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Snapshot {
    pub timestamp: f64,
    pub state: [f64; STATE_DIM],
    pub variance: [f64; STATE_DIM],
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Mat3;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn level_config() -> FilterConfig {
        FilterConfig::default()
    }

    fn level_init() -> (NavState, NavCovariance) {
        let cfg = level_config();
        let gps = Measurement::gps_pos(0.0, Vec3::zeros(), 1.2, 2.5).unwrap();
        let mag = Measurement::mag(0.0, cfg.earth_field(), 0.01).unwrap();
        init_state(&gps, None, &mag, &Vec3::new(0.0, 0.0, -9.81), &cfg).unwrap()
    }

    fn hover_imu(t: f64) -> ImuSample {
        ImuSample::new(t, Vec3::zeros(), Vec3::new(0.0, 0.0, -GRAVITY * 0.01), 0.01)
    }

    #[test]
    fn init_level() {
        let (s, p) = level_init();
        let e = s.euler();
        assert!(e.roll.abs() < 1e-12 && e.pitch.abs() < 1e-12 && e.yaw.abs() < 1e-12);
        assert_eq!(s.p, Vec3::zeros());
        assert_eq!(s.b_dang, Vec3::zeros());
        assert_eq!(s.wind, Vec2::zeros());
        assert_eq!(s.mag_body, Vec3::zeros());
        assert!(p.diagonal().iter().all(|v| *v > 0.0));
        assert!(p.max_asymmetry() < 1e-15);
    }

    #[test]
    fn init_tilted_pitch() {
        let cfg = level_config();
        let theta = 10f64.to_radians();
        let accel = Vec3::new(9.81 * theta.sin(), 0.0, -9.81 * theta.cos());
        let q_true = Quaternion::from_euler(&EulerAngles::new(0.0, theta, 0.0));
        let mag = Measurement::mag(0.0, q_true.inverse_rotate(&cfg.earth_field()), 0.01).unwrap();
        let gps = Measurement::gps_pos(0.0, Vec3::new(3.0, 4.0, -5.0), 1.2, 2.5).unwrap();
        let (s, _) = init_state(&gps, None, &mag, &accel, &cfg).unwrap();
        let e = s.euler();
        assert!((e.pitch - theta).abs() < 0.1f64.to_radians());
        assert!(e.roll.abs() < 1e-9 && e.yaw.abs() < 1e-9);
        assert_eq!(s.p, Vec3::new(3.0, 4.0, -5.0));
    }

    #[test]
    fn init_heading_from_tilted_mag() {
        let mut cfg = level_config();
        cfg.earth_field = [0.2, 0.05, 0.4];
        let truth = EulerAngles::new(0.1, -0.15, 2.3);
        let q = Quaternion::from_euler(&truth);
        let accel = q.inverse_rotate(&Vec3::new(0.0, 0.0, -GRAVITY));
        let mag = Measurement::mag(0.0, q.inverse_rotate(&cfg.earth_field()), 0.01).unwrap();
        let gps = Measurement::gps_pos(0.0, Vec3::zeros(), 1.2, 2.5).unwrap();
        let vel = Measurement::gps_vel(0.0, Vec3::new(0.1, 0.0, 0.0), 0.3).unwrap();
        let (s, _) = init_state(&gps, Some(&vel), &mag, &accel, &cfg).unwrap();
        let e = s.euler();
        assert!((e.roll - truth.roll).abs() < 1e-9);
        assert!((e.pitch - truth.pitch).abs() < 1e-9);
        assert!((e.yaw - truth.yaw).abs() < 1e-9);
        assert_eq!(s.v, Vec3::new(0.1, 0.0, 0.0));
    }

    #[test]
    fn init_rejects_moving_vehicle() {
        let cfg = level_config();
        let gps = Measurement::gps_pos(0.0, Vec3::zeros(), 1.2, 2.5).unwrap();
        let mag = Measurement::mag(0.0, cfg.earth_field(), 0.01).unwrap();
        for a in [5.0, 13.0] {
            let r = init_state(&gps, None, &mag, &Vec3::new(0.0, 0.0, -a), &cfg);
            assert!(matches!(r, Err(Error::NotStatic { .. })));
        }
        let r = init_state(&mag, None, &gps, &Vec3::new(0.0, 0.0, -9.8), &cfg);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn static_equilibrium() {
        let cfg = level_config();
        let (s0, p0) = level_init();
        let (mut s, mut p) = (s0, p0);
        for k in 1..=100 {
            (s, p) = predict(&s, &p, &hover_imu(k as f64 * 0.01), &cfg).unwrap();
        }
        assert!((s.to_vector() - s0.to_vector()).amax() < 1e-9);
    }

    #[test]
    fn constant_acceleration() {
        let mut cfg = level_config();
        cfg.process = ProcessNoise::zero();
        let (mut s, mut p) = level_init();
        // 1 m/s^2 forward on top of gravity compensation
        let imu = |t| {
            ImuSample::new(
                t,
                Vec3::zeros(),
                Vec3::new(0.01, 0.0, -GRAVITY * 0.01),
                0.01,
            )
        };
        for k in 1..=100 {
            (s, p) = predict(&s, &p, &imu(k as f64 * 0.01), &cfg).unwrap();
        }
        assert!((s.v.x - 1.0).abs() < 1e-9);
        assert!((s.p.x - 0.5).abs() < 0.005);
    }

    #[test]
    fn yaw_summation() {
        let cfg = level_config();
        let (mut s, mut p) = level_init();
        for k in 1..=157 {
            let imu = ImuSample::new(
                k as f64 * 0.01,
                Vec3::new(0.0, 0.0, 0.01),
                Vec3::new(0.0, 0.0, -GRAVITY * 0.01),
                0.01,
            );
            (s, p) = predict(&s, &p, &imu, &cfg).unwrap();
        }
        assert!((s.euler().yaw - FRAC_PI_2).abs() < 1e-3);
    }

    #[test]
    fn predict_rejects_bad_input() {
        let cfg = level_config();
        let (s, p) = level_init();
        let mut imu = hover_imu(0.01);
        imu.delta_velocity.x = f64::NAN;
        assert!(matches!(predict(&s, &p, &imu, &cfg), Err(Error::Fault(_))));
    }

    #[test]
    fn corrupted_covariance_is_a_health_fault() {
        let cfg = level_config();
        let (s, mut p) = level_init();
        p.0[(idx::POS, idx::POS)] = -1.0;
        assert!(matches!(
            predict(&s, &p, &hover_imu(0.01), &cfg),
            Err(Error::NumericalHealth { .. })
        ));
    }

    #[test]
    fn zero_innovation_shrinks_covariance() {
        let cfg = level_config();
        let (s, p) = level_init();
        let meas = [
            Measurement::gps_pos(0.0, s.p, 1.2, 2.5).unwrap(),
            Measurement::gps_vel(0.0, s.v, 0.3).unwrap(),
            Measurement::baro(0.0, -s.p.z, 0.8).unwrap(),
            Measurement::mag(0.0, mag_model(&s), 0.01).unwrap(),
            Measurement::flow(0.0, flow_model(&s), 5.0, 0.15).unwrap(),
        ];
        for m in &meas {
            let (s2, p2, rec) = update(&s, &p, m, &cfg).unwrap();
            assert!(rec.accepted);
            assert!(
                (s2.to_vector() - s.to_vector()).amax() < 1e-12,
                "{}",
                m.sensor()
            );
            assert!(p2.0.trace() <= p.0.trace());
        }
    }

    #[test]
    fn scalar_gain_half() {
        let cfg = level_config();
        let (s, _) = level_init();
        let mut d = StateVector::from_element(0.01);
        d[idx::POS] = 1.44;
        d[idx::POS + 1] = 1.44;
        d[idx::POS + 2] = 6.25;
        let p = NavCovariance::from_diagonal(&d);
        let m = Measurement::gps_pos(0.0, Vec3::new(1.0, 0.0, 0.0), 1.2, 2.5).unwrap();
        let (s2, p2, rec) = update(&s, &p, &m, &cfg).unwrap();
        assert!(rec.accepted);
        assert!((s2.p.x - 0.5).abs() < 1e-9);
        assert!((p2.0[(idx::POS, idx::POS)] - 0.72).abs() < 1e-9);
    }

    #[test]
    fn large_innovation_is_gated() {
        let cfg = level_config();
        let (s, _) = level_init();
        let mut d = StateVector::from_element(1e-4);
        d[idx::POS + 2] = 1e-8;
        let p = NavCovariance::from_diagonal(&d);
        let m = Measurement::baro(0.0, 10.0, 1.0).unwrap();
        let (s2, p2, rec) = update(&s, &p, &m, &cfg).unwrap();
        assert!(!rec.accepted);
        assert!((rec.nis - 100.0).abs() < 1e-3);
        assert!((rec.gate - 6.634_896_601).abs() < 1e-6);
        assert_eq!(s2, s);
        assert_eq!(p2, p);

        // 2 sigma passes
        let m = Measurement::baro(0.0, 2.0, 1.0).unwrap();
        assert!(update(&s, &p, &m, &cfg).unwrap().2.accepted);
    }

    #[test]
    fn gate_table_matches_quantiles() {
        assert!((gate_threshold(1, 0.99) - 6.634_896_601).abs() < 1e-6);
        assert!((gate_threshold(2, 0.99) - 9.210_340_372).abs() < 1e-6);
        assert!((gate_threshold(3, 0.99) - 11.344_866_73).abs() < 1e-6);
        assert!((gate_threshold(3, 0.95) - 7.814_727_903).abs() < 1e-6);
    }

    #[test]
    fn update_order_commutes() {
        let cfg = level_config();
        let (s, p) = level_init();
        let (s, p) = predict(&s, &p, &hover_imu(0.01), &cfg).unwrap();
        let gps = Measurement::gps_pos(0.01, Vec3::new(0.4, -0.3, -0.8), 1.2, 2.5).unwrap();
        let baro = Measurement::baro(0.01, 0.5, 0.8).unwrap();
        let (a, pa, _) = update(&s, &p, &gps, &cfg).unwrap();
        let (a, _, _) = update(&a, &pa, &baro, &cfg).unwrap();
        let (b, pb, _) = update(&s, &p, &baro, &cfg).unwrap();
        let (b, _, _) = update(&b, &pb, &gps, &cfg).unwrap();
        assert!((a.p - b.p).norm() < 1e-6);
    }

    #[test]
    fn flow_model_is_body_velocity() {
        let s = NavState {
            q: Quaternion::from_euler(&EulerAngles::new(0.0, 0.0, FRAC_PI_2)),
            v: Vec3::new(0.0, 2.0, 0.0),
            ..NavState::default()
        };
        assert!((flow_model(&s) - Vec2::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn covariance_health_over_a_maneuver() {
        let cfg = level_config();
        let (mut s, mut p) = level_init();
        for k in 1..=300 {
            let t = k as f64 * 0.01;
            let imu = ImuSample::new(
                t,
                Vec3::new(0.002 * (t * 3.0).sin(), 0.001, 0.005),
                Vec3::new(0.01 * t.cos(), 0.0, -GRAVITY * 0.01),
                0.01,
            );
            (s, p) = predict(&s, &p, &imu, &cfg).unwrap();
            if k % 20 == 0 {
                let m = Measurement::gps_pos(t, Vec3::new(0.1, 0.0, 0.0), 1.2, 2.5).unwrap();
                (s, p, _) = update(&s, &p, &m, &cfg).unwrap();
                let m = Measurement::mag(t, mag_model(&s), 0.01).unwrap();
                (s, p, _) = update(&s, &p, &m, &cfg).unwrap();
            }
            assert!((s.q.norm() - 1.0).abs() < 1e-9);
            assert!(p.max_asymmetry() < 1e-9);
            if k % 50 == 0 {
                assert!(p.min_eigenvalue() > -1e-9);
                assert!(p.diagonal().iter().all(|v| *v > 0.0));
            }
        }
    }

    fn arb_state() -> impl Strategy<Value = NavState> {
        (
            -PI..PI,
            -1.2f64..1.2,
            -PI..PI,
            prop::array::uniform3(-5.0f64..5.0),
            prop::array::uniform3(-1e-3f64..1e-3),
            prop::array::uniform3(-0.05f64..0.05),
        )
            .prop_map(|(r, pi, y, v, bd, bv)| NavState {
                q: Quaternion::from_euler(&EulerAngles::new(r, pi, y)),
                v: Vec3::from(v),
                p: Vec3::new(10.0, -3.0, -7.0),
                b_dang: Vec3::from(bd),
                b_dvel: Vec3::from(bv),
                wind: Vec2::zeros(),
                mag_earth: Vec3::new(0.21, 0.0, 0.43),
                mag_body: Vec3::new(0.01, -0.02, 0.0),
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jacobian_step_consistency(s in arb_state(), da in prop::array::uniform3(-0.02f64..0.02)) {
            let imu = ImuSample::new(0.01, Vec3::from(da), Vec3::new(0.05, -0.02, -0.098), 0.01);
            let f6 = transition_jacobian(&s, &imu, 0.01, 1e-6);
            let f5 = transition_jacobian(&s, &imu, 0.01, 1e-5);
            for (a, b) in f6.iter().zip(f5.iter()) {
                // relative agreement, with an absolute floor for entries that are numerically zero
                prop_assert!((a - b).abs() <= 1e-3 * a.abs().max(b.abs()).max(1e-6), "{a} vs {b}");
            }
        }

        #[test]
        fn mag_jacobian_matches_rotation(s in arb_state()) {
            let h = measurement_jacobian(&s, mag_model, 1e-6);
            let mb: Mat3 = h.fixed_view::<3, 3>(0, idx::MAG_BODY).into_owned();
            let me: Mat3 = h.fixed_view::<3, 3>(0, idx::MAG_EARTH).into_owned();
            prop_assert!((mb - Mat3::identity()).amax() < 1e-8);
            prop_assert!((me - s.q.rotation_matrix().transpose()).amax() < 1e-8);
        }

        #[test]
        fn predict_keeps_unit_quaternion(s in arb_state(), da in prop::array::uniform3(-0.05f64..0.05)) {
            let cfg = FilterConfig::default();
            let p = initial_covariance(&s.q, &cfg);
            let imu = ImuSample::new(0.01, Vec3::from(da), Vec3::new(0.0, 0.0, -0.098), 0.01);
            let (s2, p2) = predict(&s, &p, &imu, &cfg).unwrap();
            prop_assert!((s2.q.norm() - 1.0).abs() < 1e-9);
            prop_assert!(p2.max_asymmetry() < 1e-9);
        }
    }
}
