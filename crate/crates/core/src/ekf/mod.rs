//! Full-state extended Kalman filter over 24 states: attitude quaternion,
//! NED velocity and position, IMU delta biases, wind and the two magnetic
//! fields.
//!
//! Prediction integrates IMU increments through a strapdown mechanization;
//! GPS, barometer, magnetometer and optical-flow velocity are fused as
//! gated updates. All Jacobians are central finite differences.

mod filter;
mod measurement;
mod state;

pub use filter::{
    gate_threshold, init_state, initial_covariance, measurement_jacobian, predict,
    roll_pitch_from_accel, transition_jacobian, update, yaw_from_mag, Ekf, FilterConfig,
    InitialUncertainty, InnovationRecord, MeasurementNoise, ProcessNoise, Snapshot,
};
pub use measurement::{ImuSample, Measurement, MeasurementKind, SensorKind, MAX_IMU_DT};
pub use state::{
    idx, output_vector, CovMatrix, NavCovariance, NavState, OutputVector, StateVector,
    MAX_DANG_BIAS, MAX_DVEL_BIAS, STATE_DIM, STATE_NAMES,
};
