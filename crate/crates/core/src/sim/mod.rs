//! Kinematic flight simulator: truth trajectories for hover and waypoint
//! missions, noisy IMU/GPS/baro/magnetometer streams and a downward camera
//! rendering a procedural ground texture.

mod camera;
mod config;
mod rng;
mod scenario;
mod sensors;
mod texture;
mod trajectory;

pub use camera::{
    analytic_flow, quantize, render_ground_image, RenderedFrame, MIN_RENDER_AGL, SKY_INTENSITY,
};
pub use config::{
    CameraConfig, HoverConfig, MissionConfig, ScenarioConfig, SensorNoiseConfig, TextureConfig,
    TrajectoryConfig,
};
pub use rng::{stream, Stream};
pub use scenario::{generate, truth_for, Scenario};
pub use sensors::{
    sample_baro, sample_gps, sample_imu, sample_mag, GpsErrorModel, SensorSample, StreamKind,
};
pub use texture::GroundTexture;
pub use trajectory::{
    hover_trajectory, reference_path, segment_timing, thrust_aligned_attitude, waypoint_trajectory,
    Kinematics, TruthSample, TruthTrajectory,
};
