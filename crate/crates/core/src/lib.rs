//! GPS / inertial / optical-flow navigation stack.
//!
//! - [`geom`]: quaternion, rotation and local-frame helpers;
//! - [`optflow`]: dense polynomial-expansion optical flow and the
//!   flow-to-velocity conversion;
//! - [`ekf`]: the 24-state extended Kalman filter;
//! - [`sim`]: kinematic truth trajectories, noisy sensors and a
//!   downward camera renderer;
//! - [`fusion`]: the event-ordered runtime tying sensors, flow and filter;
//! - [`eval`]: metrics over fused logs;
//! - [`io`]: the on-disk formats (PGM, JSON-lines, CSV, SVG).

// `!(x > 0.0)`-style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ekf;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod geom;
pub mod io;
pub mod optflow;
pub mod sim;

pub use error::{Error, Result};
