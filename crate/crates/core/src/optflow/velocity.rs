use serde::{Deserialize, Serialize};

use super::flow::FlowField;
use crate::error::{Error, Result};
use crate::geom::{Vec2, Vec3};

/// Minimum height above ground for the flow-to-velocity model, m.
pub const MIN_FLOW_AGL: f64 = 0.1;

/// Pinhole intrinsics of the nadir camera. Camera x is body x (forward),
/// camera y is body y (right), the optical axis is body z (down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    /// pixels
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Principal point at the image center.
    pub fn centered(focal: f64, width: usize, height: usize) -> Self {
        Self {
            focal,
            cx: (width as f64 - 1.0) * 0.5,
            cy: (height as f64 - 1.0) * 0.5,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.focal > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "focal length must be positive, got {}",
                self.focal
            )));
        }
        let inside = |c: f64, n: usize| c >= 0.0 && c <= n as f64 - 1.0;
        if !inside(self.cx, self.width) || !inside(self.cy, self.height) {
            return Err(Error::InvalidParameter(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self::centered(64.0, 64, 64)
    }
}

/// Median of a slice (mean of the two middle values for even lengths).
pub(crate) fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty());
    let n = values.len();
    let mid = n / 2;
    let (lower, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        *m
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + *m)
    }
}

/// Component-wise median displacement over the interior of `field`.
pub fn median_displacement(field: &FlowField, border_margin: usize) -> Result<Vec2> {
    if 2 * border_margin >= field.width || 2 * border_margin >= field.height {
        return Err(Error::InvalidParameter(format!(
            "border margin {border_margin} leaves no interior in a {}x{} field",
            field.width, field.height
        )));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for y in border_margin..field.height - border_margin {
        for x in border_margin..field.width - border_margin {
            let v = field.get(x, y);
            xs.push(v.x);
            ys.push(v.y);
        }
    }
    Ok(Vec2::new(median(&mut xs), median(&mut ys)))
}

/// Robust image-plane flow rate in px/s: interior median divided by the
/// frame interval.
pub fn mean_flow_rate(field: &FlowField, border_margin: usize) -> Result<Vec2> {
    if !(field.dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "flow interval must be positive, got {}",
            field.dt
        )));
    }
    Ok(median_displacement(field, border_margin)? / field.dt)
}

/// Converts an image flow rate (px/s) into body-frame horizontal velocity
/// (m/s) for a nadir camera over flat ground.
///
/// The rotational part of the flow, `(-gyro_y, gyro_x)` rad/s, is removed
/// before scaling by the height above ground. Forward motion over static
/// ground produces negative image x-flow.
pub fn flow_to_body_velocity(
    rate: &Vec2,
    gyro: &Vec3,
    h_agl: f64,
    intr: &CameraIntrinsics,
) -> Result<Vec2> {
    intr.validate()?;
    if !(h_agl > MIN_FLOW_AGL) {
        return Err(Error::MeasurementRejected(format!(
            "height above ground {h_agl:.3} m is below {MIN_FLOW_AGL} m"
        )));
    }
    let angular = rate / intr.focal;
    let translational = angular - Vec2::new(-gyro.y, gyro.x);
    Ok(-translational * h_agl)
}
