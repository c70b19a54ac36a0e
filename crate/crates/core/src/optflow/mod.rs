//! Dense optical flow by polynomial expansion and its conversion into a
//! body-frame velocity measurement.

mod flow;
mod image;
mod poly;
mod residual;
mod velocity;

pub use flow::{
    farneback_flow, farneback_flow_prepared, flow_iteration, FlowField, FlowParams, PreparedFrame,
    SINGULAR_DET,
};
pub use image::{gaussian_kernel, ImageFrame, Plane, MIN_FRAME_SIDE};
pub use poly::{poly_expansion, PolyCoeffs, PolyField};
pub use residual::{brightness_residual, constraint_residual, warp_by_flow};
pub use velocity::{
    flow_to_body_velocity, mean_flow_rate, median_displacement, CameraIntrinsics, MIN_FLOW_AGL,
};

#[cfg(test)]
pub(crate) use velocity::median;

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use crate::geom::Vec2;
    use crate::sim::GroundTexture;

    /// Frame pair whose content moves by `(sx, sy)` pixels from the first
    /// frame to the second.
    pub fn shifted_pair(size: usize, sx: f64, sy: f64, seed: u64) -> (ImageFrame, ImageFrame) {
        textured_pair(size, 12.0, 3, sx, sy, seed)
    }

    pub fn textured_pair(
        size: usize,
        cell: f64,
        octaves: u32,
        sx: f64,
        sy: f64,
        seed: u64,
    ) -> (ImageFrame, ImageFrame) {
        let tex = GroundTexture::new(seed, cell, octaves);
        let a = ImageFrame::from_fn(size, size, 0.0, |x, y| tex.eval(x as f64, y as f64)).unwrap();
        let b = ImageFrame::from_fn(size, size, 0.1, |x, y| {
            tex.eval(x as f64 - sx, y as f64 - sy)
        })
        .unwrap();
        (a, b)
    }

    pub fn median_flow(f: &FlowField, margin: usize) -> Vec2 {
        median_displacement(f, margin).unwrap()
    }
}
