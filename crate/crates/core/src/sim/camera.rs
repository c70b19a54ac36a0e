use super::texture::GroundTexture;
use super::trajectory::TruthSample;
use crate::error::{Error, Result};
use crate::geom::{Quaternion, Vec2, Vec3};
use crate::optflow::{CameraIntrinsics, FlowField, ImageFrame};

/// Lowest camera height accepted by the renderer, m.
pub const MIN_RENDER_AGL: f64 = 0.5;
/// Intensity used for pixels whose ray misses the ground.
pub const SKY_INTENSITY: f64 = 0.5;

/// A rendered frame; `degraded` marks frames with pixels above the horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub frame: ImageFrame,
    pub degraded: bool,
}

/// Rounds an intensity to the nearest 8-bit level, so frames survive a PGM
/// round trip unchanged.
pub fn quantize(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * 255.0).round() / 255.0
}

/// Body-frame ray through pixel `(u, v)` of a nadir camera whose image x and
/// y axes are body x and y.
fn pixel_ray(u: f64, v: f64, intr: &CameraIntrinsics) -> Vec3 {
    Vec3::new((u - intr.cx) / intr.focal, (v - intr.cy) / intr.focal, 1.0)
}

/// Ground point (z = 0) seen through pixel `(u, v)` from `p` with attitude `q`.
fn ground_point(p: &Vec3, q: &Quaternion, u: f64, v: f64, intr: &CameraIntrinsics) -> Option<Vec3> {
    let ray = q.rotate(&pixel_ray(u, v, intr));
    if ray.z <= 1e-6 {
        return None;
    }
    let s = -p.z / ray.z;
    Some(p + ray * s)
}

/// Image of the textured ground plane from the pose in `pose`, quantized to
/// 8-bit levels.
pub fn render_ground_image(
    pose: &TruthSample,
    texture: &GroundTexture,
    intr: &CameraIntrinsics,
) -> Result<RenderedFrame> {
    intr.validate()?;
    let agl = -pose.p.z;
    if !(agl > MIN_RENDER_AGL) {
        return Err(Error::Range(format!(
            "camera {agl:.3} m above ground; rendering needs more than {MIN_RENDER_AGL} m"
        )));
    }
    let mut degraded = false;
    let mut data = Vec::with_capacity(intr.width * intr.height);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let value = match ground_point(&pose.p, &pose.q, u as f64, v as f64, intr) {
                Some(g) => texture.eval(g.x, g.y),
                None => {
                    degraded = true;
                    SKY_INTENSITY
                }
            };
            data.push(quantize(value));
        }
    }
    Ok(RenderedFrame {
        frame: ImageFrame::new(intr.width, intr.height, data, pose.t)?,
        degraded,
    })
}

/// Exact image motion of the ground between two poses: for each pixel of
/// the first frame, where its ground point lands in the second.
pub fn analytic_flow(
    a: &TruthSample,
    b: &TruthSample,
    intr: &CameraIntrinsics,
) -> Result<FlowField> {
    let mut field = FlowField::zeros(intr.width, intr.height, b.t - a.t);
    for v in 0..intr.height {
        for u in 0..intr.width {
            let Some(g) = ground_point(&a.p, &a.q, u as f64, v as f64, intr) else {
                return Err(Error::Range("pixel ray misses the ground".into()));
            };
            let r = b.q.inverse_rotate(&(g - b.p));
            if r.z <= 0.0 {
                return Err(Error::Range("ground point behind the second camera".into()));
            }
            let u2 = intr.cx + intr.focal * r.x / r.z;
            let v2 = intr.cy + intr.focal * r.y / r.z;
            field.flow[v * intr.width + u] = Vec2::new(u2 - u as f64, v2 - v as f64);
        }
    }
    Ok(field)
}
