//! Two-frame dense displacement estimation from polynomial expansions,
//! run coarse-to-fine over a Gaussian pyramid.

use serde::{Deserialize, Serialize};

use super::image::{gaussian_kernel, ImageFrame, Plane};
use super::poly::{Expander, PolyField};
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Below this determinant the per-pixel 2x2 system is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    pub pyramid_scale: f64,
    pub iterations_per_level: usize,
    /// Polynomial expansion window, odd, pixels.
    pub expansion_window: usize,
    /// Polynomial expansion applicability std, pixels.
    pub expansion_sigma: f64,
    /// Displacement averaging window, odd, pixels.
    pub averaging_window: usize,
    /// Per-pixel displacement magnitude cap, pixels.
    pub max_displacement: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            pyramid_levels: 3,
            pyramid_scale: 0.5,
            iterations_per_level: 3,
            expansion_window: 7,
            expansion_sigma: 1.5,
            averaging_window: 15,
            max_displacement: 32.0,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let odd = |n: usize| n >= 3 && n % 2 == 1;
        if !odd(self.expansion_window) {
            return Err(Error::InvalidParameter(format!(
                "expansion_window must be odd and >= 3, got {}",
                self.expansion_window
            )));
        }
        if !odd(self.averaging_window) {
            return Err(Error::InvalidParameter(format!(
                "averaging_window must be odd and >= 3, got {}",
                self.averaging_window
            )));
        }
        if !(self.pyramid_scale > 0.0 && self.pyramid_scale < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "pyramid_scale must lie in (0, 1), got {}",
                self.pyramid_scale
            )));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidParameter(
                "pyramid_levels must be >= 1".into(),
            ));
        }
        if !(self.expansion_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "expansion_sigma must be positive, got {}",
                self.expansion_sigma
            )));
        }
        if !(self.max_displacement > 0.0) {
            return Err(Error::InvalidParameter(
                "max_displacement must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Per-pixel displacement in pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub flow: Vec<Vec2>,
    /// Seconds between the two source frames.
    pub dt: f64,
    /// Interior mean of det(sum g A^T A) on the final iteration; small
    /// values flag textureless input.
    pub texture_strength: f64,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, dt: f64) -> Self {
        Self {
            width,
            height,
            flow: vec![Vec2::zeros(); width * height],
            dt,
            texture_strength: 0.0,
        }
    }

    pub fn uniform(width: usize, height: usize, dt: f64, v: Vec2) -> Self {
        Self {
            flow: vec![v; width * height],
            ..Self::zeros(width, height, dt)
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Vec2 {
        self.flow[y * self.width + x]
    }

    pub fn all_finite(&self) -> bool {
        self.flow.iter().all(|v| v.x.is_finite() && v.y.is_finite())
    }

    /// Bilinear resize, scaling each component by the size ratio.
    fn upscaled(&self, width: usize, height: usize) -> FlowField {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        let px = Plane::new(
            self.width,
            self.height,
            self.flow.iter().map(|v| v.x).collect(),
        )
        .resize(width, height);
        let py = Plane::new(
            self.width,
            self.height,
            self.flow.iter().map(|v| v.y).collect(),
        )
        .resize(width, height);
        FlowField {
            width,
            height,
            flow: px
                .data
                .iter()
                .zip(&py.data)
                .map(|(x, y)| Vec2::new(x * sx, y * sy))
                .collect(),
            dt: self.dt,
            texture_strength: 0.0,
        }
    }
}

/// Gaussian std used for an averaging window of odd size `w` (the usual
/// automatic kernel-size rule).
fn window_sigma(w: usize) -> f64 {
    0.3 * ((w as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// One displacement update from two expansions and a prior field.
///
/// The prior is rounded to whole pixels to pick the matching neighborhood
/// in the second expansion; the averaged curvature and the prior-corrected
/// linear-term difference are accumulated over a Gaussian window of side
/// `w`, and each pixel solves the resulting 2x2 system. Pixels whose system
/// is (near) singular keep their prior.
pub fn flow_iteration(
    p1: &PolyField,
    p2: &PolyField,
    prior: &FlowField,
    w: usize,
) -> Result<FlowField> {
    if p1.width != p2.width || p1.height != p2.height {
        return Err(Error::InvalidInput(format!(
            "expansion sizes differ: {}x{} vs {}x{}",
            p1.width, p1.height, p2.width, p2.height
        )));
    }
    if prior.width != p1.width || prior.height != p1.height {
        return Err(Error::InvalidInput(format!(
            "prior flow is {}x{}, expansions are {}x{}",
            prior.width, prior.height, p1.width, p1.height
        )));
    }
    if w < 3 || w % 2 == 0 {
        return Err(Error::InvalidParameter(format!(
            "averaging window must be odd and >= 3, got {w}"
        )));
    }
    Ok(iterate(p1, p2, prior, w))
}

fn iterate(p1: &PolyField, p2: &PolyField, prior: &FlowField, w: usize) -> FlowField {
    let (width, height) = (p1.width, p1.height);
    let n = width * height;

    // per-pixel products: [G11, G12, G22, h1, h2]
    let mut channels: [Vec<f64>; 5] = std::array::from_fn(|_| vec![0.0; n]);
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let d = prior.flow[i];
            let (dx, dy) = (d.x.round(), d.y.round());
            let r1 = p1.coeffs(x, y);
            let r2 = p2.coeffs_clamped(x as isize + dx as isize, y as isize + dy as isize);

            let a11 = 0.5 * (r1[3] + r2[3]);
            let a22 = 0.5 * (r1[4] + r2[4]);
            let a12 = 0.5 * (r1[5] + r2[5]);
            let db1 = -0.5 * (r2[1] - r1[1]) + a11 * dx + a12 * dy;
            let db2 = -0.5 * (r2[2] - r1[2]) + a12 * dx + a22 * dy;

            channels[0][i] = a11 * a11 + a12 * a12;
            channels[1][i] = a12 * (a11 + a22);
            channels[2][i] = a12 * a12 + a22 * a22;
            channels[3][i] = a11 * db1 + a12 * db2;
            channels[4][i] = a12 * db1 + a22 * db2;
        }
    }

    let kernel = gaussian_kernel(w / 2, window_sigma(w), true);
    let blurred: Vec<Plane> = channels
        .into_iter()
        .map(|c| Plane::new(width, height, c).correlate_separable(&kernel))
        .collect();

    let margin = (w / 2).min(width / 4).min(height / 4);
    let mut det_sum = 0.0;
    let mut det_count = 0usize;
    let mut flow = Vec::with_capacity(n);
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let g11 = blurred[0].data[i];
            let g12 = blurred[1].data[i];
            let g22 = blurred[2].data[i];
            let h1 = blurred[3].data[i];
            let h2 = blurred[4].data[i];
            let det = g11 * g22 - g12 * g12;
            if x >= margin && y >= margin && x < width - margin && y < height - margin {
                det_sum += det;
                det_count += 1;
            }
            if det < SINGULAR_DET {
                flow.push(prior.flow[i]);
            } else {
                flow.push(Vec2::new(
                    (g22 * h1 - g12 * h2) / det,
                    (g11 * h2 - g12 * h1) / det,
                ));
            }
        }
    }
    FlowField {
        width,
        height,
        flow,
        dt: prior.dt,
        texture_strength: if det_count > 0 {
            det_sum / det_count as f64
        } else {
            0.0
        },
    }
}

/// Pyramid of one frame with the polynomial expansion of every level,
/// reusable across consecutive frame pairs.
#[derive(Debug, Clone)]
pub struct PreparedFrame {
    pub timestamp: f64,
    width: usize,
    height: usize,
    /// finest first
    levels: Vec<PolyField>,
}

impl PreparedFrame {
    pub fn new(frame: &ImageFrame, params: &FlowParams) -> Result<Self> {
        params.validate()?;
        let expander = Expander::new(params.expansion_window, params.expansion_sigma)?;
        let base = frame.plane();
        let mut levels = Vec::with_capacity(params.pyramid_levels);
        for k in 0..params.pyramid_levels {
            let plane = if k == 0 {
                base.clone()
            } else {
                let scale = params.pyramid_scale.powi(k as i32);
                let w = ((base.width as f64) * scale).round() as usize;
                let h = ((base.height as f64) * scale).round() as usize;
                if w < params.expansion_window || h < params.expansion_window {
                    break;
                }
                base.gaussian_blur((1.0 / scale - 1.0) * 0.5).resize(w, h)
            };
            levels.push(expander.expand(&plane));
        }
        Ok(Self {
            timestamp: frame.timestamp,
            width: base.width,
            height: base.height,
            levels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn finest(&self) -> &PolyField {
        &self.levels[0]
    }
}

/// Coarse-to-fine flow between two prepared frames.
pub fn farneback_flow_prepared(
    f1: &PreparedFrame,
    f2: &PreparedFrame,
    params: &FlowParams,
) -> Result<FlowField> {
    params.validate()?;
    if f1.width != f2.width || f1.height != f2.height {
        return Err(Error::InvalidInput(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            f1.width, f1.height, f2.width, f2.height
        )));
    }
    if !(f2.timestamp > f1.timestamp) {
        return Err(Error::InvalidInput(format!(
            "second frame time {} is not after first frame time {}",
            f2.timestamp, f1.timestamp
        )));
    }
    let dt = f2.timestamp - f1.timestamp;
    let levels = f1.levels.len().min(f2.levels.len());

    let mut flow: Option<FlowField> = None;
    for k in (0..levels).rev() {
        let (p1, p2) = (&f1.levels[k], &f2.levels[k]);
        let mut current = match flow.take() {
            Some(coarse) => coarse.upscaled(p1.width, p1.height),
            None => FlowField::zeros(p1.width, p1.height, dt),
        };
        for _ in 0..params.iterations_per_level.max(1) {
            current = iterate(p1, p2, &current, params.averaging_window);
        }
        flow = Some(current);
    }
    let mut flow = flow.expect("at least one pyramid level");
    let cap = params.max_displacement;
    for v in flow.flow.iter_mut() {
        let m = v.norm();
        if !m.is_finite() {
            *v = Vec2::zeros();
        } else if m > cap {
            *v *= cap / m;
        }
    }
    Ok(flow)
}

/// Dense flow from `f1` to `f2`: content at `x` in `f1` is found at
/// `x + flow(x)` in `f2`.
pub fn farneback_flow(f1: &ImageFrame, f2: &ImageFrame, params: &FlowParams) -> Result<FlowField> {
    if f1.width() != f2.width() || f1.height() != f2.height() {
        return Err(Error::InvalidInput(format!(
            "frame sizes differ: {}x{} vs {}x{}",
            f1.width(),
            f1.height(),
            f2.width(),
            f2.height()
        )));
    }
    if !(f2.timestamp > f1.timestamp) {
        return Err(Error::InvalidInput(format!(
            "second frame time {} is not after first frame time {}",
            f2.timestamp, f1.timestamp
        )));
    }
    let a = PreparedFrame::new(f1, params)?;
    let b = PreparedFrame::new(f2, params)?;
    farneback_flow_prepared(&a, &b, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optflow::poly::poly_expansion;
    use crate::optflow::testutil::{median_flow, shifted_pair};

    #[test]
    fn identical_expansions_give_zero_flow() {
        let (a, _) = shifted_pair(64, 0.0, 0.0, 3);
        let p = poly_expansion(&a, 7, 1.5).unwrap();
        let prior = FlowField::zeros(64, 64, 0.1);
        let f = flow_iteration(&p, &p, &prior, 15).unwrap();
        assert!(f.flow.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn single_iteration_integer_shift() {
        let (a, b) = shifted_pair(96, 2.0, 0.0, 11);
        let p1 = poly_expansion(&a, 7, 1.5).unwrap();
        let p2 = poly_expansion(&b, 7, 1.5).unwrap();
        let prior = FlowField::zeros(96, 96, 0.1);
        let f = flow_iteration(&p1, &p2, &prior, 15).unwrap();
        let mut sum = Vec2::zeros();
        let mut count = 0.0;
        for y in 10..86 {
            for x in 10..86 {
                sum += f.get(x, y);
                count += 1.0;
            }
        }
        let mean = sum / count;
        assert!((mean - Vec2::new(2.0, 0.0)).norm() < 0.25, "{mean:?}");
    }

    #[test]
    fn exact_prior_is_a_fixed_point() {
        let (a, b) = shifted_pair(96, 2.0, -1.0, 5);
        let p1 = poly_expansion(&a, 7, 1.5).unwrap();
        let p2 = poly_expansion(&b, 7, 1.5).unwrap();
        let prior = FlowField::uniform(96, 96, 0.1, Vec2::new(2.0, -1.0));
        let f = flow_iteration(&p1, &p2, &prior, 15).unwrap();
        let m = median_flow(&f, 12);
        assert!((m - Vec2::new(2.0, -1.0)).norm() < 0.05, "{m:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let (a, _) = shifted_pair(32, 0.0, 0.0, 1);
        let (c, _) = shifted_pair(48, 0.0, 0.0, 1);
        let p1 = poly_expansion(&a, 7, 1.5).unwrap();
        let p2 = poly_expansion(&c, 7, 1.5).unwrap();
        let prior = FlowField::zeros(32, 32, 0.1);
        assert!(matches!(
            flow_iteration(&p1, &p2, &prior, 15),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            flow_iteration(&p1, &p1, &FlowField::zeros(31, 32, 0.1), 15),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            farneback_flow(&a, &c, &FlowParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn timestamps_must_increase() {
        let (a, b) = shifted_pair(32, 1.0, 0.0, 1);
        let earlier = ImageFrame::new(32, 32, b.data().to_vec(), a.timestamp - 0.1).unwrap();
        assert!(matches!(
            farneback_flow(&a, &earlier, &FlowParams::default()),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn identical_frames_zero_field() {
        let (a, _) = shifted_pair(64, 0.0, 0.0, 9);
        let b = ImageFrame::new(64, 64, a.data().to_vec(), a.timestamp + 0.1).unwrap();
        let f = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        assert!(f.flow.iter().all(|v| v.norm() < 1e-12));
        assert!((f.dt - 0.1).abs() < 1e-12);
    }

    #[test]
    fn pyramid_recovers_subpixel_shift() {
        let (a, b) = shifted_pair(128, 3.0, 1.0, 21);
        let f = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        let m = median_flow(&f, 16);
        assert!((m.x - 3.0).abs() < 0.1 && (m.y - 1.0).abs() < 0.1, "{m:?}");
    }

    #[test]
    fn large_shift_needs_the_pyramid() {
        let (a, b) = shifted_pair(128, 6.0, -4.0, 33);
        let f = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        let m = median_flow(&f, 16);
        assert!((m.x - 6.0).abs() < 0.3 && (m.y + 4.0).abs() < 0.3, "{m:?}");

        let single = FlowParams {
            pyramid_levels: 1,
            ..FlowParams::default()
        };
        let f = farneback_flow(&a, &b, &single).unwrap();
        let m = median_flow(&f, 16);
        assert!(
            (m.x - 6.0).abs() >= 0.3 || (m.y + 4.0).abs() >= 0.3,
            "single level unexpectedly converged: {m:?}"
        );
    }

    #[test]
    fn invalid_params_rejected() {
        for p in [
            FlowParams {
                averaging_window: 14,
                ..FlowParams::default()
            },
            FlowParams {
                pyramid_scale: 1.0,
                ..FlowParams::default()
            },
            FlowParams {
                pyramid_levels: 0,
                ..FlowParams::default()
            },
        ] {
            assert!(p.validate().is_err());
        }
    }

    #[test]
    fn reversed_pair_gives_opposite_flow() {
        for (seed, (sx, sy)) in [(1, (2.0, 1.0)), (2, (-1.5, 3.0)), (3, (0.7, -0.4))] {
            let (a, b) = shifted_pair(96, sx, sy, seed);
            let fwd = median_flow(&farneback_flow(&a, &b, &FlowParams::default()).unwrap(), 12);
            let b_first = ImageFrame::new(96, 96, b.data().to_vec(), 0.0).unwrap();
            let a_second = ImageFrame::new(96, 96, a.data().to_vec(), 0.1).unwrap();
            let bwd = median_flow(
                &farneback_flow(&b_first, &a_second, &FlowParams::default()).unwrap(),
                12,
            );
            assert!((fwd + bwd).amax() < 0.2, "{fwd:?} {bwd:?}");
        }
    }

    #[test]
    fn bit_identical_reruns() {
        let (a, b) = shifted_pair(64, 1.3, -0.6, 8);
        let f1 = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        let f2 = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        assert!(f1
            .flow
            .iter()
            .zip(&f2.flow)
            .all(|(u, v)| u.x.to_bits() == v.x.to_bits() && u.y.to_bits() == v.y.to_bits()));
    }

    #[test]
    fn magnitude_is_capped() {
        let (a, b) = shifted_pair(64, 3.0, 0.0, 4);
        let p = FlowParams {
            max_displacement: 1.0,
            ..FlowParams::default()
        };
        let f = farneback_flow(&a, &b, &p).unwrap();
        assert!(f.all_finite());
        assert!(f.flow.iter().all(|v| v.norm() <= 1.0 + 1e-12));
    }
}
