use super::flow::FlowField;
use super::image::{ImageFrame, Plane};
use super::velocity::median;
use crate::error::{Error, Result};

fn check(f1: &ImageFrame, f2: &ImageFrame, field: &FlowField, margin: usize) -> Result<()> {
    let (w, h) = (f1.width(), f1.height());
    if f2.width() != w || f2.height() != h || field.width != w || field.height != h {
        return Err(Error::InvalidInput(
            "frames and flow field must share dimensions".into(),
        ));
    }
    if 2 * margin + 2 >= w || 2 * margin + 2 >= h {
        return Err(Error::InvalidParameter(format!(
            "border margin {margin} leaves no interior in a {w}x{h} frame"
        )));
    }
    Ok(())
}

/// Second frame sampled along the flow, `I2(x + d(x))`, with bicubic
/// interpolation.
pub fn warp_by_flow(f2: &ImageFrame, field: &FlowField) -> Plane {
    let p = f2.plane();
    Plane::from_fn(p.width, p.height, |x, y| {
        let d = field.get(x, y);
        p.sample_bicubic(x as f64 + d.x, y as f64 + d.y)
    })
}

/// Mean absolute brightness difference over the interior, before and after
/// warping the second frame back by the flow.
pub fn brightness_residual(
    f1: &ImageFrame,
    f2: &ImageFrame,
    field: &FlowField,
    margin: usize,
) -> Result<(f64, f64)> {
    check(f1, f2, field, margin)?;
    let warped = warp_by_flow(f2, field);
    let (mut pre, mut post, mut n) = (0.0, 0.0, 0usize);
    for y in margin..f1.height() - margin {
        for x in margin..f1.width() - margin {
            let i1 = f1.get(x, y);
            pre += (f2.get(x, y) - i1).abs();
            post += (warped.get(x, y) - i1).abs();
            n += 1;
        }
    }
    Ok((pre / n as f64, post / n as f64))
}

/// Linearized constraint `Ix vx + Iy vy + It` at interior pixels, with
/// central-difference gradients averaged over both frames and
/// `It = I2 - I1`. Returns the medians of `|residual|` and of `|It|`.
pub fn constraint_residual(
    f1: &ImageFrame,
    f2: &ImageFrame,
    field: &FlowField,
    margin: usize,
) -> Result<(f64, f64)> {
    check(f1, f2, field, margin)?;
    let m = margin.max(1);
    let grad = |f: &ImageFrame, x: usize, y: usize| {
        (
            0.5 * (f.get(x + 1, y) - f.get(x - 1, y)),
            0.5 * (f.get(x, y + 1) - f.get(x, y - 1)),
        )
    };
    let mut res = Vec::new();
    let mut it = Vec::new();
    for y in m..f1.height() - m {
        for x in m..f1.width() - m {
            let (ax, ay) = grad(f1, x, y);
            let (bx, by) = grad(f2, x, y);
            let (ix, iy) = (0.5 * (ax + bx), 0.5 * (ay + by));
            let d = field.get(x, y);
            let t = f2.get(x, y) - f1.get(x, y);
            res.push((ix * d.x + iy * d.y + t).abs());
            it.push(t.abs());
        }
    }
    Ok((median(&mut res), median(&mut it)))
}
