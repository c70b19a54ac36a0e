use crate::error::{Error, Result};

/// Minimum accepted frame side, pixels.
pub const MIN_FRAME_SIDE: usize = 16;

/// Row-major grid of intensities without the frame-level invariants. Used
/// for pyramid levels and intermediate channels.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Replicate-clamped access.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    /// Bilinear sample at a fractional pixel position, clamped at the borders.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (x0, y0) = (x0 as isize, y0 as isize);
        let a = self.get_clamped(x0, y0);
        let b = self.get_clamped(x0 + 1, y0);
        let c = self.get_clamped(x0, y0 + 1);
        let d = self.get_clamped(x0 + 1, y0 + 1);
        (a * (1.0 - fx) + b * fx) * (1.0 - fy) + (c * (1.0 - fx) + d * fx) * fy
    }

    /// Catmull-Rom bicubic sample, clamped at the borders.
    pub fn sample_bicubic(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let (x0, y0) = (x.floor(), y.floor());
        let wx = catmull_rom(x - x0);
        let wy = catmull_rom(y - y0);
        let (x0, y0) = (x0 as isize, y0 as isize);
        let mut acc = 0.0;
        for (j, gy) in wy.iter().enumerate() {
            let yy = y0 + j as isize - 1;
            let row: f64 = wx
                .iter()
                .enumerate()
                .map(|(i, gx)| gx * self.get_clamped(x0 + i as isize - 1, yy))
                .sum();
            acc += gy * row;
        }
        acc
    }

    /// Separable correlation with a symmetric kernel of odd length, replicate borders.
    pub fn correlate_separable(&self, kernel: &[f64]) -> Plane {
        let tmp = self.correlate_rows(kernel);
        tmp.correlate_cols(kernel)
    }

    /// Horizontal pass of [`Plane::correlate_separable`].
    pub fn correlate_rows(&self, kernel: &[f64]) -> Plane {
        let r = kernel.len() / 2;
        let w = self.width;
        let mut out = vec![0.0; w * self.height];
        let mut padded = vec![0.0; w + 2 * r];
        for (src, dst) in self.data.chunks_exact(w).zip(out.chunks_exact_mut(w)) {
            pad_row(src, r, &mut padded);
            for (k, &g) in kernel.iter().enumerate() {
                for (o, v) in dst.iter_mut().zip(&padded[k..k + w]) {
                    *o += g * v;
                }
            }
        }
        Plane::new(w, self.height, out)
    }

    /// Vertical pass of [`Plane::correlate_separable`].
    pub fn correlate_cols(&self, kernel: &[f64]) -> Plane {
        let r = kernel.len() as isize / 2;
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        for (y, dst) in out.chunks_exact_mut(w).enumerate() {
            for (k, &g) in kernel.iter().enumerate() {
                let yy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                for (o, v) in dst.iter_mut().zip(&self.data[yy * w..(yy + 1) * w]) {
                    *o += g * v;
                }
            }
        }
        Plane::new(w, h, out)
    }

    pub fn gaussian_blur(&self, sigma: f64) -> Plane {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil().max(1.0) as usize;
        self.correlate_separable(&gaussian_kernel(radius, sigma, true))
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize(&self, width: usize, height: usize) -> Plane {
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        Plane::from_fn(width, height, |x, y| {
            self.sample_bilinear((x as f64 + 0.5) * sx - 0.5, (y as f64 + 0.5) * sy - 0.5)
        })
    }
}

/// Catmull-Rom weights of the four taps around a sample at fraction `t`.
fn catmull_rom(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    [
        0.5 * (-t3 + 2.0 * t2 - t),
        0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
        0.5 * (-3.0 * t3 + 4.0 * t2 + t),
        0.5 * (t3 - t2),
    ]
}

/// Copies `src` into `padded` with `r` replicated samples on each side.
pub(crate) fn pad_row(src: &[f64], r: usize, padded: &mut [f64]) {
    let w = src.len();
    padded[..r].fill(src[0]);
    padded[r..r + w].copy_from_slice(src);
    padded[r + w..].fill(src[w - 1]);
}

/// Sampled Gaussian on `[-radius, radius]`, optionally normalized to unit sum.
pub fn gaussian_kernel(radius: usize, sigma: f64, normalize: bool) -> Vec<f64> {
    let r = radius as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    if normalize {
        let s: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= s);
    }
    k
}

/// Grayscale camera frame: intensities in [0, 1], row-major, with capture time.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    plane: Plane,
    /// s
    pub timestamp: f64,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, data: Vec<f64>, timestamp: f64) -> Result<Self> {
        if width < MIN_FRAME_SIDE || height < MIN_FRAME_SIDE {
            return Err(Error::InvalidInput(format!(
                "frame {width}x{height} is smaller than {MIN_FRAME_SIDE}x{MIN_FRAME_SIDE}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "frame buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidInput(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        if !timestamp.is_finite() {
            return Err(Error::InvalidInput("non-finite frame timestamp".into()));
        }
        Ok(Self {
            plane: Plane::new(width, height, data),
            timestamp,
        })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        timestamp: f64,
        f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let plane = Plane::from_fn(width, height, f);
        Self::new(width, height, plane.data, timestamp)
    }

    pub fn width(&self) -> usize {
        self.plane.width
    }

    pub fn height(&self) -> usize {
        self.plane.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.plane.get(x, y)
    }

    pub fn data(&self) -> &[f64] {
        &self.plane.data
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_validation() {
        assert!(ImageFrame::new(15, 16, vec![0.0; 240], 0.0).is_err());
        assert!(ImageFrame::new(16, 16, vec![0.0; 10], 0.0).is_err());
        let mut d = vec![0.5; 256];
        d[3] = 1.5;
        assert!(ImageFrame::new(16, 16, d, 0.0).is_err());
        assert!(ImageFrame::new(16, 16, vec![f64::NAN; 256], 0.0).is_err());
        assert!(ImageFrame::new(16, 16, vec![0.2; 256], 1.0).is_ok());
    }

    #[test]
    fn blur_preserves_constant() {
        let p = Plane::new(20, 18, vec![0.3; 360]);
        let b = p.gaussian_blur(1.7);
        assert!(b.data.iter().all(|v| (v - 0.3).abs() < 1e-15));
    }

    #[test]
    fn resize_of_ramp_stays_linear() {
        let p = Plane::from_fn(32, 32, |x, _| x as f64);
        let r = p.resize(16, 16);
        // interior pixel x maps to source 2x + 0.5
        assert!((r.get(5, 5) - 10.5).abs() < 1e-12);
    }

    #[test]
    fn bicubic_interpolates_and_reproduces_quadratics() {
        let p = Plane::from_fn(16, 16, |x, y| (x * x) as f64 * 0.01 + y as f64 * 0.3);
        assert!((p.sample_bicubic(5.0, 7.0) - p.get(5, 7)).abs() < 1e-12);
        // Catmull-Rom is exact for polynomials up to degree two
        let v = p.sample_bicubic(6.25, 8.5);
        assert!((v - (6.25f64.powi(2) * 0.01 + 8.5 * 0.3)).abs() < 1e-12);
    }
}
