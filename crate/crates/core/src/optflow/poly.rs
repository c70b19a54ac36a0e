//! Per-pixel quadratic polynomial expansion.
//!
//! Every neighborhood is modeled as `f(u) = u^T A u + b^T u + c` in local
//! pixel offsets `u = (x, y)`, fitted by weighted least squares under a
//! Gaussian applicability. The normal equations share one 6x6 Gram matrix
//! for every pixel (the image is replicate-extended at the borders), so the
//! right-hand sides are computed with separable correlations and mapped to
//! coefficients by a single precomputed inverse.

use nalgebra::{Matrix2, Matrix6, Vector6};

use super::image::{gaussian_kernel, pad_row, ImageFrame, Plane};
use crate::error::{Error, Result};
use crate::geom::Vec2;

/// Coefficient layout per pixel: `[c, b_x, b_y, A_xx, A_yy, A_xy]`.
pub type PolyCoeffs = [f64; 6];

/// Polynomial expansion of a whole image.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyField {
    pub width: usize,
    pub height: usize,
    coeffs: Vec<PolyCoeffs>,
}

impl PolyField {
    #[inline]
    pub fn coeffs(&self, x: usize, y: usize) -> &PolyCoeffs {
        &self.coeffs[y * self.width + x]
    }

    #[inline]
    pub(crate) fn coeffs_clamped(&self, x: isize, y: isize) -> &PolyCoeffs {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        &self.coeffs[y * self.width + x]
    }

    pub fn a(&self, x: usize, y: usize) -> Matrix2<f64> {
        let r = self.coeffs(x, y);
        Matrix2::new(r[3], r[5], r[5], r[4])
    }

    pub fn b(&self, x: usize, y: usize) -> Vec2 {
        let r = self.coeffs(x, y);
        Vec2::new(r[1], r[2])
    }

    pub fn c(&self, x: usize, y: usize) -> f64 {
        self.coeffs(x, y)[0]
    }

    pub fn all_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|v| v.is_finite())
    }
}

/// Precomputed applicability and inverse Gram matrix for one `(n, sigma)`.
#[derive(Debug, Clone)]
pub(crate) struct Expander {
    radius: usize,
    g: Vec<f64>,
    gx: Vec<f64>,
    gxx: Vec<f64>,
    inv_gram: Matrix6<f64>,
}

impl Expander {
    pub(crate) fn new(n: usize, sigma: f64) -> Result<Self> {
        if n < 3 || n % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "expansion window must be odd and >= 3, got {n}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "expansion sigma must be positive, got {sigma}"
            )));
        }
        let radius = n / 2;
        let g = gaussian_kernel(radius, sigma, false);
        let r = radius as isize;
        let gx: Vec<f64> = (-r..=r).zip(&g).map(|(i, w)| i as f64 * w).collect();
        let gxx: Vec<f64> = (-r..=r).zip(&g).map(|(i, w)| (i * i) as f64 * w).collect();

        let mut gram = Matrix6::zeros();
        for (j, wy) in (-r..=r).zip(&g) {
            for (i, wx) in (-r..=r).zip(&g) {
                let basis = basis(i as f64, j as f64);
                gram += basis * basis.transpose() * (wx * wy);
            }
        }
        let inv_gram = gram.try_inverse().ok_or_else(|| {
            Error::InvalidParameter(format!("singular expansion basis for n={n}, sigma={sigma}"))
        })?;
        Ok(Self {
            radius,
            g,
            gx,
            gxx,
            inv_gram,
        })
    }

    pub(crate) fn expand(&self, img: &Plane) -> PolyField {
        let (w, h) = (img.width, img.height);
        let r = self.radius;
        let taps = self.g.len();

        // horizontal pass: moments of order 0, 1, 2 in x
        let mut m0 = vec![0.0; w * h];
        let mut m1 = vec![0.0; w * h];
        let mut m2 = vec![0.0; w * h];
        let mut padded = vec![0.0; w + 2 * r];
        for y in 0..h {
            pad_row(&img.data[y * w..(y + 1) * w], r, &mut padded);
            let row = y * w..(y + 1) * w;
            let (d0, d1, d2) = (&mut m0[row.clone()], &mut m1[row.clone()], &mut m2[row]);
            for k in 0..taps {
                let (g, gx, gxx) = (self.g[k], self.gx[k], self.gxx[k]);
                let src = &padded[k..k + w];
                for x in 0..w {
                    let v = src[x];
                    d0[x] += g * v;
                    d1[x] += gx * v;
                    d2[x] += gxx * v;
                }
            }
        }

        // vertical pass into the six normal-equation right-hand sides
        let mut rhs = vec![[0.0f64; 6]; w];
        let mut coeffs = Vec::with_capacity(w * h);
        for y in 0..h {
            rhs.iter_mut().for_each(|v| *v = [0.0; 6]);
            for k in 0..taps {
                let yy = (y as isize + k as isize - r as isize).clamp(0, h as isize - 1) as usize;
                let row = yy * w..(yy + 1) * w;
                let (s0, s1, s2) = (&m0[row.clone()], &m1[row.clone()], &m2[row]);
                let (g, gy, gyy) = (self.g[k], self.gx[k], self.gxx[k]);
                for x in 0..w {
                    let acc = &mut rhs[x];
                    acc[0] += g * s0[x];
                    acc[1] += g * s1[x];
                    acc[2] += gy * s0[x];
                    acc[3] += g * s2[x];
                    acc[4] += gyy * s0[x];
                    acc[5] += gy * s1[x];
                }
            }
            for acc in &rhs {
                let sol = self.inv_gram * Vector6::from_column_slice(acc);
                // basis order is [1, x, y, x^2, y^2, xy]; A_xy carries half the cross term
                coeffs.push([sol[0], sol[1], sol[2], sol[3], sol[4], 0.5 * sol[5]]);
            }
        }
        PolyField {
            width: w,
            height: h,
            coeffs,
        }
    }
}

fn basis(x: f64, y: f64) -> Vector6<f64> {
    Vector6::new(1.0, x, y, x * x, y * y, x * y)
}

/// Fits the local quadratic model at every pixel of `img`.
///
/// `n` is the (odd) side of the fitting window and `sigma` the standard
/// deviation of the Gaussian applicability, both in pixels.
pub fn poly_expansion(img: &ImageFrame, n: usize, sigma: f64) -> Result<PolyField> {
    if n > img.width().min(img.height()) {
        return Err(Error::InvalidParameter(format!(
            "expansion window {n} exceeds frame {}x{}",
            img.width(),
            img.height()
        )));
    }
    Ok(Expander::new(n, sigma)?.expand(img.plane()))
}
