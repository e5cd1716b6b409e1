//! Single-channel images, bilinear sampling, homography warping and the
//! rotation-scale equivariant (log-polar style) resampling grid.
//!
//! Coordinates are pixel-centered: integer `(u, v)` addresses the center of
//! pixel column `u`, row `v`.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Homography, W_EPS};

/// What a sample outside the image returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    #[default]
    Zero,
    Clamp,
    /// Rows wrap around; columns outside the image read zero.
    CircularVertical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Raster {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape("raster must be non-empty".into()));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "{}x{} raster needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("raster data"));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "raster must be non-empty");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "raster must be non-empty");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_square(&self) -> bool {
        self.width == self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Pixel-center coordinates of the image center.
    pub fn center(&self) -> [f64; 2] {
        [
            (self.width as f64 - 1.0) / 2.0,
            (self.height as f64 - 1.0) / 2.0,
        ]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Copy of the `w x h` window whose top-left pixel is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Raster> {
        if x0 + w > self.width || y0 + h > self.height || w == 0 || h == 0 {
            return Err(Error::Shape(format!(
                "crop {w}x{h}+{x0}+{y0} outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Raster::from_fn(w, h, |x, y| self.get(x0 + x, y0 + y)))
    }

    /// Sets every pixel of the (clipped) rectangle to `value`.
    pub fn fill_rect(&mut self, x0: i64, y0: i64, w: usize, h: usize, value: f64) {
        let xs = x0.max(0) as usize;
        let ys = y0.max(0) as usize;
        let xe = ((x0 + w as i64).max(0) as usize).min(self.width);
        let ye = ((y0 + h as i64).max(0) as usize).min(self.height);
        for y in ys..ye {
            for x in xs..xe {
                self.set(x, y, value);
            }
        }
    }

    #[inline]
    fn fetch(&self, x: i64, y: i64, boundary: Boundary) -> f64 {
        let (w, h) = (self.width as i64, self.height as i64);
        match boundary {
            Boundary::Zero => {
                if x < 0 || y < 0 || x >= w || y >= h {
                    0.0
                } else {
                    self.data[(y * w + x) as usize]
                }
            }
            Boundary::Clamp => {
                let xc = x.clamp(0, w - 1);
                let yc = y.clamp(0, h - 1);
                self.data[(yc * w + xc) as usize]
            }
            Boundary::CircularVertical => {
                if x < 0 || x >= w {
                    0.0
                } else {
                    let yc = y.rem_euclid(h);
                    self.data[(yc * w + x) as usize]
                }
            }
        }
    }

    /// Separable Gaussian blur with clamped borders.
    pub fn gaussian_blur(&self, sigma: f64) -> Raster {
        if sigma <= 0.0 {
            return self.clone();
        }
        let radius = (3.0 * sigma).ceil() as i64;
        let kernel: Vec<f64> = (-radius..=radius)
            .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
            .collect();
        let norm: f64 = kernel.iter().sum();
        let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
        let (w, h) = (self.width, self.height);
        let mut tmp = vec![0.0; w * h];
        tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let xx = x as i64 + k as i64 - radius;
                    acc += kv * self.fetch(xx, y as i64, Boundary::Clamp);
                }
                *out = acc;
            }
        });
        let horiz = Raster {
            width: w,
            height: h,
            data: tmp,
        };
        let mut data = vec![0.0; w * h];
        data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (k, kv) in kernel.iter().enumerate() {
                    let yy = y as i64 + k as i64 - radius;
                    acc += kv * horiz.fetch(x as i64, yy, Boundary::Clamp);
                }
                *out = acc;
            }
        });
        Raster {
            width: w,
            height: h,
            data,
        }
    }

    /// Central-difference gradients `(d/dx, d/dy)` with one-sided borders.
    pub fn gradients(&self) -> (Raster, Raster) {
        let (w, h) = (self.width, self.height);
        let gx = Raster::from_fn(w, h, |x, y| {
            if w == 1 {
                return 0.0;
            }
            let (a, b, d) = if x == 0 {
                (0, 1, 1.0)
            } else if x == w - 1 {
                (w - 2, w - 1, 1.0)
            } else {
                (x - 1, x + 1, 2.0)
            };
            (self.get(b, y) - self.get(a, y)) / d
        });
        let gy = Raster::from_fn(w, h, |x, y| {
            if h == 1 {
                return 0.0;
            }
            let (a, b, d) = if y == 0 {
                (0, 1, 1.0)
            } else if y == h - 1 {
                (h - 2, h - 1, 1.0)
            } else {
                (y - 1, y + 1, 2.0)
            };
            (self.get(x, b) - self.get(x, a)) / d
        });
        (gx, gy)
    }
}

/// Bilinear interpolation of the four neighbours of `(u, v)`.
#[inline]
pub fn sample_bilinear(img: &Raster, u: f64, v: f64, boundary: Boundary) -> f64 {
    if !(u.is_finite() && v.is_finite()) {
        return 0.0;
    }
    let x0 = u.floor();
    let y0 = v.floor();
    let fx = u - x0;
    let fy = v - y0;
    let (xi, yi) = (x0 as i64, y0 as i64);
    let p00 = img.fetch(xi, yi, boundary);
    if fx == 0.0 && fy == 0.0 {
        return p00;
    }
    let p10 = img.fetch(xi + 1, yi, boundary);
    let p01 = img.fetch(xi, yi + 1, boundary);
    let p11 = img.fetch(xi + 1, yi + 1, boundary);
    (1.0 - fy) * ((1.0 - fx) * p00 + fx * p10) + fy * ((1.0 - fx) * p01 + fx * p11)
}

/// Per-output-pixel source coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpGrid {
    pub width: usize,
    pub height: usize,
    pub coords: Vec<[f64; 2]>,
}

impl WarpGrid {
    pub fn at(&self, x: usize, y: usize) -> [f64; 2] {
        self.coords[y * self.width + x]
    }

    /// Samples `img` at every grid point, with `offset` added to each
    /// coordinate.
    pub fn sample(&self, img: &Raster, offset: [f64; 2], boundary: Boundary) -> Raster {
        let mut data = vec![0.0; self.coords.len()];
        data.par_chunks_mut(self.width)
            .zip(self.coords.par_chunks(self.width))
            .for_each(|(row, cs)| {
                for (o, c) in row.iter_mut().zip(cs) {
                    *o = sample_bilinear(img, c[0] + offset[0], c[1] + offset[1], boundary);
                }
            });
        Raster {
            width: self.width,
            height: self.height,
            data,
        }
    }
}

/// Output pixel `q` takes `img(H q)`: `h` maps output pixel coordinates to
/// source pixel coordinates. Points that land at infinity read zero.
pub fn warp_homography(
    img: &Raster,
    h: &Homography,
    out_w: usize,
    out_h: usize,
    boundary: Boundary,
) -> Result<Raster> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::Shape("empty output size".into()));
    }
    h.inverse()?;
    let m = h.rows();
    let mut data = vec![0.0; out_w * out_h];
    data.par_chunks_mut(out_w).enumerate().for_each(|(y, row)| {
        let yf = y as f64;
        for (x, o) in row.iter_mut().enumerate() {
            let xf = x as f64;
            let w = m[2][0] * xf + m[2][1] * yf + m[2][2];
            if w.abs() < W_EPS {
                *o = 0.0;
                continue;
            }
            let u = (m[0][0] * xf + m[0][1] * yf + m[0][2]) / w;
            let v = (m[1][0] * xf + m[1][1] * yf + m[1][2]) / w;
            *o = sample_bilinear(img, u, v, boundary);
        }
    });
    Raster::new(out_w, out_h, data)
}

/// Translation taking centered coordinates of a `w x h` image to its pixel
/// coordinates.
pub fn centering(w: usize, h: usize) -> Homography {
    Homography::translation((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

/// Warp where `h` maps centered output coordinates to centered source
/// coordinates.
pub fn warp_centered(img: &Raster, h: &Homography, out_w: usize, out_h: usize) -> Result<Raster> {
    let m = centering(img.width, img.height)
        .compose(h)?
        .compose(&centering(out_w, out_h).inverse()?)?;
    warp_homography(img, &m, out_w, out_h, Boundary::Zero)
}

/// The equivariant grid point for `(mu1, mu2)`, relative to the warp
/// center: radius `(n/4)^(2 mu1 / n)`, angle `4 pi mu2 / n`, pivot `(1, 0)`.
#[inline]
pub fn rsew_point(mu1: f64, mu2: f64, n: usize, t_hat: [f64; 2]) -> [f64; 2] {
    let nf = n as f64;
    let r = (nf / 4.0).powf(2.0 * mu1 / nf);
    let a = 4.0 * PI * mu2 / nf;
    [t_hat[0] + r * a.cos(), t_hat[1] + r * a.sin()]
}

/// `n x n` grid of source coordinates relative to the image center. Column
/// `j` carries the centered scale index `mu1 = j - n/2`; row `i` is `mu2 = i`.
pub fn rsew_grid(n: usize, t_hat: [f64; 2]) -> Result<WarpGrid> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::InvalidParameter(format!(
            "equivariant grid edge must be positive and even, got {n}"
        )));
    }
    let half = (n / 2) as f64;
    let mut coords = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            coords.push(rsew_point(j as f64 - half, i as f64, n, t_hat));
        }
    }
    Ok(WarpGrid {
        width: n,
        height: n,
        coords,
    })
}

/// Resamples a square image over the equivariant grid centered on the image
/// center plus `t_hat`. The grid edge is the image edge rounded down to even.
pub fn rsew_warp(img: &Raster, t_hat: [f64; 2]) -> Result<Raster> {
    if !img.is_square() {
        return Err(Error::Shape(format!(
            "equivariant warp needs a square image, got {}x{}",
            img.width, img.height
        )));
    }
    let n = img.width - img.width % 2;
    rsew_warp_sized(img, t_hat, n)
}

/// As [`rsew_warp`] with an explicit (even) grid edge `n`; the largest
/// sampled radius is `n / 4`.
pub fn rsew_warp_sized(img: &Raster, t_hat: [f64; 2], n: usize) -> Result<Raster> {
    let grid = rsew_grid(n, t_hat)?;
    Ok(grid.sample(img, img.center(), Boundary::Zero))
}

/// `(gamma, theta)` from a peak location in the equivariant domain.
pub fn recover_scale_rotation(mu_hat: [f64; 2], n: usize) -> (f64, f64) {
    let nf = n as f64;
    let gamma = (nf / 4.0).powf(2.0 * mu_hat[0] / nf);
    let theta = crate::geometry::wrap_angle(4.0 * PI * mu_hat[1] / nf);
    (gamma, theta)
}

/// Shift along the scale axis produced by scaling by `c`.
pub fn scale_to_shift(c: f64, n: usize) -> f64 {
    let nf = n as f64;
    0.5 * nf * c.ln() / (nf / 4.0).ln()
}

/// Shift along the angle axis produced by rotating by `theta`.
pub fn rotation_to_shift(theta: f64, n: usize) -> f64 {
    n as f64 * theta / (4.0 * PI)
}

/// Extends a warped square image by `n/2` rows of circular padding above and
/// below and `hpad` zero columns left and right.
pub fn pad_for_correlation(warped: &Raster, hpad: usize) -> Result<Raster> {
    if !warped.is_square() {
        return Err(Error::Shape("padding expects a square warped image".into()));
    }
    let n = warped.height;
    let vpad = n / 2;
    let out_w = warped.width + 2 * hpad;
    let out_h = n + 2 * vpad;
    Ok(Raster::from_fn(out_w, out_h, |x, y| {
        let sy = (y as i64 - vpad as i64).rem_euclid(n as i64);
        warped.fetch(x as i64 - hpad as i64, sy, Boundary::CircularVertical)
    }))
}

/// Symmetric Hamming profile of `len` samples, peaking at 1 in the middle.
pub fn hamming(len: usize) -> Vec<f64> {
    if len == 1 {
        return vec![1.0];
    }
    let m = (len - 1) as f64;
    (0..len)
        .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / m).cos())
        .collect()
}
