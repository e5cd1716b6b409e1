//! Dense zero-normalized cross-correlation over all valid placements, with
//! the numerator computed by FFT and window statistics by integral images.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::raster::Raster;

/// Windows whose summed squared deviation falls below this score zero.
const VAR_EPS: f64 = 1e-9;

/// Scores indexed by placement: entry `(dx, dy)` places the template's
/// top-left pixel on search pixel `(dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ScoreGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl ScoreGrid {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

fn fft_rows(buf: &mut [Complex<f64>], w: usize, planner: &mut FftPlanner<f64>, inverse: bool) {
    let fft = if inverse {
        planner.plan_fft_inverse(w)
    } else {
        planner.plan_fft_forward(w)
    };
    fft.process(buf);
}

fn transpose(buf: &[Complex<f64>], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); w * h];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = buf[y * w + x];
        }
    }
    out
}

/// Forward 2-D transform; the result is left in transposed (column-major)
/// layout, which is all the pointwise product needs.
fn fft2_forward(buf: &mut [Complex<f64>], w: usize, h: usize, p: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    fft_rows(buf, w, p, false);
    let mut t = transpose(buf, w, h);
    fft_rows(&mut t, h, p, false);
    t
}

fn fft2_inverse_from_transposed(t: &mut [Complex<f64>], w: usize, h: usize, p: &mut FftPlanner<f64>) -> Vec<Complex<f64>> {
    fft_rows(t, h, p, true);
    let mut buf = transpose(t, h, w);
    fft_rows(&mut buf, w, p, true);
    buf
}

/// `c(dx, dy) = sum_x a(x) b(x + d)` for every valid placement of `a` in `b`.
pub(crate) fn cross_correlate_valid(a: &Raster, b: &Raster) -> Vec<f64> {
    let (sw, sh) = (b.width(), b.height());
    let (tw, th) = (a.width(), a.height());
    let mut planner = FftPlanner::new();
    let mut fa = vec![Complex::new(0.0, 0.0); sw * sh];
    for y in 0..th {
        for x in 0..tw {
            fa[y * sw + x] = Complex::new(a.get(x, y), 0.0);
        }
    }
    let mut fb: Vec<Complex<f64>> = b.data().iter().map(|&v| Complex::new(v, 0.0)).collect();
    let fa_t = fft2_forward(&mut fa, sw, sh, &mut planner);
    let fb_t = fft2_forward(&mut fb, sw, sh, &mut planner);
    let mut prod: Vec<Complex<f64>> = fa_t.iter().zip(&fb_t).map(|(x, y)| x.conj() * y).collect();
    let spatial = fft2_inverse_from_transposed(&mut prod, sw, sh, &mut planner);
    let norm = (sw * sh) as f64;
    let (ow, oh) = (sw - tw + 1, sh - th + 1);
    let mut out = Vec::with_capacity(ow * oh);
    for dy in 0..oh {
        for dx in 0..ow {
            out.push(spatial[dy * sw + dx].re / norm);
        }
    }
    out
}

struct Integral {
    w: usize,
    s: Vec<f64>,
    s2: Vec<f64>,
}

impl Integral {
    fn new(img: &Raster) -> Self {
        let (w, h) = (img.width(), img.height());
        let stride = w + 1;
        let mut s = vec![0.0; stride * (h + 1)];
        let mut s2 = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let (mut r, mut r2) = (0.0, 0.0);
            for x in 0..w {
                let v = img.get(x, y);
                r += v;
                r2 += v * v;
                s[(y + 1) * stride + x + 1] = s[y * stride + x + 1] + r;
                s2[(y + 1) * stride + x + 1] = s2[y * stride + x + 1] + r2;
            }
        }
        Self { w: stride, s, s2 }
    }

    fn window(&self, x: usize, y: usize, w: usize, h: usize) -> (f64, f64) {
        let at = |t: &[f64], xx: usize, yy: usize| t[yy * self.w + xx];
        let sum = |t: &[f64]| at(t, x + w, y + h) - at(t, x, y + h) - at(t, x + w, y) + at(t, x, y);
        (sum(&self.s), sum(&self.s2))
    }
}

/// ZNCC of `template` at every valid placement inside `search`.
pub(crate) fn zncc_valid(template: &Raster, search: &Raster) -> Result<ScoreGrid> {
    let (tw, th) = (template.width(), template.height());
    let (sw, sh) = (search.width(), search.height());
    if tw > sw || th > sh {
        return Err(Error::Shape(format!(
            "template {tw}x{th} larger than search {sw}x{sh}"
        )));
    }
    let mean = template.mean();
    let centered = template.map(|v| v - mean);
    let t_ss: f64 = centered.data().iter().map(|v| v * v).sum();
    if t_ss < VAR_EPS {
        return Err(Error::ZeroVariance("template"));
    }
    let t_norm = t_ss.sqrt();
    let num = cross_correlate_valid(&centered, search);
    let integral = Integral::new(search);
    let n = (tw * th) as f64;
    let (ow, oh) = (sw - tw + 1, sh - th + 1);
    let mut data = Vec::with_capacity(ow * oh);
    for dy in 0..oh {
        for dx in 0..ow {
            let (s, s2) = integral.window(dx, dy, tw, th);
            let var = s2 - s * s / n;
            let score = if var > VAR_EPS {
                (num[dy * ow + dx] / (t_norm * var.sqrt())).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            data.push(score);
        }
    }
    Ok(ScoreGrid {
        width: ow,
        height: oh,
        data,
    })
}

/// Vertex offset of the parabola through `(-1, a), (0, b), (1, c)`, limited
/// to `[-0.5, 0.5]`; zero when the three points are not a strict peak.
pub(crate) fn parabolic_offset(a: f64, b: f64, c: f64) -> f64 {
    let denom = a - 2.0 * b + c;
    if denom >= 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (0.5 * (a - c) / denom).clamp(-0.5, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_zncc(t: &Raster, s: &Raster, dx: usize, dy: usize) -> f64 {
        let n = (t.width() * t.height()) as f64;
        let tm = t.mean();
        let mut sm = 0.0;
        for y in 0..t.height() {
            for x in 0..t.width() {
                sm += s.get(x + dx, y + dy);
            }
        }
        sm /= n;
        let (mut num, mut tt, mut ss) = (0.0, 0.0, 0.0);
        for y in 0..t.height() {
            for x in 0..t.width() {
                let a = t.get(x, y) - tm;
                let b = s.get(x + dx, y + dy) - sm;
                num += a * b;
                tt += a * a;
                ss += b * b;
            }
        }
        num / (tt * ss).sqrt()
    }

    fn texture(w: usize, h: usize, k: f64) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.25 * (0.37 * x * k + 0.11 * y).sin() + 0.2 * (0.23 * y * k - 0.5 * x).cos()
        })
    }

    #[test]
    fn matches_brute_force() {
        let s = texture(23, 19, 1.0);
        let t = texture(7, 5, 1.7);
        let g = zncc_valid(&t, &s).unwrap();
        assert_eq!((g.width, g.height), (17, 15));
        for dy in 0..g.height {
            for dx in 0..g.width {
                let b = brute_zncc(&t, &s, dx, dy);
                assert!((g.get(dx, dy) - b).abs() < 1e-9, "{dx},{dy}");
            }
        }
    }

    #[test]
    fn exact_copy_scores_one() {
        let s = texture(30, 30, 1.0);
        let t = s.crop(9, 4, 11, 13).unwrap();
        let g = zncc_valid(&t, &s).unwrap();
        assert!((g.get(9, 4) - 1.0).abs() < 1e-9);
        let neg = t.map(|v| 1.0 - v);
        let g = zncc_valid(&neg, &s).unwrap();
        assert!((g.get(9, 4) + 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_template_is_rejected() {
        let s = texture(10, 10, 1.0);
        assert!(zncc_valid(&Raster::filled(3, 3, 0.5), &s).is_err());
        assert!(zncc_valid(&s, &Raster::filled(3, 3, 0.5)).is_err());
    }

    #[test]
    fn constant_windows_score_zero() {
        let t = texture(4, 4, 1.0);
        let g = zncc_valid(&t, &Raster::filled(8, 8, 0.2)).unwrap();
        assert!(g.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn parabola_vertex() {
        // y = -(x - 0.25)^2
        let f = |x: f64| -(x - 0.25) * (x - 0.25);
        assert!((parabolic_offset(f(-1.0), f(0.0), f(1.0)) - 0.25).abs() < 1e-12);
        assert_eq!(parabolic_offset(1.0, 0.0, 1.0), 0.0);
    }
}
