//! Residual-group estimation: four-point DLT and a damped photometric
//! least-squares refinement over the residual parameters.

use nalgebra::{Matrix3, SMatrix, SVector, SymmetricEigen};

use crate::condnum::{Interval, ParamRanges};
use crate::error::{Error, Result};
use crate::geometry::{build_homography, CornerQuad, Homography, ResidualParams, SimilarityParams, TransformParams};
use crate::losses::{self, ValueGrad};
use crate::raster::{sample_bilinear, Boundary, Raster};

/// Per-corner displacements, corner order as [`CornerQuad`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerOffsets(pub [[f64; 2]; 4]);

impl CornerOffsets {
    pub const ZERO: CornerOffsets = CornerOffsets([[0.0; 2]; 4]);

    /// `target - reference`, corner by corner.
    pub fn between(reference: &CornerQuad, target: &CornerQuad) -> Self {
        let mut d = [[0.0; 2]; 4];
        for i in 0..4 {
            d[i] = [target.0[i][0] - reference.0[i][0], target.0[i][1] - reference.0[i][1]];
        }
        CornerOffsets(d)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }

    pub fn apply(&self, reference: &CornerQuad) -> CornerQuad {
        let mut q = reference.0;
        for i in 0..4 {
            q[i][0] += self.0[i][0];
            q[i][1] += self.0[i][1];
        }
        CornerQuad(q)
    }
}

fn hartley(points: &[[f64; 2]]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - cx).powi(2) + (p[1] - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 0.0) || !mean_dist.is_finite() {
        return Err(Error::DegenerateQuad("coincident points"));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn normalize(t: &Matrix3<f64>, p: [f64; 2]) -> [f64; 2] {
    [t[(0, 0)] * p[0] + t[(0, 2)], t[(1, 1)] * p[1] + t[(1, 2)]]
}

/// Least-squares homography mapping `src[i]` to `dst[i]` (at least four
/// correspondences), via the normalized DLT system.
pub fn dlt(src: &[[f64; 2]], dst: &[[f64; 2]]) -> Result<Homography> {
    if src.len() != dst.len() || src.len() < 4 {
        return Err(Error::Shape(format!(
            "DLT needs at least 4 matched points, got {} and {}",
            src.len(),
            dst.len()
        )));
    }
    if src.iter().chain(dst).flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("DLT correspondences"));
    }
    let ts = hartley(src)?;
    let td = hartley(dst)?;
    let mut ata = SMatrix::<f64, 9, 9>::zeros();
    for (s, d) in src.iter().zip(dst) {
        let [x, y] = normalize(&ts, *s);
        let [u, v] = normalize(&td, *d);
        let r1 = SVector::<f64, 9>::from_column_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        let r2 = SVector::<f64, 9>::from_column_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        ata += r1 * r1.transpose() + r2 * r2.transpose();
    }
    let eig = SymmetricEigen::new(ata);
    let k = eig.eigenvalues.imin();
    let h = eig.eigenvectors.column(k);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let td_inv = td.try_inverse().ok_or(Error::DegenerateQuad("normalization"))?;
    Homography::new(td_inv * hn * ts)
}

/// The homography taking each corner of `reference` to the same corner
/// displaced by `offsets`.
pub fn dlt_from_offsets(reference: &CornerQuad, offsets: &CornerOffsets) -> Result<Homography> {
    if !offsets.is_finite() {
        return Err(Error::NonFinite("corner offsets"));
    }
    reference.check_non_degenerate()?;
    let target = offsets.apply(reference);
    target.check_non_degenerate()?;
    dlt(&reference.0, &target.0)
}

/// Predicted offsets for a wrong-object input, paired with their all-zero
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeTarget {
    pub predicted: CornerOffsets,
    pub target: CornerOffsets,
}

impl NegativeTarget {
    pub fn loss(&self) -> ValueGrad {
        losses::loss_neg(&self.predicted.0)
    }
}

pub fn corners_to_negative_target(predicted: &CornerOffsets) -> NegativeTarget {
    NegativeTarget {
        predicted: *predicted,
        target: CornerOffsets::ZERO,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub max_iters: usize,
    /// Stop once the parameter update norm falls below this.
    pub tolerance: f64,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Consecutive rejected steps before giving up on an iteration.
    pub max_escalations: usize,
    pub k1: Interval,
    pub k2: Interval,
    pub nu: Interval,
    /// Bound on the translation correction, pixels.
    pub translation_slack: f64,
    /// Gaussian pre-smoothing per pass, coarse to fine.
    pub smoothing: Vec<f64>,
    /// Fit a gain and bias between the images at every evaluation.
    pub photometric: bool,
    /// Final correlation below this flags the result as lost.
    pub min_correlation: f64,
    /// Minimum fraction of template pixels that must map inside the search.
    pub min_overlap: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        let r = ParamRanges::motion();
        Self {
            max_iters: 30,
            tolerance: 1e-6,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            max_escalations: 8,
            k1: r.k1,
            k2: r.k2,
            nu: r.nu,
            translation_slack: 4.0,
            smoothing: vec![2.0, 0.75],
            photometric: true,
            min_correlation: 0.3,
            min_overlap: 0.5,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tolerance", self.tolerance),
            ("lambda0", self.lambda0),
            ("translation_slack", self.translation_slack),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 || self.max_escalations == 0 {
            return Err(Error::InvalidParameter("max_iters and max_escalations must be at least 1".into()));
        }
        if !(self.lambda_up > 1.0) || !(self.lambda_down > 1.0) {
            return Err(Error::InvalidParameter("damping factors must exceed 1".into()));
        }
        if self.smoothing.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidParameter("smoothing sigmas must be nonnegative".into()));
        }
        if !(self.k1.lo > 0.0) || self.k1.lo > 1.0 || self.k1.hi < 1.0 {
            return Err(Error::InvalidParameter("k1 bounds must contain 1 and stay positive".into()));
        }
        if self.k2.lo > 0.0 || self.k2.hi < 0.0 || self.nu.lo > 0.0 || self.nu.hi < 0.0 {
            return Err(Error::InvalidParameter("k2 and nu bounds must contain 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineResult {
    /// `T(t) * H_residual`, mapping template-centered to search-centered
    /// coordinates.
    pub homography: Homography,
    pub residual: ResidualParams,
    /// Translation slack, recorded separately from the residual group.
    pub translation: [f64; 2],
    /// Root-mean-square photometric error over overlapping pixels.
    pub rms: f64,
    /// Normalized correlation of the aligned pair.
    pub correlation: f64,
    pub iterations: usize,
    pub converged: bool,
    pub lost: bool,
    /// Photometric error after each accepted step, one list per smoothing
    /// level (starting value first).
    pub error_history: Vec<Vec<f64>>,
}

// parameter vector order: k1, k2, nu1, nu2, t1, t2
type P = SVector<f64, 6>;

fn identity_p() -> P {
    P::from_column_slice(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
}

#[inline]
fn warp(p: &P, x: f64, y: f64) -> Option<[f64; 2]> {
    let a0 = p[0] * x + p[1] * y;
    let b0 = y / p[0];
    let w = p[2] * x + p[3] * y + 1.0;
    if w.abs() < crate::geometry::W_EPS {
        return None;
    }
    Some([a0 / w + p[4], b0 / w + p[5]])
}

/// Warp derivatives `[dW/dp_j]` at `(x, y)`.
#[inline]
fn warp_jacobian(p: &P, x: f64, y: f64) -> [[f64; 2]; 6] {
    let k1 = p[0];
    let a0 = k1 * x + p[1] * y;
    let b0 = y / k1;
    let w = p[2] * x + p[3] * y + 1.0;
    let w2 = w * w;
    [
        [x / w, -y / (k1 * k1 * w)],
        [y / w, 0.0],
        [-a0 * x / w2, -b0 * x / w2],
        [-a0 * y / w2, -b0 * y / w2],
        [1.0, 0.0],
        [0.0, 1.0],
    ]
}

struct Problem<'a> {
    template: &'a Raster,
    search: &'a Raster,
    gx: Raster,
    gy: Raster,
    tc: [f64; 2],
    sc: [f64; 2],
    photometric: bool,
}

struct Eval {
    /// Mean squared residual over overlapping pixels.
    error: f64,
    gain: f64,
    bias: f64,
    count: usize,
    correlation: f64,
}

impl<'a> Problem<'a> {
    fn new(template: &'a Raster, search: &'a Raster, photometric: bool) -> Self {
        let (gx, gy) = search.gradients();
        Self {
            template,
            search,
            gx,
            gy,
            tc: template.center(),
            sc: search.center(),
            photometric,
        }
    }

    fn inside(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u <= (self.search.width() - 1) as f64 && v <= (self.search.height() - 1) as f64
    }

    /// Calls `f(template_value, search_value, x, y, u, v)` on every
    /// template pixel whose warped position lands inside the search.
    fn for_each(&self, p: &P, mut f: impl FnMut(f64, f64, f64, f64, f64, f64)) {
        for j in 0..self.template.height() {
            let y = j as f64 - self.tc[1];
            for i in 0..self.template.width() {
                let x = i as f64 - self.tc[0];
                let Some([wx, wy]) = warp(p, x, y) else { continue };
                let (u, v) = (wx + self.sc[0], wy + self.sc[1]);
                if !self.inside(u, v) {
                    continue;
                }
                let s = sample_bilinear(self.search, u, v, Boundary::Clamp);
                f(self.template.get(i, j), s, x, y, u, v);
            }
        }
    }

    fn evaluate(&self, p: &P) -> Eval {
        let (mut n, mut st, mut ss, mut stt, mut sss, mut sts) = (0usize, 0.0, 0.0, 0.0, 0.0, 0.0);
        self.for_each(p, |t, s, _, _, _, _| {
            n += 1;
            st += t;
            ss += s;
            stt += t * t;
            sss += s * s;
            sts += t * s;
        });
        if n == 0 {
            return Eval {
                error: f64::INFINITY,
                gain: 1.0,
                bias: 0.0,
                count: 0,
                correlation: 0.0,
            };
        }
        let nf = n as f64;
        let vt = stt - st * st / nf;
        let vs = sss - ss * ss / nf;
        let cov = sts - st * ss / nf;
        let correlation = if vt > 1e-12 && vs > 1e-12 {
            (cov / (vt * vs).sqrt()).clamp(-1.0, 1.0)
        } else {
            0.0
        };
        let (gain, bias) = if self.photometric && vs > 1e-12 {
            let g = cov / vs;
            (g, (st - g * ss) / nf)
        } else {
            (1.0, 0.0)
        };
        // sum (g s + b - t)^2 expanded
        let sse = gain * gain * sss + bias * bias * nf + stt + 2.0 * gain * bias * ss - 2.0 * gain * sts - 2.0 * bias * st;
        Eval {
            error: (sse / nf).max(0.0),
            gain,
            bias,
            count: n,
            correlation,
        }
    }

    /// Normal equations `(J^T J, J^T r)` at `p` for the current gain/bias.
    fn normal_equations(&self, p: &P, e: &Eval) -> (SMatrix<f64, 6, 6>, P) {
        let mut jtj = SMatrix::<f64, 6, 6>::zeros();
        let mut jtr = P::zeros();
        self.for_each(p, |t, s, x, y, u, v| {
            let r = e.gain * s + e.bias - t;
            let gu = e.gain * sample_bilinear(&self.gx, u, v, Boundary::Clamp);
            let gv = e.gain * sample_bilinear(&self.gy, u, v, Boundary::Clamp);
            let dw = warp_jacobian(p, x, y);
            let mut row = P::zeros();
            for k in 0..6 {
                row[k] = gu * dw[k][0] + gv * dw[k][1];
            }
            jtj += row * row.transpose();
            jtr += row * r;
        });
        (jtj, jtr)
    }
}

fn clamp_params(p: &P, cfg: &RefineConfig) -> P {
    let s = cfg.translation_slack;
    P::from_column_slice(&[
        cfg.k1.clamp(p[0]),
        cfg.k2.clamp(p[1]),
        cfg.nu.clamp(p[2]),
        cfg.nu.clamp(p[3]),
        p[4].clamp(-s, s),
        p[5].clamp(-s, s),
    ])
}

struct PassOutcome {
    p: P,
    iterations: usize,
    converged: bool,
    errors: Vec<f64>,
}

fn lm_pass(problem: &Problem, start: P, cfg: &RefineConfig) -> PassOutcome {
    let mut p = start;
    let mut e = problem.evaluate(&p);
    let mut lambda = cfg.lambda0;
    let mut iterations = 0;
    let mut converged = false;
    let mut errors = vec![e.error];
    if e.count == 0 || e.error == 0.0 {
        return PassOutcome {
            p,
            iterations,
            converged: e.count > 0,
            errors,
        };
    }
    'outer: while iterations < cfg.max_iters {
        iterations += 1;
        let (jtj, jtr) = problem.normal_equations(&p, &e);
        let mut escalations = 0;
        loop {
            let mut a = jtj;
            for k in 0..6 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-jtr))) else {
                lambda *= cfg.lambda_up;
                escalations += 1;
                if escalations >= cfg.max_escalations {
                    break 'outer;
                }
                continue;
            };
            if !delta.iter().all(|v| v.is_finite()) || delta.norm() < cfg.tolerance {
                converged = delta.iter().all(|v| v.is_finite());
                break 'outer;
            }
            let cand = clamp_params(&(p + delta), cfg);
            let ec = problem.evaluate(&cand);
            if ec.count > 0 && ec.error < e.error {
                let step = (cand - p).norm();
                p = cand;
                e = ec;
                errors.push(e.error);
                lambda = (lambda / cfg.lambda_down).max(1e-12);
                if step < cfg.tolerance {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            lambda *= cfg.lambda_up;
            escalations += 1;
            if escalations >= cfg.max_escalations {
                // no descent direction left at this damping range
                converged = true;
                break 'outer;
            }
        }
    }
    PassOutcome {
        p,
        iterations,
        converged,
        errors,
    }
}

fn params_homography(p: &P) -> Result<(Homography, ResidualParams)> {
    let residual = ResidualParams {
        k1: p[0],
        k2: p[1],
        nu1: p[2],
        nu2: p[3],
    };
    let sim = SimilarityParams {
        t1: p[4],
        t2: p[5],
        gamma: 1.0,
        theta: 0.0,
    };
    let h = build_homography(&TransformParams::from_parts(sim, residual))?;
    Ok((h, residual))
}

/// Aligns `template` to `warped_search` over the residual parameters plus a
/// bounded translation. Both images are addressed in centered coordinates;
/// `warped_search` may be larger than the template.
pub fn refine_residual(template: &Raster, warped_search: &Raster, cfg: &RefineConfig) -> Result<RefineResult> {
    cfg.validate()?;
    if warped_search.width() < template.width() || warped_search.height() < template.height() {
        return Err(Error::Shape(format!(
            "search {}x{} smaller than template {}x{}",
            warped_search.width(),
            warped_search.height(),
            template.width(),
            template.height()
        )));
    }
    if template.data().iter().chain(warped_search.data()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("refinement input"));
    }
    let mut p = identity_p();
    let mut iterations = 0;
    let mut converged = true;
    let mut error_history = Vec::new();
    let raw = Problem::new(template, warped_search, cfg.photometric);
    let exact = raw.evaluate(&p);
    if !(exact.count > 0 && exact.error == 0.0) {
        for &sigma in &cfg.smoothing {
            let (ts, ss) = if sigma > 0.0 {
                (template.gaussian_blur(sigma), warped_search.gaussian_blur(sigma))
            } else {
                (template.clone(), warped_search.clone())
            };
            let problem = Problem::new(&ts, &ss, cfg.photometric);
            let out = lm_pass(&problem, p, cfg);
            p = out.p;
            iterations += out.iterations;
            converged = out.converged;
            error_history.push(out.errors);
        }
        if cfg.smoothing.is_empty() {
            let out = lm_pass(&raw, p, cfg);
            p = out.p;
            iterations = out.iterations;
            converged = out.converged;
            error_history.push(out.errors);
        }
    }
    let fin = raw.evaluate(&p);
    let overlap = fin.count as f64 / (template.width() * template.height()) as f64;
    let lost = !(fin.correlation >= cfg.min_correlation) || overlap < cfg.min_overlap || !fin.error.is_finite();
    if lost {
        return Ok(RefineResult {
            homography: Homography::identity(),
            residual: ResidualParams::IDENTITY,
            translation: [0.0, 0.0],
            rms: fin.error.sqrt(),
            correlation: fin.correlation,
            iterations,
            converged: false,
            lost: true,
            error_history,
        });
    }
    let (homography, residual) = params_homography(&p)?;
    Ok(RefineResult {
        homography,
        residual,
        translation: [p[4], p[5]],
        rms: fin.error.sqrt(),
        correlation: fin.correlation,
        iterations,
        converged,
        lost: false,
        error_history,
    })
}
