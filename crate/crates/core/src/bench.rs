//! Synthetic sequences with exact ground truth, frame/ground-truth file I/O
//! and the planar-tracking evaluation metrics.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::condnum::ParamRanges;
use crate::error::{Error, Result};
use crate::geometry::{build_homography, decompose_params, transport_corners, CornerQuad, Homography, TransformParams};
use crate::pgm;
use crate::raster::{centering, warp_homography, Boundary, Raster};

/// Absolute object pose at a given frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keyframe {
    pub frame: usize,
    pub params: TransformParams,
}

/// Opaque rectangle drawn over frames `start..end` (frame pixels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    pub start: usize,
    pub end: usize,
    pub x0: i64,
    pub y0: i64,
    pub width: usize,
    pub height: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Challenges {
    pub blur_sigma: f64,
    pub gain: f64,
    pub bias: f64,
    pub noise_sigma: f64,
    pub occlusion: Option<Occlusion>,
}

impl Default for Challenges {
    fn default() -> Self {
        Self {
            blur_sigma: 0.0,
            gain: 1.0,
            bias: 0.0,
            noise_sigma: 0.0,
            occlusion: None,
        }
    }
}

/// Object poses for every frame, interpolated between keyframes, plus the
/// appearance effects applied after warping.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionScript {
    pub n_frames: usize,
    pub keyframes: Vec<Keyframe>,
    pub challenges: Challenges,
    /// Inter-frame motions must stay inside these ranges.
    pub limits: ParamRanges,
}

fn smoothstep(s: f64) -> f64 {
    s * s * (3.0 - 2.0 * s)
}

impl MotionScript {
    pub fn new(n_frames: usize, keyframes: Vec<Keyframe>) -> Self {
        Self {
            n_frames,
            keyframes,
            challenges: Challenges::default(),
            limits: ParamRanges::motion(),
        }
    }

    pub fn identity(n_frames: usize) -> Self {
        Self::new(
            n_frames,
            vec![Keyframe {
                frame: 0,
                params: TransformParams::IDENTITY,
            }],
        )
    }

    /// Keyframes every `every` frames drawn uniformly from `amplitude`
    /// (absolute poses), starting from identity.
    pub fn random(n_frames: usize, every: usize, amplitude: &ParamRanges, seed: u64) -> Self {
        let every = every.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keyframes = vec![Keyframe {
            frame: 0,
            params: TransformParams::IDENTITY,
        }];
        let mut f = every;
        while f < n_frames + every {
            keyframes.push(Keyframe {
                frame: f,
                params: amplitude.sample(&mut rng),
            });
            f += every;
        }
        Self::new(n_frames, keyframes)
    }

    pub fn with_challenges(mut self, c: Challenges) -> Self {
        self.challenges = c;
        self
    }

    fn check(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::InvalidParameter("script has no frames".into()));
        }
        if self.keyframes.is_empty() {
            return Err(Error::InvalidParameter("script has no keyframes".into()));
        }
        if self.keyframes.windows(2).any(|w| w[0].frame >= w[1].frame) {
            return Err(Error::InvalidParameter("keyframes must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Pose at frame `i`: smoothstep blend of the surrounding keyframes,
    /// scale blended in log space, held constant past the ends.
    pub fn params_at(&self, i: usize) -> TransformParams {
        let k = &self.keyframes;
        if i <= k[0].frame {
            return k[0].params;
        }
        let last = k[k.len() - 1];
        if i >= last.frame {
            return last.params;
        }
        let j = k.iter().rposition(|kf| kf.frame <= i).unwrap_or(0);
        let (a, b) = (k[j], k[j + 1]);
        let s = smoothstep((i - a.frame) as f64 / (b.frame - a.frame) as f64);
        let lerp = |u: f64, v: f64| u + (v - u) * s;
        let (pa, pb) = (a.params, b.params);
        TransformParams {
            t1: lerp(pa.t1, pb.t1),
            t2: lerp(pa.t2, pb.t2),
            gamma: lerp(pa.gamma.ln(), pb.gamma.ln()).exp(),
            theta: lerp(pa.theta, pb.theta),
            k1: lerp(pa.k1, pb.k1),
            k2: lerp(pa.k2, pb.k2),
            nu1: lerp(pa.nu1, pb.nu1),
            nu2: lerp(pa.nu2, pb.nu2),
        }
    }
}

/// Geometry of a synthetic sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub frame_width: usize,
    pub frame_height: usize,
    /// Half extent of the square object around the base image center.
    pub object_half: f64,
    /// Half extent of the tracker's template box.
    pub template_half: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            frame_width: 255,
            frame_height: 255,
            object_half: 48.0,
            template_half: 63.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub frames: Vec<Raster>,
    /// Ground-truth corners per frame.
    pub corners: Vec<CornerQuad>,
    /// Ground truth mapping template-box coordinates to frame pixels.
    pub homographies: Vec<Homography>,
}

/// Renders `script` over `base`. Frame `i` shows the base warped so the
/// object pose relative to frame 0 is `H(x_i)` about the object center.
pub fn synthesize(base: &Raster, script: &MotionScript, seed: u64, cfg: &SynthConfig) -> Result<Sequence> {
    script.check()?;
    script.limits.validate()?;
    let c_f = centering(cfg.frame_width, cfg.frame_height);
    let c_b = centering(base.width(), base.height());
    let obj_scale = cfg.object_half / cfg.template_half;
    let obj = Homography::from_rows([[obj_scale, 0.0, 0.0], [0.0, obj_scale, 0.0], [0.0, 0.0, 1.0]])?;
    let template_box = CornerQuad::centered_box(cfg.template_half, cfg.template_half);
    let (fw, fh) = (cfg.frame_width as f64, cfg.frame_height as f64);
    let ch = script.challenges;
    let mut seq = Sequence {
        frames: Vec::with_capacity(script.n_frames),
        corners: Vec::with_capacity(script.n_frames),
        homographies: Vec::with_capacity(script.n_frames),
    };
    let mut prev: Option<Homography> = None;
    for i in 0..script.n_frames {
        let x = script.params_at(i);
        let motion = build_homography(&x)?;
        if let Some(p) = prev {
            let delta = decompose_params(&p.inverse()?.compose(&motion)?)?;
            if !script.limits.contains(&delta) {
                return Err(Error::InvalidParameter(format!(
                    "inter-frame motion at frame {i} leaves the allowed ranges"
                )));
            }
        }
        prev = Some(motion);
        // base pixel -> frame pixel
        let g = c_f.compose(&motion)?.compose(&c_b.inverse()?)?;
        let h_gt = c_f.compose(&motion)?.compose(&obj)?;
        let corners = transport_corners(&h_gt, &template_box)?;
        if corners.0.iter().any(|c| c[0] < 0.0 || c[1] < 0.0 || c[0] > fw - 1.0 || c[1] > fh - 1.0) {
            return Err(Error::InvalidParameter(format!("object leaves the frame at frame {i}")));
        }
        let mut frame = warp_homography(base, &g.inverse()?, cfg.frame_width, cfg.frame_height, Boundary::Zero)?;
        if ch.blur_sigma > 0.0 {
            frame = frame.gaussian_blur(ch.blur_sigma);
        }
        if ch.gain != 1.0 || ch.bias != 0.0 {
            frame = frame.map(|v| v * ch.gain + ch.bias);
        }
        if let Some(o) = ch.occlusion {
            if (o.start..o.end).contains(&i) {
                frame.fill_rect(o.x0, o.y0, o.width, o.height, o.value);
            }
        }
        if ch.noise_sigma > 0.0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let normal = Normal::new(0.0, ch.noise_sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            frame = Raster::new(
                frame.width(),
                frame.height(),
                frame.data().iter().map(|v| v + normal.sample(&mut rng)).collect(),
            )?;
        }
        seq.frames.push(pgm::quantized(&frame.map(|v| v.clamp(0.0, 1.0))));
        seq.corners.push(corners);
        seq.homographies.push(h_gt);
    }
    Ok(seq)
}

/// Band-limited random texture in `[0, 1]`: white noise blurred at several
/// scales and summed, then stretched to the unit range.
pub fn procedural_texture(width: usize, height: usize, seed: u64) -> Raster {
    let mut acc = Raster::filled(width, height, 0.0);
    for (octave, (sigma, weight)) in [(1.0, 0.5), (2.5, 1.0), (6.0, 1.5), (14.0, 1.5)].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(octave as u64);
        let noise = Raster::new(width, height, (0..width * height).map(|_| rng.random::<f64>() - 0.5).collect())
            .expect("shape");
        let b = noise.gaussian_blur(sigma);
        let sd = b.variance().sqrt().max(1e-12);
        let data: Vec<f64> = acc.data().iter().zip(b.data()).map(|(a, v)| a + weight * v / sd).collect();
        acc = Raster::new(width, height, data).expect("same shape");
    }
    let lo = acc.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = acc.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);
    pgm::quantized(&acc.map(|v| 0.05 + 0.9 * (v - lo) / span))
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Mean Euclidean distance between corresponding corners.
pub fn alignment_error(pred: &CornerQuad, truth: &CornerQuad) -> f64 {
    (0..4).map(|i| dist(pred.0[i], truth.0[i])).sum::<f64>() / 4.0
}

/// Threshold grid `1, 2, ..., 50` pixels.
pub fn pixel_thresholds() -> Vec<f64> {
    (1..=50).map(|t| t as f64).collect()
}

/// Threshold grid `0.05, 0.10, ..., 0.95`.
pub fn overlap_thresholds() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// `(threshold, fraction of values <= threshold)` for every threshold.
pub fn precision_curve(errors: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let n = errors.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| (t, errors.iter().filter(|&&e| e <= t).count() as f64 / n))
        .collect()
}

/// Mean fraction over the threshold grid.
pub fn average(curve: &[(f64, f64)]) -> f64 {
    if curve.is_empty() {
        return 0.0;
    }
    curve.iter().map(|c| c.1).sum::<f64>() / curve.len() as f64
}

/// Mean reprojection distance of an `n x n` grid spanning the template box
/// under `H_gt^-1 H_est`.
pub fn homography_discrepancy(est: &Homography, truth: &Homography, template_half: f64, n: usize) -> Result<f64> {
    let m = truth.inverse()?.compose(est)?;
    let n = n.max(2);
    let step = 2.0 * template_half / (n - 1) as f64;
    let mut total = 0.0;
    for j in 0..n {
        for i in 0..n {
            let p = [-template_half + i as f64 * step, -template_half + j as f64 * step];
            let q = m.apply(p[0], p[1])?;
            total += dist(p, q);
        }
    }
    Ok(total / (n * n) as f64)
}

pub fn centroid_errors(pred: &[CornerQuad], truth: &[CornerQuad]) -> Vec<f64> {
    pred.iter().zip(truth).map(|(p, t)| dist(p.centroid(), t.centroid())).collect()
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn is_convex(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut sign = 0.0f64;
    for i in 0..n {
        let c = cross(poly[i], poly[(i + 1) % n], poly[(i + 2) % n]);
        if c != 0.0 {
            if sign != 0.0 && c.signum() != sign {
                return false;
            }
            sign = c.signum();
        }
    }
    // a self-intersecting quad can pass the turn test; its area check fails
    true
}

/// Counter-clockwise convex hull (monotone chain).
fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    p.dedup();
    if p.len() < 3 {
        return p;
    }
    let mut lower: Vec<[f64; 2]> = Vec::new();
    for &q in &p {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], q) <= 0.0 {
            lower.pop();
        }
        lower.push(q);
    }
    let mut upper: Vec<[f64; 2]> = Vec::new();
    for &q in p.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], q) <= 0.0 {
            upper.pop();
        }
        upper.push(q);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Convex polygon in counter-clockwise order; the flag is set when the
/// input had to be replaced by its hull.
fn convex_ccw(q: &CornerQuad) -> (Vec<[f64; 2]>, bool) {
    let poly = q.0.to_vec();
    let hull = convex_hull(&poly);
    let exact = is_convex(&poly) && hull.len() == 4 && (signed_area(&poly).abs() - signed_area(&hull).abs()).abs() <= 1e-9 * signed_area(&hull).abs().max(1.0);
    if exact {
        let mut p = poly;
        if signed_area(&p) < 0.0 {
            p.reverse();
        }
        (p, false)
    } else {
        (hull, true)
    }
}

/// Sutherland-Hodgman clipping of `subject` by the convex `clip`, both
/// counter-clockwise.
fn clip_polygon(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    let m = clip.len();
    for i in 0..m {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % m]);
        let input = std::mem::take(&mut out);
        let n = input.len();
        for j in 0..n {
            let cur = input[j];
            let prev = input[(j + n - 1) % n];
            let in_cur = cross(a, b, cur) >= 0.0;
            let in_prev = cross(a, b, prev) >= 0.0;
            if in_cur {
                if !in_prev {
                    out.push(intersect(prev, cur, a, b));
                }
                out.push(cur);
            } else if in_prev {
                out.push(intersect(prev, cur, a, b));
            }
        }
    }
    out
}

fn intersect(p: [f64; 2], q: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let (cp, cq) = (cross(a, b, p), cross(a, b, q));
    let s = cp / (cp - cq);
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
}

/// Intersection over union of two quads. The flag reports that at least one
/// quad was non-convex and replaced by its convex hull.
pub fn iou(a: &CornerQuad, b: &CornerQuad) -> (f64, bool) {
    let (pa, fa) = convex_ccw(a);
    let (pb, fb) = convex_ccw(b);
    let (aa, ab) = (signed_area(&pa).abs(), signed_area(&pb).abs());
    let inter = clip_polygon(&pa, &pb);
    let ai = if inter.len() >= 3 { signed_area(&inter).abs() } else { 0.0 };
    let union = aa + ab - ai;
    let v = if union > 0.0 { (ai / union).clamp(0.0, 1.0) } else { 0.0 };
    (v, fa || fb)
}

/// `(threshold, fraction of overlaps > threshold)`. Note this curve falls as
/// the threshold rises.
pub fn success_curve(overlaps: &[f64], thresholds: &[f64]) -> Vec<(f64, f64)> {
    let n = overlaps.len().max(1) as f64;
    thresholds
        .iter()
        .map(|&t| (t, overlaps.iter().filter(|&&o| o > t).count() as f64 / n))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Robustness {
    /// Lengths of the maximal runs with overlap above the failure threshold.
    pub runs: Vec<usize>,
    /// Run length to number of runs.
    pub histogram: BTreeMap<usize, usize>,
    /// Fraction of runs shorter than the report length.
    pub short_ratio: f64,
}

pub fn robustness_histogram(overlaps: &[f64], fail_threshold: f64, report_length: usize) -> Robustness {
    let mut runs = Vec::new();
    let mut cur = 0;
    for &o in overlaps {
        if o > fail_threshold {
            cur += 1;
        } else if cur > 0 {
            runs.push(cur);
            cur = 0;
        }
    }
    if cur > 0 {
        runs.push(cur);
    }
    let mut histogram = BTreeMap::new();
    for &r in &runs {
        *histogram.entry(r).or_insert(0) += 1;
    }
    let short_ratio = if runs.is_empty() {
        0.0
    } else {
        runs.iter().filter(|&&r| r < report_length).count() as f64 / runs.len() as f64
    };
    Robustness {
        runs,
        histogram,
        short_ratio,
    }
}

/// Prediction for one frame as consumed by [`evaluate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub corners: CornerQuad,
    pub homography: Option<Homography>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub errors: Vec<f64>,
    pub precision: Vec<(f64, f64)>,
    pub avg_precision: f64,
    pub hsr: Vec<(f64, f64)>,
    pub avg_hsr: f64,
    pub cp: Vec<(f64, f64)>,
    pub avg_cp: f64,
    pub sr: Vec<(f64, f64)>,
    pub avg_sr: f64,
    pub robustness: Robustness,
    /// Frames whose IoU needed the convex-hull fallback.
    pub nonconvex_frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub template_half: f64,
    pub grid: usize,
    pub fail_threshold: f64,
    pub report_length: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            template_half: 63.0,
            grid: 10,
            fail_threshold: 0.2,
            report_length: 10,
        }
    }
}

/// Scores predictions against ground truth. Homography scores use the
/// predicted homography when present and otherwise the one fitted to the
/// predicted corners; frames without ground-truth homographies skip HSR.
pub fn evaluate(
    preds: &[Prediction],
    truth: &[CornerQuad],
    truth_h: Option<&[Homography]>,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if preds.is_empty() || preds.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions for {} ground-truth frames",
            preds.len(),
            truth.len()
        )));
    }
    let errors: Vec<f64> = preds.iter().zip(truth).map(|(p, t)| alignment_error(&p.corners, t)).collect();
    let px = pixel_thresholds();
    let precision = precision_curve(&errors, &px);
    let box_ = CornerQuad::centered_box(cfg.template_half, cfg.template_half);
    let mut scores = Vec::with_capacity(preds.len());
    for (i, (p, t)) in preds.iter().zip(truth).enumerate() {
        let gt = match truth_h {
            Some(h) => h[i],
            None => crate::resest::dlt(&box_.0, &t.0)?,
        };
        let est = match p.homography {
            Some(h) => h,
            None => match crate::resest::dlt(&box_.0, &p.corners.0) {
                Ok(h) => h,
                Err(_) => {
                    scores.push(f64::INFINITY);
                    continue;
                }
            },
        };
        scores.push(homography_discrepancy(&est, &gt, cfg.template_half, cfg.grid).unwrap_or(f64::INFINITY));
    }
    let hsr = precision_curve(&scores, &px);
    let cp = precision_curve(&centroid_errors(&preds.iter().map(|p| p.corners).collect::<Vec<_>>(), truth), &px);
    let mut overlaps = Vec::with_capacity(preds.len());
    let mut nonconvex_frames = 0;
    for (p, t) in preds.iter().zip(truth) {
        let (v, flag) = iou(&p.corners, t);
        overlaps.push(v);
        nonconvex_frames += flag as usize;
    }
    let sr = success_curve(&overlaps, &overlap_thresholds());
    Ok(EvalReport {
        avg_precision: average(&precision),
        avg_hsr: average(&hsr),
        avg_cp: average(&cp),
        avg_sr: average(&sr),
        robustness: robustness_histogram(&overlaps, cfg.fail_threshold, cfg.report_length),
        errors,
        precision,
        hsr,
        cp,
        sr,
        nonconvex_frames,
    })
}

impl EvalReport {
    /// Rows `metric,threshold,value`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "threshold", "value"])?;
        for (name, curve) in [("precision", &self.precision), ("hsr", &self.hsr), ("cp", &self.cp), ("sr", &self.sr)] {
            for (t, v) in curve {
                out.write_record([name.to_string(), t.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        let mean_err = self.errors.iter().sum::<f64>() / self.errors.len() as f64;
        format!(
            "frames {}\nmean alignment error {:.4}\navg precision {:.4}\navg hsr {:.4}\navg cp {:.4}\navg sr {:.4}\nrobustness runs {} short ratio {:.4}\n",
            self.errors.len(),
            mean_err,
            self.avg_precision,
            self.avg_hsr,
            self.avg_cp,
            self.avg_sr,
            self.robustness.runs.len(),
            self.robustness.short_ratio
        )
    }
}

/// One quad per line, eight numbers separated by whitespace or commas.
pub fn parse_ground_truth(text: &str) -> Result<Vec<CornerQuad>> {
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals: std::result::Result<Vec<f64>, _> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect();
        let vals = vals.map_err(|e| Error::Parse {
            what: "ground truth",
            detail: format!("line {}: {e}", ln + 1),
        })?;
        if vals.len() != 8 {
            return Err(Error::Parse {
                what: "ground truth",
                detail: format!("line {}: expected 8 numbers, got {}", ln + 1, vals.len()),
            });
        }
        out.push(CornerQuad::from_slice(&vals).map_err(|e| Error::Parse {
            what: "ground truth",
            detail: format!("line {}: {e}", ln + 1),
        })?);
    }
    Ok(out)
}

pub fn read_ground_truth(path: impl AsRef<Path>) -> Result<Vec<CornerQuad>> {
    parse_ground_truth(&fs::read_to_string(path)?)
}

pub fn format_quad(q: &CornerQuad) -> String {
    q.to_array().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_ground_truth(path: impl AsRef<Path>, quads: &[CornerQuad]) -> Result<()> {
    let mut s = String::new();
    for q in quads {
        s.push_str(&format_quad(q));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

/// PGM files in `dir`, sorted by file name.
pub fn frame_paths(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths)
}

pub fn load_frames(dir: impl AsRef<Path>) -> Result<Vec<Raster>> {
    frame_paths(dir)?.iter().map(pgm::read).collect()
}

/// Writes `frame_00000.pgm`, ... into `dir`.
pub fn save_frames(dir: impl AsRef<Path>, frames: &[Raster]) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        pgm::write(dir.join(format!("frame_{i:05}.pgm")), f)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square(dx: f64) -> CornerQuad {
        CornerQuad([[dx, 0.0], [1.0 + dx, 0.0], [1.0 + dx, 1.0], [dx, 1.0]])
    }

    #[test]
    fn alignment_error_examples() {
        let p = CornerQuad::centered_box(10.0, 10.0);
        assert_eq!(alignment_error(&p, &p), 0.0);
        let mut q = p;
        q.0[2][0] += 3.0;
        q.0[2][1] += 4.0;
        assert_eq!(alignment_error(&q, &p), 1.25);
    }

    #[test]
    fn precision_extremes() {
        let px = pixel_thresholds();
        let c = precision_curve(&[0.0; 5], &px);
        assert!(c.iter().all(|v| v.1 == 1.0));
        assert_eq!(average(&c), 1.0);
        let c = precision_curve(&[f64::INFINITY; 5], &px);
        assert!(c.iter().all(|v| v.1 == 0.0));
    }

    #[test]
    fn iou_examples() {
        let a = unit_square(0.0);
        assert!((iou(&a, &a).0 - 1.0).abs() < 1e-12);
        assert_eq!(iou(&a, &unit_square(5.0)).0, 0.0);
        assert!((iou(&a, &unit_square(0.5)).0 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_flags_bow_tie() {
        let a = unit_square(0.0);
        let bow = CornerQuad([[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]]);
        let (v, flag) = iou(&a, &bow);
        assert!(flag);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clockwise_input_is_handled() {
        let a = unit_square(0.0);
        let mut cw = a;
        cw.0.reverse();
        assert!((iou(&a, &cw).0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn discrepancy_examples() {
        let h = Homography::translation(4.0, -2.0);
        assert_eq!(homography_discrepancy(&h, &h, 63.0, 10).unwrap(), 0.0);
        let shifted = h.compose(&Homography::translation(3.0, 0.0)).unwrap();
        assert!((homography_discrepancy(&shifted, &h, 63.0, 10).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn robustness_examples() {
        let r = robustness_histogram(&[1.0; 501], 0.2, 10);
        assert_eq!(r.runs, vec![501]);
        let alt: Vec<f64> = (0..10).map(|i| if i % 2 == 0 { 0.9 } else { 0.1 }).collect();
        let r = robustness_histogram(&alt, 0.2, 10);
        assert_eq!(r.runs, vec![1; 5]);
        assert_eq!(r.short_ratio, 1.0);
    }

    #[test]
    fn identity_script_reproduces_base() {
        let base = procedural_texture(64, 64, 1);
        let cfg = SynthConfig {
            frame_width: 64,
            frame_height: 64,
            object_half: 20.0,
            template_half: 20.0,
        };
        let seq = synthesize(&base, &MotionScript::identity(3), 0, &cfg).unwrap();
        assert!(seq.frames.iter().all(|f| f == &base));
    }

    #[test]
    fn translation_script_shifts_interior() {
        let base = procedural_texture(64, 64, 2);
        let cfg = SynthConfig {
            frame_width: 64,
            frame_height: 64,
            object_half: 20.0,
            template_half: 20.0,
        };
        let script = MotionScript::new(
            2,
            vec![
                Keyframe {
                    frame: 0,
                    params: TransformParams::IDENTITY,
                },
                Keyframe {
                    frame: 1,
                    params: TransformParams::translation(3.0, -2.0),
                },
            ],
        );
        let seq = synthesize(&base, &script, 0, &cfg).unwrap();
        for y in 10..50 {
            for x in 10..50 {
                assert_eq!(seq.frames[1].get(x + 3, y - 2), base.get(x, y));
            }
        }
    }

    #[test]
    fn challenges_leave_ground_truth_alone() {
        let base = procedural_texture(96, 96, 3);
        let cfg = SynthConfig {
            frame_width: 96,
            frame_height: 96,
            object_half: 20.0,
            template_half: 63.0,
        };
        let script = MotionScript::random(10, 5, &small_amplitude(), 4);
        let plain = synthesize(&base, &script, 1, &cfg).unwrap();
        let noisy = synthesize(
            &base,
            &script.clone().with_challenges(Challenges {
                blur_sigma: 1.0,
                noise_sigma: 0.02,
                ..Challenges::default()
            }),
            1,
            &cfg,
        )
        .unwrap();
        assert_eq!(plain.corners, noisy.corners);
        assert_eq!(plain.homographies, noisy.homographies);
        assert_ne!(plain.frames, noisy.frames);
        let again = synthesize(
            &base,
            &script.with_challenges(Challenges {
                blur_sigma: 1.0,
                noise_sigma: 0.02,
                ..Challenges::default()
            }),
            1,
            &cfg,
        )
        .unwrap();
        assert_eq!(noisy, again);
    }

    fn small_amplitude() -> ParamRanges {
        use crate::condnum::Interval;
        ParamRanges {
            t: Interval::symmetric(3.0),
            gamma: Interval::new(0.97, 1.03),
            theta: Interval::symmetric(0.05),
            k1: Interval::new(0.99, 1.01),
            k2: Interval::symmetric(0.002),
            nu: Interval::symmetric(1e-4),
        }
    }

    #[test]
    fn object_leaving_frame_is_rejected() {
        let base = procedural_texture(64, 64, 2);
        let cfg = SynthConfig {
            frame_width: 64,
            frame_height: 64,
            object_half: 20.0,
            template_half: 20.0,
        };
        let script = MotionScript::new(
            2,
            vec![
                Keyframe {
                    frame: 0,
                    params: TransformParams::IDENTITY,
                },
                Keyframe {
                    frame: 1,
                    params: TransformParams::translation(30.0, 0.0),
                },
            ],
        );
        assert!(synthesize(&base, &script, 0, &cfg).is_err());
    }

    #[test]
    fn ground_truth_text_round_trip() {
        let q = vec![CornerQuad::centered_box(3.5, 2.25).translated(10.0, 1.0)];
        let mut s = String::new();
        for x in &q {
            s.push_str(&format_quad(x));
            s.push('\n');
        }
        assert_eq!(parse_ground_truth(&s).unwrap(), q);
        assert!(parse_ground_truth("1 2 3").is_err());
        assert!(parse_ground_truth("1 2 3 4 5 6 7 x").is_err());
        assert_eq!(parse_ground_truth("1,2,3,4,5,6,7,8\n").unwrap().len(), 1);
    }
}
