//! Condition number of the corner-displacement map and the Monte-Carlo /
//! ray studies built on it.
//!
//! The displacement of a probe point `p` under the parameter vector `x` is
//! `dp(x) = H(x) p - p`. Its condition number is
//! `||J(x)||_F * ||x|| / |dp(x)|`, with the Jacobian taken by central finite
//! differences. For the "known subgroup" variants the known parameters are
//! held at their true values, only the remaining map is displaced, and the
//! Jacobian and parameter norm cover the free parameters only.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{build_homography, TransformParams};

/// Displacements below this magnitude are rejected rather than recorded.
pub const DP_EPS: f64 = 1e-8;

/// Which parameters are treated as already known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subgroup {
    /// All eight parameters free.
    Full8,
    /// Translation given; six free parameters.
    TranslationKnown,
    /// Whole similarity given; only the residual group is free.
    SimilarityKnown,
}

impl Subgroup {
    pub const ALL: [Subgroup; 3] = [
        Subgroup::Full8,
        Subgroup::TranslationKnown,
        Subgroup::SimilarityKnown,
    ];

    /// Indices into `TransformParams::to_array` of the free parameters.
    pub fn free_indices(self) -> &'static [usize] {
        match self {
            Subgroup::Full8 => &[0, 1, 2, 3, 4, 5, 6, 7],
            Subgroup::TranslationKnown => &[2, 3, 4, 5, 6, 7],
            Subgroup::SimilarityKnown => &[4, 5, 6, 7],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Subgroup::Full8 => "full8",
            Subgroup::TranslationKnown => "translation_known",
            Subgroup::SimilarityKnown => "similarity_known",
        }
    }

    /// The map left to estimate once the known parameters are factored out.
    fn remaining(self, x: &TransformParams) -> TransformParams {
        match self {
            Subgroup::Full8 => *x,
            Subgroup::TranslationKnown => TransformParams {
                t1: 0.0,
                t2: 0.0,
                ..*x
            },
            Subgroup::SimilarityKnown => x.residual().to_params(),
        }
    }
}

impl fmt::Display for Subgroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subgroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Subgroup::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown subgroup {s:?}")))
    }
}

/// Closed interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn symmetric(r: f64) -> Self {
        Self { lo: -r, hi: r }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Per-parameter sampling ranges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamRanges {
    pub t: Interval,
    pub gamma: Interval,
    pub theta: Interval,
    pub k1: Interval,
    pub k2: Interval,
    pub nu: Interval,
}

impl ParamRanges {
    /// The training/augmentation ranges exactly as printed, including
    /// `k1 in [-0.1, 0.1]`. Used by the conditioning study.
    pub fn conditioning() -> Self {
        Self {
            t: Interval::symmetric(32.0),
            gamma: Interval::new(1.0 / 1.38, 1.38),
            theta: Interval::symmetric(0.7),
            k1: Interval::symmetric(0.1),
            k2: Interval::symmetric(0.015),
            nu: Interval::symmetric(0.0015),
        }
    }

    /// Same ranges with `k1` read as a deviation around one, which keeps
    /// every draw on the canonical branch `k1 > 0`. Used wherever a draw has
    /// to be a plausible inter-frame motion.
    pub fn motion() -> Self {
        Self {
            k1: Interval::new(0.9, 1.1),
            ..Self::conditioning()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, iv) in [
            ("t", self.t),
            ("gamma", self.gamma),
            ("theta", self.theta),
            ("k1", self.k1),
            ("k2", self.k2),
            ("nu", self.nu),
        ] {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.lo > iv.hi {
                return Err(Error::InvalidParameter(format!(
                    "empty or non-finite range for {name}: [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        if self.gamma.lo <= 0.0 {
            return Err(Error::InvalidParameter("gamma range must be > 0".into()));
        }
        Ok(())
    }

    /// Uniform draw per parameter. Draws with `k1` exactly zero are retried.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> TransformParams {
        let mut u = |iv: Interval| {
            if iv.lo == iv.hi {
                iv.lo
            } else {
                rng.random_range(iv.lo..=iv.hi)
            }
        };
        let t1 = u(self.t);
        let t2 = u(self.t);
        let gamma = u(self.gamma);
        let theta = u(self.theta);
        let mut k1 = u(self.k1);
        while k1 == 0.0 {
            k1 = u(self.k1);
        }
        let k2 = u(self.k2);
        let nu1 = u(self.nu);
        let nu2 = u(self.nu);
        TransformParams {
            t1,
            t2,
            gamma,
            theta,
            k1,
            k2,
            nu1,
            nu2,
        }
    }

    pub fn contains(&self, x: &TransformParams) -> bool {
        self.t.contains(x.t1)
            && self.t.contains(x.t2)
            && self.gamma.contains(x.gamma)
            && self.theta.contains(x.theta)
            && self.k1.contains(x.k1)
            && self.k2.contains(x.k2)
            && self.nu.contains(x.nu1)
            && self.nu.contains(x.nu2)
    }

    /// The corner of the box reached by moving every parameter from identity
    /// toward its upper bound.
    pub fn upper_extreme(&self) -> TransformParams {
        TransformParams {
            t1: self.t.hi,
            t2: self.t.hi,
            gamma: self.gamma.hi,
            theta: self.theta.hi,
            k1: self.k1.hi,
            k2: self.k2.hi,
            nu1: self.nu.hi,
            nu2: self.nu.hi,
        }
    }
}

/// Corners of an `edge x edge` pixel box centered at the origin, in
/// pixel-center coordinates (half extent `(edge - 1) / 2`).
pub fn box_corners(edge: usize) -> [[f64; 2]; 4] {
    let h = (edge as f64 - 1.0) / 2.0;
    [[-h, -h], [h, -h], [h, h], [-h, h]]
}

/// `H(x) p - p`.
pub fn delta_p(x: &TransformParams, p: [f64; 2]) -> Result<[f64; 2]> {
    if !(p[0].is_finite() && p[1].is_finite()) {
        return Err(Error::NonFinite("probe point"));
    }
    let q = build_homography(x)?.apply(p[0], p[1])?;
    Ok([q[0] - p[0], q[1] - p[1]])
}

/// Displacement of the map that remains after the subgroup's known
/// parameters are substituted.
pub fn subgroup_delta_p(x: &TransformParams, p: [f64; 2], subgroup: Subgroup) -> Result<[f64; 2]> {
    delta_p(&subgroup.remaining(x), p)
}

fn fd_step(v: f64) -> f64 {
    (1e-6 * v.abs()).max(1e-6)
}

/// Central-difference Jacobian of the subgroup displacement; one `[dx, dy]`
/// column per free parameter.
pub fn jacobian(x: &TransformParams, p: [f64; 2], subgroup: Subgroup) -> Result<Vec<[f64; 2]>> {
    jacobian_with_scale(x, p, subgroup, 1.0)
}

/// As [`jacobian`], with every step multiplied by `step_scale`.
pub fn jacobian_with_scale(
    x: &TransformParams,
    p: [f64; 2],
    subgroup: Subgroup,
    step_scale: f64,
) -> Result<Vec<[f64; 2]>> {
    let base = x.to_array();
    subgroup
        .free_indices()
        .iter()
        .map(|&i| {
            let h = fd_step(base[i]) * step_scale;
            let mut plus = base;
            let mut minus = base;
            plus[i] += h;
            minus[i] -= h;
            let a = subgroup_delta_p(&TransformParams::from_array(plus), p, subgroup)?;
            let b = subgroup_delta_p(&TransformParams::from_array(minus), p, subgroup)?;
            let col = [(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)];
            if !(col[0].is_finite() && col[1].is_finite()) {
                return Err(Error::NonFinite("difference quotient"));
            }
            Ok(col)
        })
        .collect()
}

/// `||J||_F * ||x_free|| / |dp|`, rejecting samples with `|dp| < DP_EPS`.
pub fn condition_number(x: &TransformParams, p: [f64; 2], subgroup: Subgroup) -> Result<f64> {
    let dp = subgroup_delta_p(x, p, subgroup)?;
    let dp_norm = dp[0].hypot(dp[1]);
    if dp_norm < DP_EPS {
        return Err(Error::RejectedSample(dp_norm));
    }
    let j = jacobian(x, p, subgroup)?;
    let j_norm = j
        .iter()
        .map(|c| c[0] * c[0] + c[1] * c[1])
        .sum::<f64>()
        .sqrt();
    let arr = x.to_array();
    let x_norm = subgroup
        .free_indices()
        .iter()
        .map(|&i| arr[i] * arr[i])
        .sum::<f64>()
        .sqrt();
    Ok(j_norm * x_norm / dp_norm)
}

/// One evaluated (sample, probe) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CondSample {
    pub sample_index: usize,
    pub subgroup: Subgroup,
    pub x: TransformParams,
    pub corner_id: usize,
    pub corner: [f64; 2],
    pub cond: f64,
}

/// Histogram over `log10(cond)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Log10Histogram {
    pub bin_width: f64,
    /// `(bin_left, bin_right, count)`, in log10 units.
    pub bins: Vec<(f64, f64, usize)>,
}

impl Log10Histogram {
    pub fn build(values: &[f64], bin_width: f64) -> Self {
        let logs: Vec<f64> = values.iter().filter(|v| **v > 0.0).map(|v| v.log10()).collect();
        if logs.is_empty() {
            return Self {
                bin_width,
                bins: Vec::new(),
            };
        }
        let lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
        let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n_bins = (((hi - lo) / bin_width).floor() as usize + 1).max(1);
        let mut counts = vec![0usize; n_bins];
        for l in &logs {
            let idx = (((l - lo) / bin_width).floor() as usize).min(n_bins - 1);
            counts[idx] += 1;
        }
        let bins = counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                let left = lo + i as f64 * bin_width;
                (left, left + bin_width, c)
            })
            .collect();
        Self { bin_width, bins }
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.2).sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["bin_left", "bin_right", "count"])?;
        for (l, r, c) in &self.bins {
            wr.write_record([l.to_string(), r.to_string(), c.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Monte-Carlo study settings.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub ranges: ParamRanges,
    pub n_samples: usize,
    pub subgroup: Subgroup,
    pub seed: u64,
    pub probes: Vec<[f64; 2]>,
    /// 0 or 1 runs on the calling thread.
    pub workers: usize,
    pub bin_width: f64,
}

impl StudyConfig {
    pub fn new(n_samples: usize, subgroup: Subgroup, seed: u64) -> Self {
        Self {
            ranges: ParamRanges::conditioning(),
            n_samples,
            subgroup,
            seed,
            probes: box_corners(127).to_vec(),
            workers: 1,
            bin_width: 0.25,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub rows: Vec<CondSample>,
    pub rejected: usize,
    pub histogram: Log10Histogram,
}

impl StudyResult {
    pub fn max(&self) -> f64 {
        self.rows.iter().map(|r| r.cond).fold(0.0, f64::max)
    }

    /// Nearest-rank percentile, `q` in `[0, 100]`.
    pub fn percentile(&self, q: f64) -> f64 {
        let mut v: Vec<f64> = self.rows.iter().map(|r| r.cond).collect();
        if v.is_empty() {
            return f64::NAN;
        }
        v.sort_by(f64::total_cmp);
        let rank = ((q / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
        v[rank.min(v.len()) - 1]
    }

    pub fn write_rows_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["sample_index", "subgroup"];
        header.extend(TransformParams::NAMES);
        header.extend(["corner_id", "cond"]);
        wr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.sample_index.to_string(), r.subgroup.to_string()];
            rec.extend(r.x.to_array().iter().map(|v| v.to_string()));
            rec.push(r.corner_id.to_string());
            rec.push(r.cond.to_string());
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Parameter draw for sample `index`; independent of how samples are split
/// across workers.
pub fn sample_params(ranges: &ParamRanges, seed: u64, index: usize) -> TransformParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    ranges.sample(&mut rng)
}

fn evaluate_sample(cfg: &StudyConfig, index: usize) -> (Vec<CondSample>, usize) {
    let x = sample_params(&cfg.ranges, cfg.seed, index);
    let mut rows = Vec::with_capacity(cfg.probes.len());
    let mut rejected = 0;
    for (corner_id, &p) in cfg.probes.iter().enumerate() {
        match condition_number(&x, p, cfg.subgroup) {
            Ok(cond) => rows.push(CondSample {
                sample_index: index,
                subgroup: cfg.subgroup,
                x,
                corner_id,
                corner: p,
                cond,
            }),
            Err(_) => rejected += 1,
        }
    }
    (rows, rejected)
}

/// Samples `n_samples` parameter vectors and evaluates the condition number
/// at every probe. Output is ordered by sample index, then probe.
pub fn monte_carlo_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.ranges.validate()?;
    if cfg.n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
    }
    if cfg.probes.is_empty() {
        return Err(Error::InvalidParameter("no probe points".into()));
    }
    let per_sample: Vec<(Vec<CondSample>, usize)> = if cfg.workers <= 1 {
        (0..cfg.n_samples).map(|i| evaluate_sample(cfg, i)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            (0..cfg.n_samples)
                .into_par_iter()
                .map(|i| evaluate_sample(cfg, i))
                .collect()
        })
    };
    let mut rows = Vec::with_capacity(cfg.n_samples * cfg.probes.len());
    let mut rejected = 0;
    for (r, k) in per_sample {
        rows.extend(r);
        rejected += k;
    }
    let conds: Vec<f64> = rows.iter().map(|r| r.cond).collect();
    let histogram = Log10Histogram::build(&conds, cfg.bin_width);
    Ok(StudyResult {
        rows,
        rejected,
        histogram,
    })
}

/// Condition numbers at one ratio along the ray; `None` marks a rejected
/// sample. Entries follow `Subgroup::ALL`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPoint {
    pub ratio: f64,
    pub x: TransformParams,
    pub cond: [Option<f64>; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayStudy {
    pub points: Vec<RayPoint>,
    /// Per subgroup: fraction of consecutive accepted pairs that increase.
    pub increasing_fraction: [f64; 3],
}

impl RayStudy {
    pub fn endpoint(&self, subgroup: Subgroup) -> Option<f64> {
        let i = Subgroup::ALL.iter().position(|g| *g == subgroup)?;
        self.points.last().and_then(|p| p.cond[i])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["ratio".to_string()];
        header.extend(Subgroup::ALL.iter().map(|g| g.name().to_string()));
        wr.write_record(&header)?;
        for p in &self.points {
            let mut rec = vec![p.ratio.to_string()];
            rec.extend(
                p.cond
                    .iter()
                    .map(|c| c.map(|v| v.to_string()).unwrap_or_else(|| "rejected".into())),
            );
            wr.write_record(&rec)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Interpolates every parameter from identity toward `endpoint` and reports,
/// per ratio, the largest condition number over the probes.
pub fn ray_study(endpoint: &TransformParams, steps: usize, probes: &[[f64; 2]]) -> Result<RayStudy> {
    if steps < 2 {
        return Err(Error::InvalidParameter("steps must be >= 2".into()));
    }
    let id = TransformParams::IDENTITY.to_array();
    let end = endpoint.to_array();
    let mut points = Vec::with_capacity(steps);
    for s in 0..steps {
        let ratio = s as f64 / (steps - 1) as f64;
        let mut a = [0.0; 8];
        for i in 0..8 {
            a[i] = id[i] + ratio * (end[i] - id[i]);
        }
        let x = TransformParams::from_array(a);
        let mut cond = [None; 3];
        for (slot, g) in cond.iter_mut().zip(Subgroup::ALL) {
            let mut best: Option<f64> = None;
            for &p in probes {
                match condition_number(&x, p, g) {
                    Ok(c) => best = Some(best.map_or(c, |b| b.max(c))),
                    Err(Error::RejectedSample(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            *slot = best;
        }
        points.push(RayPoint { ratio, x, cond });
    }
    let mut increasing_fraction = [0.0; 3];
    for (gi, frac) in increasing_fraction.iter_mut().enumerate() {
        let vals: Vec<f64> = points.iter().filter_map(|p| p.cond[gi]).collect();
        let pairs = vals.len().saturating_sub(1);
        if pairs > 0 {
            let up = vals.windows(2).filter(|w| w[1] >= w[0]).count();
            *frac = up as f64 / pairs as f64;
        }
    }
    Ok(RayStudy {
        points,
        increasing_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{transport_corners, CornerQuad};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_has_no_displacement() {
        let d = delta_p(&TransformParams::IDENTITY, [13.0, -40.0]).unwrap();
        assert_eq!(d, [0.0, 0.0]);
    }

    #[test]
    fn translation_displacement() {
        let d = delta_p(&TransformParams::translation(5.0, -3.0), [7.0, 9.0]).unwrap();
        assert_eq!(d, [5.0, -3.0]);
    }

    #[test]
    fn delta_p_matches_corner_transport() {
        let x = TransformParams {
            t1: 11.0,
            t2: -20.0,
            gamma: 1.3,
            theta: -0.4,
            k1: 1.07,
            k2: -0.01,
            nu1: 0.0012,
            nu2: -0.0009,
        };
        let p = [64.0, 64.0];
        let d = delta_p(&x, p).unwrap();
        let h = build_homography(&x).unwrap();
        let q = transport_corners(&h, &CornerQuad([p; 4])).unwrap();
        assert_abs_diff_eq!(d[0], q.0[0][0] - p[0], epsilon = 1e-12);
        assert_abs_diff_eq!(d[1], q.0[0][1] - p[1], epsilon = 1e-12);
    }

    #[test]
    fn translation_columns_at_identity() {
        let j = jacobian(&TransformParams::IDENTITY, [30.0, -12.0], Subgroup::Full8).unwrap();
        assert_abs_diff_eq!(j[0][0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[0][1], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[1][0], 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(j[1][1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rotation_column_at_identity() {
        let r = 50.0;
        let j = jacobian(&TransformParams::IDENTITY, [r, 0.0], Subgroup::Full8).unwrap();
        assert_abs_diff_eq!(j[3][0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(j[3][1], r, epsilon = 1e-6);
    }

    #[test]
    fn masked_jacobian_has_fewer_columns() {
        let x = TransformParams::IDENTITY;
        assert_eq!(jacobian(&x, [1.0, 1.0], Subgroup::TranslationKnown).unwrap().len(), 6);
        assert_eq!(jacobian(&x, [1.0, 1.0], Subgroup::SimilarityKnown).unwrap().len(), 4);
    }

    #[test]
    fn zero_displacement_is_rejected() {
        let err = condition_number(&TransformParams::IDENTITY, [5.0, 5.0], Subgroup::Full8);
        assert!(matches!(err, Err(Error::RejectedSample(_))));
    }

    #[test]
    fn delta_p_is_linear_in_translation() {
        let p = [17.0, -23.0];
        for s in [0.5, 2.0, -3.0] {
            let d1 = delta_p(&TransformParams::translation(4.0, 1.5), p).unwrap();
            let ds = delta_p(&TransformParams::translation(4.0 * s, 1.5 * s), p).unwrap();
            assert_eq!([d1[0] * s, d1[1] * s], ds);
        }
    }

    #[test]
    fn subgroup_names_round_trip() {
        for g in Subgroup::ALL {
            assert_eq!(g.name().parse::<Subgroup>().unwrap(), g);
        }
        assert!("nope".parse::<Subgroup>().is_err());
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Log10Histogram::build(&[1.0, 9.0, 10.0, 1e3, 5e3], 0.5);
        assert_eq!(h.total(), 5);
        assert_eq!(h.bins[0].0, 0.0);
    }

    #[test]
    fn empty_ranges_are_rejected() {
        let mut cfg = StudyConfig::new(10, Subgroup::Full8, 1);
        cfg.ranges.t = Interval::new(1.0, -1.0);
        assert!(monte_carlo_study(&cfg).is_err());
        let cfg = StudyConfig::new(0, Subgroup::Full8, 1);
        assert!(monte_carlo_study(&cfg).is_err());
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mut a = StudyConfig::new(200, Subgroup::TranslationKnown, 9);
        let single = monte_carlo_study(&a).unwrap();
        a.workers = 4;
        let multi = monte_carlo_study(&a).unwrap();
        assert_eq!(single.rows, multi.rows);
        assert_eq!(single.histogram, multi.histogram);
    }

    #[test]
    fn ray_origin_is_rejected() {
        let ray = ray_study(
            &ParamRanges::motion().upper_extreme(),
            5,
            &box_corners(127),
        )
        .unwrap();
        assert_eq!(ray.points[0].cond, [None, None, None]);
        assert!(ray.points[4].cond.iter().all(|c| c.is_some()));
    }
}
