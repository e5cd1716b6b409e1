//! Similarity estimation: translation from a strided correlation response
//! map with per-cell subpixel offsets, then scale and rotation from
//! correlation in the equivariant warped domain.
//!
//! Inputs are "feature rasters"; with plain intensities the correlation is
//! zero-normalized cross-correlation (ZNCC).

use crate::error::{Error, Result};
use crate::geometry::{build_homography, wrap_angle, Homography, SimilarityParams};
use crate::raster::{pad_for_correlation, recover_scale_rotation, rsew_warp_sized, scale_to_shift, warp_centered, Raster};
use crate::xcorr::{parabolic_offset, zncc_valid, ScoreGrid};

/// Scores on a grid of stride-`stride` cells with per-cell subpixel offsets.
///
/// Cell `(col, row)` stands for the displacement
/// `stride * (col - center[0], row - center[1])` of the template center
/// from the search center.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMap {
    rows: usize,
    cols: usize,
    stride: usize,
    scores: Vec<f64>,
    offsets: Vec<[f64; 2]>,
}

impl ResponseMap {
    pub fn new(
        rows: usize,
        cols: usize,
        stride: usize,
        scores: Vec<f64>,
        offsets: Vec<[f64; 2]>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 || stride == 0 {
            return Err(Error::Shape("response map must be non-empty".into()));
        }
        if scores.len() != rows * cols || offsets.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} response map needs {} scores and offsets",
                rows * cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            stride,
            scores,
            offsets,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn score(&self, col: usize, row: usize) -> f64 {
        self.scores[row * self.cols + col]
    }

    pub fn offset(&self, col: usize, row: usize) -> [f64; 2] {
        self.offsets[row * self.cols + col]
    }

    /// Cell holding the origin (zero displacement).
    pub fn center(&self) -> [f64; 2] {
        [
            (self.cols as f64 - 1.0) / 2.0,
            (self.rows as f64 - 1.0) / 2.0,
        ]
    }

    /// Highest-scoring cell `(col, row)`; ties go to the smallest row, then
    /// the smallest column.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = (0, 0);
        let mut best_v = f64::NEG_INFINITY;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = self.score(c, r);
                if v > best_v {
                    best_v = v;
                    best = (c, r);
                }
            }
        }
        best
    }
}

/// Index of the cell a placement offset (relative to the center) falls in.
fn cell_of(rel: f64, stride: usize) -> i64 {
    (rel / stride as f64).round() as i64
}

fn subpixel(grid: &ScoreGrid, x: usize, y: usize) -> [f64; 2] {
    let v = grid.get(x, y);
    let dx = if x > 0 && x + 1 < grid.width {
        parabolic_offset(grid.get(x - 1, y), v, grid.get(x + 1, y))
    } else {
        0.0
    };
    let dy = if y > 0 && y + 1 < grid.height {
        parabolic_offset(grid.get(x, y - 1), v, grid.get(x, y + 1))
    } else {
        0.0
    };
    [dx, dy]
}

/// ZNCC of `template` at every placement inside `search`, pooled into cells
/// of `stride` pixels. Each cell keeps its best placement's score and the
/// subpixel displacement of that placement from the cell's grid location.
pub fn correlate(template: &Raster, search: &Raster, stride: usize) -> Result<ResponseMap> {
    if stride == 0 {
        return Err(Error::InvalidParameter("stride must be >= 1".into()));
    }
    let grid = zncc_valid(template, search)?;
    let pc = [
        (grid.width as f64 - 1.0) / 2.0,
        (grid.height as f64 - 1.0) / 2.0,
    ];
    let kx = cell_of(pc[0], stride);
    let ky = cell_of(pc[1], stride);
    let cols = (2 * kx + 1) as usize;
    let rows = (2 * ky + 1) as usize;
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; rows * cols];
    for dy in 0..grid.height {
        let cy = (cell_of(dy as f64 - pc[1], stride) + ky).clamp(0, 2 * ky) as usize;
        for dx in 0..grid.width {
            let cx = (cell_of(dx as f64 - pc[0], stride) + kx).clamp(0, 2 * kx) as usize;
            let v = grid.get(dx, dy);
            let slot = &mut best[cy * cols + cx];
            // row-major scan: strict > keeps the smallest row, then column
            if slot.is_none_or(|(b, _, _)| v > b) {
                *slot = Some((v, dx, dy));
            }
        }
    }
    let mut scores = vec![-1.0; rows * cols];
    let mut offsets = vec![[0.0; 2]; rows * cols];
    for cy in 0..rows {
        for cx in 0..cols {
            let i = cy * cols + cx;
            if let Some((v, dx, dy)) = best[i] {
                let sp = subpixel(&grid, dx, dy);
                let gx = stride as f64 * (cx as f64 - kx as f64);
                let gy = stride as f64 * (cy as f64 - ky as f64);
                scores[i] = v;
                offsets[i] = [dx as f64 - pc[0] + sp[0] - gx, dy as f64 - pc[1] + sp[1] - gy];
            }
        }
    }
    ResponseMap::new(rows, cols, stride, scores, offsets)
}

/// `t = offset(argmax) + stride * (argmax - center)`, with the origin at the
/// search-image center. Returns the translation and the peak score.
pub fn estimate_translation(map: &ResponseMap) -> ([f64; 2], f64) {
    let (c, r) = map.argmax();
    let center = map.center();
    let off = map.offset(c, r);
    let s = map.stride as f64;
    (
        [
            off[0] + s * (c as f64 - center[0]),
            off[1] + s * (r as f64 - center[1]),
        ],
        map.score(c, r),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Cell stride of the translation response map.
    pub stride: usize,
    /// Edge of the equivariant grid; `None` derives it from the template so
    /// the largest sampled radius reaches the template border.
    pub rsew_size: Option<usize>,
    /// Largest scale change searched for in either direction.
    pub max_scale: f64,
    /// Translation re-estimates on the scale/rotation-compensated search.
    pub refine_passes: usize,
    /// Rotated copies of the template tried by the coarse translation
    /// search, spread evenly over `[-max_rotation, max_rotation]`. With one
    /// copy the unrotated full template is used.
    pub rotation_bank: usize,
    pub max_rotation: f64,
    /// Scaled copies per rotation, spread log-evenly over
    /// `[1 / bank_scale, bank_scale]`.
    pub scale_bank: usize,
    pub bank_scale: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            stride: 8,
            rsew_size: None,
            max_scale: 1.5,
            refine_passes: 1,
            rotation_bank: 7,
            max_rotation: 0.7,
            scale_bank: 3,
            bank_scale: 1.25,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        if !(self.max_scale > 1.0) {
            return Err(Error::InvalidParameter("max_scale must exceed 1".into()));
        }
        if self.rotation_bank == 0 {
            return Err(Error::InvalidParameter("rotation_bank must be >= 1".into()));
        }
        if self.scale_bank == 0 || !(self.bank_scale >= 1.0) {
            return Err(Error::InvalidParameter("scale bank needs at least one copy and bank_scale >= 1".into()));
        }
        if !(self.max_rotation >= 0.0 && self.max_rotation <= std::f64::consts::PI) {
            return Err(Error::InvalidParameter("max_rotation must lie in [0, pi]".into()));
        }
        Ok(())
    }

    fn bank(&self) -> Vec<(f64, f64)> {
        let spread = |k: usize, lo: f64, hi: f64| -> Vec<f64> {
            if k == 1 {
                return vec![(lo + hi) / 2.0];
            }
            (0..k).map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64).collect()
        };
        let ls = self.bank_scale.ln();
        let mut out = Vec::new();
        for g in spread(self.scale_bank, -ls, ls) {
            for a in spread(self.rotation_bank, -self.max_rotation, self.max_rotation) {
                out.push((g.exp(), a));
            }
        }
        out
    }

    fn grid_size(&self, template: &Raster) -> usize {
        self.rsew_size.unwrap_or_else(|| {
            let edge = template.width().min(template.height());
            let n = 2 * edge.saturating_sub(1);
            n - n % 2
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRotation {
    pub gamma: f64,
    pub theta: f64,
    pub confidence: f64,
    /// Peak location `(mu1, mu2)` in the warped domain.
    pub mu: [f64; 2],
    pub n: usize,
}

/// Scale and rotation of the object centered at `t_hat` in `search`
/// (centered coordinates) relative to the object centered in `template`.
pub fn estimate_scale_rotation(
    template: &Raster,
    search: &Raster,
    t_hat: [f64; 2],
    cfg: &SimConfig,
) -> Result<ScaleRotation> {
    let n = cfg.grid_size(template);
    if n < 8 {
        return Err(Error::Shape(format!("template too small for equivariant grid ({n})")));
    }
    let tw = rsew_warp_sized(template, [0.0, 0.0], n)?;
    let sw = rsew_warp_sized(search, t_hat, n)?;
    if sw.variance() < 1e-12 {
        return Err(Error::ZeroVariance("warped search patch"));
    }
    let margin = (scale_to_shift(cfg.max_scale, n).abs().ceil() as usize + 2).min(n / 2 - 2);
    let inner = n - 2 * margin;
    let tcrop = Raster::from_fn(inner, n, |x, y| tw.get(x + margin, y));
    let padded = pad_for_correlation(&sw, 0)?;
    let grid = zncc_valid(&tcrop, &padded).map_err(|e| match e {
        Error::ZeroVariance(_) => Error::ZeroVariance("warped template patch"),
        e => e,
    })?;
    // one revolution of angle: rows n/4 ..= 3n/4
    let (r_lo, r_hi) = (n / 4, 3 * n / 4);
    let mut best = (0usize, r_lo);
    let mut best_v = f64::NEG_INFINITY;
    for r in r_lo..=r_hi {
        for c in 0..grid.width {
            let v = grid.get(c, r);
            if v > best_v {
                best_v = v;
                best = (c, r);
            }
        }
    }
    let sp = subpixel(&grid, best.0, best.1);
    let mu = [
        best.0 as f64 - margin as f64 + sp[0],
        best.1 as f64 - (n / 2) as f64 + sp[1],
    ];
    let (gamma, theta) = recover_scale_rotation(mu, n);
    Ok(ScaleRotation {
        gamma,
        theta,
        confidence: best_v,
        mu,
        n,
    })
}

/// Translation, scale and rotation of the template's object in the search
/// image, with confidence the smaller of the two stages' peak scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityEstimate {
    pub t: [f64; 2],
    pub gamma: f64,
    pub theta: f64,
    pub confidence: f64,
    pub translation_confidence: f64,
    pub scale_rotation_confidence: f64,
}

impl SimilarityEstimate {
    pub fn params(&self) -> SimilarityParams {
        SimilarityParams {
            t1: self.t[0],
            t2: self.t[1],
            gamma: self.gamma,
            theta: self.theta,
        }
    }

    /// Maps template-centered coordinates to search-centered coordinates.
    pub fn homography(&self) -> Result<Homography> {
        build_homography(&self.params().to_params())
    }
}

/// Coarse translation: the best peak over rotated and scaled template
/// copies. Each copy is cut to the square inscribed in the template's disk
/// (shrunk along with the copy) so it never reads outside the template.
fn coarse_translation(template: &Raster, search: &Raster, cfg: &SimConfig) -> Result<([f64; 2], f64)> {
    let bank = cfg.bank();
    if bank.len() == 1 && bank[0] == (1.0, 0.0) {
        return Ok(estimate_translation(&correlate(template, search, cfg.stride)?));
    }
    let edge = template.width().min(template.height());
    let mut best = ([0.0; 2], f64::NEG_INFINITY);
    for (gamma, theta) in bank {
        let mut inner = (edge as f64 * gamma.min(1.0) / std::f64::consts::SQRT_2).floor() as usize;
        if inner % 2 != edge % 2 {
            inner -= 1;
        }
        let r = build_homography(
            &SimilarityParams {
                t1: 0.0,
                t2: 0.0,
                gamma,
                theta,
            }
            .to_params(),
        )?;
        let copy = warp_centered(template, &r.inverse()?, inner, inner)?;
        let found = estimate_translation(&correlate(&copy, search, cfg.stride)?);
        if found.1 > best.1 {
            best = found;
        }
    }
    Ok(best)
}

/// Translation first, then scale/rotation about the recovered center.
/// Each refinement pass re-estimates the translation on the search image
/// resampled by the current similarity, then scale/rotation again.
pub fn estimate_similarity(template: &Raster, search: &Raster, cfg: &SimConfig) -> Result<SimilarityEstimate> {
    cfg.validate()?;
    let (mut t, mut t_conf) = coarse_translation(template, search, cfg)?;
    let mut sr = estimate_scale_rotation(template, search, t, cfg)?;
    for _ in 0..cfg.refine_passes {
        let h = build_homography(
            &SimilarityParams {
                t1: t[0],
                t2: t[1],
                gamma: sr.gamma,
                theta: sr.theta,
            }
            .to_params(),
        )?;
        let aligned = warp_centered(search, &h, search.width(), search.height())?;
        let map = correlate(template, &aligned, 1)?;
        let (d, conf) = estimate_translation(&map);
        let (sin, cos) = sr.theta.sin_cos();
        t = [
            t[0] + sr.gamma * (cos * d[0] - sin * d[1]),
            t[1] + sr.gamma * (sin * d[0] + cos * d[1]),
        ];
        t_conf = conf;
        sr = estimate_scale_rotation(template, search, t, cfg)?;
    }
    Ok(SimilarityEstimate {
        t,
        gamma: sr.gamma,
        theta: wrap_angle(sr.theta),
        confidence: t_conf.min(sr.confidence),
        translation_confidence: t_conf,
        scale_rotation_confidence: sr.confidence,
    })
}
