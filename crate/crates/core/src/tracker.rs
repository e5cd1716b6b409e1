//! Compositional planar tracker: each frame is resampled into the template's
//! coordinate frame by the accumulated homography, the remaining motion is
//! estimated in two stages and multiplied onto the accumulator.

use crate::condnum::ParamRanges;
use crate::error::{Error, Result};
use crate::geometry::{build_homography, transport_corners, CornerQuad, Homography, SimilarityParams};
use crate::raster::{centering, warp_homography, Boundary, Raster};
use crate::resest::{dlt_from_offsets, refine_residual, CornerOffsets, RefineConfig};
use crate::simest::{estimate_similarity, SimConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub template_size: usize,
    pub search_size: usize,
    /// Frames whose confidence falls below this are flagged lost. The
    /// confidence is the similarity peak score, lowered to the correlation
    /// of the refined alignment when the residual stage runs.
    pub lost_threshold: f64,
    /// Keep the accumulated homography unchanged on lost frames; otherwise
    /// the low-confidence estimate is applied and only flagged.
    pub freeze_on_lost: bool,
    pub sim: SimConfig,
    pub refine: RefineConfig,
    /// Extra border around the template-sized patch handed to refinement.
    pub residual_margin: usize,
    /// Accepted similarity estimates are clamped into these ranges.
    pub motion: ParamRanges,
    pub enable_similarity: bool,
    pub enable_residual: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            template_size: 127,
            search_size: 255,
            lost_threshold: 0.3,
            freeze_on_lost: true,
            sim: SimConfig::default(),
            refine: RefineConfig::default(),
            residual_margin: 16,
            motion: ParamRanges::motion(),
            enable_similarity: true,
            enable_residual: true,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.template_size < 16 || self.template_size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "template size must be odd and at least 16, got {}",
                self.template_size
            )));
        }
        if self.search_size < self.template_size {
            return Err(Error::InvalidParameter("search size smaller than template".into()));
        }
        if !self.lost_threshold.is_finite() {
            return Err(Error::NonFinite("lost threshold"));
        }
        self.sim.validate()?;
        self.motion.validate()?;
        self.refine.validate()
    }
}

/// What happened on one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub similarity: Homography,
    pub residual: Homography,
    pub confidence: f64,
    pub lost: bool,
    /// The similarity estimate was clamped into the motion ranges.
    pub clamped: bool,
    /// Refinement failed and the residual was replaced by identity.
    pub residual_failed: bool,
}

#[derive(Debug, Clone)]
pub struct TrackState {
    h_cum: Homography,
    template: Raster,
    p_t: CornerQuad,
    frame_size: (usize, usize),
    pub confidence: f64,
    pub lost: bool,
    pub history: Vec<FrameRecord>,
    cfg: TrackerConfig,
}

/// Per-frame tracker output.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackOutput {
    pub corners: CornerQuad,
    pub homography: Homography,
    pub confidence: f64,
    pub lost: bool,
}

fn clamp_similarity(s: SimilarityParams, r: &ParamRanges) -> (SimilarityParams, bool) {
    let c = SimilarityParams {
        t1: r.t.clamp(s.t1),
        t2: r.t.clamp(s.t2),
        gamma: r.gamma.clamp(s.gamma),
        theta: r.theta.clamp(s.theta),
    };
    (c, c != s)
}

impl TrackState {
    /// Rectifies the object bounded by `p0` in `frame0` into the template.
    pub fn init(frame0: &Raster, p0: &CornerQuad, cfg: TrackerConfig) -> Result<Self> {
        cfg.validate()?;
        p0.check_non_degenerate()?;
        let (w, h) = (frame0.width() as f64, frame0.height() as f64);
        if p0.0.iter().any(|c| c[0] < 0.0 || c[1] < 0.0 || c[0] > w - 1.0 || c[1] > h - 1.0) {
            return Err(Error::InvalidParameter("initial quad lies outside the frame".into()));
        }
        let half = (cfg.template_size - 1) as f64 / 2.0;
        let p_t = CornerQuad::centered_box(half, half);
        let h0 = dlt_from_offsets(&p_t, &CornerOffsets::between(&p_t, p0))?;
        let template = Self::rectify(frame0, &h0, cfg.template_size)?;
        Ok(Self {
            h_cum: h0,
            template,
            p_t,
            frame_size: (frame0.width(), frame0.height()),
            confidence: 1.0,
            lost: false,
            history: Vec::new(),
            cfg,
        })
    }

    /// `size x size` patch whose centered pixel `q` shows `frame(h q)`.
    pub fn rectify(frame: &Raster, h: &Homography, size: usize) -> Result<Raster> {
        let m = h.compose(&centering(size, size).inverse()?)?;
        warp_homography(frame, &m, size, size, Boundary::Zero)
    }

    pub fn homography(&self) -> &Homography {
        &self.h_cum
    }

    pub fn template(&self) -> &Raster {
        &self.template
    }

    pub fn template_quad(&self) -> &CornerQuad {
        &self.p_t
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn corners(&self) -> Result<CornerQuad> {
        transport_corners(&self.h_cum, &self.p_t)
    }

    fn reject(&mut self, confidence: f64) -> Result<CornerQuad> {
        self.lost = true;
        self.confidence = confidence;
        self.history.push(FrameRecord {
            similarity: Homography::identity(),
            residual: Homography::identity(),
            confidence,
            lost: true,
            clamped: false,
            residual_failed: false,
        });
        self.corners()
    }

    /// Tracks into `frame` and returns the predicted corners.
    pub fn step(&mut self, frame: &Raster) -> Result<CornerQuad> {
        if (frame.width(), frame.height()) != self.frame_size {
            return Err(Error::Shape(format!(
                "frame {}x{} differs from the initial {}x{}",
                frame.width(),
                frame.height(),
                self.frame_size.0,
                self.frame_size.1
            )));
        }
        let cfg = self.cfg.clone();
        let (mut hs, mut confidence, mut clamped) = (Homography::identity(), 1.0, false);
        let mut low_confidence = false;
        if cfg.enable_similarity {
            let search = Self::rectify(frame, &self.h_cum, cfg.search_size)?;
            let est = match estimate_similarity(&self.template, &search, &cfg.sim) {
                Ok(e) => e,
                Err(_) => return self.reject(0.0),
            };
            confidence = est.confidence;
            if !(confidence >= cfg.lost_threshold) {
                if cfg.freeze_on_lost {
                    return self.reject(confidence);
                }
                low_confidence = true;
            }
            let (s, c) = clamp_similarity(est.params(), &cfg.motion);
            clamped = c;
            hs = build_homography(&s.to_params())?;
        }
        let mut hr = Homography::identity();
        let mut residual_failed = false;
        if cfg.enable_residual {
            let base = self.h_cum.compose(&hs)?;
            let size = cfg.template_size + 2 * cfg.residual_margin;
            let patch = Self::rectify(frame, &base, size)?;
            match refine_residual(&self.template, &patch, &cfg.refine) {
                Ok(r) => {
                    confidence = confidence.min(r.correlation);
                    if r.lost {
                        residual_failed = true;
                    } else {
                        hr = r.homography;
                    }
                }
                Err(_) => {
                    residual_failed = true;
                    confidence = 0.0;
                }
            }
            if !(confidence >= cfg.lost_threshold) {
                if cfg.freeze_on_lost {
                    return self.reject(confidence);
                }
                low_confidence = true;
            }
        }
        let next = match self.h_cum.compose(&hs).and_then(|m| m.compose(&hr)) {
            Ok(m) => m,
            Err(_) => return self.reject(confidence),
        };
        if transport_corners(&next, &self.p_t).is_err() {
            return self.reject(confidence);
        }
        self.h_cum = next;
        self.lost = low_confidence;
        self.confidence = confidence;
        self.history.push(FrameRecord {
            similarity: hs,
            residual: hr,
            confidence,
            lost: low_confidence,
            clamped,
            residual_failed,
        });
        self.corners()
    }

    fn step_output(&mut self, frame: &Raster) -> Result<TrackOutput> {
        let corners = self.step(frame)?;
        Ok(TrackOutput {
            corners,
            homography: self.h_cum,
            confidence: self.confidence,
            lost: self.lost,
        })
    }
}

/// Tracks through `frames` starting from `p0` on the first frame. The first
/// output is the initialization itself.
pub fn run_sequence(frames: &[Raster], p0: &CornerQuad, cfg: &TrackerConfig) -> Result<Vec<TrackOutput>> {
    let Some(first) = frames.first() else {
        return Err(Error::InvalidParameter("empty frame sequence".into()));
    };
    let mut state = TrackState::init(first, p0, cfg.clone())?;
    let mut out = Vec::with_capacity(frames.len());
    out.push(TrackOutput {
        corners: state.corners()?,
        homography: state.h_cum,
        confidence: 1.0,
        lost: false,
    });
    for frame in &frames[1..] {
        out.push(state.step_output(frame)?);
    }
    Ok(out)
}
