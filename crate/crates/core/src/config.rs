//! Flat key-value run configuration. Every key is optional; missing keys
//! take the defaults below and unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;

use crate::condnum::{Interval, ParamRanges};
use crate::error::{Error, Result};
use crate::resest::RefineConfig;
use crate::simest::SimConfig;
use crate::tracker::TrackerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub workers: usize,

    pub t_range: f64,
    pub gamma_max: f64,
    pub theta_range: f64,
    /// Half width of the `k1` interval as sampled by the conditioning study.
    pub k1_range: f64,
    pub k2_range: f64,
    pub nu_range: f64,

    pub stride: usize,
    pub max_scale: f64,
    pub refine_passes: usize,
    pub rotation_bank: usize,
    pub max_rotation: f64,
    pub scale_bank: usize,
    pub bank_scale: f64,

    pub lost_threshold: f64,
    pub freeze_on_lost: bool,
    pub residual_margin: usize,
    pub enable_similarity: bool,
    pub enable_residual: bool,

    pub max_iters: usize,
    pub tolerance: f64,
    pub lambda0: f64,
    pub translation_slack: f64,
    pub smoothing: Vec<f64>,
    pub photometric: bool,
    pub min_correlation: f64,

    pub bin_width: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let r = ParamRanges::conditioning();
        let sim = SimConfig::default();
        let refine = RefineConfig::default();
        let trk = TrackerConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            seed: None,
            workers: 1,
            t_range: r.t.hi,
            gamma_max: r.gamma.hi,
            theta_range: r.theta.hi,
            k1_range: r.k1.hi,
            k2_range: r.k2.hi,
            nu_range: r.nu.hi,
            stride: sim.stride,
            max_scale: sim.max_scale,
            refine_passes: sim.refine_passes,
            rotation_bank: sim.rotation_bank,
            max_rotation: sim.max_rotation,
            scale_bank: sim.scale_bank,
            bank_scale: sim.bank_scale,
            lost_threshold: trk.lost_threshold,
            freeze_on_lost: trk.freeze_on_lost,
            residual_margin: trk.residual_margin,
            enable_similarity: true,
            enable_residual: true,
            max_iters: refine.max_iters,
            tolerance: refine.tolerance,
            lambda0: refine.lambda0,
            translation_slack: refine.translation_slack,
            smoothing: refine.smoothing,
            photometric: refine.photometric,
            min_correlation: refine.min_correlation,
            bin_width: 0.25,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        if !(self.gamma_max >= 1.0) {
            return Err(Error::Config("gamma_max must be at least 1".into()));
        }
        if !(self.bin_width > 0.0) {
            return Err(Error::Config("bin_width must be positive".into()));
        }
        if !(self.k1_range > 0.0 && self.k1_range < 1.0) {
            return Err(Error::Config("k1_range must lie in (0, 1)".into()));
        }
        self.conditioning_ranges().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.tracker().validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Ranges sampled by the conditioning study (`k1` symmetric about zero).
    pub fn conditioning_ranges(&self) -> ParamRanges {
        ParamRanges {
            t: Interval::symmetric(self.t_range),
            gamma: Interval::new(1.0 / self.gamma_max, self.gamma_max),
            theta: Interval::symmetric(self.theta_range),
            k1: Interval::symmetric(self.k1_range),
            k2: Interval::symmetric(self.k2_range),
            nu: Interval::symmetric(self.nu_range),
        }
    }

    /// Inter-frame motion ranges (`k1` about one).
    pub fn motion_ranges(&self) -> ParamRanges {
        ParamRanges {
            k1: Interval::new(1.0 - self.k1_range, 1.0 + self.k1_range),
            ..self.conditioning_ranges()
        }
    }

    pub fn sim(&self) -> SimConfig {
        SimConfig {
            stride: self.stride,
            max_scale: self.max_scale,
            refine_passes: self.refine_passes,
            rotation_bank: self.rotation_bank,
            max_rotation: self.max_rotation,
            scale_bank: self.scale_bank,
            bank_scale: self.bank_scale,
            ..SimConfig::default()
        }
    }

    pub fn refine(&self) -> RefineConfig {
        let m = self.motion_ranges();
        RefineConfig {
            max_iters: self.max_iters,
            tolerance: self.tolerance,
            lambda0: self.lambda0,
            k1: m.k1,
            k2: m.k2,
            nu: m.nu,
            translation_slack: self.translation_slack,
            smoothing: self.smoothing.clone(),
            photometric: self.photometric,
            min_correlation: self.min_correlation,
            ..RefineConfig::default()
        }
    }

    pub fn tracker(&self) -> TrackerConfig {
        TrackerConfig {
            lost_threshold: self.lost_threshold,
            freeze_on_lost: self.freeze_on_lost,
            sim: self.sim(),
            refine: self.refine(),
            residual_margin: self.residual_margin,
            motion: self.motion_ranges(),
            enable_similarity: self.enable_similarity,
            enable_residual: self.enable_residual,
            ..TrackerConfig::default()
        }
    }
}
