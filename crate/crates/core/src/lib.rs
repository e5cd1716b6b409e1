//! Planar object tracking by homography decomposition.
//!
//! A homography is factored into a similarity group (translation, isotropic
//! scale, rotation) and a residual group (anisotropic scale, shear,
//! perspective). The similarity part is estimated first, by correlation in
//! the image domain and then in a rotation-scale equivariant warped domain;
//! the residual part is refined photometrically afterwards. Per-frame
//! estimates are composed into a cumulative homography.

pub mod bench;
pub mod condnum;
pub mod config;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod pgm;
pub mod raster;
pub mod resest;
pub mod simest;
pub mod tracker;
mod xcorr;

pub use error::{Error, Result};
pub use geometry::{CornerQuad, Homography, ResidualParams, SimilarityParams, TransformParams};
pub use raster::Raster;
