//! Homography construction from the eight-parameter vector, decomposition into
//! similarity and residual factors, composition and corner transport.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Default lower bound on `|det|` for a homography to count as invertible.
pub const DET_EPS: f64 = 1e-12;
/// Default lower bound on the homogeneous coordinate of a transported point.
pub const W_EPS: f64 = 1e-9;

/// The eight parameters `[t1, t2, gamma, theta, k1, k2, nu1, nu2]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformParams {
    pub t1: f64,
    pub t2: f64,
    pub gamma: f64,
    pub theta: f64,
    pub k1: f64,
    pub k2: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl TransformParams {
    pub const IDENTITY: TransformParams = TransformParams {
        t1: 0.0,
        t2: 0.0,
        gamma: 1.0,
        theta: 0.0,
        k1: 1.0,
        k2: 0.0,
        nu1: 0.0,
        nu2: 0.0,
    };

    pub const NAMES: [&'static str; 8] = ["t1", "t2", "gamma", "theta", "k1", "k2", "nu1", "nu2"];

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            t1: a[0],
            t2: a[1],
            gamma: a[2],
            theta: a[3],
            k1: a[4],
            k2: a[5],
            nu1: a[6],
            nu2: a[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.t1, self.t2, self.gamma, self.theta, self.k1, self.k2, self.nu1, self.nu2,
        ]
    }

    pub fn translation(t1: f64, t2: f64) -> Self {
        Self {
            t1,
            t2,
            ..Self::IDENTITY
        }
    }

    pub fn similarity(&self) -> SimilarityParams {
        SimilarityParams {
            t1: self.t1,
            t2: self.t2,
            gamma: self.gamma,
            theta: self.theta,
        }
    }

    pub fn residual(&self) -> ResidualParams {
        ResidualParams {
            k1: self.k1,
            k2: self.k2,
            nu1: self.nu1,
            nu2: self.nu2,
        }
    }

    pub fn from_parts(s: SimilarityParams, r: ResidualParams) -> Self {
        Self {
            t1: s.t1,
            t2: s.t2,
            gamma: s.gamma,
            theta: s.theta,
            k1: r.k1,
            k2: r.k2,
            nu1: r.nu1,
            nu2: r.nu2,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.to_array().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("transform parameters"));
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if self.k1 == 0.0 {
            return Err(Error::InvalidParameter("k1 must be non-zero".into()));
        }
        Ok(())
    }
}

/// Translation, isotropic scale and rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityParams {
    pub t1: f64,
    pub t2: f64,
    pub gamma: f64,
    pub theta: f64,
}

impl SimilarityParams {
    pub const IDENTITY: SimilarityParams = SimilarityParams {
        t1: 0.0,
        t2: 0.0,
        gamma: 1.0,
        theta: 0.0,
    };

    pub fn to_params(self) -> TransformParams {
        TransformParams::from_parts(self, ResidualParams::IDENTITY)
    }
}

/// Anisotropic scale, shear and the two perspective coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualParams {
    pub k1: f64,
    pub k2: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl ResidualParams {
    pub const IDENTITY: ResidualParams = ResidualParams {
        k1: 1.0,
        k2: 0.0,
        nu1: 0.0,
        nu2: 0.0,
    };

    pub fn to_params(self) -> TransformParams {
        TransformParams::from_parts(SimilarityParams::IDENTITY, self)
    }
}

/// A 3x3 projective transform, kept with `m[2][2] = 1` whenever possible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    /// Wraps `m`, rescaling so that `m[2][2] = 1` when that entry is non-zero.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        Self::with_tolerance(m, DET_EPS)
    }

    pub fn with_tolerance(m: Matrix3<f64>, det_eps: f64) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography entries"));
        }
        let m = normalized(m);
        let det = m.determinant();
        if det.abs() <= det_eps || !det.is_finite() {
            return Err(Error::Singular { det });
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        Self::new(Matrix3::from_fn(|r, c| rows[r][c]))
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        let mut m = Matrix3::identity();
        m[(0, 2)] = tx;
        m[(1, 2)] = ty;
        Self { m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// Applies the transform to `(x, y)` and divides by the homogeneous coordinate.
    pub fn apply(&self, x: f64, y: f64) -> Result<[f64; 2]> {
        self.apply_with(x, y, W_EPS)
    }

    pub fn apply_with(&self, x: f64, y: f64, w_eps: f64) -> Result<[f64; 2]> {
        let v = self.m * Vector3::new(x, y, 1.0);
        if v[2].abs() < w_eps || !v[2].is_finite() {
            return Err(Error::AtInfinity { w: v[2] });
        }
        Ok([v[0] / v[2], v[1] / v[2]])
    }

    /// Projective application without the `w` guard; used in inner loops where
    /// the caller has already bounded the warp.
    #[inline]
    pub fn apply_unchecked(&self, x: f64, y: f64) -> [f64; 2] {
        let m = &self.m;
        let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
        [
            (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / w,
            (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / w,
        ]
    }

    pub fn compose(&self, rhs: &Homography) -> Result<Homography> {
        compose(self, rhs)
    }

    pub fn inverse(&self) -> Result<Homography> {
        invert(self)
    }

    pub fn frobenius_distance(&self, other: &Homography) -> f64 {
        (self.m - other.m).norm()
    }

    /// Nine row-major numbers separated by single spaces.
    pub fn to_line(&self) -> String {
        self.rows()
            .iter()
            .flatten()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

impl fmt::Display for Homography {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_line())
    }
}

impl FromStr for Homography {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let vals = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|e| Error::Parse {
                    what: "homography line",
                    detail: format!("{t:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if vals.len() != 9 {
            return Err(Error::Parse {
                what: "homography line",
                detail: format!("expected 9 numbers, found {}", vals.len()),
            });
        }
        Homography::new(Matrix3::from_row_slice(&vals))
    }
}

fn normalized(m: Matrix3<f64>) -> Matrix3<f64> {
    let s = m[(2, 2)];
    if s != 0.0 {
        m / s
    } else {
        m
    }
}

/// Similarity factor `[[g cos, -g sin, t1], [g sin, g cos, t2], [0, 0, 1]]`.
pub fn similarity_matrix(s: &SimilarityParams) -> Matrix3<f64> {
    let (sin, cos) = s.theta.sin_cos();
    Matrix3::new(
        s.gamma * cos,
        -s.gamma * sin,
        s.t1,
        s.gamma * sin,
        s.gamma * cos,
        s.t2,
        0.0,
        0.0,
        1.0,
    )
}

/// Residual factor `[[k1, k2, 0], [0, 1/k1, 0], [nu1, nu2, 1]]`.
pub fn residual_matrix(r: &ResidualParams) -> Matrix3<f64> {
    Matrix3::new(r.k1, r.k2, 0.0, 0.0, 1.0 / r.k1, 0.0, r.nu1, r.nu2, 1.0)
}

/// `H(x) = H^S(x) * H^Lambda(x)`.
pub fn build_homography(x: &TransformParams) -> Result<Homography> {
    x.validate()?;
    let m = similarity_matrix(&x.similarity()) * residual_matrix(&x.residual());
    Homography::new(m)
}

/// Splits a homography into its similarity and residual factors on the
/// canonical branch `gamma > 0, k1 > 0`.
pub fn decompose(h: &Homography) -> Result<(SimilarityParams, ResidualParams)> {
    let m = h.matrix();
    if m[(2, 2)] == 0.0 {
        return Err(Error::NotRepresentable("m33 = 0 (object at infinity)"));
    }
    let m = m / m[(2, 2)];
    let (t1, t2) = (m[(0, 2)], m[(1, 2)]);
    let (nu1, nu2) = (m[(2, 0)], m[(2, 1)]);
    // A = M - t nu^T = gamma R K
    let a11 = m[(0, 0)] - t1 * nu1;
    let a12 = m[(0, 1)] - t1 * nu2;
    let a21 = m[(1, 0)] - t2 * nu1;
    let a22 = m[(1, 1)] - t2 * nu2;
    let det = a11 * a22 - a12 * a21;
    if !(det > 0.0) {
        return Err(Error::NotRepresentable(
            "translation-corrected 2x2 block has det <= 0",
        ));
    }
    let gamma = det.sqrt();
    let mut theta = a21.atan2(a11);
    if theta <= -PI {
        theta = PI;
    }
    let k1 = a11.hypot(a21) / gamma;
    let (sin, cos) = theta.sin_cos();
    let k2 = (cos * a12 + sin * a22) / gamma;
    Ok((
        SimilarityParams {
            t1,
            t2,
            gamma,
            theta,
        },
        ResidualParams { k1, k2, nu1, nu2 },
    ))
}

/// Decomposes and merges both factors back into a full parameter vector.
pub fn decompose_params(h: &Homography) -> Result<TransformParams> {
    let (s, r) = decompose(h)?;
    Ok(TransformParams::from_parts(s, r))
}

pub fn compose(a: &Homography, b: &Homography) -> Result<Homography> {
    Homography::new(a.m * b.m)
}

pub fn invert(h: &Homography) -> Result<Homography> {
    let det = h.m.determinant();
    if det.abs() <= DET_EPS {
        return Err(Error::Singular { det });
    }
    let inv = h.m.try_inverse().ok_or(Error::Singular { det })?;
    Homography::new(inv)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Corner points in the order left-top, right-top, right-bottom, left-bottom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerQuad(pub [[f64; 2]; 4]);

impl CornerQuad {
    /// Axis-aligned box with the given half extent, centered at the origin.
    pub fn centered_box(half_w: f64, half_h: f64) -> Self {
        CornerQuad([
            [-half_w, -half_h],
            [half_w, -half_h],
            [half_w, half_h],
            [-half_w, half_h],
        ])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != 8 {
            return Err(Error::Parse {
                what: "corner quad",
                detail: format!("expected 8 numbers, found {}", v.len()),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("corner coordinates"));
        }
        Ok(CornerQuad([
            [v[0], v[1]],
            [v[2], v[3]],
            [v[4], v[5]],
            [v[6], v[7]],
        ]))
    }

    pub fn to_array(&self) -> [f64; 8] {
        let c = &self.0;
        [
            c[0][0], c[0][1], c[1][0], c[1][1], c[2][0], c[2][1], c[3][0], c[3][1],
        ]
    }

    /// The 3x4 homogeneous matrix with one corner per column.
    pub fn homogeneous(&self) -> nalgebra::Matrix3x4<f64> {
        nalgebra::Matrix3x4::from_fn(|r, c| if r == 2 { 1.0 } else { self.0[c][r] })
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        CornerQuad(self.0.map(|[x, y]| [x + dx, y + dy]))
    }

    /// Ok when no three corners are (numerically) collinear.
    pub fn check_non_degenerate(&self) -> Result<()> {
        let p = &self.0;
        let scale = p
            .iter()
            .flat_map(|q| [q[0].abs(), q[1].abs()])
            .fold(1.0f64, f64::max);
        for skip in 0..4 {
            let idx: Vec<usize> = (0..4).filter(|&i| i != skip).collect();
            let (a, b, c) = (p[idx[0]], p[idx[1]], p[idx[2]]);
            let cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross.abs() <= 1e-9 * scale * scale {
                return Err(Error::DegenerateQuad("three collinear corners"));
            }
        }
        Ok(())
    }

    /// Area-weighted centroid of the polygon (vertex mean if the area vanishes).
    pub fn centroid(&self) -> [f64; 2] {
        let p = &self.0;
        let (mut a, mut cx, mut cy) = (0.0, 0.0, 0.0);
        for i in 0..4 {
            let (x0, y0) = (p[i][0], p[i][1]);
            let (x1, y1) = (p[(i + 1) % 4][0], p[(i + 1) % 4][1]);
            let cr = x0 * y1 - x1 * y0;
            a += cr;
            cx += (x0 + x1) * cr;
            cy += (y0 + y1) * cr;
        }
        if a.abs() < 1e-12 {
            let mx = p.iter().map(|q| q[0]).sum::<f64>() / 4.0;
            let my = p.iter().map(|q| q[1]).sum::<f64>() / 4.0;
            return [mx, my];
        }
        [cx / (3.0 * a), cy / (3.0 * a)]
    }
}

/// Maps each corner projectively and dehomogenizes.
pub fn transport_corners(h: &Homography, p: &CornerQuad) -> Result<CornerQuad> {
    transport_corners_with(h, p, W_EPS)
}

pub fn transport_corners_with(h: &Homography, p: &CornerQuad, w_eps: f64) -> Result<CornerQuad> {
    if p.0.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("corner coordinates"));
    }
    let mut out = [[0.0; 2]; 4];
    for (o, c) in out.iter_mut().zip(p.0.iter()) {
        *o = h.apply_with(c[0], c[1], w_eps)?;
    }
    Ok(CornerQuad(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn manual_product(x: &TransformParams) -> [[f64; 3]; 3] {
        let (g, th) = (x.gamma, x.theta);
        let s = [
            [g * th.cos(), -g * th.sin(), x.t1],
            [g * th.sin(), g * th.cos(), x.t2],
            [0.0, 0.0, 1.0],
        ];
        let l = [
            [x.k1, x.k2, 0.0],
            [0.0, 1.0 / x.k1, 0.0],
            [x.nu1, x.nu2, 1.0],
        ];
        let mut out = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                for k in 0..3 {
                    out[r][c] += s[r][k] * l[k][c];
                }
            }
        }
        out
    }

    #[test]
    fn identity_params_give_identity() {
        let h = build_homography(&TransformParams::IDENTITY).unwrap();
        assert_eq!(*h.matrix(), Matrix3::identity());
    }

    #[test]
    fn pure_translation() {
        let h = build_homography(&TransformParams::translation(5.0, -3.0)).unwrap();
        assert_eq!(h.rows(), [[1.0, 0.0, 5.0], [0.0, 1.0, -3.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn build_matches_hand_product() {
        let x = TransformParams {
            t1: 10.0,
            t2: 4.0,
            gamma: 1.2,
            theta: 0.3,
            k1: 1.05,
            k2: 0.01,
            nu1: 0.001,
            nu2: -0.0005,
        };
        let h = build_homography(&x).unwrap().rows();
        let expect = manual_product(&x);
        for r in 0..3 {
            for c in 0..3 {
                assert_abs_diff_eq!(h[r][c], expect[r][c], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn build_rejects_bad_params() {
        let mut x = TransformParams::IDENTITY;
        x.k1 = 0.0;
        assert!(build_homography(&x).is_err());
        x.k1 = 1.0;
        x.gamma = -1.0;
        assert!(build_homography(&x).is_err());
        x.gamma = f64::NAN;
        assert!(matches!(build_homography(&x), Err(Error::NonFinite(_))));
    }

    #[test]
    fn decompose_identity() {
        let (s, r) = decompose(&Homography::identity()).unwrap();
        assert_eq!(s, SimilarityParams::IDENTITY);
        assert_eq!(r, ResidualParams::IDENTITY);
    }

    #[test]
    fn decompose_pure_perspective() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.001, 0.0, 1.0]])
            .unwrap();
        let (s, r) = decompose(&h).unwrap();
        assert_abs_diff_eq!(s.gamma, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.theta, 0.0, epsilon = 1e-15);
        assert_eq!((s.t1, s.t2), (0.0, 0.0));
        assert_abs_diff_eq!(r.k1, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.k2, 0.0, epsilon = 1e-15);
        assert_eq!((r.nu1, r.nu2), (0.001, 0.0));
    }

    #[test]
    fn decompose_rejects_mirror_and_infinity() {
        let mirror =
            Homography::from_rows([[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert!(matches!(decompose(&mirror), Err(Error::NotRepresentable(_))));
        let inf = Homography {
            m: Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0),
        };
        assert!(matches!(decompose(&inf), Err(Error::NotRepresentable(_))));
    }

    #[test]
    fn theta_at_pi_resolves_to_plus_pi() {
        let x = TransformParams {
            theta: PI,
            ..TransformParams::IDENTITY
        };
        let mut h = build_homography(&x).unwrap();
        // force an exact -0.0 in A21 so atan2 lands on -pi
        h.m[(1, 0)] = -0.0;
        let (s, _) = decompose(&h).unwrap();
        assert_eq!(s.theta, PI);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let x = TransformParams {
            t1: -7.0,
            t2: 12.0,
            gamma: 0.8,
            theta: -0.5,
            k1: 0.93,
            k2: 0.012,
            nu1: -0.0011,
            nu2: 0.0007,
        };
        let h = build_homography(&x).unwrap();
        let id = compose(&h, &invert(&h).unwrap()).unwrap();
        assert!(id.frobenius_distance(&Homography::identity()) < 1e-10);
        assert_eq!(compose(&Homography::identity(), &h).unwrap(), h);
    }

    #[test]
    fn invert_singular_fails() {
        let m = Matrix3::new(1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0);
        assert!(Homography::new(m).is_err());
    }

    #[test]
    fn transport_identity_and_translation() {
        let p = CornerQuad::centered_box(10.0, 5.0);
        assert_eq!(transport_corners(&Homography::identity(), &p).unwrap(), p);
        let moved = transport_corners(&Homography::translation(5.0, -3.0), &p).unwrap();
        assert_eq!(moved, p.translated(5.0, -3.0));
    }

    #[test]
    fn transport_flags_points_at_infinity() {
        let h = Homography::from_rows([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])
            .unwrap();
        let p = CornerQuad([[1.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]);
        assert!(matches!(
            transport_corners(&h, &p),
            Err(Error::AtInfinity { .. })
        ));
    }

    #[test]
    fn line_round_trip() {
        let h = build_homography(&TransformParams {
            t1: 3.25,
            nu1: 1e-4,
            theta: 0.1,
            ..TransformParams::IDENTITY
        })
        .unwrap();
        let parsed: Homography = h.to_line().parse().unwrap();
        assert_eq!(parsed, h);
        assert!("1 2 3".parse::<Homography>().is_err());
    }

    #[test]
    fn degenerate_quads() {
        let q = CornerQuad([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]]);
        assert!(q.check_non_degenerate().is_err());
        assert!(CornerQuad::centered_box(1.0, 1.0).check_non_degenerate().is_ok());
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5), 0.5, epsilon = 1e-15);
    }
}
