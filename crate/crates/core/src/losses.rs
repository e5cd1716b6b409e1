//! Training-loss evaluators with analytic gradients.
//!
//! Nothing here trains anything; the functions exist so each loss formula can
//! be checked (value, gradient, invariances) against independent oracles.

use std::f64::consts::PI;

/// Probabilities on the negative-sample log term are clamped to `1 - CLS_EPS`.
pub const CLS_EPS: f64 = 1e-12;

/// Loss weights and margins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 100.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 0.25,
            alpha: 1.0,
        }
    }
}

/// A loss value with its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Row-major grid of scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Grid {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }
}

/// Separable Hamming label centered at `center` (cells), zero beyond
/// `radius` along either axis.
pub fn hamming_label(width: usize, height: usize, center: [f64; 2], radius: f64) -> Grid {
    assert!(radius > 0.0, "radius must be positive");
    let h = |d: f64| {
        if d.abs() > radius {
            0.0
        } else {
            0.54 + 0.46 * (PI * d / radius).cos()
        }
    };
    let mut data = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let v = h(x as f64 - center[0]) * h(y as f64 - center[1]);
            data.push(v.clamp(0.0, 1.0));
        }
    }
    Grid {
        width,
        height,
        data,
    }
}

/// Positive and negative index sets for the classification loss.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSelection {
    pub positives: Vec<usize>,
    pub negatives: Vec<usize>,
    /// Whether `positive_cap` actually removed positives.
    pub positive_cap_active: bool,
}

/// Positives: label above `tau`, optionally capped to the `positive_cap`
/// highest predictions. Negatives: the `k` highest predictions among cells
/// whose label is zero (hard-negative mining). Ties break on lower index.
pub fn select_samples(
    pred: &[f64],
    label: &[f64],
    tau: f64,
    k: usize,
    positive_cap: Option<usize>,
) -> LabelSelection {
    assert_eq!(pred.len(), label.len());
    let by_pred_desc = |a: &usize, b: &usize| pred[*b].total_cmp(&pred[*a]).then(a.cmp(b));
    let mut positives: Vec<usize> = (0..label.len()).filter(|&i| label[i] > tau).collect();
    let mut positive_cap_active = false;
    if let Some(cap) = positive_cap {
        if positives.len() > cap {
            positives.sort_by(by_pred_desc);
            positives.truncate(cap);
            positive_cap_active = true;
        }
    }
    positives.sort_unstable();
    let mut negatives: Vec<usize> = (0..label.len()).filter(|&i| label[i] == 0.0).collect();
    negatives.sort_by(by_pred_desc);
    negatives.truncate(k);
    negatives.sort_unstable();
    LabelSelection {
        positives,
        negatives,
        positive_cap_active,
    }
}

/// `(1/K) sum_neg -log(1 - p) + (1/Q) sum_pos |p - label|`.
///
/// Predictions of 1 on a negative index are clamped to `1 - CLS_EPS`; the
/// second value counts how many were clamped.
pub fn loss_cls(
    pred: &[f64],
    label: &[f64],
    positives: &[usize],
    negatives: &[usize],
    k: usize,
    q: usize,
) -> (ValueGrad, usize) {
    assert!(k > 0 && q > 0, "K and Q must be positive");
    let mut grad = vec![0.0; pred.len()];
    let mut value = 0.0;
    let kf = k as f64;
    let qf = q as f64;
    let mut clamped = 0;
    for &i in negatives {
        if pred[i] > 1.0 - CLS_EPS {
            clamped += 1;
        }
        let p = pred[i].min(1.0 - CLS_EPS);
        value += -(1.0 - p).ln() / kf;
        grad[i] += 1.0 / ((1.0 - p) * kf);
    }
    for &j in positives {
        let d = pred[j] - label[j];
        value += d.abs() / qf;
        if d != 0.0 {
            grad[j] += d.signum() / qf;
        }
    }
    (ValueGrad { value, grad }, clamped)
}

/// Quadratic below one, linear above.
pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() <= 1.0 {
        x
    } else {
        x.signum()
    }
}

/// Smooth-l1 of a 2-vector, applied per component and summed.
pub fn smooth_l1_vec(v: [f64; 2]) -> f64 {
    smooth_l1(v[0]) + smooth_l1(v[1])
}

/// Offset regression loss over eligible cells; the flag is set when the
/// eligible set is empty (value defined as zero).
pub fn loss_reg(pred: &[[f64; 2]], label: &[[f64; 2]], eligible: &[usize], u: usize) -> (ValueGrad, bool) {
    assert!(u > 0, "U must be positive");
    let mut grad = vec![0.0; pred.len() * 2];
    if eligible.is_empty() {
        return (ValueGrad { value: 0.0, grad }, true);
    }
    let uf = u as f64;
    let mut value = 0.0;
    for &i in eligible {
        for c in 0..2 {
            let d = pred[i][c] - label[i][c];
            value += smooth_l1(d) / uf;
            grad[2 * i + c] += smooth_l1_grad(d) / uf;
        }
    }
    (ValueGrad { value, grad }, false)
}

/// Cells whose label probability exceeds `tau`.
pub fn eligible_cells(label: &[f64], tau: f64) -> Vec<usize> {
    (0..label.len()).filter(|&i| label[i] > tau).collect()
}

/// Two-class softmax cross-entropy over logits `[neg, pos]` per cell, with
/// labels 1 (positive), 0 (negative) and -1 (ignored). Positives and
/// negatives are averaged separately and weighted one half each.
pub fn loss_cross_entropy(logits: &[[f64; 2]], labels: &[i8]) -> ValueGrad {
    assert_eq!(logits.len(), labels.len());
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.iter().filter(|&&l| l == 0).count();
    let mut grad = vec![0.0; logits.len() * 2];
    let mut value = 0.0;
    for (i, (z, &l)) in logits.iter().zip(labels).enumerate() {
        let (cls, count) = match l {
            1 => (1usize, n_pos),
            0 => (0usize, n_neg),
            _ => continue,
        };
        let w = 0.5 / count as f64;
        let m = z[0].max(z[1]);
        let lse = m + ((z[0] - m).exp() + (z[1] - m).exp()).ln();
        value += w * (lse - z[cls]);
        for c in 0..2 {
            let p = (z[c] - lse).exp();
            let ind = if c == cls { 1.0 } else { 0.0 };
            grad[2 * i + c] += w * (p - ind);
        }
    }
    ValueGrad { value, grad }
}

/// Sum of the four similarity-stage parts.
pub fn loss_similarity(cls: f64, reg: f64, cls2: f64, reg2: f64) -> f64 {
    cls + reg + cls2 + reg2
}

fn frob(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Gradients of the triplet loss for the three embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletGrad {
    pub value: f64,
    pub anchor: Vec<f64>,
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

/// `(1/m^2) max(||a - p|| - ||n - a|| + alpha, 0)` with Frobenius distances.
/// At a zero distance the corresponding gradient term is taken as zero.
pub fn loss_triplet(anchor: &[f64], positive: &[f64], negative: &[f64], m: usize, alpha: f64) -> TripletGrad {
    assert!(anchor.len() == positive.len() && anchor.len() == negative.len());
    let scale = 1.0 / (m * m) as f64;
    let d_ap = frob(anchor, positive);
    let d_an = frob(negative, anchor);
    let hinge = d_ap - d_an + alpha;
    let len = anchor.len();
    if hinge <= 0.0 {
        return TripletGrad {
            value: 0.0,
            anchor: vec![0.0; len],
            positive: vec![0.0; len],
            negative: vec![0.0; len],
        };
    }
    let mut ga = vec![0.0; len];
    let mut gp = vec![0.0; len];
    let mut gn = vec![0.0; len];
    for i in 0..len {
        if d_ap > 0.0 {
            let u = (anchor[i] - positive[i]) / d_ap;
            ga[i] += scale * u;
            gp[i] -= scale * u;
        }
        if d_an > 0.0 {
            let v = (negative[i] - anchor[i]) / d_an;
            gn[i] -= scale * v;
            ga[i] += scale * v;
        }
    }
    TripletGrad {
        value: scale * hinge,
        anchor: ga,
        positive: gp,
        negative: gn,
    }
}

/// Mean over the four corners of the l1 distance between offsets.
pub fn loss_sup_corners(truth: &[[f64; 2]; 4], pred: &[[f64; 2]; 4]) -> ValueGrad {
    let mut value = 0.0;
    let mut grad = vec![0.0; 8];
    for i in 0..4 {
        for c in 0..2 {
            let d = truth[i][c] - pred[i][c];
            value += d.abs() / 4.0;
            // derivative with respect to the prediction
            grad[2 * i + c] = if d == 0.0 { 0.0 } else { -d.signum() / 4.0 };
        }
    }
    ValueGrad { value, grad }
}

/// Mean over the four corners of the component-wise smooth-l1 of the
/// predicted offsets against a zero target.
pub fn loss_neg(pred: &[[f64; 2]; 4]) -> ValueGrad {
    let mut value = 0.0;
    let mut grad = vec![0.0; 8];
    for i in 0..4 {
        value += smooth_l1_vec(pred[i]) / 4.0;
        for c in 0..2 {
            grad[2 * i + c] = smooth_l1_grad(pred[i][c]) / 4.0;
        }
    }
    ValueGrad { value, grad }
}

/// `lambda2 * neg + lambda3 * triplet + lambda4 * sup`.
pub fn loss_residual_total(neg: f64, triplet: f64, sup: f64, w: &LossWeights) -> f64 {
    w.lambda2 * neg + w.lambda3 * triplet + w.lambda4 * sup
}

/// `lambda1 * similarity + residual`.
pub fn loss_total(similarity: f64, residual: f64, lambda1: f64) -> f64 {
    assert!(lambda1 >= 0.0);
    lambda1 * similarity + residual
}

/// Outcome of the finite-difference check of one loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub name: &'static str,
    pub points: usize,
    /// Largest `|fd - analytic|_inf / |analytic|_inf` over the points.
    pub max_rel_error: f64,
    pub tolerance: f64,
}

impl GradientCheck {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= self.tolerance
    }
}

/// Central-difference step used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;

fn fd_rel_error(f: &dyn Fn(&[f64]) -> f64, x: &[f64], analytic: &[f64]) -> f64 {
    let mut xp = x.to_vec();
    let mut worst = 0.0f64;
    let scale = analytic.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    for i in 0..x.len() {
        xp[i] = x[i] + FD_STEP;
        let fp = f(&xp);
        xp[i] = x[i] - FD_STEP;
        let fm = f(&xp);
        xp[i] = x[i];
        let fd = (fp - fm) / (2.0 * FD_STEP);
        worst = worst.max((fd - analytic[i]).abs() / scale);
    }
    worst
}

fn uniform<R: rand::Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}

/// Distance kept from kinks and hinges when drawing test points.
const KINK_MARGIN: f64 = 1e-3;

fn far_from_kinks(v: &[f64], kinks: &[f64]) -> bool {
    v.iter().all(|x| kinks.iter().all(|k| (x.abs() - k).abs() > KINK_MARGIN))
}

/// Checks every differentiable loss against central finite differences at
/// `points` random inputs drawn away from kinks.
pub fn gradient_suite(seed: u64, points: usize) -> Vec<GradientCheck> {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut run = |name: &'static str, tol: f64, rng: &mut rand_chacha::ChaCha8Rng, f: &mut dyn FnMut(&mut rand_chacha::ChaCha8Rng) -> f64| {
        let mut worst = 0.0f64;
        for _ in 0..points {
            worst = worst.max(f(rng));
        }
        out.push(GradientCheck {
            name,
            points,
            max_rel_error: worst,
            tolerance: tol,
        });
    };

    run("smooth_l1", 1e-6, &mut rng, &mut |rng| loop {
        let x = uniform(rng, -3.0, 3.0);
        if !far_from_kinks(&[x], &[1.0]) {
            continue;
        }
        break fd_rel_error(&|v: &[f64]| smooth_l1(v[0]), &[x], &[smooth_l1_grad(x)]);
    });

    run("loss_cls", 1e-4, &mut rng, &mut |rng| loop {
        let n = 24;
        let label: Vec<f64> = (0..n).map(|i| if i % 3 == 0 { 0.0 } else { uniform(rng, 0.0, 1.0) }).collect();
        let pred: Vec<f64> = (0..n).map(|_| uniform(rng, 0.02, 0.98)).collect();
        let sel = select_samples(&pred, &label, 0.7, 5, None);
        if sel.positives.is_empty() || sel.negatives.is_empty() {
            continue;
        }
        let diffs: Vec<f64> = sel.positives.iter().map(|&j| pred[j] - label[j]).collect();
        if !far_from_kinks(&diffs, &[0.0]) {
            continue;
        }
        let (k, q) = (sel.negatives.len(), sel.positives.len());
        let (g, _) = loss_cls(&pred, &label, &sel.positives, &sel.negatives, k, q);
        let f = |v: &[f64]| loss_cls(v, &label, &sel.positives, &sel.negatives, k, q).0.value;
        break fd_rel_error(&f, &pred, &g.grad);
    });

    run("loss_reg", 1e-4, &mut rng, &mut |rng| loop {
        let n = 12;
        let pred: Vec<[f64; 2]> = (0..n).map(|_| [uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)]).collect();
        let label: Vec<[f64; 2]> = (0..n).map(|_| [uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)]).collect();
        let eligible: Vec<usize> = (0..n).filter(|i| i % 2 == 0).collect();
        let diffs: Vec<f64> = eligible.iter().flat_map(|&i| [pred[i][0] - label[i][0], pred[i][1] - label[i][1]]).collect();
        if !far_from_kinks(&diffs, &[1.0]) {
            continue;
        }
        let flat: Vec<f64> = pred.iter().flatten().copied().collect();
        let (g, _) = loss_reg(&pred, &label, &eligible, eligible.len());
        let f = |v: &[f64]| {
            let p: Vec<[f64; 2]> = v.chunks(2).map(|c| [c[0], c[1]]).collect();
            loss_reg(&p, &label, &eligible, eligible.len()).0.value
        };
        break fd_rel_error(&f, &flat, &g.grad);
    });

    run("loss_cross_entropy", 1e-4, &mut rng, &mut |rng| {
        let n = 16;
        let logits: Vec<[f64; 2]> = (0..n).map(|_| [uniform(rng, -3.0, 3.0), uniform(rng, -3.0, 3.0)]).collect();
        let labels: Vec<i8> = (0..n).map(|i| [1, 0, -1, 0][i % 4]).collect();
        let flat: Vec<f64> = logits.iter().flatten().copied().collect();
        let g = loss_cross_entropy(&logits, &labels);
        let f = |v: &[f64]| {
            let z: Vec<[f64; 2]> = v.chunks(2).map(|c| [c[0], c[1]]).collect();
            loss_cross_entropy(&z, &labels).value
        };
        fd_rel_error(&f, &flat, &g.grad)
    });

    run("loss_triplet", 1e-4, &mut rng, &mut |rng| loop {
        let m = 3;
        let len = m * m;
        let a: Vec<f64> = (0..len).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let p: Vec<f64> = (0..len).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let n: Vec<f64> = (0..len).map(|_| uniform(rng, -1.0, 1.0)).collect();
        let alpha = 1.0;
        let hinge = frob(&a, &p) - frob(&n, &a) + alpha;
        if hinge.abs() < KINK_MARGIN || frob(&a, &p) < KINK_MARGIN || frob(&n, &a) < KINK_MARGIN {
            continue;
        }
        let g = loss_triplet(&a, &p, &n, m, alpha);
        if g.value == 0.0 {
            // inactive hinge: zero gradient, nothing informative to compare
            continue;
        }
        let mut x = a.clone();
        x.extend(&p);
        x.extend(&n);
        let mut an = g.anchor.clone();
        an.extend(&g.positive);
        an.extend(&g.negative);
        let f = |v: &[f64]| loss_triplet(&v[..len], &v[len..2 * len], &v[2 * len..], m, alpha).value;
        break fd_rel_error(&f, &x, &an);
    });

    run("loss_sup_corners", 1e-4, &mut rng, &mut |rng| loop {
        let mut t = [[0.0; 2]; 4];
        let mut p = [[0.0; 2]; 4];
        for i in 0..4 {
            for c in 0..2 {
                t[i][c] = uniform(rng, -5.0, 5.0);
                p[i][c] = uniform(rng, -5.0, 5.0);
            }
        }
        let diffs: Vec<f64> = (0..8).map(|k| t[k / 2][k % 2] - p[k / 2][k % 2]).collect();
        if !far_from_kinks(&diffs, &[0.0]) {
            continue;
        }
        let flat: Vec<f64> = p.iter().flatten().copied().collect();
        let g = loss_sup_corners(&t, &p);
        let f = |v: &[f64]| loss_sup_corners(&t, &[[v[0], v[1]], [v[2], v[3]], [v[4], v[5]], [v[6], v[7]]]).value;
        break fd_rel_error(&f, &flat, &g.grad);
    });

    run("loss_neg", 1e-4, &mut rng, &mut |rng| loop {
        let flat: Vec<f64> = (0..8).map(|_| uniform(rng, -3.0, 3.0)).collect();
        if !far_from_kinks(&flat, &[1.0]) {
            continue;
        }
        let p = [[flat[0], flat[1]], [flat[2], flat[3]], [flat[4], flat[5]], [flat[6], flat[7]]];
        let g = loss_neg(&p);
        let f = |v: &[f64]| loss_neg(&[[v[0], v[1]], [v[2], v[3]], [v[4], v[5]], [v[6], v[7]]]).value;
        break fd_rel_error(&f, &flat, &g.grad);
    });

    let w = LossWeights::default();
    run("loss_residual_total", 1e-4, &mut rng, &mut |rng| {
        let x: Vec<f64> = (0..3).map(|_| uniform(rng, 0.0, 5.0)).collect();
        let f = |v: &[f64]| loss_residual_total(v[0], v[1], v[2], &w);
        fd_rel_error(&f, &x, &[w.lambda2, w.lambda3, w.lambda4])
    });

    run("loss_total", 1e-4, &mut rng, &mut |rng| {
        let x: Vec<f64> = (0..2).map(|_| uniform(rng, 0.0, 5.0)).collect();
        let f = |v: &[f64]| loss_total(v[0], v[1], w.lambda1);
        fd_rel_error(&f, &x, &[w.lambda1, 1.0])
    });

    out
}
