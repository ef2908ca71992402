//! Quadrature rules against the `N(0, P)` weight.
//!
//! Two constructions are provided. [`gauss_hermite_rule`] is the classical
//! Gauss–Hermite rule rescaled to the `N(0, P)` density; it is exact for
//! polynomials and excellent for smooth integrands. The posterior integrals
//! of quantized channels contain normal-CDF factors whose transition width
//! shrinks like `σ / (|h_i| √P)`, which a single global rule resolves poorly
//! at high SNR, so [`composite_normal_rule`] builds a graded composite
//! Gauss–Legendre rule whose panels shrink around those transitions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::special::norm_pdf;

/// Half-width, in standard deviations, of the truncated support used by
/// composite rules. The neglected tail mass is `2Φ(-12) ≈ 3.6e-33`.
pub const TRUNCATION_SIGMAS: f64 = 12.0;

/// Default Gauss–Hermite order.
pub const DEFAULT_HERMITE_ORDER: usize = 200;

/// Default number of Gauss–Legendre points per composite panel.
pub const DEFAULT_PANEL_ORDER: usize = 16;

const COARSE_STEP: f64 = 0.5;
const GRADING: f64 = 4.0;
const MIN_STEP: f64 = 1e-6;

/// Support of a rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Support {
    /// The whole real line.
    RealLine,
    /// `[-half_width, half_width]`.
    Symmetric(f64),
}

/// Nodes and weights of a rule whose weights already include the
/// `N(0, P)` density, i.e. `Σ w_k f(u_k) ≈ E[f(u)]` for `u ~ N(0, P)`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    support: Support,
}

impl QuadratureRule {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `E[f(u)]` for `u ~ N(0, P)`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&u, &w)| if w == 0.0 { 0.0 } else { w * f(u) })
            .sum()
    }
}

/// Gauss–Hermite rule of the given order adapted to the `N(0, power)`
/// density.
pub fn gauss_hermite_rule(order: usize, power: f64) -> Result<QuadratureRule> {
    if order < 2 {
        return Err(Error::Domain(format!("quadrature order {order} < 2")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power {power} must be positive")));
    }
    let (x, w) = hermite_physicists(order);
    let scale = (2.0 * power).sqrt();
    let norm = std::f64::consts::PI.sqrt();
    Ok(QuadratureRule {
        nodes: x.iter().map(|&xi| scale * xi).collect(),
        weights: w.iter().map(|&wi| wi / norm).collect(),
        support: Support::RealLine,
    })
}

/// Nodes/weights for `∫ e^{-x²} f(x) dx`. Nodes start from the
/// eigenvalues of the Jacobi matrix and are polished by Newton steps on the
/// orthonormal Hermite recurrence, which also yields the weights.
fn hermite_physicists(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut x: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    x.sort_by(f64::total_cmp);
    let nf = n as f64;
    let eval = |z: f64| {
        let mut p1 = PIM4;
        let mut p2 = 0.0;
        for j in 0..n {
            let p3 = p2;
            p2 = p1;
            let jf = j as f64;
            p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        }
        (p1, (2.0 * nf).sqrt() * p2)
    };
    let mut w = vec![0.0; n];
    for (xi, wi) in x.iter_mut().zip(&mut w) {
        let mut pp = 0.0;
        for _ in 0..5 {
            let (p1, d) = eval(*xi);
            pp = d;
            *xi -= p1 / d;
        }
        if pp == 0.0 {
            pp = eval(*xi).1;
        }
        *wi = 2.0 / (pp * pp);
    }
    // exact symmetry
    for i in 0..n / 2 {
        let (xs, ws) = (0.5 * (x[n - 1 - i] - x[i]), 0.5 * (w[i] + w[n - 1 - i]));
        x[i] = -xs;
        x[n - 1 - i] = xs;
        w[i] = ws;
        w[n - 1 - i] = ws;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 1.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// A sharp feature of an integrand, in standardized units `t = u / √P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feature {
    pub center: f64,
    pub width: f64,
}

/// Panel boundaries on `[-T, T]`: coarse steps far from every feature,
/// steps equal to the feature width near it, graded geometrically between.
fn panel_breaks(features: &[Feature]) -> Vec<f64> {
    let t_max = TRUNCATION_SIGMAS;
    let step_at = |t: f64| {
        features
            .iter()
            .map(|f| f.width.max((t - f.center).abs() / GRADING))
            .fold(COARSE_STEP, f64::min)
            .max(MIN_STEP)
    };
    let mut breaks = vec![-t_max];
    let mut t = -t_max;
    while t < t_max {
        t = (t + step_at(t)).min(t_max);
        breaks.push(t);
    }
    breaks
}

/// Composite Gauss–Legendre rule on `[-12√P, 12√P]` against the `N(0, P)`
/// density, refined around the given features.
pub fn composite_normal_rule(power: f64, features: &[Feature], order: usize) -> Result<QuadratureRule> {
    if order < 2 {
        return Err(Error::Domain(format!("quadrature order {order} < 2")));
    }
    if !(power > 0.0 && power.is_finite()) {
        return Err(Error::Domain(format!("power {power} must be positive")));
    }
    let (gx, gw) = gauss_legendre(order);
    let breaks = panel_breaks(features);
    let sqrt_p = power.sqrt();
    let mut nodes = Vec::with_capacity((breaks.len() - 1) * order);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&xi, &wi) in gx.iter().zip(&gw) {
            let t = mid + half * xi;
            nodes.push(sqrt_p * t);
            weights.push(wi * half * norm_pdf(t));
        }
    }
    Ok(QuadratureRule {
        nodes,
        weights,
        support: Support::Symmetric(TRUNCATION_SIGMAS * sqrt_p),
    })
}
