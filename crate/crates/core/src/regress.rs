//! Learned output-processing functions.
//!
//! Ridge regression without intercept and Nadaraya–Watson smoothers with a
//! Gaussian or tricube kernel, plus the [`Predictor`] enum that evaluates
//! every kind of processing function uniformly.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::channel::TrainingSet;
use crate::error::{Error, Result};
use crate::estimator::MmseEstimator;

/// Raw kernel weights below this count as underflow.
pub const MIN_KERNEL_WEIGHT: f64 = 1e-300;

/// Relative eigenvalue floor under which `YᵀY + λI` is treated as singular.
const RIDGE_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct RidgeFit {
    pub beta: Vec<f64>,
    pub lambda: f64,
}

impl RidgeFit {
    pub fn predict(&self, y: &[f64]) -> f64 {
        self.beta.iter().zip(y).map(|(b, v)| b * v).sum()
    }
}

/// `β = (YᵀY + λI)⁻¹ Yᵀx`.
pub fn fit_ridge(t: &TrainingSet, lambda: f64) -> Result<RidgeFit> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("ridge lambda {lambda} must be finite and non-negative")));
    }
    let p = t.dim();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut rhs = DVector::<f64>::zeros(p);
    for (x, y) in t.iter() {
        for i in 0..p {
            rhs[i] += y[i] * x;
            for j in 0..=i {
                gram[(i, j)] += y[i] * y[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            gram[(j, i)] = gram[(i, j)];
        }
        gram[(i, i)] += lambda;
    }
    let eig = gram.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(max > 0.0) || min <= RIDGE_RCOND * max {
        return Err(Error::SingularSystem);
    }
    let chol = gram.cholesky().ok_or(Error::SingularSystem)?;
    let beta = chol.solve(&rhs);
    Ok(RidgeFit { beta: beta.iter().copied().collect(), lambda })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    Gaussian,
    Tricube,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Gaussian => "gaussian",
            KernelKind::Tricube => "tricube",
        }
    }

    /// `ln K_λ` at squared distance `d2`; `-∞` outside the support.
    pub fn log_weight(self, d2: f64, lambda: f64) -> f64 {
        match self {
            KernelKind::Gaussian => {
                -d2 / (2.0 * lambda * lambda) - ((2.0 * std::f64::consts::PI).sqrt() * lambda).ln()
            }
            KernelKind::Tricube => {
                let u = d2.sqrt() / lambda;
                if u < 1.0 {
                    3.0 * (1.0 - u * u * u).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(KernelKind::Gaussian),
            "tricube" => Ok(KernelKind::Tricube),
            other => Err(Error::Config(format!("unknown kernel `{other}`"))),
        }
    }
}

/// A Nadaraya–Watson smoother. Anchors with identical outputs are pooled,
/// which leaves the weighted ratio unchanged and makes finite-alphabet
/// outputs cheap.
#[derive(Debug, Clone)]
pub struct KernelFit {
    anchors: TrainingSet,
    lambda: f64,
    kernel: KernelKind,
    /// Distinct output vectors, row-major.
    points: Vec<f64>,
    counts: Vec<f64>,
    sums: Vec<f64>,
    /// Input of the first anchor at each distinct output.
    first_x: Vec<f64>,
}

pub fn fit_kernel(t: &TrainingSet, lambda: f64, kernel: KernelKind) -> Result<KernelFit> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("kernel width {lambda} must be positive")));
    }
    if t.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let p = t.dim();
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut points = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let mut sums: Vec<f64> = Vec::new();
    let mut first_x = Vec::new();
    for (x, y) in t.iter() {
        // +0.0 and -0.0 are the same point
        let key: Vec<u64> = y.iter().map(|v| (v + 0.0).to_bits()).collect();
        let k = *index.entry(key).or_insert_with(|| {
            points.extend_from_slice(y);
            counts.push(0.0);
            sums.push(0.0);
            first_x.push(x);
            counts.len() - 1
        });
        counts[k] += 1.0;
        sums[k] += x;
    }
    debug_assert_eq!(points.len(), counts.len() * p);
    Ok(KernelFit { anchors: t.clone(), lambda, kernel, points, counts, sums, first_x })
}

impl KernelFit {
    pub fn anchors(&self) -> &TrainingSet {
        &self.anchors
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn kernel(&self) -> KernelKind {
        self.kernel
    }

    /// Number of distinct anchor outputs.
    pub fn distinct_points(&self) -> usize {
        self.counts.len()
    }

    pub fn predict(&self, y: &[f64]) -> f64 {
        let p = self.anchors.dim();
        let d2: Vec<f64> = self
            .points
            .chunks_exact(p)
            .map(|a| a.iter().zip(y).map(|(u, v)| (u - v) * (u - v)).sum())
            .collect();
        let logs: Vec<f64> = d2.iter().map(|&d| self.kernel.log_weight(d, self.lambda)).collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(m >= MIN_KERNEL_WEIGHT.ln()) {
            let nearest = d2
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |best, (k, &d)| if d < best.1 { (k, d) } else { best })
                .0;
            return self.nearest_x(nearest);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &l) in logs.iter().enumerate() {
            let w = (l - m).exp();
            num += w * self.sums[k];
            den += w * self.counts[k];
        }
        num / den
    }

    /// `x` of the earliest training anchor at distinct point `k`.
    fn nearest_x(&self, k: usize) -> f64 {
        // Distinct points are numbered in order of first appearance, so the
        // smallest index among equidistant points is also the earliest anchor.
        self.first_x[k]
    }
}

/// Any output-processing function.
#[derive(Debug, Clone)]
pub enum Predictor {
    AnalyticMmse(Arc<MmseEstimator>),
    Linear(Vec<f64>),
    Ridge(RidgeFit),
    Kernel(Arc<KernelFit>),
    /// Arithmetic mean of the members.
    Ensemble(Vec<Predictor>),
}

impl Predictor {
    /// Output dimension the predictor expects, if it has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Predictor::AnalyticMmse(e) => Some(e.model().dim()),
            Predictor::Linear(b) => Some(b.len()),
            Predictor::Ridge(r) => Some(r.beta.len()),
            Predictor::Kernel(k) => Some(k.anchors().dim()),
            Predictor::Ensemble(m) => m.first().and_then(Predictor::dim),
        }
    }

    pub fn predict(&self, y: &[f64]) -> Result<f64> {
        if let Some(p) = self.dim() {
            if p != y.len() {
                return Err(Error::DimensionMismatch { expected: p, got: y.len() });
            }
        }
        match self {
            Predictor::AnalyticMmse(e) => e.estimate(y),
            Predictor::Linear(b) => Ok(b.iter().zip(y).map(|(b, v)| b * v).sum()),
            Predictor::Ridge(r) => Ok(r.predict(y)),
            Predictor::Kernel(k) => Ok(k.predict(y)),
            Predictor::Ensemble(members) => {
                if members.is_empty() {
                    return Err(Error::InvalidModel("empty ensemble".into()));
                }
                let mut s = 0.0;
                for m in members {
                    s += m.predict(y)?;
                }
                Ok(s / members.len() as f64)
            }
        }
    }
}

/// A regressor family and its complexity parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressorSpec {
    Ridge { lambda: f64 },
    Kernel { lambda: f64, kernel: KernelKind },
}

impl RegressorSpec {
    pub fn lambda(&self) -> f64 {
        match *self {
            RegressorSpec::Ridge { lambda } | RegressorSpec::Kernel { lambda, .. } => lambda,
        }
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        match *self {
            RegressorSpec::Ridge { .. } => RegressorSpec::Ridge { lambda },
            RegressorSpec::Kernel { kernel, .. } => RegressorSpec::Kernel { lambda, kernel },
        }
    }

    pub fn fit(&self, t: &TrainingSet) -> Result<Predictor> {
        match *self {
            RegressorSpec::Ridge { lambda } => fit_ridge(t, lambda).map(Predictor::Ridge),
            RegressorSpec::Kernel { lambda, kernel } => {
                fit_kernel(t, lambda, kernel).map(|k| Predictor::Kernel(Arc::new(k)))
            }
        }
    }
}
