//! SIMO channel laws, sampling and training data.
//!
//! All channels take a real scalar input `x` and produce a `p`-dimensional
//! output. The linear channel outputs `h x + z`; the quantized ones output
//! the componentwise sign of `h_i x + z_i (+ b_i)`, with `z ~ N(0, σ² I)`.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::special::norm_quantile;

/// Which channel law a [`ChannelModel`] follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Scalar additive Gaussian noise, `h = [1]`.
    Awgn,
    /// `y = h x + z`.
    SimoLinear,
    /// `y_i = sign(h_i x + z_i)`.
    SimoOnebit,
    /// `y_i = sign(h_i x + z_i + b_i)` with heuristic dither biases.
    SimoOnebitDithered,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 4] = [
        ChannelKind::Awgn,
        ChannelKind::SimoLinear,
        ChannelKind::SimoOnebit,
        ChannelKind::SimoOnebitDithered,
    ];

    pub fn is_quantized(self) -> bool {
        matches!(self, ChannelKind::SimoOnebit | ChannelKind::SimoOnebitDithered)
    }

    pub fn name(self) -> &'static str {
        match self {
            ChannelKind::Awgn => "awgn",
            ChannelKind::SimoLinear => "simo_linear",
            ChannelKind::SimoOnebit => "simo_onebit",
            ChannelKind::SimoOnebitDithered => "simo_onebit_dithered",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown channel kind `{s}`")))
    }
}

/// A fully specified channel law. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    kind: ChannelKind,
    h: Vec<f64>,
    sigma2: f64,
    power: f64,
    alpha: f64,
    b: Vec<f64>,
}

impl ChannelModel {
    /// Builds a model. `alpha` is only used by the dithered kind, whose
    /// biases are derived from `(h, power, alpha)`.
    pub fn new(kind: ChannelKind, h: Vec<f64>, sigma2: f64, power: f64, alpha: f64) -> Result<Self> {
        if h.is_empty() {
            return Err(Error::InvalidModel("channel vector h is empty".into()));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("channel vector h has non-finite entries".into()));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!("noise variance {sigma2} must be positive")));
        }
        if !(power > 0.0 && power.is_finite()) {
            return Err(Error::InvalidModel(format!("power {power} must be positive")));
        }
        if kind == ChannelKind::Awgn && h != [1.0] {
            return Err(Error::InvalidModel("awgn requires h = [1]".into()));
        }
        let b = if kind == ChannelKind::SimoOnebitDithered {
            if !alpha.is_finite() {
                return Err(Error::InvalidModel(format!("dither parameter {alpha} is not finite")));
            }
            dither_biases(&h, power, alpha)
        } else {
            vec![0.0; h.len()]
        };
        Ok(ChannelModel { kind, h, sigma2, power, alpha, b })
    }

    pub fn awgn(power: f64, sigma2: f64) -> Result<Self> {
        Self::new(ChannelKind::Awgn, vec![1.0], sigma2, power, 0.0)
    }

    /// Same channel with `P` rescaled so that `‖h‖²P/σ²` hits `snr_db`.
    /// Dither biases are recomputed since they scale with `√P`.
    pub fn with_snr_db(&self, snr_db: f64) -> Result<Self> {
        let power = power_for_snr_db(&self.h, self.sigma2, snr_db)?;
        Self::new(self.kind, self.h.clone(), self.sigma2, power, self.alpha)
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Dither biases; all zero unless the kind is dithered.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// Output dimension `p`.
    pub fn dim(&self) -> usize {
        self.h.len()
    }

    pub fn h_norm2(&self) -> f64 {
        self.h.iter().map(|v| v * v).sum()
    }

    pub fn snr_db(&self) -> f64 {
        snr_db(self)
    }

    /// Draws a channel input from `N(0, P)`.
    pub fn draw_input<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.power.sqrt() * rng.sample::<f64, _>(StandardNormal)
    }

    /// Writes one channel output for input `x` into `out` (length `p`).
    pub fn sample_into<R: Rng + ?Sized>(&self, x: f64, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim());
        let sigma = self.sigma();
        let quantized = self.kind.is_quantized();
        for ((o, &hi), &bi) in out.iter_mut().zip(&self.h).zip(&self.b) {
            let z: f64 = sigma * rng.sample::<f64, _>(StandardNormal);
            let v = hi * x + z + bi;
            *o = if quantized { quantize(v) } else { v };
        }
    }

    /// One channel output for input `x`.
    pub fn sample<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(x, rng, &mut out);
        out
    }
}

/// One-bit quantizer; zero maps to `+1`.
#[inline]
pub fn quantize(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Heuristic dither biases `b_i = α √P h_i u_i` with `Φ(u_i) = i / (p + 1)`.
pub fn dither_biases(h: &[f64], power: f64, alpha: f64) -> Vec<f64> {
    let p = h.len();
    let scale = alpha * power.sqrt();
    h.iter()
        .enumerate()
        .map(|(i, &hi)| {
            let u = norm_quantile((i + 1) as f64 / (p + 1) as f64);
            scale * hi * u
        })
        .collect()
}

/// `10 log10(‖h‖² P / σ²)`.
pub fn snr_db(model: &ChannelModel) -> f64 {
    10.0 * (model.h_norm2() * model.power / model.sigma2).log10()
}

/// The power `P` giving `‖h‖²P/σ²` equal to `snr_db`.
pub fn power_for_snr_db(h: &[f64], sigma2: f64, snr_db: f64) -> Result<f64> {
    let norm2: f64 = h.iter().map(|v| v * v).sum();
    if !(norm2 > 0.0) {
        return Err(Error::InvalidModel("channel vector h is zero".into()));
    }
    Ok(sigma2 * 10f64.powf(snr_db / 10.0) / norm2)
}

/// `L` input/output pairs with a common output dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    xs: Vec<f64>,
    ys: Vec<f64>,
    dim: usize,
}

impl TrainingSet {
    /// Builds a set from inputs and row-major outputs (`xs.len() × dim`).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidModel("output dimension must be at least 1".into()));
        }
        if xs.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if ys.len() != xs.len() * dim {
            return Err(Error::DimensionMismatch { expected: xs.len() * dim, got: ys.len() });
        }
        Ok(TrainingSet { xs, ys, dim })
    }

    pub fn from_pairs(pairs: &[(f64, Vec<f64>)]) -> Result<Self> {
        let dim = pairs.first().map(|(_, y)| y.len()).unwrap_or(0);
        let mut ys = Vec::with_capacity(pairs.len() * dim);
        for (_, y) in pairs {
            if y.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: y.len() });
            }
            ys.extend_from_slice(y);
        }
        Self::new(pairs.iter().map(|(x, _)| *x).collect(), ys, dim)
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn xs(&self) -> &[f64] {
        &self.xs
    }

    pub fn x(&self, i: usize) -> f64 {
        self.xs[i]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.ys[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.xs.iter().copied().zip(self.ys.chunks_exact(self.dim))
    }

    /// Copies the pairs covered by `ranges`, in order.
    pub fn subset(&self, ranges: &[Range<usize>]) -> TrainingSet {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in ranges {
            xs.extend_from_slice(&self.xs[r.clone()]);
            ys.extend_from_slice(&self.ys[r.start * self.dim..r.end * self.dim]);
        }
        TrainingSet { xs, ys, dim: self.dim }
    }

    /// Reorders the pairs: entry `i` of the result is pair `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> TrainingSet {
        let mut xs = Vec::with_capacity(order.len());
        let mut ys = Vec::with_capacity(order.len() * self.dim);
        for &i in order {
            xs.push(self.xs[i]);
            ys.extend_from_slice(self.y(i));
        }
        TrainingSet { xs, ys, dim: self.dim }
    }

    /// `(1/L) Σ x_l²`.
    pub fn input_second_moment(&self) -> f64 {
        self.xs.iter().map(|x| x * x).sum::<f64>() / self.len() as f64
    }
}

/// Draws `len` i.i.d. pairs with `x ~ N(0, P)` through `model`.
pub fn draw_training_set<R: Rng + ?Sized>(model: &ChannelModel, len: usize, rng: &mut R) -> Result<TrainingSet> {
    if len == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let p = model.dim();
    let mut xs = Vec::with_capacity(len);
    let mut ys = vec![0.0; len * p];
    for row in ys.chunks_exact_mut(p) {
        let x = model.draw_input(rng);
        model.sample_into(x, rng, row);
        xs.push(x);
    }
    TrainingSet::new(xs, ys, p)
}
