//! Generalized mutual information of Gaussian codebooks with scaled
//! nearest-neighbor decoding.
//!
//! Everything is expressed through the correlation ratio
//! `Δ_g = E[x g(y)]² / (P E[g(y)²])` and the map `Δ ↦ ½ ln(1/(1-Δ))`.
//! When the scaling parameter is fixed in advance instead of chosen
//! optimally, the rate is the maximum over `γ ≥ 0` of
//!
//! ```text
//! f(γ) = ½ ln(1+γ) - γ/2 - γ²/(1+γ) · E[g²]/(2a²P) + γ · E[xg]/(aP).
//! ```

use log::warn;
use rand::Rng;

use crate::channel::{ChannelModel, TrainingSet};
use crate::error::{Error, Result};
use crate::estimator::{lmmse_predictor, output_moments, MmseEstimator, MomentOracle};
use crate::regress::Predictor;

/// Values of `Δ` at or above one are clamped here.
pub const DELTA_CLAMP: f64 = 1.0 - 1e-12;

/// Tolerance in `γ` of the golden-section search.
pub const GAMMA_TOL: f64 = 1e-10;

/// The bracket is not expanded past this `γ`.
pub const GAMMA_CAP: f64 = 1e15;

/// Below this `E[g²]` a predictor is treated as identically zero.
pub const MIN_G2: f64 = 1e-300;

/// Minimum number of Monte Carlo samples for [`delta_of_predictor`].
pub const MIN_EVAL_SAMPLES: usize = 1000;

const BATCHES: usize = 20;

/// A GMI together with the parameters that achieve it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmiResult {
    pub delta: f64,
    pub gmi_nats: f64,
    pub a_opt: f64,
    pub gamma_opt: f64,
    /// Set when `Δ` had to be clamped below one or the `γ` search hit its cap.
    pub clamped: bool,
}

impl GmiResult {
    pub fn gmi_bits(&self) -> f64 {
        nats_to_bits(self.gmi_nats)
    }
}

/// Second-order statistics of an output-processing function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentPair {
    /// `E[x g(y)]`.
    pub e_xg: f64,
    /// `E[g(y)²]`.
    pub e_g2: f64,
    /// Second moment of the input.
    pub p_hat: f64,
}

impl MomentPair {
    pub fn delta(&self) -> Result<f64> {
        if !(self.e_g2 >= MIN_G2) {
            return Err(Error::ZeroPredictor(self.e_g2));
        }
        Ok(self.e_xg * self.e_xg / (self.p_hat * self.e_g2))
    }
}

/// Anything that maps a channel output to a real estimate of the input.
pub trait OutputProcessor {
    fn process(&self, y: &[f64]) -> Result<f64>;
}

impl OutputProcessor for Predictor {
    fn process(&self, y: &[f64]) -> Result<f64> {
        self.predict(y)
    }
}

impl<F: Fn(&[f64]) -> f64> OutputProcessor for F {
    fn process(&self, y: &[f64]) -> Result<f64> {
        Ok(self(y))
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `½ ln(1/(1-Δ))` together with a flag telling whether `Δ` was clamped.
pub fn gmi_from_delta_flagged(delta: f64) -> Result<(f64, bool)> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("correlation ratio {delta} is negative")));
    }
    let (d, clamped) = if delta >= 1.0 {
        warn!("correlation ratio {delta} clamped to {DELTA_CLAMP}");
        (DELTA_CLAMP, true)
    } else {
        (delta, false)
    };
    Ok((-0.5 * (-d).ln_1p(), clamped))
}

/// `½ ln(1/(1-Δ))` in nats.
pub fn gmi_from_delta(delta: f64) -> Result<f64> {
    gmi_from_delta_flagged(delta).map(|(v, _)| v)
}

/// `E[x g] / P`.
pub fn optimal_scaling(m: &MomentPair) -> f64 {
    m.e_xg / m.p_hat
}

/// Sample moments of `g` on a fixed set of pairs; `p_hat` is the sample
/// second moment of the inputs.
pub fn empirical_moments<G: OutputProcessor + ?Sized>(g: &G, set: &TrainingSet) -> Result<MomentPair> {
    if set.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let mut xg = 0.0;
    let mut g2 = 0.0;
    let mut x2 = 0.0;
    for (x, y) in set.iter() {
        let v = g.process(y)?;
        xg += x * v;
        g2 += v * v;
        x2 += x * x;
    }
    let n = set.len() as f64;
    Ok(MomentPair { e_xg: xg / n, e_g2: g2 / n, p_hat: x2 / n })
}

/// Monte Carlo estimate of a predictor's correlation ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorDelta {
    pub moments: MomentPair,
    pub delta: f64,
    /// Batch-means standard error of `delta`.
    pub delta_se: f64,
}

/// Estimates `E[xg]`, `E[g²]` and `Δ_g` from fresh draws of the channel.
pub fn delta_of_predictor<G, R>(model: &ChannelModel, g: &G, eval_samples: usize, rng: &mut R) -> Result<PredictorDelta>
where
    G: OutputProcessor + ?Sized,
    R: Rng + ?Sized,
{
    if eval_samples < MIN_EVAL_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_EVAL_SAMPLES, got: eval_samples });
    }
    let mut y = vec![0.0; model.dim()];
    let mut sums = [[0.0f64; 3]; BATCHES];
    for i in 0..eval_samples {
        let x = model.draw_input(rng);
        model.sample_into(x, rng, &mut y);
        let v = g.process(&y)?;
        let s = &mut sums[i * BATCHES / eval_samples];
        s[0] += x * v;
        s[1] += v * v;
        s[2] += x * x;
    }
    let n = eval_samples as f64;
    let total = |k: usize| sums.iter().map(|s| s[k]).sum::<f64>() / n;
    let moments = MomentPair { e_xg: total(0), e_g2: total(1), p_hat: total(2) };
    let delta = moments.delta()?;
    let batch: Vec<f64> = sums
        .iter()
        .map(|s| if s[1] > 0.0 { s[0] * s[0] / (s[2] * s[1]) } else { 0.0 })
        .collect();
    let mean = batch.iter().sum::<f64>() / BATCHES as f64;
    let var = batch.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(PredictorDelta { moments, delta, delta_se: (var / BATCHES as f64).sqrt() })
}

fn from_mse(power: f64, mse: f64) -> GmiResult {
    let delta = 1.0 - mse / power;
    let clamped = !(mse > 0.0);
    let gmi_nats = if clamped { -0.5 * (1.0 - DELTA_CLAMP).ln() } else { 0.5 * (power / mse).ln() };
    GmiResult { delta: delta.min(DELTA_CLAMP), gmi_nats, a_opt: delta, gamma_opt: delta / (1.0 - delta), clamped }
}

/// GMI of LMMSE output processing.
pub fn gmi_lmmse(model: &ChannelModel) -> Result<GmiResult> {
    gmi_lmmse_with(model, MomentOracle::default())
}

pub fn gmi_lmmse_with(model: &ChannelModel, oracle: MomentOracle) -> Result<GmiResult> {
    let sol = lmmse_predictor(model, oracle)?;
    Ok(from_mse(model.power(), sol.mse))
}

/// GMI of conditional-mean output processing.
pub fn gmi_mmse(model: &ChannelModel) -> Result<GmiResult> {
    gmi_mmse_with(&MmseEstimator::new(model)?)
}

pub fn gmi_mmse_with(est: &MmseEstimator) -> Result<GmiResult> {
    Ok(from_mse(est.model().power(), est.mmse()?))
}

/// Effective SNR of the Bussgang linearization of a scalar-output channel.
pub fn bussgang_snr(model: &ChannelModel) -> Result<f64> {
    if model.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: model.dim() });
    }
    let (e_xy, e_yy) = output_moments(model, MomentOracle::default())?;
    let c = e_xy[0] * e_xy[0];
    Ok(c / (model.power() * e_yy[(0, 0)] - c))
}

/// `f(γ)` rewritten as `½ ln(1+γ) + Cγ + Aγ/(1+γ)`, which avoids the
/// cancellation between `γ/2` and `γ²/(1+γ)` terms at large `γ`.
#[derive(Debug, Clone, Copy)]
pub struct GammaObjective {
    a: f64,
    c: f64,
}

impl GammaObjective {
    /// Objective with `e_g2 / (2a²P)` = `quad` and `e_xg / (aP)` = `lin`.
    pub fn new(quad: f64, lin: f64) -> Self {
        GammaObjective { a: quad, c: lin - 0.5 - quad }
    }

    pub fn eval(&self, gamma: f64) -> f64 {
        0.5 * gamma.ln_1p() + self.c * gamma + self.a * gamma / (1.0 + gamma)
    }

    /// Maximum over `γ ≥ 0`: `(value, γ*, capped)`. The value is never
    /// below `f(0) = 0`.
    pub fn maximize(&self) -> (f64, f64, bool) {
        let f = |g: f64| self.eval(g);
        let mut hi = 1.0;
        while f(hi) >= f(0.5 * hi) && hi < GAMMA_CAP {
            hi *= 2.0;
        }
        let capped = hi >= GAMMA_CAP && f(hi) >= f(0.5 * hi);
        if capped {
            warn!("rate objective still increasing at γ = {hi:e}");
            return (f(hi).max(0.0), hi, true);
        }
        let (g, v) = golden_section_max(f, 0.0, hi, GAMMA_TOL);
        if v > 0.0 {
            (v, g, false)
        } else {
            (0.0, 0.0, false)
        }
    }
}

/// Golden-section search for the maximizer of a unimodal function.
pub fn golden_section_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Rate achievable with a scaling parameter `a` fixed in advance.
pub fn gmi_scenario_a(m: &MomentPair, a: f64) -> Result<GmiResult> {
    if !(m.p_hat > 0.0) {
        return Err(Error::Domain(format!("input power {} must be positive", m.p_hat)));
    }
    if a == 0.0 || m.e_xg == 0.0 {
        return Ok(GmiResult { delta: 0.0, gmi_nats: 0.0, a_opt: a, gamma_opt: 0.0, clamped: false });
    }
    let quad = m.e_g2 / (2.0 * a * a * m.p_hat);
    let lin = m.e_xg / (a * m.p_hat);
    let (value, gamma, clamped) = GammaObjective::new(quad, lin).maximize();
    Ok(GmiResult { delta: -(-2.0 * value).exp_m1(), gmi_nats: value, a_opt: a, gamma_opt: gamma, clamped })
}

/// Rate achievable with the optimal scaling parameter.
pub fn gmi_scenario_b(m: &MomentPair) -> Result<GmiResult> {
    let delta = m.delta()?;
    let (gmi_nats, clamped) = gmi_from_delta_flagged(delta)?;
    let d = delta.min(DELTA_CLAMP);
    Ok(GmiResult { delta: d, gmi_nats, a_opt: optimal_scaling(m), gamma_opt: d / (1.0 - d), clamped })
}

/// Lower bound on the fixed-scaling rate in terms of the two correlation
/// ratios.
pub fn lower_bound_a(delta_a: f64, delta_b: f64) -> Result<f64> {
    if !(delta_a > 0.0 && delta_a < 1.0) {
        return Err(Error::Domain(format!("delta_A = {delta_a} outside (0, 1)")));
    }
    Ok(-0.5 * (-delta_a).ln_1p() - (delta_a - delta_b) / (2.0 * (1.0 - delta_a)))
}
