//! Model-aware estimators of the channel input.
//!
//! For the linear channels everything is closed form. For the one-bit
//! channels the conditional mean is a ratio of one-dimensional integrals
//! over the input,
//!
//! ```text
//! E[x | y] = ∫ u f(u) Π F(y_i (h_i u + b_i) / σ) du / ∫ f(u) Π F(...) du,
//! ```
//!
//! with `f` the `N(0, P)` density and `F` the standard normal CDF, and the
//! output moments needed by the linear estimator reduce to one-dimensional
//! integrals as well because the noise is independent across components.
//! Products of CDFs are accumulated in the log domain.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::erf::erf;

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::quadrature::{composite_normal_rule, Feature, QuadratureRule, DEFAULT_PANEL_ORDER};
use crate::regress::Predictor;
use crate::special::log_norm_cdf;

/// Largest output dimension accepted by the `2^p` pattern enumeration.
pub const MAX_ENUMERATION_DIM: usize = 20;

/// Up to this dimension all `2^p` conditional means are tabulated eagerly.
const TABLE_DIM: usize = 10;

/// Moment matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Denominators below this are treated as an underflowed posterior.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Log-CDF factors are floored here; any node that low contributes exactly
/// zero next to a posterior that has not underflowed.
const LOG_FLOOR: f64 = -1e4;

/// Default Monte Carlo size of the moment oracle.
pub const DEFAULT_ORACLE_SAMPLES: usize = 1_000_000;

/// Source of `E[xy]` and `E[yyᵀ]` for quantized channels. Linear channels
/// always use the closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentOracle {
    /// One-dimensional quadrature over the input.
    Quadrature { order: usize },
    /// Seeded Monte Carlo over `samples` input/output draws.
    MonteCarlo { samples: usize, seed: u64 },
}

impl Default for MomentOracle {
    fn default() -> Self {
        MomentOracle::Quadrature { order: DEFAULT_PANEL_ORDER }
    }
}

/// Transition points of the quantizer CDF factors, in units of `√P`.
pub fn model_features(model: &ChannelModel) -> Vec<Feature> {
    if !model.kind().is_quantized() {
        return Vec::new();
    }
    let sqrt_p = model.power().sqrt();
    let sigma = model.sigma();
    model
        .h()
        .iter()
        .zip(model.b())
        .filter(|(h, _)| **h != 0.0)
        .map(|(&h, &b)| Feature { center: -b / (h * sqrt_p), width: sigma / (h.abs() * sqrt_p) })
        .collect()
}

/// Quadrature rule adapted to a channel's posterior integrals.
pub fn model_rule(model: &ChannelModel, order: usize) -> Result<QuadratureRule> {
    composite_normal_rule(model.power(), &model_features(model), order)
}

/// `E[xy]` and `E[yyᵀ]` of a channel.
pub fn output_moments(model: &ChannelModel, oracle: MomentOracle) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let p = model.dim();
    let pw = model.power();
    if !model.kind().is_quantized() {
        let h = DVector::from_column_slice(model.h());
        let e_xy = &h * pw;
        let e_yy = &h * h.transpose() * pw + DMatrix::identity(p, p) * model.sigma2();
        return Ok((e_xy, e_yy));
    }
    match oracle {
        MomentOracle::Quadrature { order } => {
            let rule = model_rule(model, order)?;
            let sigma = model.sigma();
            let sqrt2 = std::f64::consts::SQRT_2;
            // E[y_i | x = u] = 2Φ((h_i u + b_i)/σ) - 1
            let cond_mean = |i: usize, u: f64| erf((model.h()[i] * u + model.b()[i]) / (sigma * sqrt2));
            let mut e_xy = DVector::zeros(p);
            let mut e_yy = DMatrix::identity(p, p);
            for i in 0..p {
                e_xy[i] = rule.integrate(|u| u * cond_mean(i, u));
                for j in 0..i {
                    let v = rule.integrate(|u| cond_mean(i, u) * cond_mean(j, u));
                    e_yy[(i, j)] = v;
                    e_yy[(j, i)] = v;
                }
            }
            Ok((e_xy, e_yy))
        }
        MomentOracle::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::TooFewSamples { needed: 1, got: 0 });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut e_xy = DVector::zeros(p);
            let mut e_yy = DMatrix::zeros(p, p);
            let mut y = vec![0.0; p];
            for _ in 0..samples {
                let x = model.draw_input(&mut rng);
                model.sample_into(x, &mut rng, &mut y);
                for i in 0..p {
                    e_xy[i] += x * y[i];
                    for j in 0..=i {
                        e_yy[(i, j)] += y[i] * y[j];
                    }
                }
            }
            let n = samples as f64;
            e_xy /= n;
            for i in 0..p {
                for j in 0..=i {
                    let v = e_yy[(i, j)] / n;
                    e_yy[(i, j)] = v;
                    e_yy[(j, i)] = v;
                }
            }
            Ok((e_xy, e_yy))
        }
    }
}

/// The linear MMSE estimator of a channel.
#[derive(Debug, Clone)]
pub struct LmmseSolution {
    /// `E[yyᵀ]⁻¹ E[xy]`.
    pub beta: Vec<f64>,
    /// `E[xy]ᵀ E[yyᵀ]⁻¹ E[xy] / P`.
    pub delta: f64,
    /// Mean squared error of the estimator.
    pub mse: f64,
    pub e_xy: Vec<f64>,
}

impl LmmseSolution {
    pub fn predictor(&self) -> Predictor {
        Predictor::Linear(self.beta.clone())
    }
}

/// Solves `A β = rhs` for a symmetric positive definite `A`, rejecting
/// matrices whose condition number exceeds [`MAX_CONDITION`].
pub(crate) fn solve_spd(a: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = a.clone().symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(Error::SingularMoments { cond });
    }
    let chol = a.clone().cholesky().ok_or(Error::SingularMoments { cond })?;
    Ok(chol.solve(rhs))
}

/// LMMSE estimator `g(y) = E[xy]ᵀ E[yyᵀ]⁻¹ y` and its `Δ`.
pub fn lmmse_predictor(model: &ChannelModel, oracle: MomentOracle) -> Result<LmmseSolution> {
    let (e_xy, e_yy) = output_moments(model, oracle)?;
    let beta = solve_spd(&e_yy, &e_xy)?;
    let pw = model.power();
    // J(β) = P - 2βᵀe + βᵀRβ is stationary at the solution, so solve
    // errors enter only at second order.
    let mse = (pw - 2.0 * beta.dot(&e_xy) + (&e_yy * &beta).dot(&beta)).max(0.0);
    Ok(LmmseSolution {
        beta: beta.iter().copied().collect(),
        delta: 1.0 - mse / pw,
        mse,
        e_xy: e_xy.iter().copied().collect(),
    })
}

/// Conditional-mean estimator `E[x | y]` for a fixed channel.
#[derive(Debug, Clone)]
pub struct MmseEstimator {
    model: ChannelModel,
    quantized: Option<QuantizedPosterior>,
}

#[derive(Debug, Clone)]
struct QuantizedPosterior {
    rule: QuadratureRule,
    log_w: Vec<f64>,
    /// `ln F(-(h_i u_k + b_i)/σ)`, row-major nodes × p.
    log_neg: Vec<f64>,
    /// `ln F(+...) - ln F(-...)`.
    flip: Vec<f64>,
    /// Conditional mean and log denominator per pattern.
    table: Option<Vec<(f64, f64)>>,
}

/// Log-domain posterior summary of one sign pattern.
struct PatternIntegrals {
    /// `ln ∫ f Π F`.
    log_den: f64,
    /// Numerator over denominator.
    mean: f64,
}

impl QuantizedPosterior {
    fn new(model: &ChannelModel, order: usize) -> Result<Self> {
        let rule = model_rule(model, order)?;
        let p = model.dim();
        let sigma = model.sigma();
        let n = rule.len();
        let mut log_neg = Vec::with_capacity(n * p);
        let mut flip = Vec::with_capacity(n * p);
        for &u in rule.nodes() {
            for (&h, &b) in model.h().iter().zip(model.b()) {
                let a = (h * u + b) / sigma;
                let lp = log_norm_cdf(a).max(LOG_FLOOR);
                let ln = log_norm_cdf(-a).max(LOG_FLOOR);
                log_neg.push(ln);
                flip.push(lp - ln);
            }
        }
        let log_w = rule.weights().iter().map(|w| w.ln()).collect();
        let mut post = QuantizedPosterior { rule, log_w, log_neg, flip, table: None };
        if p <= TABLE_DIM {
            let floor = MIN_DENOMINATOR.ln();
            let mut table = vec![(0.0, 0.0); 1 << p];
            post.for_each_pattern(p, |bits, ints| {
                let mean = if ints.log_den >= floor { ints.mean } else { f64::NAN };
                table[bits] = (mean, ints.log_den);
            });
            post.table = Some(table);
        }
        Ok(post)
    }

    fn integrals(&self, log_terms: &[f64]) -> PatternIntegrals {
        let m = log_terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut den = 0.0;
        let mut num = 0.0;
        for (&l, &u) in log_terms.iter().zip(self.rule.nodes()) {
            let e = (l - m).exp();
            den += e;
            num += u * e;
        }
        PatternIntegrals { log_den: m + den.ln(), mean: num / den }
    }

    fn pattern(&self, p: usize, bits: usize) -> PatternIntegrals {
        let terms: Vec<f64> = (0..self.rule.len())
            .map(|k| {
                let row = k * p;
                let mut s = self.log_w[k];
                for i in 0..p {
                    s += self.log_neg[row + i];
                    if bits >> i & 1 == 1 {
                        s += self.flip[row + i];
                    }
                }
                s
            })
            .collect();
        self.integrals(&terms)
    }

    /// Visits all `2^p` sign patterns in Gray-code order. Bit `i` set means
    /// `y_i = +1`.
    fn for_each_pattern(&self, p: usize, mut visit: impl FnMut(usize, &PatternIntegrals)) {
        let n = self.rule.len();
        let mut terms: Vec<f64> = (0..n)
            .map(|k| self.log_w[k] + self.log_neg[k * p..(k + 1) * p].iter().sum::<f64>())
            .collect();
        let mut bits = 0usize;
        visit(bits, &self.integrals(&terms));
        for step in 1..(1usize << p) {
            let j = step.trailing_zeros() as usize;
            bits ^= 1 << j;
            let sign = if bits >> j & 1 == 1 { 1.0 } else { -1.0 };
            for (k, t) in terms.iter_mut().enumerate() {
                *t += sign * self.flip[k * p + j];
            }
            visit(bits, &self.integrals(&terms));
        }
    }
}

impl MmseEstimator {
    pub fn new(model: &ChannelModel) -> Result<Self> {
        Self::with_order(model, DEFAULT_PANEL_ORDER)
    }

    /// `order` is the number of Gauss–Legendre points per quadrature panel.
    pub fn with_order(model: &ChannelModel, order: usize) -> Result<Self> {
        let quantized = if model.kind().is_quantized() {
            Some(QuantizedPosterior::new(model, order)?)
        } else {
            None
        };
        Ok(MmseEstimator { model: model.clone(), quantized })
    }

    pub fn model(&self) -> &ChannelModel {
        &self.model
    }

    /// Quadrature rule used for the posterior integrals (quantized kinds).
    pub fn rule(&self) -> Option<&QuadratureRule> {
        self.quantized.as_ref().map(|q| &q.rule)
    }

    /// `E[x | y]`.
    pub fn estimate(&self, y: &[f64]) -> Result<f64> {
        let p = self.model.dim();
        if y.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: y.len() });
        }
        match &self.quantized {
            None => {
                let pw = self.model.power();
                let hy: f64 = self.model.h().iter().zip(y).map(|(h, v)| h * v).sum();
                Ok(pw / (self.model.sigma2() + pw * self.model.h_norm2()) * hy)
            }
            Some(post) => {
                let bits = pattern_index(y)?;
                if let Some(table) = &post.table {
                    let (mean, log_den) = table[bits];
                    if mean.is_nan() {
                        return Err(Error::DegeneratePosterior { log_denominator: log_den });
                    }
                    return Ok(mean);
                }
                let ints = post.pattern(p, bits);
                if ints.log_den < MIN_DENOMINATOR.ln() {
                    return Err(Error::DegeneratePosterior { log_denominator: ints.log_den });
                }
                Ok(ints.mean)
            }
        }
    }

    /// `var E[x | y]`, by exhaustive enumeration of sign patterns for the
    /// quantized kinds.
    pub fn var_conditional_mean(&self) -> Result<f64> {
        let p = self.model.dim();
        let pw = self.model.power();
        match &self.quantized {
            None => {
                let g = pw * self.model.h_norm2();
                Ok(pw * g / (g + self.model.sigma2()))
            }
            Some(post) => {
                if p > MAX_ENUMERATION_DIM {
                    return Err(Error::DimensionTooLarge { p, max: MAX_ENUMERATION_DIM });
                }
                let floor = MIN_DENOMINATOR.ln();
                let mut var = 0.0;
                post.for_each_pattern(p, |_, ints| {
                    if ints.log_den >= floor {
                        var += ints.log_den.exp() * ints.mean * ints.mean;
                    }
                });
                Ok(var)
            }
        }
    }

    /// Mean squared error `P - var E[x|y]` of the conditional mean.
    pub fn mmse(&self) -> Result<f64> {
        match &self.quantized {
            None => {
                let pw = self.model.power();
                Ok(pw * self.model.sigma2() / (pw * self.model.h_norm2() + self.model.sigma2()))
            }
            Some(_) => Ok((self.model.power() - self.var_conditional_mean()?).max(0.0)),
        }
    }
}

/// Pattern index of a `±1` vector; bit `i` is set when `y_i = +1`.
pub fn pattern_index(y: &[f64]) -> Result<usize> {
    if y.len() >= usize::BITS as usize {
        return Err(Error::DimensionTooLarge { p: y.len(), max: usize::BITS as usize - 1 });
    }
    let mut bits = 0usize;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 {
            bits |= 1 << i;
        } else if v != -1.0 {
            return Err(Error::Domain(format!("quantized output component {v} is not ±1")));
        }
    }
    Ok(bits)
}

/// `E[x | y]` with the default quadrature.
pub fn mmse_estimate(model: &ChannelModel, y: &[f64]) -> Result<f64> {
    MmseEstimator::new(model)?.estimate(y)
}

/// `var E[x | y]` with the default quadrature.
pub fn var_conditional_mean(model: &ChannelModel) -> Result<f64> {
    MmseEstimator::new(model)?.var_conditional_mean()
}

/// Draws `n` i.i.d. pairs and returns them; a small helper for tests and
/// experiment code that needs raw samples.
pub fn draw_pairs<R: Rng + ?Sized>(model: &ChannelModel, n: usize, rng: &mut R) -> Vec<(f64, Vec<f64>)> {
    (0..n)
        .map(|_| {
            let x = model.draw_input(rng);
            (x, model.sample(x, rng))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelKind;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const APPENDIX_H: [f64; 8] = [0.3615, 0.2151, 0.2205, 0.6767, 0.5014, 0.1129, 0.1763, 0.1456];

    fn onebit_scalar() -> ChannelModel {
        ChannelModel::new(ChannelKind::SimoOnebit, vec![1.0], 1.0, 100.0, 0.0).unwrap()
    }

    #[test]
    fn awgn_lmmse_closed_form() {
        let m = ChannelModel::awgn(100.0, 1.0).unwrap();
        let s = lmmse_predictor(&m, MomentOracle::default()).unwrap();
        assert_abs_diff_eq!(s.delta, 100.0 / 101.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.beta[0], 100.0 / 101.0, epsilon = 1e-12);
    }

    #[test]
    fn simo_linear_lmmse_matches_woodbury() {
        let m = ChannelModel::new(ChannelKind::SimoLinear, APPENDIX_H.to_vec(), 1.0, 100.0, 0.0).unwrap();
        let s = lmmse_predictor(&m, MomentOracle::default()).unwrap();
        let g = 100.0 * m.h_norm2();
        assert_abs_diff_eq!(s.delta, g / (g + 1.0), epsilon = 1e-12);
    }

    #[test]
    fn onebit_scalar_lmmse_by_quadrature() {
        let s = lmmse_predictor(&onebit_scalar(), MomentOracle::default()).unwrap();
        let expected = 2.0 / PI * 100.0 / 101.0;
        assert_abs_diff_eq!(s.delta, expected, epsilon = 1e-9);
    }

    #[test]
    fn onebit_scalar_lmmse_by_monte_carlo() {
        let s = lmmse_predictor(&onebit_scalar(), MomentOracle::MonteCarlo { samples: 200_000, seed: 5 }).unwrap();
        assert_abs_diff_eq!(s.delta, 2.0 / PI * 100.0 / 101.0, epsilon = 0.01);
    }

    #[test]
    fn singular_moments_rejected() {
        let m = ChannelModel::new(ChannelKind::SimoOnebit, vec![1.0, 1.0], 1e-30, 100.0, 0.0).unwrap();
        let err = lmmse_predictor(&m, MomentOracle::default()).unwrap_err();
        assert!(matches!(err, Error::SingularMoments { .. }), "{err:?}");
    }

    #[test]
    fn awgn_mmse_estimate() {
        let m = ChannelModel::awgn(100.0, 1.0).unwrap();
        assert_abs_diff_eq!(mmse_estimate(&m, &[2.02]).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn onebit_scalar_mmse_estimate() {
        let expected = (2.0 / PI).sqrt() * 100.0 / 101f64.sqrt();
        let est = MmseEstimator::new(&onebit_scalar()).unwrap();
        assert_abs_diff_eq!(est.estimate(&[1.0]).unwrap(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(est.estimate(&[-1.0]).unwrap(), -expected, epsilon = 1e-9);
        assert!(est.estimate(&[0.5]).is_err());
        assert!(est.estimate(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn onebit_estimates_are_odd() {
        let m = ChannelModel::new(ChannelKind::SimoOnebit, APPENDIX_H.to_vec(), 1.0, 100.0, 0.0).unwrap();
        let est = MmseEstimator::new(&m).unwrap();
        let y = [1.0, -1.0, 1.0, 1.0, -1.0, -1.0, 1.0, 1.0];
        let ny: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_abs_diff_eq!(est.estimate(&y).unwrap(), -est.estimate(&ny).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn var_conditional_mean_examples() {
        let lin = ChannelModel::new(ChannelKind::SimoLinear, vec![1.0], 1.0, 100.0, 0.0).unwrap();
        assert_abs_diff_eq!(var_conditional_mean(&lin).unwrap(), 100.0 * 100.0 / 101.0, epsilon = 1e-9);
        let v = var_conditional_mean(&onebit_scalar()).unwrap();
        assert_abs_diff_eq!(v, 2.0 / PI * 1e4 / 101.0, epsilon = 1e-7);
        for kind in [ChannelKind::SimoOnebit, ChannelKind::SimoOnebitDithered] {
            let m = ChannelModel::new(kind, APPENDIX_H.to_vec(), 1.0, 100.0, 1.34).unwrap();
            let v = var_conditional_mean(&m).unwrap();
            assert!(v > 0.0 && v < 100.0, "{kind}: {v}");
        }
    }

    #[test]
    fn table_and_direct_evaluation_agree() {
        let m = ChannelModel::new(ChannelKind::SimoOnebitDithered, APPENDIX_H.to_vec(), 1.0, 100.0, 1.34).unwrap();
        let est = MmseEstimator::new(&m).unwrap();
        let post = est.quantized.as_ref().unwrap();
        let table = post.table.as_ref().unwrap();
        for bits in [0usize, 1, 77, 128, 255] {
            assert_abs_diff_eq!(table[bits].0, post.pattern(8, bits).mean, epsilon = 1e-9);
        }
    }

    #[test]
    fn dimension_cap() {
        let h = vec![0.2; 21];
        let m = ChannelModel::new(ChannelKind::SimoOnebit, h, 1.0, 1.0, 0.0).unwrap();
        let est = MmseEstimator::new(&m).unwrap();
        assert_eq!(est.var_conditional_mean().unwrap_err(), Error::DimensionTooLarge { p: 21, max: 20 });
    }

    #[test]
    fn degenerate_posterior_detected() {
        // Contradictory pattern with noise far below the dither spacing.
        let m = ChannelModel::new(ChannelKind::SimoOnebitDithered, vec![1.0, 1.0, 1.0], 1e-6, 1.0, 1.0).unwrap();
        let est = MmseEstimator::new(&m).unwrap();
        let err = est.estimate(&[1.0, 1.0, -1.0]).unwrap_err();
        assert!(matches!(err, Error::DegeneratePosterior { .. }), "{err:?}");
    }
}
