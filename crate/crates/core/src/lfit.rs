//! Learning a processing function, its scaling and a code rate from
//! training pairs.
//!
//! [`lfit_run`] estimates the moments of the learned predictor by
//! cross-validation and picks a deliberately pessimistic rate through the
//! bias factors `ξ₁ ≥ 1` (on `E[g²]`) and `ξ₂` (on `E[xg]`, below one when
//! the scaling is positive). [`clt_rate`] instead holds out a validation
//! split and applies normal-approximation confidence bounds.

use std::ops::Range;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::TrainingSet;
use crate::error::{Error, Result};
use crate::gmi::{empirical_moments, gmi_scenario_a, GammaObjective, MomentPair, OutputProcessor, MIN_G2};
use crate::regress::{Predictor, RegressorSpec};
use crate::special::erfc_inv;

/// Smallest validation split accepted by [`clt_rate`].
pub const MIN_HOLDOUT: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LfitConfig {
    pub folds: usize,
    pub xi1: f64,
    pub xi2: f64,
    pub regressor: RegressorSpec,
    /// Shuffle the training set with this seed before partitioning.
    pub shuffle_seed: Option<u64>,
}

impl LfitConfig {
    pub fn new(folds: usize, xi1: f64, xi2: f64, regressor: RegressorSpec) -> Self {
        LfitConfig { folds, xi1, xi2, regressor, shuffle_seed: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least 2 folds, got {}", self.folds)));
        }
        if !(self.xi1 >= 1.0 && self.xi1.is_finite()) {
            return Err(Error::Config(format!("xi1 = {} must be at least 1", self.xi1)));
        }
        if !(self.xi2 > 0.0 && self.xi2 < 2.0) {
            return Err(Error::Config(format!("xi2 = {} must lie in (0, 2)", self.xi2)));
        }
        Ok(())
    }
}

/// Conditions met during a run that did not abort it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LfitFlags {
    /// `ξ₂` was on the wrong side of one for the sign of `a_T` and was
    /// replaced by `2 - ξ₂`.
    pub xi2_mirrored: bool,
    /// `a_T` was zero, so the rate is zero.
    pub zero_scaling: bool,
    /// The `γ` search reached its cap.
    pub gamma_capped: bool,
}

#[derive(Debug, Clone)]
pub struct LfitOutput {
    /// Mean of the fold predictors.
    pub predictor: Predictor,
    pub a_t: f64,
    /// Selected rate in nats.
    pub r_t: f64,
    /// Cross-validated moments (before the bias factors).
    pub moments: MomentPair,
    pub gamma: f64,
    pub flags: LfitFlags,
}

/// `q` contiguous folds of `⌊len/q⌋` pairs; a remainder is dropped.
pub fn partition(len: usize, q: usize) -> Result<Vec<Range<usize>>> {
    if q < 2 || q > len {
        return Err(Error::FoldCount { folds: q, len });
    }
    let size = len / q;
    Ok((0..q).map(|k| k * size..(k + 1) * size).collect())
}

/// For fold `k`, the index ranges used to fit its predictor and the range
/// on which that predictor is evaluated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fit: Vec<Range<usize>>,
    pub eval: Range<usize>,
}

pub fn cv_plan(len: usize, q: usize) -> Result<Vec<FoldPlan>> {
    let folds = partition(len, q)?;
    Ok((0..q)
        .map(|k| FoldPlan {
            fit: folds.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, r)| r.clone()).collect(),
            eval: folds[k].clone(),
        })
        .collect())
}

/// Runs the cross-validated learn-then-rate procedure.
pub fn lfit_run(t: &TrainingSet, cfg: &LfitConfig) -> Result<LfitOutput> {
    cfg.validate()?;
    let shuffled;
    let t = match cfg.shuffle_seed {
        Some(seed) => {
            let mut order: Vec<usize> = (0..t.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            shuffled = t.permuted(&order);
            &shuffled
        }
        None => t,
    };
    let plan = cv_plan(t.len(), cfg.folds)?;
    let used = plan.len() * plan[0].eval.len();
    let truncated = t.subset(&[0..used]);

    let mut members = Vec::with_capacity(plan.len());
    let mut xg = 0.0;
    let mut g2 = 0.0;
    for fold in &plan {
        let g = cfg.regressor.fit(&t.subset(&fold.fit))?;
        let m = empirical_moments(&g, &t.subset(std::slice::from_ref(&fold.eval)))?;
        xg += m.e_xg;
        g2 += m.e_g2;
        members.push(g);
    }
    let q = plan.len() as f64;
    let moments = MomentPair { e_xg: xg / q, e_g2: g2 / q, p_hat: truncated.input_second_moment() };
    if !(moments.e_g2 >= MIN_G2) {
        return Err(Error::ZeroPredictor(moments.e_g2));
    }
    let a_t = moments.e_xg / moments.p_hat;
    let predictor = Predictor::Ensemble(members);
    let mut flags = LfitFlags::default();
    if a_t == 0.0 {
        flags.zero_scaling = true;
        return Ok(LfitOutput { predictor, a_t, r_t: 0.0, moments, gamma: 0.0, flags });
    }
    let mut xi2 = cfg.xi2;
    if (a_t > 0.0 && xi2 > 1.0) || (a_t < 0.0 && xi2 < 1.0) {
        warn!("scaling {a_t} has the wrong sign for xi2 = {xi2}; using {}", 2.0 - xi2);
        xi2 = 2.0 - xi2;
        flags.xi2_mirrored = true;
    }
    let biased = MomentPair { e_xg: xi2 * moments.e_xg, e_g2: cfg.xi1 * moments.e_g2, p_hat: moments.p_hat };
    let r = gmi_scenario_a(&biased, a_t)?;
    flags.gamma_capped = r.clamped;
    Ok(LfitOutput { predictor, a_t, r_t: r.gmi_nats, moments, gamma: r.gamma_opt, flags })
}

/// Sample variance with divisor `n - 1`.
pub fn empirical_variance(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    Ok(samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64)
}

#[derive(Debug, Clone)]
pub struct CltOutput {
    pub predictor: Predictor,
    pub a: f64,
    /// Rate in nats.
    pub r_t: f64,
    pub f_y: f64,
    pub f_xy: f64,
    pub gamma: f64,
}

/// Rate with a normal-approximation guarantee on the over-estimation
/// probability. The last `⌊νL⌋` pairs validate a predictor fitted on the
/// rest; `power` is the input power of the channel that produced `t`.
pub fn clt_rate(t: &TrainingSet, power: f64, nu: f64, target_poe: f64, spec: &RegressorSpec) -> Result<CltOutput> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Config(format!("validation fraction {nu} outside (0, 1)")));
    }
    if !(target_poe > 0.0 && target_poe <= 1.0) {
        return Err(Error::Config(format!("target over-estimation probability {target_poe} outside (0, 1]")));
    }
    if !(power > 0.0) {
        return Err(Error::Domain(format!("power {power} must be positive")));
    }
    let n_hold = (nu * t.len() as f64).floor() as usize;
    if n_hold < MIN_HOLDOUT {
        return Err(Error::TooFewSamples { needed: MIN_HOLDOUT, got: n_hold });
    }
    let n_fit = t.len() - n_hold;
    if n_fit == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let fit_set = t.subset(&[0..n_fit]);
    let hold = t.subset(&[n_fit..t.len()]);
    let predictor = spec.fit(&fit_set)?;
    let a = empirical_moments(&predictor, &fit_set).map(|m| m.e_xg / m.p_hat)?;

    let mut xg = Vec::with_capacity(n_hold);
    let mut g2 = Vec::with_capacity(n_hold);
    for (x, y) in hold.iter() {
        let v = predictor.process(y)?;
        xg.push(x * v);
        g2.push(v * v);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let z = erfc_inv(target_poe);
    let root_n = (n_hold as f64).sqrt();
    let bias_g2 = (2.0 * empirical_variance(&g2)?).sqrt() / root_n * z;
    let bias_xg = (2.0 * empirical_variance(&xg)?).sqrt() / root_n * z;
    if a == 0.0 {
        return Ok(CltOutput { predictor, a, r_t: 0.0, f_y: f64::INFINITY, f_xy: 0.0, gamma: 0.0 });
    }
    let f_y = (mean(&g2) + bias_g2) / (2.0 * a * a * power);
    let f_xy = (mean(&xg) - a.signum() * bias_xg) / (a * power);
    let (r_t, gamma, _) = GammaObjective::new(f_y, f_xy).maximize();
    Ok(CltOutput { predictor, a, r_t, f_y, f_xy, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_training_set, ChannelModel};
    use crate::estimator::MmseEstimator;
    use crate::gmi::gmi_mmse;
    use approx::assert_abs_diff_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;
    use std::sync::Arc;

    fn awgn_set(len: usize, seed: u64) -> TrainingSet {
        let m = ChannelModel::awgn(100.0, 1.0).unwrap();
        draw_training_set(&m, len, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn partition_examples() {
        let f = partition(800, 5).unwrap();
        assert_eq!(f.len(), 5);
        assert!(f.iter().all(|r| r.len() == 160));
        let f = partition(10, 10).unwrap();
        assert!(f.iter().all(|r| r.len() == 1));
        let f = partition(11, 5).unwrap();
        assert_eq!(f.last().unwrap().end, 10);
        assert_eq!(partition(3, 4).unwrap_err(), Error::FoldCount { folds: 4, len: 3 });
        assert!(partition(10, 1).is_err());
    }

    #[test]
    fn output_invariants() {
        let t = awgn_set(800, 1);
        let cfg = LfitConfig::new(5, 1.002, 0.998, RegressorSpec::Ridge { lambda: 0.0 });
        let out = lfit_run(&t, &cfg).unwrap();
        assert!(out.r_t >= 0.0);
        assert_eq!(out.a_t, out.moments.e_xg / out.moments.p_hat);
        assert!(!out.flags.xi2_mirrored);
        // a sensible rate for a 20 dB channel
        assert!(out.r_t > 1.5 && out.r_t < 0.5 * 101f64.ln());
    }

    #[test]
    fn unbiased_mmse_folds_recover_mmse_gmi() {
        let m = ChannelModel::awgn(100.0, 1.0).unwrap();
        let est = Arc::new(MmseEstimator::new(&m).unwrap());
        let t = draw_training_set(&m, 50_000, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        // every fold gets the analytic conditional mean
        let g = Predictor::AnalyticMmse(est);
        let mom = empirical_moments(&g, &t).unwrap();
        let a = mom.e_xg / mom.p_hat;
        let r = gmi_scenario_a(&mom, a).unwrap().gmi_nats;
        let target = gmi_mmse(&m).unwrap().gmi_nats;
        assert!((r - target).abs() < 0.02, "{r} vs {target}");
    }

    #[test]
    fn rate_monotone_in_bias_factors() {
        let t = awgn_set(800, 3);
        let spec = RegressorSpec::Ridge { lambda: 0.0 };
        let r = |xi1, xi2| lfit_run(&t, &LfitConfig::new(5, xi1, xi2, spec)).unwrap().r_t;
        assert!(r(1.01, 0.998) < r(1.002, 0.998));
        assert!(r(1.002, 0.99) < r(1.002, 0.998));
    }

    #[test]
    fn wrong_side_xi2_is_mirrored() {
        let t = awgn_set(800, 4);
        let spec = RegressorSpec::Ridge { lambda: 0.0 };
        let wrong = lfit_run(&t, &LfitConfig::new(5, 1.002, 1.002, spec)).unwrap();
        let right = lfit_run(&t, &LfitConfig::new(5, 1.002, 0.998, spec)).unwrap();
        assert!(wrong.a_t > 0.0);
        assert!(wrong.flags.xi2_mirrored);
        assert_abs_diff_eq!(wrong.r_t, right.r_t, epsilon = 1e-12);
    }

    #[test]
    fn invalid_configs() {
        let t = awgn_set(100, 5);
        let spec = RegressorSpec::Ridge { lambda: 0.0 };
        assert!(lfit_run(&t, &LfitConfig::new(1, 1.0, 1.0, spec)).is_err());
        assert!(lfit_run(&t, &LfitConfig::new(5, 0.9, 1.0, spec)).is_err());
        assert!(lfit_run(&t, &LfitConfig::new(200, 1.0, 1.0, spec)).is_err());
    }

    #[test]
    fn empirical_variance_examples() {
        assert_eq!(empirical_variance(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(empirical_variance(&[0.0, 2.0]).unwrap(), 2.0);
        assert!(empirical_variance(&[1.0]).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let v: Vec<f64> = (0..1_000_000).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        assert_abs_diff_eq!(empirical_variance(&v).unwrap(), 4.0, epsilon = 0.02);
    }

    #[test]
    fn clt_rate_without_bias_is_plug_in() {
        let t = awgn_set(2000, 7);
        let spec = RegressorSpec::Ridge { lambda: 0.0 };
        let out = clt_rate(&t, 100.0, 0.5, 1.0, &spec).unwrap();
        let hold = t.subset(&[1000..2000]);
        let m = empirical_moments(&out.predictor, &hold).unwrap();
        let plug = GammaObjective::new(m.e_g2 / (2.0 * out.a * out.a * 100.0), m.e_xg / (out.a * 100.0)).maximize().0;
        assert_abs_diff_eq!(out.r_t, plug, epsilon = 1e-12);
        let biased = clt_rate(&t, 100.0, 0.5, 0.05, &spec).unwrap();
        assert!(biased.r_t < out.r_t);
    }

    #[test]
    fn clt_rate_guards() {
        let t = awgn_set(50, 8);
        let spec = RegressorSpec::Ridge { lambda: 0.0 };
        assert_eq!(clt_rate(&t, 100.0, 0.5, 0.05, &spec).unwrap_err(), Error::TooFewSamples { needed: 30, got: 25 });
        assert!(clt_rate(&t, 100.0, 1.0, 0.05, &spec).is_err());
        assert!(clt_rate(&t, 100.0, 0.7, 0.0, &spec).is_err());
    }
}
