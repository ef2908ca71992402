//! Monte Carlo experiments: repeated learning trials, their loss metrics,
//! GMI sweeps over SNR and CSV output.
//!
//! Each trial draws everything from its own generator seeded by
//! [`trial_seed`], so results do not depend on scheduling and parallel runs
//! reproduce serial ones bit for bit.

use std::cell::RefCell;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_training_set, ChannelKind, ChannelModel};
use crate::error::{Error, Result};
use crate::estimator::{pattern_index, MomentOracle};
use crate::gmi::{
    delta_of_predictor, gmi_lmmse_with, gmi_mmse_with, gmi_scenario_a, gmi_scenario_b, nats_to_bits, OutputProcessor,
};
use crate::estimator::MmseEstimator;
use crate::lfit::{clt_rate, lfit_run, LfitConfig};
use crate::quadrature::DEFAULT_PANEL_ORDER;
use crate::regress::Predictor;

/// Environment variable holding the worker-thread count.
pub const WORKERS_ENV: &str = "GMI_LFIT_WORKERS";

/// Default number of oracle Monte Carlo draws per trial.
pub const DEFAULT_EVAL_SAMPLES: usize = 100_000;

/// Largest output dimension for which quantized predictions are memoized
/// per sign pattern.
const MAX_CACHED_DIM: usize = 16;

/// Split-validation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CltConfig {
    pub nu: f64,
    pub target_poe: f64,
}

impl Default for CltConfig {
    fn default() -> Self {
        CltConfig { nu: 0.5, target_poe: 0.05 }
    }
}

/// SNR grid and channel kinds of a GMI sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub snr_db: Vec<f64>,
    pub kinds: Vec<ChannelKind>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub channel: ChannelModel,
    /// Gauss–Legendre points per quadrature panel.
    pub quad_order: usize,
    pub train_len: usize,
    pub lfit: LfitConfig,
    pub trials: usize,
    pub seed: u64,
    pub eval_samples: usize,
    pub clt: CltConfig,
    pub sweep: Option<SweepConfig>,
}

impl ExperimentConfig {
    /// A configuration with the given channel and learning setup and the
    /// remaining fields at their defaults.
    pub fn new(channel: ChannelModel, train_len: usize, lfit: LfitConfig) -> Self {
        ExperimentConfig {
            channel,
            quad_order: DEFAULT_PANEL_ORDER,
            train_len,
            lfit,
            trials: 2000,
            seed: 1,
            eval_samples: DEFAULT_EVAL_SAMPLES,
            clt: CltConfig::default(),
            sweep: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lfit.validate()?;
        for (name, v) in [("train.L", self.train_len), ("mc.trials", self.trials), ("eval.samples", self.eval_samples)] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.quad_order < 2 {
            return Err(Error::Config(format!("quad.order = {} must be at least 2", self.quad_order)));
        }
        Ok(())
    }
}

/// One trial's learned rate and the true rates of what was learned, all in
/// nats.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialRecord {
    pub r_t: f64,
    pub i_a: f64,
    pub i_b: f64,
    pub seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of trial `index`: `splitmix64(seed ^ splitmix64(index))`.
pub fn trial_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(index))
}

/// Memoizes predictions on `±1` outputs, which take at most `2^p` values.
struct PatternCache<'a> {
    inner: &'a Predictor,
    table: RefCell<Vec<Option<f64>>>,
}

impl<'a> PatternCache<'a> {
    fn new(inner: &'a Predictor, dim: usize) -> Self {
        PatternCache { inner, table: RefCell::new(vec![None; 1 << dim]) }
    }
}

impl OutputProcessor for PatternCache<'_> {
    fn process(&self, y: &[f64]) -> Result<f64> {
        let k = pattern_index(y)?;
        if let Some(v) = self.table.borrow()[k] {
            return Ok(v);
        }
        let v = self.inner.predict(y)?;
        self.table.borrow_mut()[k] = Some(v);
        Ok(v)
    }
}

/// `(i_a, i_b)` of a predictor with scaling `a`, from fresh channel draws.
fn oracle_rates(model: &ChannelModel, g: &Predictor, a: f64, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let d = if model.kind().is_quantized() && model.dim() <= MAX_CACHED_DIM {
        delta_of_predictor(model, &PatternCache::new(g, model.dim()), samples, rng)?
    } else {
        delta_of_predictor(model, g, samples, rng)?
    };
    let i_a = gmi_scenario_a(&d.moments, a)?.gmi_nats;
    let i_b = gmi_scenario_b(&d.moments)?.gmi_nats;
    Ok((i_a, i_b))
}

/// Runs LFIT on a fresh training set and evaluates the outcome.
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = draw_training_set(&cfg.channel, cfg.train_len, &mut rng)?;
    let out = lfit_run(&t, &cfg.lfit)?;
    let (i_a, i_b) = oracle_rates(&cfg.channel, &out.predictor, out.a_t, cfg.eval_samples, &mut rng)?;
    Ok(TrialRecord { r_t: out.r_t, i_a, i_b, seed })
}

/// Runs the split-validation rule on a fresh training set and evaluates it.
pub fn run_clt_trial(cfg: &ExperimentConfig, index: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.seed, index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = draw_training_set(&cfg.channel, cfg.train_len, &mut rng)?;
    let out = clt_rate(&t, cfg.channel.power(), cfg.clt.nu, cfg.clt.target_poe, &cfg.lfit.regressor)?;
    let (i_a, i_b) = oracle_rates(&cfg.channel, &out.predictor, out.a, cfg.eval_samples, &mut rng)?;
    Ok(TrialRecord { r_t: out.r_t, i_a, i_b, seed })
}

/// Worker count from [`WORKERS_ENV`], if set to a positive integer.
pub fn configured_workers() -> Option<usize> {
    std::env::var(WORKERS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Maps `f` over `0..n` in parallel, returning results in index order.
pub fn parallel_map<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    let run = || (0..n).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match configured_workers() {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// All `cfg.trials` LFIT trials, in index order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    parallel_map(cfg.trials, |i| run_trial(cfg, i))
}

/// All `cfg.trials` split-validation trials, in index order.
pub fn run_clt_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    parallel_map(cfg.trials, |i| run_clt_trial(cfg, i))
}

/// Fraction of trials whose learned rate exceeds the achievable one.
pub fn over_estimation_probability(records: &[TrialRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::NoValidTrials);
    }
    Ok(records.iter().filter(|r| r.r_t > r.i_a).count() as f64 / records.len() as f64)
}

/// Which rate the receding level is measured on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Learned rates of the trials that did not over-estimate.
    A,
    /// Achievable rates with the optimal scaling.
    B,
}

/// Mean relative shortfall from the rate of the conditional-mean receiver.
pub fn receding_level(records: &[TrialRecord], i_mmse: f64, scenario: Scenario) -> Result<f64> {
    if !(i_mmse > 0.0) {
        return Err(Error::Domain(format!("reference rate {i_mmse} must be positive")));
    }
    let vals: Vec<f64> = match scenario {
        Scenario::A => records.iter().filter(|r| r.i_a - r.r_t >= 0.0).map(|r| r.r_t).collect(),
        Scenario::B => records.iter().map(|r| r.i_b).collect(),
    };
    if vals.is_empty() {
        return Err(Error::NoValidTrials);
    }
    Ok(1.0 - vals.iter().sum::<f64>() / vals.len() as f64 / i_mmse)
}

/// Empirical CDF at its jump points: each distinct value with the fraction
/// of samples at or below it.
pub fn cdf_export(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let frac = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = frac,
            _ => out.push((x, frac)),
        }
    }
    out
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub kind: ChannelKind,
    pub snr_db: f64,
    pub gmi_lmmse: f64,
    pub gmi_mmse: f64,
}

/// LMMSE and MMSE GMIs of each channel kind over an SNR grid. The power is
/// rescaled to hit each SNR and the dither recomputed for it.
pub fn gmi_sweep(base: &ChannelModel, snrs: &[f64], kinds: &[ChannelKind], quad_order: usize) -> Result<Vec<SweepRow>> {
    let points: Vec<(ChannelKind, f64)> = kinds.iter().flat_map(|&k| snrs.iter().map(move |&s| (k, s))).collect();
    parallel_map(points.len(), |i| {
        let (kind, snr_db) = points[i];
        let model = ChannelModel::new(kind, base.h().to_vec(), base.sigma2(), base.power(), base.alpha())?
            .with_snr_db(snr_db)?;
        let lmmse = gmi_lmmse_with(&model, MomentOracle::Quadrature { order: quad_order })?;
        let mmse = gmi_mmse_with(&MmseEstimator::with_order(&model, quad_order)?)?;
        Ok(SweepRow { kind, snr_db, gmi_lmmse: lmmse.gmi_nats, gmi_mmse: mmse.gmi_nats })
    })
}

/// Formats a number with six significant digits, switching to exponent
/// notation for very large or small magnitudes.
pub fn format_g6(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{v:.*}", (5 - exp) as usize))
    }
}

fn strip_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// CSV with a header row and six-significant-digit numbers.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("kind,snr_db,gmi_lmmse_nats,gmi_mmse_nats,gmi_lmmse_bits,gmi_mmse_bits\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.kind,
            format_g6(r.snr_db),
            format_g6(r.gmi_lmmse),
            format_g6(r.gmi_mmse),
            format_g6(nats_to_bits(r.gmi_lmmse)),
            format_g6(nats_to_bits(r.gmi_mmse))
        );
    }
    s
}

/// Loss metrics of one complexity parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRow {
    pub lambda: f64,
    pub p_oe: f64,
    /// `NaN` when every trial over-estimated.
    pub l_r: f64,
    pub trials: usize,
}

/// Runs the trials of `cfg` for every `λ` in the grid.
pub fn lfit_eval(cfg: &ExperimentConfig, lambdas: &[f64], i_mmse: f64) -> Result<Vec<LossRow>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let mut c = cfg.clone();
            c.lfit.regressor = c.lfit.regressor.with_lambda(lambda);
            let records = run_trials(&c)?;
            loss_row(lambda, &records, i_mmse)
        })
        .collect()
}

pub fn loss_row(lambda: f64, records: &[TrialRecord], i_mmse: f64) -> Result<LossRow> {
    let p_oe = over_estimation_probability(records)?;
    let l_r = match receding_level(records, i_mmse, Scenario::A) {
        Ok(v) => v,
        Err(Error::NoValidTrials) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(LossRow { lambda, p_oe, l_r, trials: records.len() })
}

pub fn loss_csv(rows: &[LossRow]) -> String {
    let mut s = String::from("lambda,p_oe_pct,l_r_pct,trials\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            format_g6(r.lambda),
            format_g6(100.0 * r.p_oe),
            format_g6(100.0 * r.l_r),
            r.trials
        );
    }
    s
}

/// Long-format CSV of the empirical CDFs of the learned rate, both
/// achievable rates and the margin `i_a - r_t`, all in bits.
pub fn rate_cdf_csv(records: &[TrialRecord]) -> String {
    let series: [(&str, Vec<f64>); 4] = [
        ("r_t", records.iter().map(|r| r.r_t).collect()),
        ("i_a", records.iter().map(|r| r.i_a).collect()),
        ("i_b", records.iter().map(|r| r.i_b).collect()),
        ("i_a_minus_r_t", records.iter().map(|r| r.i_a - r.r_t).collect()),
    ];
    let mut s = String::from("series,value_bits,cdf\n");
    for (name, vals) in series {
        let bits: Vec<f64> = vals.iter().map(|&v| nats_to_bits(v)).collect();
        for (v, f) in cdf_export(&bits) {
            let _ = writeln!(s, "{name},{},{}", format_g6(v), format_g6(f));
        }
    }
    s
}
