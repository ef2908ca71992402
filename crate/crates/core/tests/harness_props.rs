mod common;

use gmi_lfit::channel::{ChannelKind, ChannelModel};
use gmi_lfit::estimator::MmseEstimator;
use gmi_lfit::gmi::{gmi_mmse, gmi_mmse_with, nats_to_bits};
use gmi_lfit::harness::{
    over_estimation_probability, receding_level, run_trial, run_trials, ExperimentConfig, Scenario, TrialRecord,
};
use gmi_lfit::{LfitConfig, RegressorSpec};
use proptest::prelude::*;

fn awgn_demo(trials: usize) -> ExperimentConfig {
    let ch = ChannelModel::awgn(100.0, 1.0).unwrap();
    let mut cfg = ExperimentConfig::new(ch, 800, LfitConfig::new(5, 1.002, 0.998, RegressorSpec::Ridge { lambda: 0.0 }));
    cfg.trials = trials;
    cfg
}

fn record() -> impl Strategy<Value = TrialRecord> {
    (0.0..3.0f64, 0.0..3.0f64, 0.0..0.5f64).prop_map(|(r_t, i_a, gap)| TrialRecord { r_t, i_a, i_b: i_a + gap, seed: 0 })
}

proptest! {
    #[test]
    fn loss_metrics_ignore_record_order(
        (records, shuffled) in prop::collection::vec(record(), 1..50).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle())),
        i_mmse in 0.5..5.0f64,
    ) {
        prop_assert_eq!(over_estimation_probability(&records).unwrap(), over_estimation_probability(&shuffled).unwrap());
        for s in [Scenario::A, Scenario::B] {
            match (receding_level(&records, i_mmse, s), receding_level(&shuffled, i_mmse, s)) {
                (Ok(a), Ok(b)) => prop_assert!((a - b).abs() <= 1e-12),
                (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
            }
        }
    }
}

#[test]
fn reference_rate_matches_fresh_computation() {
    for kind in [ChannelKind::SimoLinear, ChannelKind::SimoOnebit, ChannelKind::SimoOnebitDithered] {
        let model = common::reference_model(kind, 20.0);
        let text = format!(
            "[channel]\nkind = \"{kind}\"\nh = {:?}\nsigma2 = 1.0\nsnr_db = 20.0\n[regressor]\nkind = \"ridge\"\nlambda = 0.0\n",
            common::REFERENCE_H
        );
        let cfg = ExperimentConfig::from_toml_str(&text).unwrap();
        let from_config = gmi_mmse_with(&MmseEstimator::with_order(&cfg.channel, cfg.quad_order).unwrap()).unwrap();
        let fresh = gmi_mmse(&model).unwrap();
        assert!((from_config.gmi_nats - fresh.gmi_nats).abs() <= 1e-9, "{kind}");
    }
}

#[test]
fn trials_are_reproducible() {
    let cfg = awgn_demo(4);
    for i in 0..4 {
        let a = run_trial(&cfg, i).unwrap();
        let b = run_trial(&cfg, i).unwrap();
        assert_eq!(a.r_t.to_bits(), b.r_t.to_bits());
        assert_eq!(a.i_a.to_bits(), b.i_a.to_bits());
        assert_eq!(a.i_b.to_bits(), b.i_b.to_bits());
    }
    assert_eq!(run_trials(&cfg).unwrap(), run_trials(&cfg).unwrap());
}

#[test]
fn scenario_rates_are_ordered() {
    let cfg = awgn_demo(50);
    for r in run_trials(&cfg).unwrap() {
        assert!(r.i_a <= r.i_b + 1e-8, "{r:?}");
    }
}

#[test]
fn awgn_scenario_gap_is_negligible() {
    let records = run_trials(&awgn_demo(200)).unwrap();
    let close = records.iter().filter(|r| nats_to_bits(r.i_b - r.i_a) <= 0.02).count();
    assert!(close as f64 >= 0.95 * records.len() as f64, "{close}/{}", records.len());
}

#[test]
fn large_sample_linear_rate_reaches_capacity() {
    let model = common::reference_model(ChannelKind::SimoLinear, 20.0);
    let mut cfg = ExperimentConfig::new(model, 10_000, LfitConfig::new(5, 1.002, 0.998, RegressorSpec::Ridge { lambda: 0.0 }));
    cfg.trials = 5;
    let capacity = nats_to_bits(0.5 * 101f64.ln());
    for r in run_trials(&cfg).unwrap() {
        assert!((nats_to_bits(r.i_b) - capacity).abs() <= 0.05, "{} vs {capacity}", nats_to_bits(r.i_b));
    }
}
