use gmi_lfit::channel::{draw_training_set, ChannelModel, TrainingSet};
use gmi_lfit::gmi::{empirical_moments, gmi_scenario_a, MomentPair};
use gmi_lfit::lfit::{clt_rate, cv_plan, lfit_run, partition, LfitConfig};
use gmi_lfit::RegressorSpec;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const RIDGE: RegressorSpec = RegressorSpec::Ridge { lambda: 0.0 };

fn awgn_set(len: usize, seed: u64) -> TrainingSet {
    let m = ChannelModel::awgn(100.0, 1.0).unwrap();
    draw_training_set(&m, len, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn sd(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn partition_sizes() {
    let sizes = |l, q| partition(l, q).unwrap().iter().map(|r| r.len()).collect::<Vec<_>>();
    assert_eq!(sizes(800, 5), vec![160; 5]);
    assert_eq!(sizes(10, 10), vec![1; 10]);
    assert_eq!(sizes(11, 5), vec![2; 5]);
    assert!(partition(4, 5).is_err());
}

proptest! {
    #[test]
    fn folds_never_evaluate_on_their_own_fit_data(len in 2usize..2000, q in 2usize..20) {
        prop_assume!(q <= len);
        let plan = cv_plan(len, q).unwrap();
        let used = q * (len / q);
        let mut evaluated = vec![0usize; used];
        for fold in &plan {
            let mut covered = vec![false; used];
            for r in fold.fit.iter().chain(std::iter::once(&fold.eval)) {
                for i in r.clone() {
                    prop_assert!(!covered[i], "index {} used twice", i);
                    covered[i] = true;
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
            for i in fold.eval.clone() {
                evaluated[i] += 1;
            }
        }
        prop_assert!(evaluated.iter().all(|&c| c == 1));
    }

    #[test]
    fn rate_is_never_negative(
        pairs in prop::collection::vec((-10.0..10.0f64, prop::collection::vec(-5.0..5.0f64, 2)), 10..60),
        xi1 in 1.0..1.5f64,
        xi2 in 0.5..1.5f64,
    ) {
        let t = TrainingSet::from_pairs(&pairs).unwrap();
        let cfg = LfitConfig::new(5, xi1, xi2, RegressorSpec::Ridge { lambda: 1.0 });
        let out = lfit_run(&t, &cfg).unwrap();
        prop_assert!(out.r_t >= 0.0);
        prop_assert!((out.a_t - out.moments.e_xg / out.moments.p_hat).abs() <= 1e-12 * out.a_t.abs().max(1e-300));
    }
}

#[test]
fn rate_is_monotone_in_bias_factors() {
    let t = awgn_set(800, 41);
    let rate = |xi1, xi2| lfit_run(&t, &LfitConfig::new(5, xi1, xi2, RIDGE)).unwrap();
    assert!(rate(1.0, 1.0).a_t > 0.0);
    let mut last = f64::INFINITY;
    for k in 0..20 {
        let r = rate(1.0 + 0.001 * k as f64, 0.998).r_t;
        assert!(r <= last, "xi1 step {k}: {r} > {last}");
        last = r;
    }
    let mut last = 0.0;
    for k in 0..20 {
        let r = rate(1.002, 0.98 + 0.001 * k as f64).r_t;
        assert!(r >= last, "xi2 step {k}: {r} < {last}");
        last = r;
    }
}

#[test]
fn repartitioning_spread_within_sampling_spread() {
    let t = awgn_set(800, 42);
    let cfg = LfitConfig::new(5, 1.002, 0.998, RIDGE);
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let mut order: Vec<usize> = (0..t.len()).collect();
    let permuted: Vec<f64> = (0..100)
        .map(|_| {
            order.shuffle(&mut rng);
            lfit_run(&t.permuted(&order), &cfg).unwrap().r_t
        })
        .collect();
    let fresh: Vec<f64> = (0..100).map(|s| lfit_run(&awgn_set(800, 1000 + s), &cfg).unwrap().r_t).collect();
    assert!(sd(&permuted) <= sd(&fresh), "{} > {}", sd(&permuted), sd(&fresh));
}

#[test]
fn unit_target_recovers_plug_in_rate() {
    for seed in 0..10 {
        let t = awgn_set(1000, 50 + seed);
        let out = clt_rate(&t, 100.0, 0.5, 1.0, &RIDGE).unwrap();
        let fit = t.subset(&[0..500]);
        let hold = t.subset(&[500..1000]);
        let g = RIDGE.fit(&fit).unwrap();
        let m_fit = empirical_moments(&g, &fit).unwrap();
        let a = m_fit.e_xg / m_fit.p_hat;
        let m = empirical_moments(&g, &hold).unwrap();
        let plug_in = gmi_scenario_a(&MomentPair { p_hat: 100.0, ..m }, a).unwrap();
        assert!((out.r_t - plug_in.gmi_nats).abs() <= 1e-9, "{} vs {}", out.r_t, plug_in.gmi_nats);
    }
}
