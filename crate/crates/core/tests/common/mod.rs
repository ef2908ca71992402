#![allow(dead_code)]

use gmi_lfit::channel::{ChannelKind, ChannelModel};
use statrs::function::erf::erfc;

pub const REFERENCE_H: [f64; 8] = [0.3615, 0.2151, 0.2205, 0.6767, 0.5014, 0.1129, 0.1763, 0.1456];
pub const ALPHA: f64 = 1.34;

pub fn reference_model(kind: ChannelKind, snr_db: f64) -> ChannelModel {
    ChannelModel::new(kind, REFERENCE_H.to_vec(), 1.0, 1.0, ALPHA).unwrap().with_snr_db(snr_db).unwrap()
}

fn phi(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Trapezoid sums of `∫ u^k f(u) Π F(y_i (h_i u + b_i)/σ) du`, k = 0, 1, 2,
/// over `[-half·√P, half·√P]` on `n` intervals.
pub fn trapezoid_moments(model: &ChannelModel, y: &[f64], half: f64, n: usize) -> [f64; 3] {
    let p = model.power();
    let a = half * p.sqrt();
    let du = 2.0 * a / n as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * p).sqrt();
    let mut m = [0.0; 3];
    for k in 0..=n {
        let u = -a + k as f64 * du;
        let mut w = norm * (-u * u / (2.0 * p)).exp();
        for i in 0..y.len() {
            w *= phi(y[i] * (model.h()[i] * u + model.b()[i]) / model.sigma());
        }
        if k == 0 || k == n {
            w *= 0.5;
        }
        m[0] += w * du;
        m[1] += w * u * du;
        m[2] += w * u * u * du;
    }
    m
}

/// Posterior mean of a quantized channel by brute-force trapezoid.
pub fn trapezoid_posterior_mean(model: &ChannelModel, y: &[f64]) -> f64 {
    let m = trapezoid_moments(model, y, 10.0, 100_000);
    m[1] / m[0]
}

pub fn sign_pattern(bits: usize, p: usize) -> Vec<f64> {
    (0..p).map(|i| if bits >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

/// Mean and standard error of a sample.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
