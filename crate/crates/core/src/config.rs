//! TOML experiment configuration.
//!
//! ```toml
//! [channel]
//! kind = "simo_onebit_dithered"   # awgn | simo_linear | simo_onebit | simo_onebit_dithered
//! h = [0.3615, 0.2151, 0.2205, 0.6767, 0.5014, 0.1129, 0.1763, 0.1456]
//! sigma2 = 1.0
//! snr_db = 20.0                   # or P = 100.0
//! alpha = 1.34
//!
//! [quad]
//! order = 16
//!
//! [regressor]
//! kind = "ridge"                  # ridge | kernel
//! lambda = 100.0
//! kernel = "gaussian"             # gaussian | tricube
//!
//! [train]
//! L = 800
//! Q = 5
//!
//! [lfit]
//! xi1 = 1.003
//! xi2 = 0.987
//! # shuffle_seed = 7
//!
//! [clt]
//! nu = 0.5
//! target_poe = 0.05
//!
//! [mc]
//! trials = 2000
//! seed = 1
//!
//! [eval]
//! samples = 100000
//!
//! [sweep]
//! snr_db = [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0]
//! kinds = ["simo_linear", "simo_onebit", "simo_onebit_dithered"]
//! ```
//!
//! Every table except `[channel]` may be omitted; missing keys take the
//! values shown above, except `P`/`snr_db`, of which exactly one is needed.

use std::path::Path;

use serde::Deserialize;

use crate::channel::{ChannelKind, ChannelModel};
use crate::error::{Error, Result};
use crate::harness::{CltConfig, ExperimentConfig, SweepConfig, DEFAULT_EVAL_SAMPLES};
use crate::lfit::LfitConfig;
use crate::quadrature::DEFAULT_PANEL_ORDER;
use crate::regress::{KernelKind, RegressorSpec};

/// Dither scale used when the config does not set one.
pub const DEFAULT_ALPHA: f64 = 1.34;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    channel: RawChannel,
    #[serde(default)]
    quad: RawQuad,
    #[serde(default)]
    regressor: RawRegressor,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    lfit: RawLfit,
    #[serde(default)]
    clt: RawClt,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    eval: RawEval,
    sweep: Option<RawSweep>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    kind: String,
    h: Option<Vec<f64>>,
    sigma2: Option<f64>,
    #[serde(rename = "P")]
    power: Option<f64>,
    snr_db: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawQuad {
    order: usize,
}

impl Default for RawQuad {
    fn default() -> Self {
        RawQuad { order: DEFAULT_PANEL_ORDER }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawRegressor {
    kind: String,
    lambda: f64,
    kernel: String,
}

impl Default for RawRegressor {
    fn default() -> Self {
        RawRegressor { kind: "ridge".into(), lambda: 0.0, kernel: "gaussian".into() }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrain {
    #[serde(rename = "L")]
    len: usize,
    #[serde(rename = "Q")]
    folds: usize,
}

impl Default for RawTrain {
    fn default() -> Self {
        RawTrain { len: 800, folds: 5 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawLfit {
    xi1: f64,
    xi2: f64,
    shuffle_seed: Option<u64>,
}

impl Default for RawLfit {
    fn default() -> Self {
        RawLfit { xi1: 1.002, xi2: 0.998, shuffle_seed: None }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawClt {
    nu: f64,
    target_poe: f64,
}

impl Default for RawClt {
    fn default() -> Self {
        let d = CltConfig::default();
        RawClt { nu: d.nu, target_poe: d.target_poe }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawMc {
    trials: usize,
    seed: u64,
}

impl Default for RawMc {
    fn default() -> Self {
        RawMc { trials: 2000, seed: 1 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawEval {
    samples: usize,
}

impl Default for RawEval {
    fn default() -> Self {
        RawEval { samples: DEFAULT_EVAL_SAMPLES }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    snr_db: Vec<f64>,
    kinds: Option<Vec<String>>,
}

fn channel_from(raw: &RawChannel) -> Result<ChannelModel> {
    let kind: ChannelKind = raw.kind.parse()?;
    let h = raw.h.clone().unwrap_or_else(|| vec![1.0]);
    let sigma2 = raw.sigma2.unwrap_or(1.0);
    let alpha = raw.alpha.unwrap_or(DEFAULT_ALPHA);
    match (raw.power, raw.snr_db) {
        (Some(p), None) => ChannelModel::new(kind, h, sigma2, p, alpha),
        (None, Some(snr)) => ChannelModel::new(kind, h, sigma2, 1.0, alpha)?.with_snr_db(snr),
        (Some(_), Some(_)) => Err(Error::Config("set only one of channel.P and channel.snr_db".into())),
        (None, None) => Err(Error::Config("channel.P or channel.snr_db is required".into())),
    }
}

fn regressor_from(raw: &RawRegressor) -> Result<RegressorSpec> {
    match raw.kind.as_str() {
        "ridge" => Ok(RegressorSpec::Ridge { lambda: raw.lambda }),
        "kernel" => Ok(RegressorSpec::Kernel { lambda: raw.lambda, kernel: raw.kernel.parse::<KernelKind>()? }),
        other => Err(Error::Config(format!("unknown regressor `{other}`"))),
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let channel = channel_from(&raw.channel)?;
        let regressor = regressor_from(&raw.regressor)?;
        let lfit = LfitConfig {
            folds: raw.train.folds,
            xi1: raw.lfit.xi1,
            xi2: raw.lfit.xi2,
            regressor,
            shuffle_seed: raw.lfit.shuffle_seed,
        };
        let sweep = match raw.sweep {
            Some(s) => {
                let kinds = match s.kinds {
                    Some(names) => names.iter().map(|n| n.parse()).collect::<Result<Vec<ChannelKind>>>()?,
                    None => vec![channel.kind()],
                };
                Some(SweepConfig { snr_db: s.snr_db, kinds })
            }
            None => None,
        };
        let cfg = ExperimentConfig {
            channel,
            quad_order: raw.quad.order,
            train_len: raw.train.len,
            lfit,
            trials: raw.mc.trials,
            seed: raw.mc.seed,
            eval_samples: raw.eval.samples,
            clt: CltConfig { nu: raw.clt.nu, target_poe: raw.clt.target_poe },
            sweep,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}
