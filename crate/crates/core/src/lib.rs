//! Generalized mutual information (GMI) of Gaussian-codebook transmission
//! with nearest-neighbor decoding on a processed channel output, and a
//! cross-validated procedure that learns the output processing, the decoder
//! scaling and a code rate from input/output samples alone.
//!
//! The crate is organized bottom-up:
//!
//! * [`channel`]: SIMO channel laws (linear, one-bit, dithered one-bit),
//!   sampling and training-set generation.
//! * [`quadrature`] and [`special`]: numerical plumbing (Gaussian rules,
//!   normal CDF in log domain, root-found quantiles).
//! * [`estimator`]: model-aware MMSE and LMMSE estimators.
//! * [`gmi`]: GMI formulas, optimal scaling, the scenario A/B rates.
//! * [`regress`]: ridge regression and kernel smoothers, plus the
//!   [`Predictor`](regress::Predictor) type all processing functions share.
//! * [`lfit`]: the cross-validated learning algorithm and the CLT-based
//!   rate with an over-estimation guarantee.
//! * [`harness`]: Monte Carlo trials, loss metrics, CSV reports.

pub mod channel;
pub mod config;
pub mod error;
pub mod estimator;
pub mod gmi;
pub mod harness;
pub mod lfit;
pub mod quadrature;
pub mod regress;
pub mod special;

pub use channel::{ChannelKind, ChannelModel, TrainingSet};
pub use error::{Error, Result};
pub use gmi::{GmiResult, MomentPair};
pub use lfit::{LfitConfig, LfitOutput};
pub use regress::{KernelKind, Predictor, RegressorSpec};
