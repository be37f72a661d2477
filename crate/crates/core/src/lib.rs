//! Analytical model of a diffusion-based molecular communication link.
//!
//! The crate covers the whole chain from the free-diffusion impulse response
//! to the choice of a molecule budget:
//!
//! - [`channel`]: impulse response, peak metrics, ISI taps and SNR.
//! - [`detection`]: OOK threshold detection with exact enumeration of the
//!   ISI patterns, giving miss, false-alarm and error probabilities.
//! - [`gradient`]: closed-form derivatives of those probabilities with
//!   respect to the number of released molecules.
//! - [`tradeoff`]: normalized balance function between molecule count and
//!   BER, projected gradient descent and a grid-search reference.
//! - [`simulate`]: Gaussian Monte Carlo link simulation and a Brownian
//!   particle simulator used to cross-check the analytical model.
//!
//! All quantities are SI: meters, seconds, molecules per cubic meter.

pub mod channel;
pub mod detection;
pub mod error;
pub mod gradient;
pub mod simulate;
pub mod tradeoff;

mod sum;

pub use channel::{ChannelParams, TapVector};
pub use detection::{
    BerResult, Hypothesis, HypothesisStats, IsiPattern, LinkConfig, LinkModel, ThresholdSpec,
};
pub use error::{Error, Result};
pub use gradient::{BerGradient, StatsGradient};
pub use simulate::{BerEstimate, BrownianSample, MonteCarloConfig, ParticleSimConfig};
pub use tradeoff::{
    BalanceWeights, NormalizationContext, OptimizerConfig, TraceEvent, TracePoint, TradeoffResult,
};
