//! Incremental accumulate-then-forward (IATF) relaying with an
//! energy-harvesting decode-and-forward relay.
//!
//! Two independent routes to the system outage probability:
//!
//! * [`battery_chain`] + [`outage`]: discretized battery Markov chain,
//!   its steady state, and the closed-form outage expression.
//! * [`simulator`]: block-by-block Monte Carlo execution of the protocol.
//!
//! All math is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! crate root fix it to `f64`, which is what the tolerances are tuned for.

pub mod battery_chain;
pub mod channel;
pub mod error;
pub mod num;
pub mod outage;
pub mod simulator;
pub mod specfun;

pub use error::{Error, Result};
pub use num::Scalar;

pub use battery_chain::{discretize_harvest, StationarySolver};
pub use simulator::{BlockOutcome, Mode, SimOptions, SimulationResult};

pub type Real = f64;
pub type SystemParams = channel::SystemParams<Real>;
pub type LinkStats = channel::LinkStats<Real>;
pub type Thresholds = channel::Thresholds<Real>;
pub type FadeSample = channel::FadeSample<Real>;
pub type Tolerance = specfun::Tolerance<Real>;
pub type BatteryConfig = battery_chain::BatteryConfig<Real>;
pub type TransitionMatrix = battery_chain::TransitionMatrix<Real>;
pub type SteadyState = battery_chain::SteadyState<Real>;
pub type MeanSnrs = outage::MeanSnrs<Real>;
pub type OutageBreakdown = outage::OutageBreakdown<Real>;
pub type ThresholdSearch = outage::ThresholdSearch<Real>;

