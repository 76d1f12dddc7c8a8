//! Quickest search for an atypical population.
//!
//! Populations `i = 1, 2, ...` each emit i.i.d. samples from either a typical
//! law `P0` or, with prior probability `pi`, an atypical law `P1`. A search
//! procedure samples populations in order, never revisits one, and stops by
//! returning a single index it believes follows `P1`.
//!
//! The crate provides:
//!
//! * [`models`]: the two-hypothesis population models (Gaussian pair, biased
//!   coin pair, finite-alphabet tables) with their log-likelihood ratios,
//!   divergences, round thresholds and overshoot constants.
//! * [`procedures`]: the series-of-SPRTs search, sequential thresholding and a
//!   fixed-sample-size baseline, all driven by a [`procedures::PopulationSource`].
//! * [`bounds`]: closed-form lower and upper bounds on the expected number of
//!   samples.
//! * [`montecarlo`]: seeded, schedule-independent parallel trial harness with
//!   renewal and error-probability identity checks.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the scalar to `f64`, which is what the harness and CLI use.

pub mod bounds;
pub mod error;
pub mod models;
pub mod montecarlo;
pub mod procedures;
pub mod scalar;
pub mod special;

pub use error::{Error, Result};
pub use models::Label;
pub use scalar::Scalar;

pub type Model = models::PopulationModel<f64>;
pub type Model32 = models::PopulationModel<f32>;
pub type SprtConfig = procedures::SprtConfig<f64>;
pub type NonAdaptiveConfig = procedures::NonAdaptiveConfig<f64>;
pub type ProcedureConfig = procedures::ProcedureConfig<f64>;
pub type ProcedureSpec = montecarlo::ProcedureSpec<f64>;
pub type ExperimentSpec = montecarlo::ExperimentSpec<f64>;
pub type BoundsReport = bounds::BoundsReport<f64>;
pub type BoundsReport32 = bounds::BoundsReport<f32>;

pub use montecarlo::MonteCarloSummary;
pub use procedures::{SeqThreshConfig, TrialOutcome};
