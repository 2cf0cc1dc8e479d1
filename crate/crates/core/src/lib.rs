//! Drawdown-modulated betting laboratory.
//!
//! Proportional ("Markowitz-style") feedback `I(k) = K V(k)` is compared with
//! drawdown-modulated feedback `I(k) = gamma M(k) V(k)` on the plane of
//! expected overall return versus expected maximum percentage drawdown. The
//! modulated law caps drawdown at `d_max` on every sample path; at matched
//! expected drawdown it reaches at least the proportional law's return.
//!
//! Modules, bottom-up:
//!
//! - [`return_model`]: finite i.i.d. return laws, seeded sampling, enumeration
//! - [`strategy`]: feedback laws, admissibility, per-stage investment bounds
//! - [`simulator`]: the wealth recursion and per-path statistics
//! - [`engine`]: batched Monte-Carlo kernel on common random numbers
//! - [`expectation`]: closed-form, exact and Monte-Carlo `(R̄, d̄*)` estimates
//! - [`frontier`]: constrained return maximization and domination certificates

pub mod engine;
pub mod error;
pub mod expectation;
pub mod frontier;
pub mod return_model;
pub mod simulator;
pub mod stats;
pub mod strategy;

pub use error::{Error, Result};
pub use expectation::{Backend, Method, RiskReturnEstimate};
pub use frontier::{DominationReport, FrontierPoint, FrontierQuery, GammaGrid};
pub use return_model::{make_coin, CoinSpec, DistributionSpec, Outcome, ReturnDistribution};
pub use simulator::{PathStats, SimulationConfig};
pub use strategy::{AccountState, MarkowitzStrategy, ModulatedStrategy, Strategy};
