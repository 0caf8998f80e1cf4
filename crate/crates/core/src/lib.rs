//! Simulation and exact analysis of utility-maximizing auctions for
//! unit-demand bidders, where payments are burned rather than collected.
//!
//! The building blocks are value profiles and outcomes ([`model`]), value
//! distributions ([`dist`]), the mechanism family ([`mech`]), a reproducible
//! Monte Carlo engine ([`sim`]), an empirical BIC audit ([`audit`]) and an
//! LP solver for optimal mechanisms on finite type spaces ([`optlp`]).

pub mod audit;
pub mod dist;
pub mod error;
pub mod ironing;
pub mod market;
pub mod matching;
pub mod mech;
pub mod model;
pub mod optlp;
pub mod rng;
pub mod sim;
pub mod stats;

pub use audit::{best_response_gain, interim_utility, AuditConfig, AuditReport};
pub use dist::{DistributionSpec, HazardClass};
pub use error::{Error, Result};
pub use ironing::{iron, IroningResult, QuantileCurve};
pub use market::{BidderPrior, MarketSpec, WeightedType};
pub use matching::{max_weight_matching, vcg, MatchingResult};
pub use mech::MechanismId;
pub use model::{Assignment, FractionalAllocation, Outcome, PaymentVector, ValueProfile};
pub use optlp::{optimal_utility, FiniteInstance, LpSolution, LpStatus, OptimalMechanism};
pub use sim::{run_trials, MarketConfig, SimReport};
pub use stats::EstimateWithCI;
