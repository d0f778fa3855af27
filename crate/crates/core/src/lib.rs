//! Seeded simulator of a device-edge-cloud resource market that signs
//! overbooked forward contracts ahead of time and trades on them later.
//!
//! Users sign a contract with an edge server, which in turn reserves backup
//! slots on a cloud server. Contract terms come from a risk-constrained
//! negotiation over a quotation grid. Campaigns then compare these forward
//! contracts (with and without overbooking) against onsite spot trading.
//!
//! All model code is generic over the scalar type; the aliases at the crate
//! root fix it to `f64`, with `*32` variants for `f32`.
//!
//! ```
//! use oatf::{run_campaign, Contracts, Scenario};
//! use oatf::market::{CloudContract, EdgeContract};
//!
//! let scenario = Scenario::paper();
//! let contracts = Contracts {
//!     edge: EdgeContract {
//!         reserved_per_user: 4,
//!         price_user_to_edge: 2.8,
//!         penalty_user_to_edge: 2.8,
//!         compensation_edge_to_user: 1.4,
//!     },
//!     cloud: CloudContract { backup_slots: 375, price_edge_to_cloud: 112.5, penalty_edge_to_cloud: 56.25 },
//! };
//! let failures: u32 = run_campaign(&contracts, &scenario, 100).map(|o| o.failed_users).sum();
//! assert_eq!(failures, 0);
//! ```

// `!(x > 0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod binomial;
pub mod config;
pub mod engine;
pub mod error;
pub mod market;
pub mod negotiation;
pub mod physics;
pub mod report;
pub mod risk;
pub mod scalar;
pub mod spot;
pub mod utility;

pub use engine::run_campaign;
pub use error::{Error, Result};
pub use scalar::Real;

pub type Scenario = config::Scenario<f64>;
pub type SimConfig = config::SimConfig<f64>;
pub type MarketConfig = market::MarketConfig<f64>;
pub type Contracts = market::Contracts<f64>;
pub type RoundSample = market::RoundSample<f64>;
pub type RoundOutcome = engine::RoundOutcome<f64>;
pub type RiskReport = risk::RiskReport<f64>;
pub type ContractPair = negotiation::ContractPair<f64>;
pub type ContractFile = negotiation::ContractFile<f64>;
pub type CampaignSummary = report::CampaignSummary<f64>;

pub type Scenario32 = config::Scenario<f32>;
pub type SimConfig32 = config::SimConfig<f32>;
pub type MarketConfig32 = market::MarketConfig<f32>;
pub type Contracts32 = market::Contracts<f32>;
pub type RoundOutcome32 = engine::RoundOutcome<f32>;
pub type RiskReport32 = risk::RiskReport<f32>;
