//! Two-way multilateral negotiation over a finite quotation grid.
//!
//! For every pair of edge and cloud quotes, users narrow down `r^user`, the
//! edge narrows down `r^Backup` given each `r^user`, the cloud filters what it
//! can accept, and users pick their best mutually acceptable pair. The edge
//! then picks the final terms across quote pairs.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::market::{rng_stream, CloudContract, Contracts, EdgeContract};
use crate::risk::{self, EdgeRiskMethod, RiskReport};
use crate::scalar::{cmp_real, Real};

/// Per-slot edge terms: the user pays `price`, forfeits `penalty` when
/// absent and receives `compensation` when left unserved, each per reserved slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EdgeQuote<T> {
    pub price: T,
    pub penalty: T,
    pub compensation: T,
}

impl<T: Real> EdgeQuote<T> {
    pub fn contract(&self, reserved_per_user: u32) -> EdgeContract<T> {
        let r = T::count(reserved_per_user as usize);
        EdgeContract {
            reserved_per_user,
            price_user_to_edge: self.price * r,
            penalty_user_to_edge: self.penalty * r,
            compensation_edge_to_user: self.compensation * r,
        }
    }
}

/// Per-slot cloud terms for the backup reservation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CloudQuote<T> {
    pub price: T,
    pub penalty: T,
}

impl<T: Real> CloudQuote<T> {
    pub fn contract(&self, backup_slots: u32) -> CloudContract<T> {
        let b = T::count(backup_slots as usize);
        CloudContract {
            backup_slots,
            price_edge_to_cloud: self.price * b,
            penalty_edge_to_cloud: self.penalty * b,
        }
    }
}

/// Evenly spaced integers `min, min + step, ..` up to `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotRange {
    pub min: u32,
    pub max: u32,
    pub step: u32,
}

impl SlotRange {
    pub fn new(min: u32, max: u32, step: u32) -> Self {
        Self { min, max, step }
    }

    pub fn values(&self) -> Vec<u32> {
        if self.step == 0 || self.min > self.max {
            return Vec::new();
        }
        (self.min..=self.max).step_by(self.step as usize).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct QuotationGrid<T> {
    pub edge_quotes: Vec<EdgeQuote<T>>,
    pub cloud_quotes: Vec<CloudQuote<T>>,
    pub r_user_domain: SlotRange,
    pub r_backup_domain: SlotRange,
}

impl<T: Real> QuotationGrid<T> {
    /// Eight take-or-pay and half-penalty edge quotes against six cloud quotes.
    pub fn paper() -> Self {
        let mut edge_quotes = Vec::new();
        for price in [0.4, 0.55, 0.7, 0.85] {
            for penalty_share in [0.5, 1.0] {
                edge_quotes.push(EdgeQuote {
                    price: T::lit(price),
                    penalty: T::lit(price * penalty_share),
                    compensation: T::lit(price * 0.5),
                });
            }
        }
        let mut cloud_quotes = Vec::new();
        for price in [0.2, 0.3, 0.4] {
            for penalty_share in [0.5, 1.0] {
                cloud_quotes.push(CloudQuote {
                    price: T::lit(price),
                    penalty: T::lit(price * penalty_share),
                });
            }
        }
        Self {
            edge_quotes,
            cloud_quotes,
            r_user_domain: SlotRange::new(1, 5, 1),
            r_backup_domain: SlotRange::new(0, 600, 25),
        }
    }

    pub fn validate(&self, cloud_capacity: u32) -> Result<()> {
        if self.edge_quotes.is_empty() {
            return Err(Error::invalid("edge_quotes", "must not be empty"));
        }
        if self.cloud_quotes.is_empty() {
            return Err(Error::invalid("cloud_quotes", "must not be empty"));
        }
        let users = self.r_user_domain.values();
        if users.is_empty() || users[0] == 0 {
            return Err(Error::invalid(
                "r_user",
                "domain must be non-empty and start at 1 or more",
            ));
        }
        let backups = self.r_backup_domain.values();
        if backups.is_empty() || self.r_backup_domain.max > cloud_capacity {
            return Err(Error::invalid(
                "r_backup",
                "domain must be non-empty and within cloud_capacity",
            ));
        }
        let bad_edge = self
            .edge_quotes
            .iter()
            .any(|q| !(q.price >= T::zero() && q.penalty >= T::zero() && q.compensation >= T::zero()));
        let bad_cloud = self
            .cloud_quotes
            .iter()
            .any(|q| !(q.price >= T::zero() && q.penalty >= T::zero()));
        if bad_edge || bad_cloud {
            return Err(Error::invalid(
                "quotes",
                "prices, penalties and compensations must be non-negative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Overbooking allowed.
    Oatf,
    /// Booked slots never exceed supply.
    CBooking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegotiationSettings {
    pub edge_risk_method: EdgeRiskMethod,
    /// Samples per Monte Carlo risk estimate inside the search.
    pub n_mc_negotiation: usize,
    /// Samples per risk in the final re-certification.
    pub n_mc_certify: usize,
}

impl Default for NegotiationSettings {
    fn default() -> Self {
        Self {
            edge_risk_method: EdgeRiskMethod::Exact,
            n_mc_negotiation: 100_000,
            n_mc_certify: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ContractPair<T> {
    pub edge_contract: EdgeContract<T>,
    pub cloud_contract: CloudContract<T>,
    /// Summed over all contractual users.
    pub expected_user_utility: T,
    pub expected_edge_utility: T,
    pub expected_cloud_utility: T,
    pub risk_report: RiskReport<T>,
}

impl<T: Real> ContractPair<T> {
    pub fn contracts(&self) -> Contracts<T> {
        Contracts {
            edge: self.edge_contract,
            cloud: self.cloud_contract,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Negotiated<T> {
    pub winner: ContractPair<T>,
    /// Indices of the winning quotes in the grid.
    pub edge_quote: usize,
    pub cloud_quote: usize,
    /// Quote pairs that produced at least one mutually acceptable `(r^user, r^Backup)`.
    pub consensus_candidates: usize,
    /// `(edge quote, cloud quote, r^user, r^Backup)` tuples examined.
    pub evaluations: usize,
    /// Independent sampling-only risk estimate of the winner.
    pub certification: RiskReport<T>,
}

/// User-side checks for one `(r^user, r^Backup)`: both user risks within bounds and non-negative expected utility.
pub fn user_accepts<T: Real>(quote: &EdgeQuote<T>, r_user: u32, r_backup: u32, scenario: &Scenario<T>) -> bool {
    let contracts = Contracts {
        edge: quote.contract(r_user),
        cloud: CloudContract {
            backup_slots: r_backup,
            price_edge_to_cloud: T::zero(),
            penalty_edge_to_cloud: T::zero(),
        },
    };
    let th = &scenario.market.risk_thresholds;
    risk::user_risk_unserved(&contracts, &scenario.market) <= th.user_fail_to_acquire
        && risk::user_risk_negative(&contracts, scenario) <= th.user_negative_utility
        && risk::expected_user_utility(&contracts, scenario) >= T::zero()
}

/// Values of `r^user` acceptable to users at the most favorable `r^Backup` of the domain.
pub fn user_feasible_r<T: Real>(quote: &EdgeQuote<T>, grid: &QuotationGrid<T>, scenario: &Scenario<T>) -> Vec<u32> {
    let backups = grid.r_backup_domain.values();
    grid.r_user_domain
        .values()
        .into_iter()
        .filter(|&r| backups.iter().any(|&b| user_accepts(quote, r, b, scenario)))
        .collect()
}

fn edge_accepts<T: Real>(
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
    settings: &NegotiationSettings,
    seed: u64,
) -> Result<bool> {
    let config = &scenario.market;
    let risks = match settings.edge_risk_method {
        EdgeRiskMethod::Exact => risk::edge_risks_exact(contracts, config),
        EdgeRiskMethod::MonteCarlo => {
            risk::edge_risks(contracts, config, settings.n_mc_negotiation, &mut rng_stream(seed, 1))?
        }
    };
    let th = &config.risk_thresholds;
    Ok(risks.below_expectation <= th.edge_below_expectation
        && risks.underutilization <= th.edge_underutilization
        && risk::expected_edge_utility(contracts, config) >= T::zero())
}

/// Values of `r^Backup` acceptable to the edge for the given quotes and `r^user`.
pub fn edge_feasible_backup<T: Real>(
    edge_quote: &EdgeQuote<T>,
    cloud_quote: &CloudQuote<T>,
    r_user: u32,
    grid: &QuotationGrid<T>,
    scenario: &Scenario<T>,
    settings: &NegotiationSettings,
) -> Result<Vec<u32>> {
    let mut feasible = Vec::new();
    for b in grid.r_backup_domain.values() {
        let contracts = Contracts {
            edge: edge_quote.contract(r_user),
            cloud: cloud_quote.contract(b),
        };
        let seed = candidate_seed(scenario.market.rng_seed, r_user, b);
        if edge_accepts(&contracts, scenario, settings, seed)? {
            feasible.push(b);
        }
    }
    Ok(feasible)
}

/// Subset of `candidates` the cloud accepts: risk within bound and expected utility no worse than without a contract.
pub fn cloud_feasible_backup<T: Real>(
    cloud_quote: &CloudQuote<T>,
    r_user: u32,
    candidates: &[u32],
    scenario: &Scenario<T>,
) -> Vec<u32> {
    let config = &scenario.market;
    let baseline = risk::baseline_cloud_utility(&scenario.cloud, config);
    candidates
        .iter()
        .copied()
        .filter(|&b| {
            let contracts = Contracts {
                edge: EdgeContract {
                    reserved_per_user: r_user,
                    price_user_to_edge: T::zero(),
                    penalty_user_to_edge: T::zero(),
                    compensation_edge_to_user: T::zero(),
                },
                cloud: cloud_quote.contract(b),
            };
            risk::cloud_risk(&contracts, &scenario.cloud, config) <= config.risk_thresholds.cloud_below_expectation
                && risk::expected_cloud_utility(&contracts, &scenario.cloud, config)
                    >= baseline - T::tie_slack(baseline)
        })
        .collect()
}

fn candidate_seed(seed: u64, r_user: u32, r_backup: u32) -> u64 {
    seed ^ (u64::from(r_user) << 48) ^ (u64::from(r_backup) << 16)
}

/// Expected utilities and analytic risks of one contract pair.
pub fn evaluate<T: Real>(
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
    settings: &NegotiationSettings,
) -> Result<ContractPair<T>> {
    let config = &scenario.market;
    let seed = candidate_seed(
        config.rng_seed,
        contracts.edge.reserved_per_user,
        contracts.cloud.backup_slots,
    );
    let risk_report = risk::assess(
        contracts,
        scenario,
        settings.edge_risk_method,
        settings.n_mc_negotiation,
        seed,
    )?;
    Ok(ContractPair {
        edge_contract: contracts.edge,
        cloud_contract: contracts.cloud,
        expected_user_utility: T::count(config.num_users as usize) * risk::expected_user_utility(contracts, scenario),
        expected_edge_utility: risk::expected_edge_utility(contracts, config),
        expected_cloud_utility: risk::expected_cloud_utility(contracts, &scenario.cloud, config),
        risk_report,
    })
}

/// Users' preference inside one quote pair; `Greater` means `a` is preferred.
pub fn user_preference<T: Real>(a: &ContractPair<T>, b: &ContractPair<T>) -> Ordering {
    cmp_real(a.expected_user_utility, b.expected_user_utility)
        .then(cmp_real(a.expected_edge_utility, b.expected_edge_utility))
        .then(cmp_real(a.expected_cloud_utility, b.expected_cloud_utility))
        .then(
            b.edge_contract
                .reserved_per_user
                .cmp(&a.edge_contract.reserved_per_user),
        )
        .then(b.cloud_contract.backup_slots.cmp(&a.cloud_contract.backup_slots))
}

/// Edge's final preference across quote pairs; `Greater` means `a` is preferred.
pub fn edge_preference<T: Real>(a: &ContractPair<T>, b: &ContractPair<T>) -> Ordering {
    cmp_real(a.expected_edge_utility, b.expected_edge_utility)
        .then(cmp_real(a.expected_user_utility, b.expected_user_utility))
        .then(cmp_real(a.expected_cloud_utility, b.expected_cloud_utility))
        .then(
            b.edge_contract
                .reserved_per_user
                .cmp(&a.edge_contract.reserved_per_user),
        )
        .then(b.cloud_contract.backup_slots.cmp(&a.cloud_contract.backup_slots))
}

/// Runs the full negotiation and re-certifies the winner by sampling.
pub fn negotiate<T: Real>(
    grid: &QuotationGrid<T>,
    scenario: &Scenario<T>,
    mode: Mode,
    settings: &NegotiationSettings,
) -> Result<Negotiated<T>> {
    grid.validate(scenario.market.cloud_capacity)?;
    let config = &scenario.market;
    let mut evaluations = 0usize;
    let mut consensus_candidates = 0usize;
    let mut best: Option<(ContractPair<T>, usize, usize)> = None;

    for (ei, eq) in grid.edge_quotes.iter().enumerate() {
        let user_rs = user_feasible_r(eq, grid, scenario);
        for (ci, cq) in grid.cloud_quotes.iter().enumerate() {
            let mut users_pick: Option<ContractPair<T>> = None;
            for &r in &user_rs {
                let edge_ok = edge_feasible_backup(eq, cq, r, grid, scenario, settings)?;
                evaluations += grid.r_backup_domain.values().len();
                for b in cloud_feasible_backup(cq, r, &edge_ok, scenario) {
                    let booked = u64::from(config.num_users) * u64::from(r);
                    if mode == Mode::CBooking && booked > u64::from(config.edge_capacity) + u64::from(b) {
                        continue;
                    }
                    if !user_accepts(eq, r, b, scenario) {
                        continue;
                    }
                    let contracts = Contracts {
                        edge: eq.contract(r),
                        cloud: cq.contract(b),
                    };
                    let pair = evaluate(&contracts, scenario, settings)?;
                    if users_pick
                        .as_ref()
                        .is_none_or(|cur| user_preference(&pair, cur) == Ordering::Greater)
                    {
                        users_pick = Some(pair);
                    }
                }
            }
            if let Some(pair) = users_pick {
                consensus_candidates += 1;
                if best
                    .as_ref()
                    .is_none_or(|(cur, _, _)| edge_preference(&pair, cur) == Ordering::Greater)
                {
                    best = Some((pair, ei, ci));
                }
            }
        }
    }

    let (winner, edge_quote, cloud_quote) = best.ok_or_else(|| {
        Error::NoFeasibleContract(format!(
            "{mode:?}: none of {} edge x {} cloud quotes met every risk threshold",
            grid.edge_quotes.len(),
            grid.cloud_quotes.len()
        ))
    })?;
    let certification = risk::certify(
        &winner.contracts(),
        scenario,
        settings.n_mc_certify,
        config.rng_seed ^ 0x5eed,
    )?;
    Ok(Negotiated {
        winner,
        edge_quote,
        cloud_quote,
        consensus_candidates,
        evaluations,
        certification,
    })
}

/// Contract terms as written to and read from a contract file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ContractTerms<T> {
    pub reserved_per_user: u32,
    pub price_user_to_edge: T,
    pub penalty_user_to_edge: T,
    pub compensation_edge_to_user: T,
    pub backup_slots: u32,
    pub price_edge_to_cloud: T,
    pub penalty_edge_to_cloud: T,
}

impl<T: Real> From<Contracts<T>> for ContractTerms<T> {
    fn from(c: Contracts<T>) -> Self {
        Self {
            reserved_per_user: c.edge.reserved_per_user,
            price_user_to_edge: c.edge.price_user_to_edge,
            penalty_user_to_edge: c.edge.penalty_user_to_edge,
            compensation_edge_to_user: c.edge.compensation_edge_to_user,
            backup_slots: c.cloud.backup_slots,
            price_edge_to_cloud: c.cloud.price_edge_to_cloud,
            penalty_edge_to_cloud: c.cloud.penalty_edge_to_cloud,
        }
    }
}

impl<T: Real> From<ContractTerms<T>> for Contracts<T> {
    fn from(t: ContractTerms<T>) -> Self {
        Contracts {
            edge: EdgeContract {
                reserved_per_user: t.reserved_per_user,
                price_user_to_edge: t.price_user_to_edge,
                penalty_user_to_edge: t.penalty_user_to_edge,
                compensation_edge_to_user: t.compensation_edge_to_user,
            },
            cloud: CloudContract {
                backup_slots: t.backup_slots,
                price_edge_to_cloud: t.price_edge_to_cloud,
                penalty_edge_to_cloud: t.penalty_edge_to_cloud,
            },
        }
    }
}

/// Signed contracts for both forward-contract mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound = "T: Real")]
pub struct ContractFile<T> {
    pub oatf: ContractTerms<T>,
    pub cbooking: ContractTerms<T>,
}

impl<T: Real> ContractFile<T> {
    pub fn new(oatf: Contracts<T>, cbooking: Contracts<T>) -> Self {
        Self {
            oatf: oatf.into(),
            cbooking: cbooking.into(),
        }
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.into(),
            message: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("contract terms serialize")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
