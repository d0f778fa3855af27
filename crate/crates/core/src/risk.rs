//! The five risk probabilities, expected utilities, and their Monte Carlo estimators.
//!
//! Closed forms use the fact that a round's ledger depends on attendance only
//! through the attendee count, which is binomial. A given attendee's position
//! in the arrival order is uniform, so its tier follows from the count too.
//! Served utility is non-decreasing in channel gain, which turns the
//! negative-utility probability into a threshold on a uniform gain.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::binomial;
use crate::config::Scenario;
use crate::engine::TierCounts;
use crate::error::{Error, Result};
use crate::market::{rng_stream, Contracts, MarketConfig, RiskThresholds};
use crate::physics::{self, Tier};
use crate::scalar::Real;
use crate::utility::{self, CloudSideState, UserStatus};

/// Smallest Monte Carlo sample count accepted by the edge estimator.
pub const MIN_MC_SAMPLES: usize = 10_000;

/// Estimated risk probabilities checked against their thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskReport<T> {
    pub user_negative_utility: T,
    pub user_fail_to_acquire: T,
    pub edge_below_expectation: T,
    pub edge_underutilization: T,
    pub cloud_below_expectation: T,
    pub thresholds: RiskThresholds<T>,
    pub satisfied: bool,
}

impl<T: Real> RiskReport<T> {
    pub fn new(probabilities: [T; 5], thresholds: RiskThresholds<T>) -> Self {
        let [user_negative_utility, user_fail_to_acquire, edge_below_expectation, edge_underutilization, cloud_below_expectation] =
            probabilities;
        let mut report = Self {
            user_negative_utility,
            user_fail_to_acquire,
            edge_below_expectation,
            edge_underutilization,
            cloud_below_expectation,
            thresholds,
            satisfied: false,
        };
        report.satisfied = report.within(T::zero());
        report
    }

    pub fn probabilities(&self) -> [T; 5] {
        [
            self.user_negative_utility,
            self.user_fail_to_acquire,
            self.edge_below_expectation,
            self.edge_underutilization,
            self.cloud_below_expectation,
        ]
    }

    /// Whether every probability is at most its threshold plus `slack`.
    pub fn within(&self, slack: T) -> bool {
        self.probabilities()
            .iter()
            .zip(self.thresholds.as_array())
            .all(|(&p, bound)| p <= bound + slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRisks<T> {
    pub below_expectation: T,
    pub underutilization: T,
}

/// How the edge risks are evaluated during negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeRiskMethod {
    /// Sum over the binomial attendee count.
    Exact,
    MonteCarlo,
}

/// Where an attending user ends up, marginalised over everyone else.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TierOdds<T> {
    pub edge: T,
    pub cloud: T,
    pub compensated: T,
}

/// Tier probabilities of one user conditional on attending.
pub fn tier_odds<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> TierOdds<T> {
    let others = binomial::pmf(config.num_users - 1, config.attendance_prob);
    let mut odds = TierOdds {
        edge: T::zero(),
        cloud: T::zero(),
        compensated: T::zero(),
    };
    for (k, &w) in others.iter().enumerate() {
        if w == T::zero() {
            continue;
        }
        let attendees = k as u32 + 1;
        let tc = TierCounts::for_attendees(attendees, contracts, config);
        let total = T::count(attendees as usize);
        odds.edge += w * T::count(tc.edge as usize) / total;
        odds.cloud += w * T::count(tc.cloud as usize) / total;
        odds.compensated += w * T::count(tc.compensated as usize) / total;
    }
    odds
}

/// Probability that a uniform gain on `[low, high]` makes the non-decreasing `f` at most zero.
fn gain_share_at_or_below_zero<T: Real>(low: T, high: T, f: impl Fn(T) -> T) -> T {
    if f(high) <= T::zero() {
        return T::one();
    }
    if low >= high || f(low) > T::zero() {
        return T::zero();
    }
    let (mut lo, mut hi) = (low, high);
    for _ in 0..200 {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) <= T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo - low) / (high - low)
}

/// Mean of `f` under a uniform gain on `[low, high]` (composite Simpson).
fn gain_mean<T: Real>(low: T, high: T, f: impl Fn(T) -> T) -> T {
    const PANELS: usize = 512;
    if low >= high {
        return f(low);
    }
    let h = (high - low) / T::count(PANELS);
    let mut acc = f(low) + f(high);
    for i in 1..PANELS {
        let w = if i % 2 == 1 { T::lit(4.0) } else { T::lit(2.0) };
        acc += w * f(low + h * T::count(i));
    }
    acc * h / T::lit(3.0) / (high - low)
}

fn served_utility<T: Real>(gain: T, tier: Tier, contracts: &Contracts<T>, scenario: &Scenario<T>) -> T {
    physics::service_benefit(
        gain,
        contracts.edge.reserved_per_user,
        &scenario.profile,
        &scenario.market,
        tier,
    ) - contracts.edge.price_user_to_edge
}

fn indicator<T: Real>(b: bool) -> T {
    if b {
        T::one()
    } else {
        T::zero()
    }
}

/// `P(U^{u_x} <= 0)` for one contractual user.
pub fn user_risk_negative<T: Real>(contracts: &Contracts<T>, scenario: &Scenario<T>) -> T {
    let config = &scenario.market;
    let a = config.attendance_prob;
    let edge = &contracts.edge;
    let odds = tier_odds(contracts, config);
    let served_share = |tier| {
        gain_share_at_or_below_zero(config.gamma_low, config.gamma_high, |g| {
            served_utility(g, tier, contracts, scenario)
        })
    };
    let attending = odds.compensated * indicator(edge.compensation_edge_to_user <= T::zero())
        + odds.edge * served_share(Tier::Edge)
        + odds.cloud * served_share(Tier::Cloud);
    let absent = (T::one() - a) * indicator(-edge.penalty_user_to_edge <= T::zero());
    (absent + a * attending).max(T::zero()).min(T::one())
}

/// Probability that a user attends while total attending demand exceeds edge plus backup supply.
pub fn user_risk_unserved<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> T {
    let r = u64::from(contracts.edge.reserved_per_user);
    let supply = contracts.supply_slots(config);
    // r * (K + 1) > supply  <=>  K >= floor(supply / r)
    let k_min = supply / r;
    config.attendance_prob * binomial::upper_tail(config.num_users - 1, k_min, config.attendance_prob)
}

fn edge_ledger<T: Real>(attendees: u32, contracts: &Contracts<T>, config: &MarketConfig<T>) -> (T, T) {
    let tc = TierCounts::for_attendees(attendees, contracts, config);
    let counts = tc.round_counts(config.num_users - attendees);
    (
        utility::edge_utility(counts, contracts, tc.bought_backup),
        tc.usage_rate(contracts, config),
    )
}

/// Expected per-user utility.
pub fn expected_user_utility<T: Real>(contracts: &Contracts<T>, scenario: &Scenario<T>) -> T {
    let config = &scenario.market;
    let a = config.attendance_prob;
    let edge = &contracts.edge;
    let odds = tier_odds(contracts, config);
    let mean_served = |tier| {
        gain_mean(config.gamma_low, config.gamma_high, |g| {
            served_utility(g, tier, contracts, scenario)
        })
    };
    let mut attending = odds.compensated * edge.compensation_edge_to_user;
    if odds.edge > T::zero() {
        attending += odds.edge * mean_served(Tier::Edge);
    }
    if odds.cloud > T::zero() {
        attending += odds.cloud * mean_served(Tier::Cloud);
    }
    a * attending - (T::one() - a) * edge.penalty_user_to_edge
}

pub fn expected_edge_utility<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> T {
    binomial::pmf(config.num_users, config.attendance_prob)
        .iter()
        .enumerate()
        .filter(|(_, &w)| w > T::zero())
        .map(|(k, &w)| w * edge_ledger(k as u32, contracts, config).0)
        .sum()
}

/// Edge risks by summing over the attendee count.
pub fn edge_risks_exact<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> EdgeRisks<T> {
    let weights = binomial::pmf(config.num_users, config.attendance_prob);
    let ledger: Vec<(T, T)> = (0..=config.num_users)
        .map(|k| edge_ledger(k, contracts, config))
        .collect();
    let mean: T = weights.iter().zip(&ledger).map(|(&w, &(u, _))| w * u).sum();
    let cut = mean - T::tie_slack(mean);
    let mut risks = EdgeRisks {
        below_expectation: T::zero(),
        underutilization: T::zero(),
    };
    for (&w, &(u, usage)) in weights.iter().zip(&ledger) {
        if u < cut {
            risks.below_expectation += w;
        }
        if usage < config.usage_floor {
            risks.underutilization += w;
        }
    }
    risks.below_expectation = risks.below_expectation.min(T::one());
    risks.underutilization = risks.underutilization.min(T::one());
    risks
}

fn attendee_sampler<T: Real>(n: u32, config: &MarketConfig<T>) -> Binomial {
    Binomial::new(u64::from(n), config.attendance_prob.as_f64()).expect("attendance_prob validated in [0, 1]")
}

/// Edge risks by simulation: one pass estimates `E[U^Edge]`, a second fresh pass
/// estimates `P(U^Edge < E)` and `P(usage < usage_floor)`.
pub fn edge_risks<T: Real, R: Rng + ?Sized>(
    contracts: &Contracts<T>,
    config: &MarketConfig<T>,
    n_mc: usize,
    rng: &mut R,
) -> Result<EdgeRisks<T>> {
    if n_mc < MIN_MC_SAMPLES {
        return Err(Error::TooFewSamples {
            got: n_mc,
            floor: MIN_MC_SAMPLES,
        });
    }
    let attendees = attendee_sampler(config.num_users, config);
    let draw = |rng: &mut R| edge_ledger(attendees.sample(rng) as u32, contracts, config);
    let mut total = T::zero();
    for _ in 0..n_mc {
        total += draw(rng).0;
    }
    let mean = total / T::count(n_mc);
    let cut = mean - T::tie_slack(mean);
    let (mut below, mut under) = (0usize, 0usize);
    for _ in 0..n_mc {
        let (u, usage) = draw(rng);
        below += usize::from(u < cut);
        under += usize::from(usage < config.usage_floor);
    }
    let n = T::count(n_mc);
    Ok(EdgeRisks {
        below_expectation: T::count(below) / n,
        underutilization: T::count(under) / n,
    })
}

/// Probability that the edge buys its backup in a round.
pub fn purchase_probability<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> T {
    let r = u64::from(contracts.edge.reserved_per_user);
    let k_min = u64::from(config.edge_capacity) / r + 1;
    binomial::upper_tail(config.num_users, k_min, config.attendance_prob)
}

fn cloud_values<T: Real>(
    contracts: &Contracts<T>,
    state: &CloudSideState<T>,
    config: &MarketConfig<T>,
) -> (Vec<T>, Vec<T>) {
    (0..=config.cloud_capacity)
        .map(|beta| {
            (
                utility::cloud_utility(beta, true, state, contracts, config),
                utility::cloud_utility(beta, false, state, contracts, config),
            )
        })
        .unzip()
}

pub fn expected_cloud_utility<T: Real>(
    contracts: &Contracts<T>,
    state: &CloudSideState<T>,
    config: &MarketConfig<T>,
) -> T {
    let pi = purchase_probability(contracts, config);
    let (bought, skipped) = cloud_values(contracts, state, config);
    let n = T::count(bought.len());
    bought
        .iter()
        .zip(&skipped)
        .map(|(&b, &s)| pi * b + (T::one() - pi) * s)
        .sum::<T>()
        / n
}

/// Expected cloud revenue without any contract with the edge.
pub fn baseline_cloud_utility<T: Real>(state: &CloudSideState<T>, config: &MarketConfig<T>) -> T {
    state.other_price * T::count(config.cloud_capacity as usize) / T::lit(2.0)
}

/// `P(U^Cloud <= E[U^Cloud])`, exact over every `beta` and the purchase event.
pub fn cloud_risk<T: Real>(contracts: &Contracts<T>, state: &CloudSideState<T>, config: &MarketConfig<T>) -> T {
    let pi = purchase_probability(contracts, config);
    let (bought, skipped) = cloud_values(contracts, state, config);
    let n = T::count(bought.len());
    let mean = bought
        .iter()
        .zip(&skipped)
        .map(|(&b, &s)| pi * b + (T::one() - pi) * s)
        .sum::<T>()
        / n;
    let cut = mean + T::tie_slack(mean);
    let mut risk = T::zero();
    for (&b, &s) in bought.iter().zip(&skipped) {
        if b <= cut {
            risk += pi;
        }
        if s <= cut {
            risk += T::one() - pi;
        }
    }
    (risk / n).min(T::one())
}

/// Sampling estimate of [`user_risk_negative`].
pub fn user_risk_negative_mc<T: Real, R: Rng + ?Sized>(
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
    n_mc: usize,
    rng: &mut R,
) -> T {
    let config = &scenario.market;
    let others = attendee_sampler(config.num_users - 1, config);
    let a = config.attendance_prob.as_f64();
    let mut hits = 0usize;
    for _ in 0..n_mc {
        let attended = rng.random_bool(a);
        let (status, gain) = if attended {
            let attendees = others.sample(rng) as u32 + 1;
            let position = rng.random_range(0..attendees);
            let tc = TierCounts::for_attendees(attendees, contracts, config);
            let status = if position < tc.edge {
                UserStatus::ServedEdge
            } else if position < tc.edge + tc.cloud {
                UserStatus::ServedCloud
            } else {
                UserStatus::Compensated
            };
            let u: f64 = rng.random();
            (
                status,
                config.gamma_low + (config.gamma_high - config.gamma_low) * T::lit(u),
            )
        } else {
            (UserStatus::Absent, config.gamma_low)
        };
        let u = utility::user_utility(attended, gain, status, contracts, &scenario.profile, config)
            .expect("consistent by construction");
        hits += usize::from(u <= T::zero());
    }
    T::count(hits) / T::count(n_mc)
}

/// Sampling estimate of [`user_risk_unserved`].
pub fn user_risk_unserved_mc<T: Real, R: Rng + ?Sized>(
    contracts: &Contracts<T>,
    config: &MarketConfig<T>,
    n_mc: usize,
    rng: &mut R,
) -> T {
    let others = attendee_sampler(config.num_users - 1, config);
    let a = config.attendance_prob.as_f64();
    let r = u64::from(contracts.edge.reserved_per_user);
    let supply = contracts.supply_slots(config);
    let hits = (0..n_mc)
        .filter(|_| rng.random_bool(a) && r * (others.sample(rng) + 1) > supply)
        .count();
    T::count(hits) / T::count(n_mc)
}

/// Sampling estimate of [`cloud_risk`], two passes like [`edge_risks`].
pub fn cloud_risk_mc<T: Real, R: Rng + ?Sized>(
    contracts: &Contracts<T>,
    state: &CloudSideState<T>,
    config: &MarketConfig<T>,
    n_mc: usize,
    rng: &mut R,
) -> T {
    let attendees = attendee_sampler(config.num_users, config);
    let r = u64::from(contracts.edge.reserved_per_user);
    let draw = |rng: &mut R| {
        let beta = rng.random_range(0..=config.cloud_capacity);
        let bought = r * attendees.sample(rng) > u64::from(config.edge_capacity);
        utility::cloud_utility(beta, bought, state, contracts, config)
    };
    let mut total = T::zero();
    for _ in 0..n_mc {
        total += draw(rng);
    }
    let mean = total / T::count(n_mc);
    let cut = mean + T::tie_slack(mean);
    let hits = (0..n_mc).filter(|_| draw(rng) <= cut).count();
    T::count(hits) / T::count(n_mc)
}

/// Risk report from the closed forms; edge risks per `method`.
pub fn assess<T: Real>(
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
    method: EdgeRiskMethod,
    n_mc: usize,
    seed: u64,
) -> Result<RiskReport<T>> {
    let config = &scenario.market;
    let edge = match method {
        EdgeRiskMethod::Exact => edge_risks_exact(contracts, config),
        EdgeRiskMethod::MonteCarlo => edge_risks(contracts, config, n_mc, &mut rng_stream(seed, 101))?,
    };
    Ok(RiskReport::new(
        [
            user_risk_negative(contracts, scenario),
            user_risk_unserved(contracts, config),
            edge.below_expectation,
            edge.underutilization,
            cloud_risk(contracts, &scenario.cloud, config),
        ],
        config.risk_thresholds,
    ))
}

/// Risk report estimated purely by sampling, each risk on its own stream.
pub fn certify<T: Real>(
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
    n_mc: usize,
    seed: u64,
) -> Result<RiskReport<T>> {
    let config = &scenario.market;
    let edge = edge_risks(contracts, config, n_mc, &mut rng_stream(seed, 201))?;
    Ok(RiskReport::new(
        [
            user_risk_negative_mc(contracts, scenario, n_mc, &mut rng_stream(seed, 202)),
            user_risk_unserved_mc(contracts, config, n_mc, &mut rng_stream(seed, 203)),
            edge.below_expectation,
            edge.underutilization,
            cloud_risk_mc(contracts, &scenario.cloud, config, n_mc, &mut rng_stream(seed, 204)),
        ],
        config.risk_thresholds,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{CloudContract, EdgeContract};

    fn contracts(r: u32, backup: u32, p: f64, q: f64, c: f64) -> Contracts<f64> {
        Contracts {
            edge: EdgeContract {
                reserved_per_user: r,
                price_user_to_edge: p,
                penalty_user_to_edge: q,
                compensation_edge_to_user: c,
            },
            cloud: CloudContract {
                backup_slots: backup,
                price_edge_to_cloud: 0.3 * backup as f64,
                penalty_edge_to_cloud: 0.15 * backup as f64,
            },
        }
    }

    #[test]
    fn zero_penalty_absence_still_counts() {
        // absence yields exactly 0, which is <= 0
        let s = Scenario::<f64>::paper();
        let c = contracts(5, 400, 0.0, 0.0, 1.0);
        let risk = user_risk_negative(&c, &s);
        assert!((risk - 0.24).abs() < 1e-12, "{risk}");
    }

    #[test]
    fn full_attendance_positive_service_is_riskless() {
        let mut s = Scenario::<f64>::paper();
        s.market.attendance_prob = 1.0;
        let c = contracts(1, 0, 0.5, 0.5, 0.5);
        assert!(c.booked_slots(&s.market) <= c.supply_slots(&s.market));
        assert_eq!(user_risk_negative(&c, &s), 0.0);
    }

    #[test]
    fn unserved_small_case_by_enumeration() {
        let mut cfg = MarketConfig::<f64>::paper();
        cfg.num_users = 3;
        cfg.attendance_prob = 0.5;
        cfg.edge_capacity = 2;
        let c = contracts(1, 0, 1.0, 1.0, 1.0);
        assert!((user_risk_unserved(&c, &cfg) - 0.125).abs() < 1e-15);
        let ample = contracts(1, 1, 1.0, 1.0, 1.0);
        assert_eq!(user_risk_unserved(&ample, &cfg), 0.0);
        cfg.attendance_prob = 0.0;
        assert_eq!(user_risk_unserved(&c, &cfg), 0.0);
    }

    #[test]
    fn tier_odds_sum_to_one() {
        let cfg = MarketConfig::<f64>::paper();
        for (r, b) in [(1, 0), (3, 100), (5, 350), (5, 600)] {
            let o = tier_odds(&contracts(r, b, 1.0, 1.0, 1.0), &cfg);
            assert!((o.edge + o.cloud + o.compensated - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn degenerate_edge_point_mass() {
        let mut cfg = MarketConfig::<f64>::paper();
        cfg.attendance_prob = 1.0;
        cfg.gamma_low = 250.0;
        cfg.gamma_high = 250.0;
        let c = contracts(5, 350, 3.0, 3.0, 1.5);
        let mc = edge_risks(&c, &cfg, 20_000, &mut rng_stream(1, 1)).unwrap();
        assert_eq!(mc.below_expectation, 0.0);
        assert_eq!(edge_risks_exact(&c, &cfg).below_expectation, 0.0);
    }

    #[test]
    fn zero_usage_floor_is_vacuous() {
        let mut cfg = MarketConfig::<f64>::paper();
        cfg.usage_floor = 0.0;
        let c = contracts(1, 600, 1.0, 0.5, 0.5);
        let mc = edge_risks(&c, &cfg, 10_000, &mut rng_stream(2, 1)).unwrap();
        assert_eq!(mc.underutilization, 0.0);
        assert_eq!(edge_risks_exact(&c, &cfg).underutilization, 0.0);
    }

    #[test]
    fn edge_sample_floor() {
        let cfg = MarketConfig::<f64>::paper();
        let c = contracts(5, 350, 3.0, 3.0, 1.5);
        assert!(matches!(
            edge_risks(&c, &cfg, 9_999, &mut rng_stream(0, 0)),
            Err(Error::TooFewSamples {
                got: 9_999,
                floor: 10_000
            })
        ));
    }

    #[test]
    fn edge_mc_runs_agree() {
        let cfg = MarketConfig::<f64>::paper();
        let c = contracts(5, 325, 3.0, 2.0, 1.5);
        let a = edge_risks(&c, &cfg, 100_000, &mut rng_stream(5, 1)).unwrap();
        let b = edge_risks(&c, &cfg, 100_000, &mut rng_stream(6, 1)).unwrap();
        assert!((a.below_expectation - b.below_expectation).abs() < 0.01);
        assert!((a.underutilization - b.underutilization).abs() < 0.01);
        let exact = edge_risks_exact(&c, &cfg);
        assert!((a.below_expectation - exact.below_expectation).abs() < 0.01);
    }

    fn cloud_only(backup: u32, p: f64, q: f64) -> Contracts<f64> {
        let mut c = contracts(5, backup, 1.0, 1.0, 1.0);
        c.cloud.price_edge_to_cloud = p;
        c.cloud.penalty_edge_to_cloud = q;
        c
    }

    #[test]
    fn cloud_risk_reduces_to_beta() {
        let cfg = MarketConfig::<f64>::paper();
        let no_refund = CloudSideState {
            other_price: 1.0,
            refund_rate: 0.0,
        };
        // P(beta <= 300) = 301 / 601
        let r = cloud_risk(&cloud_only(200, 50.0, 50.0), &no_refund, &cfg);
        assert!((r - 301.0 / 601.0).abs() < 1e-12, "{r}");
        let refund = CloudSideState {
            other_price: 1.0,
            refund_rate: 0.8,
        };
        let r0 = cloud_risk(&cloud_only(0, 50.0, 50.0), &refund, &cfg);
        assert!((r0 - 301.0 / 601.0).abs() < 1e-12);
        let flat = CloudSideState {
            other_price: 0.0,
            refund_rate: 0.0,
        };
        assert_eq!(cloud_risk(&cloud_only(200, 0.0, 0.0), &flat, &cfg), 1.0);
    }

    #[test]
    fn cloud_risk_brute_force() {
        // enumerate (beta, attendee count) jointly
        let cfg = MarketConfig::<f64>::paper();
        let state = CloudSideState::default();
        let c = contracts(2, 400, 1.0, 1.0, 1.0);
        let w = binomial::pmf(137, 0.76);
        let mut outcomes = Vec::new();
        for beta in 0..=600u32 {
            for (k, &wk) in w.iter().enumerate() {
                let bought = 2 * k as u32 > 197;
                outcomes.push((wk / 601.0, utility::cloud_utility(beta, bought, &state, &c, &cfg)));
            }
        }
        let mean: f64 = outcomes.iter().map(|(p, u)| p * u).sum();
        let risk: f64 = outcomes.iter().filter(|(_, u)| *u <= mean + 1e-9).map(|(p, _)| p).sum();
        assert!((mean - expected_cloud_utility(&c, &state, &cfg)).abs() < 1e-9);
        assert!((risk - cloud_risk(&c, &state, &cfg)).abs() < 1e-9);
    }

    #[test]
    fn negative_risk_threshold_inversion() {
        // price set so that the edge-served utility crosses zero inside the gain range
        let s = Scenario::<f64>::paper();
        let mut c = contracts(5, 600, 0.0, 1.0, 1.0);
        let b_lo = physics::service_benefit(100.0, 5, &s.profile, &s.market, Tier::Edge);
        let b_hi = physics::service_benefit(400.0, 5, &s.profile, &s.market, Tier::Edge);
        c.edge.price_user_to_edge = 0.5 * (b_lo + b_hi);
        let analytic = user_risk_negative(&c, &s);
        let mc = user_risk_negative_mc(&c, &s, 400_000, &mut rng_stream(9, 3));
        assert!(analytic > 0.3 && analytic < 1.0);
        assert!((analytic - mc).abs() < 0.005, "{analytic} vs {mc}");
    }

    #[test]
    fn expected_user_utility_matches_sampling() {
        let s = Scenario::<f64>::paper();
        let c = contracts(5, 325, 3.0, 3.0, 1.5);
        let mut rng = rng_stream(4, 4);
        let others = attendee_sampler(136, &s.market);
        let n = 200_000;
        let mut total = 0.0;
        for _ in 0..n {
            let attended = rng.random_bool(0.76);
            let u = if attended {
                let t = others.sample(&mut rng) as u32 + 1;
                let pos = rng.random_range(0..t);
                let tc = TierCounts::for_attendees(t, &c, &s.market);
                let g = 100.0 + 300.0 * rng.random::<f64>();
                if pos < tc.edge {
                    served_utility(g, Tier::Edge, &c, &s)
                } else if pos < tc.edge + tc.cloud {
                    served_utility(g, Tier::Cloud, &c, &s)
                } else {
                    1.5
                }
            } else {
                -3.0
            };
            total += u;
        }
        let est = total / n as f64;
        assert!((est - expected_user_utility(&c, &s)).abs() < 0.02, "{est}");
    }

    #[test]
    fn report_flags() {
        let th = RiskThresholds::uniform(0.3);
        assert!(RiskReport::new([0.3, 0.1, 0.0, 0.2, 0.29], th).satisfied);
        let r = RiskReport::new([0.31, 0.1, 0.0, 0.2, 0.29], th);
        assert!(!r.satisfied);
        assert!(r.within(0.02));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn unserved_monotone(r in 1u32..5, backup in 0u32..575, a in 0.05f64..0.95) {
                let mut cfg = MarketConfig::<f64>::paper();
                cfg.attendance_prob = a;
                let base = user_risk_unserved(&contracts(r, backup, 1.0, 1.0, 1.0), &cfg);
                prop_assert!(user_risk_unserved(&contracts(r + 1, backup, 1.0, 1.0, 1.0), &cfg) >= base);
                prop_assert!(user_risk_unserved(&contracts(r, backup + 25, 1.0, 1.0, 1.0), &cfg) <= base);
                cfg.attendance_prob = (a + 0.04).min(1.0);
                prop_assert!(user_risk_unserved(&contracts(r, backup, 1.0, 1.0, 1.0), &cfg) >= base - 1e-15);
            }

            #[test]
            fn probabilities_in_unit_interval(r in 1u32..6, backup in 0u32..=600, p in 0.0f64..3.0, q in 0.0f64..3.0, c in 0.0f64..3.0, a in 0.0f64..=1.0) {
                let mut s = Scenario::<f64>::paper();
                s.market.attendance_prob = a;
                let k = contracts(r, backup, p * r as f64, q * r as f64, c * r as f64);
                let report = assess(&k, &s, EdgeRiskMethod::Exact, 0, 0).unwrap();
                for x in report.probabilities() {
                    prop_assert!((0.0..=1.0).contains(&x), "{x}");
                }
            }
        }
    }
}
