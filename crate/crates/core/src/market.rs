//! Market configuration, forward contract terms and per-round randomness.
//!
//! One trading round draws, for every contractual user, an attendance flag
//! (Bernoulli), a channel gain (continuous uniform) and an end-to-end delay
//! (continuous uniform, only used by the spot baselines). The cloud's demand
//! from other requesters is a discrete uniform over `0..=cloud_capacity`, and
//! attendees arrive in a uniformly random order.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Upper bounds on the five risk probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RiskThresholds<T> {
    pub user_negative_utility: T,
    pub user_fail_to_acquire: T,
    pub edge_below_expectation: T,
    pub edge_underutilization: T,
    pub cloud_below_expectation: T,
}

impl<T: Real> RiskThresholds<T> {
    pub fn uniform(bound: T) -> Self {
        Self {
            user_negative_utility: bound,
            user_fail_to_acquire: bound,
            edge_below_expectation: bound,
            edge_underutilization: bound,
            cloud_below_expectation: bound,
        }
    }

    pub fn as_array(&self) -> [T; 5] {
        [
            self.user_negative_utility,
            self.user_fail_to_acquire,
            self.edge_below_expectation,
            self.edge_underutilization,
            self.cloud_below_expectation,
        ]
    }
}

impl<T: Real> Default for RiskThresholds<T> {
    fn default() -> Self {
        Self {
            user_negative_utility: T::lit(0.30),
            user_fail_to_acquire: T::lit(0.30),
            edge_below_expectation: T::lit(0.30),
            edge_underutilization: T::lit(0.30),
            cloud_below_expectation: T::lit(0.40),
        }
    }
}

/// Distribution and physical parameters of one market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MarketConfig<T> {
    pub num_users: u32,
    pub attendance_prob: T,
    pub gamma_low: T,
    pub gamma_high: T,
    /// Slots held locally by the edge server.
    pub edge_capacity: u32,
    pub cloud_capacity: u32,
    pub apps_per_user: u32,
    /// Watts.
    pub tx_power: T,
    /// Hz.
    pub bandwidth: T,
    pub data_size_bits: T,
    pub cycles_per_bit: T,
    pub e2e_delay_low_ms: T,
    pub e2e_delay_high_ms: T,
    pub risk_thresholds: RiskThresholds<T>,
    /// Usage below this fraction counts as underutilization.
    pub usage_floor: T,
    pub rng_seed: u64,
}

impl<T: Real> MarketConfig<T> {
    /// Case-study parameters: 137 users, 76% attendance, a 197-slot edge and a 600-slot cloud.
    pub fn paper() -> Self {
        Self {
            num_users: 137,
            attendance_prob: T::lit(0.76),
            gamma_low: T::lit(100.0),
            gamma_high: T::lit(400.0),
            edge_capacity: 197,
            cloud_capacity: 600,
            apps_per_user: 5,
            tx_power: T::lit(0.55),
            bandwidth: T::lit(6.0e6),
            data_size_bits: T::lit(1_048_576.0),
            cycles_per_bit: T::lit(600.0),
            e2e_delay_low_ms: T::lit(2.0),
            e2e_delay_high_ms: T::lit(15.0),
            risk_thresholds: RiskThresholds::default(),
            usage_floor: T::lit(0.5),
            rng_seed: 20_240_501,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        let unit = |x: T| x >= zero && x <= one;
        if self.num_users == 0 {
            return Err(Error::invalid("num_users", "must be at least 1"));
        }
        if !unit(self.attendance_prob) {
            return Err(Error::invalid("attendance_prob", "must lie in [0, 1]"));
        }
        if !(self.gamma_low > zero) || !(self.gamma_low <= self.gamma_high) {
            return Err(Error::invalid("gamma_high", "need 0 < gamma_low <= gamma_high"));
        }
        if self.edge_capacity == 0 {
            return Err(Error::invalid("edge_capacity", "must be at least 1"));
        }
        if self.cloud_capacity == 0 {
            return Err(Error::invalid("cloud_capacity", "must be at least 1"));
        }
        if self.apps_per_user == 0 {
            return Err(Error::invalid("apps_per_user", "must be at least 1"));
        }
        if !(self.tx_power > zero) {
            return Err(Error::invalid("tx_power_w", "must be positive"));
        }
        if !(self.bandwidth > zero) {
            return Err(Error::invalid("bandwidth_hz", "must be positive"));
        }
        if !(self.data_size_bits * self.cycles_per_bit > zero) || self.data_size_bits <= zero {
            return Err(Error::invalid(
                "cycles_per_bit",
                "data_size_bits * cycles_per_bit must be positive",
            ));
        }
        if !(self.e2e_delay_low_ms >= zero && self.e2e_delay_low_ms <= self.e2e_delay_high_ms) {
            return Err(Error::invalid(
                "e2e_delay_high_ms",
                "need 0 <= e2e_delay_low_ms <= e2e_delay_high_ms",
            ));
        }
        let names = [
            "risk_user_negative",
            "risk_user_unserved",
            "risk_edge_below_expectation",
            "risk_edge_underutilization",
            "risk_cloud_below_expectation",
        ];
        for (name, bound) in names.into_iter().zip(self.risk_thresholds.as_array()) {
            if !unit(bound) {
                return Err(Error::invalid(name, "risk thresholds must lie in [0, 1]"));
            }
        }
        if !unit(self.usage_floor) {
            return Err(Error::invalid("usage_floor", "must lie in [0, 1]"));
        }
        Ok(())
    }

    /// CPU cycles needed by one application.
    pub fn workload_cycles(&self) -> T {
        self.cycles_per_bit * self.data_size_bits
    }
}

/// Type-1 forward contract between each end-user and the edge server.
///
/// Monetary fields are per user per trading round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EdgeContract<T> {
    pub reserved_per_user: u32,
    pub price_user_to_edge: T,
    pub penalty_user_to_edge: T,
    pub compensation_edge_to_user: T,
}

/// Type-2 forward contract between the edge server and the cloud server.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CloudContract<T> {
    pub backup_slots: u32,
    pub price_edge_to_cloud: T,
    pub penalty_edge_to_cloud: T,
}

/// Both forward contracts signed before trading starts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Contracts<T> {
    pub edge: EdgeContract<T>,
    pub cloud: CloudContract<T>,
}

impl<T: Real> Contracts<T> {
    pub fn validate(&self, config: &MarketConfig<T>) -> Result<()> {
        let e = &self.edge;
        if e.reserved_per_user == 0 {
            return Err(Error::invalid("reserved_per_user", "must be at least 1"));
        }
        let zero = T::zero();
        if e.price_user_to_edge < zero || e.penalty_user_to_edge < zero || e.compensation_edge_to_user < zero {
            return Err(Error::invalid(
                "price_user_to_edge",
                "edge contract money terms must be non-negative",
            ));
        }
        let c = &self.cloud;
        if c.backup_slots > config.cloud_capacity {
            return Err(Error::invalid(
                "backup_slots",
                format!("exceeds cloud capacity {}", config.cloud_capacity),
            ));
        }
        if c.price_edge_to_cloud < zero || c.penalty_edge_to_cloud < zero {
            return Err(Error::invalid(
                "price_edge_to_cloud",
                "cloud contract money terms must be non-negative",
            ));
        }
        Ok(())
    }

    /// Total booked slots, `|U| * r^user`.
    pub fn booked_slots(&self, config: &MarketConfig<T>) -> u64 {
        u64::from(config.num_users) * u64::from(self.edge.reserved_per_user)
    }

    /// Edge plus contracted backup slots.
    pub fn supply_slots(&self, config: &MarketConfig<T>) -> u64 {
        u64::from(config.edge_capacity) + u64::from(self.cloud.backup_slots)
    }
}

/// Fraction by which booked slots exceed the supply; negative when underbooked.
pub fn overbooking_rate<T: Real>(contracts: &Contracts<T>, config: &MarketConfig<T>) -> T {
    let booked = T::lit(contracts.booked_slots(config) as f64);
    let supply = T::lit(contracts.supply_slots(config) as f64);
    (booked - supply) / supply
}

/// One realization of every random quantity of a trading round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSample<T> {
    pub attendance: Vec<bool>,
    pub channel_gain: Vec<T>,
    /// Slots demanded by the cloud's other customers.
    pub other_demand: u32,
    /// User indices in order of arrival.
    pub arrival_order: Vec<usize>,
    pub e2e_delay_ms: Vec<T>,
}

impl<T> RoundSample<T> {
    pub fn attendees(&self) -> usize {
        self.attendance.iter().filter(|&&a| a).count()
    }
}

/// Deterministic random stream `stream` derived from `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id reserved for round samples; Monte Carlo estimators use other ids.
pub const ROUND_STREAM: u64 = 0;

fn uniform_between<T: Real, R: Rng + ?Sized>(rng: &mut R, low: T, high: T) -> T {
    let u: f64 = rng.random();
    low + (high - low) * T::lit(u)
}

/// Draws one round. The draw order is fixed so a seed pins the whole stream.
pub fn sample_round<T: Real, R: Rng + ?Sized>(config: &MarketConfig<T>, rng: &mut R) -> RoundSample<T> {
    let n = config.num_users as usize;
    let a = config.attendance_prob.as_f64();
    let mut attendance = Vec::with_capacity(n);
    let mut channel_gain = Vec::with_capacity(n);
    let mut e2e_delay_ms = Vec::with_capacity(n);
    for _ in 0..n {
        attendance.push(rng.random_bool(a));
        channel_gain.push(uniform_between(rng, config.gamma_low, config.gamma_high));
        e2e_delay_ms.push(uniform_between(rng, config.e2e_delay_low_ms, config.e2e_delay_high_ms));
    }
    let other_demand = rng.random_range(0..=config.cloud_capacity);
    let mut arrival_order: Vec<usize> = (0..n).collect();
    arrival_order.shuffle(rng);
    RoundSample {
        attendance,
        channel_gain,
        other_demand,
        arrival_order,
        e2e_delay_ms,
    }
}

/// Endless stream of round samples seeded from the configuration.
pub struct RoundSampler<'a, T> {
    config: &'a MarketConfig<T>,
    rng: ChaCha8Rng,
}

impl<'a, T: Real> RoundSampler<'a, T> {
    pub fn new(config: &'a MarketConfig<T>) -> Self {
        Self::with_seed(config, config.rng_seed)
    }

    pub fn with_seed(config: &'a MarketConfig<T>, seed: u64) -> Self {
        Self {
            config,
            rng: rng_stream(seed, ROUND_STREAM),
        }
    }
}

impl<T: Real> Iterator for RoundSampler<'_, T> {
    type Item = RoundSample<T>;

    fn next(&mut self) -> Option<Self::Item> {
        Some(sample_round(self.config, &mut self.rng))
    }
}
