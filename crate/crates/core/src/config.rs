//! Simulation configuration and its plain key/value file format.
//!
//! A config file is a flat list of `key = value` lines (TOML syntax). Every
//! key is required and unknown keys are rejected, so a file always states the
//! full experiment.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{MarketConfig, RiskThresholds};
use crate::negotiation::{CloudQuote, EdgeQuote, NegotiationSettings, QuotationGrid, SlotRange};
use crate::physics::LatencyEnergyProfile;
use crate::risk::EdgeRiskMethod;
use crate::scalar::Real;
use crate::spot::SpotSettings;
use crate::utility::CloudSideState;

/// Everything a forward-contract round depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Scenario<T> {
    pub market: MarketConfig<T>,
    pub profile: LatencyEnergyProfile<T>,
    pub cloud: CloudSideState<T>,
}

impl<T: Real> Scenario<T> {
    pub fn paper() -> Self {
        Self {
            market: MarketConfig::paper(),
            profile: LatencyEnergyProfile::default(),
            cloud: CloudSideState::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.market.validate()?;
        self.profile.validate()?;
        self.cloud.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T> {
    pub scenario: Scenario<T>,
    pub spot: SpotSettings<T>,
    pub grid: QuotationGrid<T>,
    pub negotiation: NegotiationSettings,
}

impl<T: Real> SimConfig<T> {
    pub fn paper() -> Self {
        Self {
            scenario: Scenario::paper(),
            spot: SpotSettings::default(),
            grid: QuotationGrid::paper(),
            negotiation: NegotiationSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.spot.validate()?;
        self.grid.validate(self.scenario.market.cloud_capacity)
    }

    /// Parses and validates a config; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.into(),
            message: e.message().to_string(),
        })?;
        let config = file.into_config()?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(&ConfigFile::from_config(self)).expect("config serializes")
    }
}

/// On-disk layout: one key per scalar, quote grids as parallel arrays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    num_users: u32,
    attendance_prob: f64,
    gamma_low: f64,
    gamma_high: f64,
    edge_capacity: u32,
    cloud_capacity: u32,
    apps_per_user: u32,
    tx_power_w: f64,
    bandwidth_hz: f64,
    data_size_bits: f64,
    cycles_per_bit: f64,
    e2e_delay_low_ms: f64,
    e2e_delay_high_ms: f64,
    risk_user_negative: f64,
    risk_user_unserved: f64,
    risk_edge_below_expectation: f64,
    risk_edge_underutilization: f64,
    risk_cloud_below_expectation: f64,
    usage_floor: f64,
    rng_seed: u64,

    local_cpu_hz: f64,
    edge_cpu_hz_per_slot: f64,
    cloud_cpu_hz_per_slot: f64,
    compute_energy_coeff: f64,
    time_value: f64,
    energy_value: f64,

    other_price: f64,
    refund_rate: f64,

    spot_rounds_of_negotiation: u32,
    spot_round_trips_per_exchange: u32,
    spot_time_budget_s: f64,
    spot_differential_spread: f64,

    edge_quote_prices: Vec<f64>,
    edge_quote_penalties: Vec<f64>,
    edge_quote_compensations: Vec<f64>,
    cloud_quote_prices: Vec<f64>,
    cloud_quote_penalties: Vec<f64>,
    r_user_min: u32,
    r_user_max: u32,
    r_backup_min: u32,
    r_backup_max: u32,
    r_backup_step: u32,

    edge_risk_method: EdgeRiskMethod,
    mc_samples_negotiation: usize,
    mc_samples_certify: usize,
}

impl ConfigFile {
    fn into_config<T: Real>(self) -> Result<SimConfig<T>> {
        let t = T::lit;
        let edge_len = self.edge_quote_prices.len();
        if self.edge_quote_penalties.len() != edge_len || self.edge_quote_compensations.len() != edge_len {
            return Err(Error::invalid(
                "edge_quote_penalties",
                "edge quote arrays must have equal lengths",
            ));
        }
        if self.cloud_quote_penalties.len() != self.cloud_quote_prices.len() {
            return Err(Error::invalid(
                "cloud_quote_penalties",
                "cloud quote arrays must have equal lengths",
            ));
        }
        let edge_quotes = (0..edge_len)
            .map(|i| EdgeQuote {
                price: t(self.edge_quote_prices[i]),
                penalty: t(self.edge_quote_penalties[i]),
                compensation: t(self.edge_quote_compensations[i]),
            })
            .collect();
        let cloud_quotes = self
            .cloud_quote_prices
            .iter()
            .zip(&self.cloud_quote_penalties)
            .map(|(&p, &q)| CloudQuote {
                price: t(p),
                penalty: t(q),
            })
            .collect();
        Ok(SimConfig {
            scenario: Scenario {
                market: MarketConfig {
                    num_users: self.num_users,
                    attendance_prob: t(self.attendance_prob),
                    gamma_low: t(self.gamma_low),
                    gamma_high: t(self.gamma_high),
                    edge_capacity: self.edge_capacity,
                    cloud_capacity: self.cloud_capacity,
                    apps_per_user: self.apps_per_user,
                    tx_power: t(self.tx_power_w),
                    bandwidth: t(self.bandwidth_hz),
                    data_size_bits: t(self.data_size_bits),
                    cycles_per_bit: t(self.cycles_per_bit),
                    e2e_delay_low_ms: t(self.e2e_delay_low_ms),
                    e2e_delay_high_ms: t(self.e2e_delay_high_ms),
                    risk_thresholds: RiskThresholds {
                        user_negative_utility: t(self.risk_user_negative),
                        user_fail_to_acquire: t(self.risk_user_unserved),
                        edge_below_expectation: t(self.risk_edge_below_expectation),
                        edge_underutilization: t(self.risk_edge_underutilization),
                        cloud_below_expectation: t(self.risk_cloud_below_expectation),
                    },
                    usage_floor: t(self.usage_floor),
                    rng_seed: self.rng_seed,
                },
                profile: LatencyEnergyProfile {
                    local_cpu_hz: t(self.local_cpu_hz),
                    edge_cpu_hz_per_slot: t(self.edge_cpu_hz_per_slot),
                    cloud_cpu_hz_per_slot: t(self.cloud_cpu_hz_per_slot),
                    compute_energy_coeff: t(self.compute_energy_coeff),
                    time_value: t(self.time_value),
                    energy_value: t(self.energy_value),
                },
                cloud: CloudSideState {
                    other_price: t(self.other_price),
                    refund_rate: t(self.refund_rate),
                },
            },
            spot: SpotSettings {
                rounds_of_negotiation: self.spot_rounds_of_negotiation,
                round_trips_per_exchange: self.spot_round_trips_per_exchange,
                time_budget_s: t(self.spot_time_budget_s),
                differential_spread: t(self.spot_differential_spread),
            },
            grid: QuotationGrid {
                edge_quotes,
                cloud_quotes,
                r_user_domain: SlotRange::new(self.r_user_min, self.r_user_max, 1),
                r_backup_domain: SlotRange::new(self.r_backup_min, self.r_backup_max, self.r_backup_step),
            },
            negotiation: NegotiationSettings {
                edge_risk_method: self.edge_risk_method,
                n_mc_negotiation: self.mc_samples_negotiation,
                n_mc_certify: self.mc_samples_certify,
            },
        })
    }

    fn from_config<T: Real>(c: &SimConfig<T>) -> Self {
        let m = &c.scenario.market;
        let p = &c.scenario.profile;
        let th = &m.risk_thresholds;
        let f = |x: T| x.as_f64();
        Self {
            num_users: m.num_users,
            attendance_prob: f(m.attendance_prob),
            gamma_low: f(m.gamma_low),
            gamma_high: f(m.gamma_high),
            edge_capacity: m.edge_capacity,
            cloud_capacity: m.cloud_capacity,
            apps_per_user: m.apps_per_user,
            tx_power_w: f(m.tx_power),
            bandwidth_hz: f(m.bandwidth),
            data_size_bits: f(m.data_size_bits),
            cycles_per_bit: f(m.cycles_per_bit),
            e2e_delay_low_ms: f(m.e2e_delay_low_ms),
            e2e_delay_high_ms: f(m.e2e_delay_high_ms),
            risk_user_negative: f(th.user_negative_utility),
            risk_user_unserved: f(th.user_fail_to_acquire),
            risk_edge_below_expectation: f(th.edge_below_expectation),
            risk_edge_underutilization: f(th.edge_underutilization),
            risk_cloud_below_expectation: f(th.cloud_below_expectation),
            usage_floor: f(m.usage_floor),
            rng_seed: m.rng_seed,
            local_cpu_hz: f(p.local_cpu_hz),
            edge_cpu_hz_per_slot: f(p.edge_cpu_hz_per_slot),
            cloud_cpu_hz_per_slot: f(p.cloud_cpu_hz_per_slot),
            compute_energy_coeff: f(p.compute_energy_coeff),
            time_value: f(p.time_value),
            energy_value: f(p.energy_value),
            other_price: f(c.scenario.cloud.other_price),
            refund_rate: f(c.scenario.cloud.refund_rate),
            spot_rounds_of_negotiation: c.spot.rounds_of_negotiation,
            spot_round_trips_per_exchange: c.spot.round_trips_per_exchange,
            spot_time_budget_s: f(c.spot.time_budget_s),
            spot_differential_spread: f(c.spot.differential_spread),
            edge_quote_prices: c.grid.edge_quotes.iter().map(|q| f(q.price)).collect(),
            edge_quote_penalties: c.grid.edge_quotes.iter().map(|q| f(q.penalty)).collect(),
            edge_quote_compensations: c.grid.edge_quotes.iter().map(|q| f(q.compensation)).collect(),
            cloud_quote_prices: c.grid.cloud_quotes.iter().map(|q| f(q.price)).collect(),
            cloud_quote_penalties: c.grid.cloud_quotes.iter().map(|q| f(q.penalty)).collect(),
            r_user_min: c.grid.r_user_domain.min,
            r_user_max: c.grid.r_user_domain.max,
            r_backup_min: c.grid.r_backup_domain.min,
            r_backup_max: c.grid.r_backup_domain.max,
            r_backup_step: c.grid.r_backup_domain.step,
            edge_risk_method: c.negotiation.edge_risk_method,
            mc_samples_negotiation: c.negotiation.n_mc_negotiation,
            mc_samples_certify: c.negotiation.n_mc_certify,
        }
    }
}
