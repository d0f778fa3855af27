//! Onsite spot trading baselines with uniform and differential pricing.
//!
//! Every attendee first negotiates over the wireless link, which costs
//! `rounds * round_trips * 2 * tau` seconds and the matching transmit energy
//! whether or not it ends in a trade. Winners then receive the same service
//! as under a forward contract. The pricing rules here are simple stand-ins:
//! a posted price served first come first served, or a price linear in the
//! normalized channel gain served to the highest gains first.

use serde::{Deserialize, Serialize};

use crate::config::Scenario;
use crate::engine::RoundOutcome;
use crate::error::{Error, Result};
use crate::market::{Contracts, RoundSample};
use crate::physics::{self, Tier};
use crate::scalar::{cmp_real, Real};
use crate::utility::{UserOutcome, UserStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pricing {
    Uniform,
    Differential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpotSettings<T> {
    /// Request/response exchanges before an agreement.
    pub rounds_of_negotiation: u32,
    pub round_trips_per_exchange: u32,
    /// Attendees whose negotiation would exceed this give up, seconds.
    pub time_budget_s: T,
    /// Differential price is `base * (1 + spread * (g - 1/2))` for normalized gain `g`.
    pub differential_spread: T,
}

impl<T: Real> Default for SpotSettings<T> {
    fn default() -> Self {
        Self {
            rounds_of_negotiation: 5,
            round_trips_per_exchange: 2,
            time_budget_s: T::one(),
            differential_spread: T::lit(0.5),
        }
    }
}

impl<T: Real> SpotSettings<T> {
    pub fn validate(&self) -> Result<()> {
        if self.rounds_of_negotiation == 0 {
            return Err(Error::invalid("spot_rounds_of_negotiation", "must be at least 1"));
        }
        if self.round_trips_per_exchange == 0 {
            return Err(Error::invalid("spot_round_trips_per_exchange", "must be at least 1"));
        }
        if !(self.time_budget_s > T::zero()) {
            return Err(Error::invalid("spot_time_budget_s", "must be positive"));
        }
        if !(self.differential_spread >= T::zero() && self.differential_spread <= T::lit(2.0)) {
            return Err(Error::invalid("spot_differential_spread", "must lie in [0, 2]"));
        }
        Ok(())
    }

    /// Onsite negotiation time for a user with end-to-end delay `tau_ms`.
    pub fn negotiation_latency(&self, tau_ms: T) -> T {
        let trips = self.rounds_of_negotiation * self.round_trips_per_exchange * 2;
        T::count(trips as usize) * tau_ms / T::lit(1000.0)
    }
}

/// Price levels the spot market starts from, taken from the signed OATF terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpotTerms<T> {
    pub slots_per_user: u32,
    /// Posted price per user under uniform pricing, and the base of the differential rule.
    pub price_per_user: T,
    /// Price the edge pays the cloud per slot bought onsite.
    pub cloud_price_per_slot: T,
}

impl<T: Real> SpotTerms<T> {
    /// Same `r^user` and `p^UtoE` as the contract, cloud slots at the contract's pro-rata backup price.
    pub fn from_contracts(contracts: &Contracts<T>, scenario: &Scenario<T>) -> Self {
        let cloud = &contracts.cloud;
        let cloud_price_per_slot = if cloud.backup_slots > 0 {
            cloud.price_edge_to_cloud / T::count(cloud.backup_slots as usize)
        } else {
            scenario.cloud.other_price
        };
        Self {
            slots_per_user: contracts.edge.reserved_per_user,
            price_per_user: contracts.edge.price_user_to_edge,
            cloud_price_per_slot,
        }
    }
}

/// Price quoted to a user with channel gain `gain`.
pub fn quoted_price<T: Real>(
    gain: T,
    pricing: Pricing,
    terms: &SpotTerms<T>,
    settings: &SpotSettings<T>,
    scenario: &Scenario<T>,
) -> T {
    match pricing {
        Pricing::Uniform => terms.price_per_user,
        Pricing::Differential => {
            let cfg = &scenario.market;
            let span = cfg.gamma_high - cfg.gamma_low;
            let g = if span > T::zero() {
                (gain - cfg.gamma_low) / span
            } else {
                T::lit(0.5)
            };
            terms.price_per_user * (T::one() + settings.differential_spread * (g - T::lit(0.5)))
        }
    }
}

/// One onsite trading round on the given sample.
pub fn spot_round<T: Real>(
    sample: &RoundSample<T>,
    pricing: Pricing,
    terms: &SpotTerms<T>,
    settings: &SpotSettings<T>,
    scenario: &Scenario<T>,
) -> RoundOutcome<T> {
    let config = &scenario.market;
    let profile = &scenario.profile;
    let r = terms.slots_per_user;
    let local = physics::all_local(profile, config).delay;

    let n = sample.attendance.len();
    let latency: Vec<T> = sample
        .e2e_delay_ms
        .iter()
        .map(|&tau| settings.negotiation_latency(tau))
        .collect();
    let overhead_cost =
        |x: usize| profile.time_value * latency[x] + profile.energy_value * config.tx_power * latency[x];
    let price: Vec<T> = sample
        .channel_gain
        .iter()
        .map(|&g| quoted_price(g, pricing, terms, settings, scenario))
        .collect();

    // Attendees in service order, then those willing to pay in time.
    let mut order: Vec<usize> = sample
        .arrival_order
        .iter()
        .copied()
        .filter(|&x| sample.attendance[x])
        .collect();
    if pricing == Pricing::Differential {
        // stable sort keeps arrival order among equal gains
        order.sort_by(|&a, &b| cmp_real(sample.channel_gain[b], sample.channel_gain[a]));
    }
    let bidders: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&x| {
            latency[x] <= settings.time_budget_s
                && physics::service_benefit(sample.channel_gain[x], r, profile, config, Tier::Edge) - overhead_cost(x)
                    >= price[x]
        })
        .collect();

    let edge_users = (config.edge_capacity / r) as usize;
    let cloud_free = config.cloud_capacity.saturating_sub(sample.other_demand);
    let cloud_users = bidders.len().saturating_sub(edge_users).min((cloud_free / r) as usize);
    let mut status = vec![UserStatus::Absent; n];
    for x in order.iter().copied() {
        status[x] = UserStatus::Failed;
    }
    for (i, &x) in bidders.iter().enumerate() {
        if i < edge_users {
            status[x] = UserStatus::ServedEdge;
        } else if i < edge_users + cloud_users {
            status[x] = UserStatus::ServedCloud;
        }
    }

    let mut revenue = T::zero();
    let (mut served_edge_count, mut served_cloud_count, mut failed_users) = (0u32, 0u32, 0u32);
    let mut overhead_total = T::zero();
    let user_outcomes: Vec<UserOutcome<T>> = (0..n)
        .map(|x| {
            let st = status[x];
            if st != UserStatus::Absent {
                overhead_total += latency[x];
            }
            match st {
                UserStatus::ServedEdge | UserStatus::ServedCloud => {
                    let tier = st.tier().expect("served");
                    let gain = sample.channel_gain[x];
                    revenue += price[x];
                    if tier == Tier::Edge {
                        served_edge_count += 1;
                    } else {
                        served_cloud_count += 1;
                    }
                    UserOutcome {
                        status: st,
                        utility: physics::service_benefit(gain, r, profile, config, tier) - overhead_cost(x) - price[x],
                        completion_time: latency[x] + physics::served_cost(gain, r, profile, config, tier).delay,
                    }
                }
                UserStatus::Failed => {
                    failed_users += 1;
                    UserOutcome {
                        status: st,
                        utility: -overhead_cost(x),
                        completion_time: latency[x] + local,
                    }
                }
                _ => UserOutcome {
                    status: st,
                    utility: T::zero(),
                    completion_time: T::zero(),
                },
            }
        })
        .collect();

    let attendees = order.len();
    let bought_slots = cloud_users as u32 * r;
    let purchase = terms.cloud_price_per_slot * T::count(bought_slots as usize);
    let held = config.edge_capacity + bought_slots;
    let used = (served_edge_count + served_cloud_count) * r;
    RoundOutcome {
        user_outcomes,
        edge_utility: revenue - purchase,
        cloud_utility: scenario.cloud.other_price * T::count(sample.other_demand as usize) + purchase,
        usage_rate: T::count(used as usize) / T::count(held as usize),
        bought_backup: bought_slots > 0,
        failed_users,
        served_edge_count,
        served_cloud_count,
        compensated_count: 0,
        absent_count: (n - attendees) as u32,
        negotiation_overhead: if attendees == 0 {
            T::zero()
        } else {
            overhead_total / T::count(attendees)
        },
    }
}
