//! Practical trading rounds under pre-signed forward contracts.
//!
//! Attendees are walked in arrival order. Each claims `r^user` edge slots
//! while they last; once the edge pool cannot fit another user, later
//! attendees are transferred to the contracted backup slots on the cloud,
//! and anyone left after that is compensated. A user is served by one tier
//! only. The edge buys its backup reservation exactly when the attending
//! demand exceeds its own capacity.

use crate::config::Scenario;
use crate::market::{Contracts, MarketConfig, RoundSample, RoundSampler};
use crate::physics;
use crate::scalar::Real;
use crate::utility::{self, RoundCounts, UserOutcome, UserStatus};

/// Outcome of one round for one mechanism.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome<T> {
    pub user_outcomes: Vec<UserOutcome<T>>,
    pub edge_utility: T,
    pub cloud_utility: T,
    /// Occupied slots over slots held this round.
    pub usage_rate: T,
    pub bought_backup: bool,
    /// Contractual users (or spot attendees) who ended up without resources.
    pub failed_users: u32,
    pub served_edge_count: u32,
    pub served_cloud_count: u32,
    pub compensated_count: u32,
    pub absent_count: u32,
    /// Mean onsite negotiation time per attendee, seconds. Zero under forward contracts.
    pub negotiation_overhead: T,
}

impl<T: Real> RoundOutcome<T> {
    pub fn attendees(&self) -> u32 {
        self.user_outcomes.len() as u32 - self.absent_count
    }

    pub fn served_count(&self) -> u32 {
        self.served_edge_count + self.served_cloud_count
    }

    pub fn mean_user_utility(&self) -> T {
        if self.user_outcomes.is_empty() {
            return T::zero();
        }
        self.user_outcomes.iter().map(|u| u.utility).sum::<T>() / T::count(self.user_outcomes.len())
    }

    /// Mean completion time over served users, zero when nobody was served.
    pub fn mean_served_completion(&self) -> T {
        let served: Vec<T> = self
            .user_outcomes
            .iter()
            .filter(|u| u.status.is_served())
            .map(|u| u.completion_time)
            .collect();
        if served.is_empty() {
            T::zero()
        } else {
            let n = T::count(served.len());
            served.into_iter().sum::<T>() / n
        }
    }
}

/// How many attendees each tier takes for a given attendee count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TierCounts {
    pub edge: u32,
    pub cloud: u32,
    pub compensated: u32,
    pub bought_backup: bool,
}

impl TierCounts {
    pub fn for_attendees<T: Real>(attendees: u32, contracts: &Contracts<T>, config: &MarketConfig<T>) -> Self {
        let r = contracts.edge.reserved_per_user;
        let bought_backup = u64::from(r) * u64::from(attendees) > u64::from(config.edge_capacity);
        let edge_users = config.edge_capacity / r;
        let cloud_users = if bought_backup {
            contracts.cloud.backup_slots / r
        } else {
            0
        };
        let edge = attendees.min(edge_users);
        let cloud = (attendees - edge).min(cloud_users);
        TierCounts {
            edge,
            cloud,
            compensated: attendees - edge - cloud,
            bought_backup,
        }
    }

    pub fn served(&self) -> u32 {
        self.edge + self.cloud
    }

    pub fn held_slots<T: Real>(&self, contracts: &Contracts<T>, config: &MarketConfig<T>) -> u32 {
        config.edge_capacity
            + if self.bought_backup {
                contracts.cloud.backup_slots
            } else {
                0
            }
    }

    pub fn usage_rate<T: Real>(&self, contracts: &Contracts<T>, config: &MarketConfig<T>) -> T {
        let used = T::count((self.served() * contracts.edge.reserved_per_user) as usize);
        used / T::count(self.held_slots(contracts, config) as usize)
    }

    pub fn round_counts(&self, absent: u32) -> RoundCounts {
        RoundCounts {
            served: self.served(),
            compensated: self.compensated,
            absent,
        }
    }
}

/// Per-user allocation of one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    /// Indexed by user.
    pub status: Vec<UserStatus>,
    pub bought_backup: bool,
    pub edge_slots_used: u32,
    pub cloud_slots_used: u32,
}

/// First-come-first-serve allocation and application transfer.
pub fn allocate_fcfs<T: Real>(
    sample: &RoundSample<T>,
    contracts: &Contracts<T>,
    config: &MarketConfig<T>,
) -> Allocation {
    let r = contracts.edge.reserved_per_user;
    let attendees = sample.attendees() as u32;
    let bought_backup = u64::from(r) * u64::from(attendees) > u64::from(config.edge_capacity);
    let mut edge_free = config.edge_capacity;
    let mut cloud_free = if bought_backup { contracts.cloud.backup_slots } else { 0 };
    let mut status = vec![UserStatus::Absent; sample.attendance.len()];
    for &user in &sample.arrival_order {
        if !sample.attendance[user] {
            continue;
        }
        status[user] = if edge_free >= r {
            edge_free -= r;
            UserStatus::ServedEdge
        } else if cloud_free >= r {
            cloud_free -= r;
            UserStatus::ServedCloud
        } else {
            UserStatus::Compensated
        };
    }
    let held_cloud = if bought_backup { contracts.cloud.backup_slots } else { 0 };
    Allocation {
        status,
        bought_backup,
        edge_slots_used: config.edge_capacity - edge_free,
        cloud_slots_used: held_cloud - cloud_free,
    }
}

/// Executes one round under forward contracts (OATF and CBooking share this path).
pub fn run_round<T: Real>(
    sample: &RoundSample<T>,
    contracts: &Contracts<T>,
    scenario: &Scenario<T>,
) -> RoundOutcome<T> {
    let config = &scenario.market;
    let profile = &scenario.profile;
    let alloc = allocate_fcfs(sample, contracts, config);
    let local = physics::all_local(profile, config).delay;
    let r = contracts.edge.reserved_per_user;

    let mut counts = [0u32; 4];
    let user_outcomes: Vec<UserOutcome<T>> = alloc
        .status
        .iter()
        .enumerate()
        .map(|(x, &status)| {
            let gain = sample.channel_gain[x];
            let utility = utility::user_utility(sample.attendance[x], gain, status, contracts, profile, config)
                .expect("allocation status matches attendance");
            let completion_time = match status {
                UserStatus::ServedEdge | UserStatus::ServedCloud => {
                    let tier = status.tier().expect("served");
                    physics::served_cost(gain, r, profile, config, tier).delay
                }
                UserStatus::Compensated => local,
                _ => T::zero(),
            };
            counts[match status {
                UserStatus::ServedEdge => 0,
                UserStatus::ServedCloud => 1,
                UserStatus::Compensated => 2,
                _ => 3,
            }] += 1;
            UserOutcome {
                status,
                utility,
                completion_time,
            }
        })
        .collect();
    let [served_edge_count, served_cloud_count, compensated_count, absent_count] = counts;

    let round_counts = RoundCounts {
        served: served_edge_count + served_cloud_count,
        compensated: compensated_count,
        absent: absent_count,
    };
    let held = config.edge_capacity
        + if alloc.bought_backup {
            contracts.cloud.backup_slots
        } else {
            0
        };
    RoundOutcome {
        user_outcomes,
        edge_utility: utility::edge_utility(round_counts, contracts, alloc.bought_backup),
        cloud_utility: utility::cloud_utility(
            sample.other_demand,
            alloc.bought_backup,
            &scenario.cloud,
            contracts,
            config,
        ),
        usage_rate: T::count((alloc.edge_slots_used + alloc.cloud_slots_used) as usize) / T::count(held as usize),
        bought_backup: alloc.bought_backup,
        failed_users: compensated_count,
        served_edge_count,
        served_cloud_count,
        compensated_count,
        absent_count,
        negotiation_overhead: T::zero(),
    }
}

/// `n_rounds` independent rounds drawn from the scenario's seeded stream.
pub fn run_campaign<'a, T: Real>(
    contracts: &'a Contracts<T>,
    scenario: &'a Scenario<T>,
    n_rounds: usize,
) -> impl Iterator<Item = RoundOutcome<T>> + 'a {
    RoundSampler::new(&scenario.market)
        .take(n_rounds)
        .map(move |sample| run_round(&sample, contracts, scenario))
}
