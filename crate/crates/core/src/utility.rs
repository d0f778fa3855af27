//! Realized per-round utilities of users, the edge server and the cloud server.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{Contracts, MarketConfig};
use crate::physics::{self, LatencyEnergyProfile, Tier};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UserStatus {
    ServedEdge,
    ServedCloud,
    /// Attended but no slots were left; paid compensation and computed locally.
    Compensated,
    Absent,
    /// Spot-market loser: negotiated onsite and got nothing.
    Failed,
}

impl UserStatus {
    pub fn tier(self) -> Option<Tier> {
        match self {
            UserStatus::ServedEdge => Some(Tier::Edge),
            UserStatus::ServedCloud => Some(Tier::Cloud),
            _ => None,
        }
    }

    pub fn is_served(self) -> bool {
        self.tier().is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserOutcome<T> {
    pub status: UserStatus,
    pub utility: T,
    /// Seconds until all of the user's applications finished; zero when absent.
    pub completion_time: T,
}

/// Parameters of the cloud's business with its other customers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CloudSideState<T> {
    /// Revenue per slot sold to other requesters.
    pub other_price: T,
    /// Fraction of `other_price` refunded to each requester left waiting.
    pub refund_rate: T,
}

impl<T: Real> Default for CloudSideState<T> {
    fn default() -> Self {
        Self {
            other_price: T::one(),
            refund_rate: T::lit(0.8),
        }
    }
}

impl<T: Real> CloudSideState<T> {
    pub fn validate(&self) -> Result<()> {
        if self.other_price < T::zero() {
            return Err(Error::invalid("other_price", "must be non-negative"));
        }
        if !(self.refund_rate >= T::zero() && self.refund_rate <= T::one()) {
            return Err(Error::invalid("refund_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Utility of one contractual user under forward contracts.
pub fn user_utility<T: Real>(
    attended: bool,
    gain: T,
    status: UserStatus,
    contracts: &Contracts<T>,
    profile: &LatencyEnergyProfile<T>,
    config: &MarketConfig<T>,
) -> Result<T> {
    let edge = &contracts.edge;
    match (attended, status) {
        (false, UserStatus::Absent) => Ok(-edge.penalty_user_to_edge),
        (true, UserStatus::Compensated) => Ok(edge.compensation_edge_to_user),
        (true, UserStatus::ServedEdge | UserStatus::ServedCloud) => {
            let tier = status.tier().expect("served status has a tier");
            let benefit = physics::service_benefit(gain, edge.reserved_per_user, profile, config, tier);
            Ok(benefit - edge.price_user_to_edge)
        }
        _ => Err(Error::InconsistentStatus { status, attended }),
    }
}

/// Head counts of one round under forward contracts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundCounts {
    pub served: u32,
    pub compensated: u32,
    pub absent: u32,
}

pub fn edge_utility<T: Real>(counts: RoundCounts, contracts: &Contracts<T>, bought_backup: bool) -> T {
    let e = &contracts.edge;
    let c = &contracts.cloud;
    let n = |k: u32| T::count(k as usize);
    let backup = if bought_backup {
        c.price_edge_to_cloud
    } else {
        c.penalty_edge_to_cloud
    };
    n(counts.served) * e.price_user_to_edge + n(counts.absent) * e.penalty_user_to_edge
        - n(counts.compensated) * e.compensation_edge_to_user
        - backup
}

/// Other requesters left waiting because `backup` slots are held for the edge.
pub fn waiting_requesters(other_demand: u32, backup: u32, cloud_capacity: u32) -> u32 {
    other_demand.saturating_sub(cloud_capacity.saturating_sub(backup))
}

/// The reservation is honored whether or not the edge buys, so refunds do not depend on `bought_backup`.
pub fn cloud_utility<T: Real>(
    other_demand: u32,
    bought_backup: bool,
    cloud_state: &CloudSideState<T>,
    contracts: &Contracts<T>,
    config: &MarketConfig<T>,
) -> T {
    let c = &contracts.cloud;
    let waiting = waiting_requesters(other_demand, c.backup_slots, config.cloud_capacity);
    let income = if bought_backup {
        c.price_edge_to_cloud
    } else {
        c.penalty_edge_to_cloud
    };
    cloud_state.other_price * T::count(other_demand as usize)
        - cloud_state.refund_rate * cloud_state.other_price * T::count(waiting as usize)
        + income
}
