//! Latency and energy of local execution and of offloading over the uplink.
//!
//! The uplink follows Shannon capacity with linear SNR `tx_power * gain`.
//! One slot runs one application at `*_cpu_hz_per_slot`; a user holding
//! `r` slots offloads `min(r, n)` of its `n` applications and runs the rest
//! on the device, both sides in parallel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::MarketConfig;
use crate::scalar::Real;

/// Device and server speeds plus the monetary value of time and energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LatencyEnergyProfile<T> {
    pub local_cpu_hz: T,
    pub edge_cpu_hz_per_slot: T,
    pub cloud_cpu_hz_per_slot: T,
    /// Effective switched capacitance in the `kappa * f^2 * cycles` energy model.
    pub compute_energy_coeff: T,
    /// Currency per second saved.
    pub time_value: T,
    /// Currency per joule saved.
    pub energy_value: T,
}

impl<T: Real> Default for LatencyEnergyProfile<T> {
    fn default() -> Self {
        Self {
            local_cpu_hz: T::lit(1.0e9),
            edge_cpu_hz_per_slot: T::lit(4.0e9),
            cloud_cpu_hz_per_slot: T::lit(8.0e9),
            compute_energy_coeff: T::lit(1.0e-27),
            time_value: T::lit(1.0),
            energy_value: T::lit(1.0),
        }
    }
}

impl<T: Real> LatencyEnergyProfile<T> {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("local_cpu_hz", self.local_cpu_hz),
            ("edge_cpu_hz_per_slot", self.edge_cpu_hz_per_slot),
            ("cloud_cpu_hz_per_slot", self.cloud_cpu_hz_per_slot),
            ("compute_energy_coeff", self.compute_energy_coeff),
            ("time_value", self.time_value),
            ("energy_value", self.energy_value),
        ];
        for (key, v) in fields {
            if !(v > T::zero()) {
                return Err(Error::invalid(key, "must be positive"));
            }
        }
        if self.edge_cpu_hz_per_slot < self.local_cpu_hz {
            return Err(Error::invalid("edge_cpu_hz_per_slot", "must be at least local_cpu_hz"));
        }
        if self.cloud_cpu_hz_per_slot < self.edge_cpu_hz_per_slot {
            return Err(Error::invalid(
                "cloud_cpu_hz_per_slot",
                "must be at least edge_cpu_hz_per_slot",
            ));
        }
        Ok(())
    }

    pub fn tier_hz(&self, tier: Tier) -> T {
        match tier {
            Tier::Edge => self.edge_cpu_hz_per_slot,
            Tier::Cloud => self.cloud_cpu_hz_per_slot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    Edge,
    Cloud,
}

/// Seconds and joules spent by the user's side of a job.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cost<T> {
    pub delay: T,
    pub user_energy: T,
}

/// Uplink rate in bits/s.
pub fn uplink_rate<T: Real>(gain: T, config: &MarketConfig<T>) -> T {
    config.bandwidth * (T::one() + config.tx_power * gain).log2()
}

/// Ships `n_apps` applications over the uplink and runs them on `slots` slots of `tier`.
///
/// The user's energy is transmit power times transmission time.
pub fn offload_round_trip<T: Real>(
    gain: T,
    n_apps: u32,
    slots: u32,
    profile: &LatencyEnergyProfile<T>,
    config: &MarketConfig<T>,
    tier: Tier,
) -> Result<Cost<T>> {
    if n_apps == 0 || slots == 0 {
        return Err(Error::NoApplications);
    }
    let apps = T::count(n_apps as usize);
    let transmit = apps * config.data_size_bits / uplink_rate(gain, config);
    let compute = apps * config.workload_cycles() / (T::count(slots as usize) * profile.tier_hz(tier));
    Ok(Cost {
        delay: transmit + compute,
        user_energy: config.tx_power * transmit,
    })
}

/// Runs `n_apps` applications sequentially on the device.
pub fn local_processing<T: Real>(
    n_apps: u32,
    profile: &LatencyEnergyProfile<T>,
    config: &MarketConfig<T>,
) -> Result<Cost<T>> {
    if n_apps == 0 {
        return Err(Error::NoApplications);
    }
    Ok(local_cost(n_apps, profile, config))
}

fn local_cost<T: Real>(n_apps: u32, profile: &LatencyEnergyProfile<T>, config: &MarketConfig<T>) -> Cost<T> {
    let cycles = T::count(n_apps as usize) * config.workload_cycles();
    let f = profile.local_cpu_hz;
    Cost {
        delay: cycles / f,
        user_energy: profile.compute_energy_coeff * f * f * cycles,
    }
}

/// Time and energy of a user served with `slots` reserved slots at `tier`.
pub fn served_cost<T: Real>(
    gain: T,
    slots: u32,
    profile: &LatencyEnergyProfile<T>,
    config: &MarketConfig<T>,
    tier: Tier,
) -> Cost<T> {
    let n = config.apps_per_user;
    let offloaded = slots.min(n);
    let remote = offload_round_trip(gain, offloaded, slots, profile, config, tier)
        .expect("slots and apps_per_user are validated positive");
    let rest = local_cost(n - offloaded, profile, config);
    Cost {
        delay: remote.delay.max(rest.delay),
        user_energy: remote.user_energy + rest.user_energy,
    }
}

/// Time/energy of computing everything on the device (the unserved fallback).
pub fn all_local<T: Real>(profile: &LatencyEnergyProfile<T>, config: &MarketConfig<T>) -> Cost<T> {
    local_cost(config.apps_per_user, profile, config)
}

/// Monetary value of the time and energy saved by being served, before any payment.
pub fn service_benefit<T: Real>(
    gain: T,
    slots: u32,
    profile: &LatencyEnergyProfile<T>,
    config: &MarketConfig<T>,
    tier: Tier,
) -> T {
    let local = all_local(profile, config);
    let served = served_cost(gain, slots, profile, config, tier);
    profile.time_value * (local.delay - served.delay) + profile.energy_value * (local.user_energy - served.user_energy)
}
