//! Campaign orchestration, per-round CSV rows and summary aggregation.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::engine::{run_round, RoundOutcome};
use crate::error::{Error, Result};
use crate::market::{overbooking_rate, Contracts, RoundSampler};
use crate::negotiation::{negotiate, ContractFile, ContractTerms, Mode, Negotiated};
use crate::scalar::Real;
use crate::spot::{spot_round, Pricing, SpotTerms};

/// Stamped on the first line of every per-round CSV.
pub const ROUNDS_SCHEMA: &str = "oatf-rounds/1";
pub const SUMMARY_SCHEMA: &str = "oatf-summary/1";

/// Column order of the per-round CSV.
pub const ROUND_COLUMNS: [&str; 15] = [
    "mechanism",
    "round",
    "attendees",
    "absent",
    "served_edge",
    "served_cloud",
    "compensated",
    "failed",
    "bought_backup",
    "usage_rate",
    "mean_user_utility",
    "edge_utility",
    "cloud_utility",
    "mean_served_completion_s",
    "negotiation_overhead_s",
];

pub const ROUNDS_FILE: &str = "rounds.csv";
pub const SUMMARY_JSON_FILE: &str = "summary.json";
pub const SUMMARY_TEXT_FILE: &str = "summary.txt";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "OATF")]
    Oatf,
    #[serde(rename = "CBooking")]
    CBooking,
    #[serde(rename = "SpotT_UP")]
    SpotUniform,
    #[serde(rename = "SpotT_DP")]
    SpotDifferential,
}

impl Mechanism {
    pub const ALL: [Mechanism; 4] = [
        Mechanism::Oatf,
        Mechanism::CBooking,
        Mechanism::SpotUniform,
        Mechanism::SpotDifferential,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Oatf => "OATF",
            Mechanism::CBooking => "CBooking",
            Mechanism::SpotUniform => "SpotT_UP",
            Mechanism::SpotDifferential => "SpotT_DP",
        }
    }
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mechanism `{s}` (expected OATF, CBooking, SpotT_UP or SpotT_DP)"))
    }
}

/// Per-round averages of one mechanism over a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MechanismSummary<T> {
    pub mechanism: Mechanism,
    pub n_rounds: usize,
    pub mean_user_utility: T,
    pub mean_edge_utility: T,
    pub mean_cloud_utility: T,
    pub mean_usage_rate: T,
    pub mean_served_completion_s: T,
    pub mean_negotiation_overhead_s: T,
    pub mean_failed_users: T,
    /// Failed users over attendees, pooled across rounds.
    pub failure_rate: T,
    pub total_attendees: u64,
    pub total_failed: u64,
    pub total_served_edge: u64,
    pub total_served_cloud: u64,
    pub total_compensated: u64,
    pub total_absent: u64,
    pub backup_purchase_rounds: u64,
}

/// Running sums behind a [`MechanismSummary`].
#[derive(Debug, Clone)]
pub struct Aggregator<T> {
    mechanism: Mechanism,
    n: usize,
    sums: [T; 7],
    totals: [u64; 7],
}

impl<T: Real> Aggregator<T> {
    pub fn new(mechanism: Mechanism) -> Self {
        Self {
            mechanism,
            n: 0,
            sums: [T::zero(); 7],
            totals: [0; 7],
        }
    }

    pub fn push(&mut self, o: &RoundOutcome<T>) {
        self.n += 1;
        let values = [
            o.mean_user_utility(),
            o.edge_utility,
            o.cloud_utility,
            o.usage_rate,
            o.mean_served_completion(),
            o.negotiation_overhead,
            T::count(o.failed_users as usize),
        ];
        for (s, v) in self.sums.iter_mut().zip(values) {
            *s += v;
        }
        let counts = [
            o.attendees(),
            o.failed_users,
            o.served_edge_count,
            o.served_cloud_count,
            o.compensated_count,
            o.absent_count,
            u32::from(o.bought_backup),
        ];
        for (t, c) in self.totals.iter_mut().zip(counts) {
            *t += u64::from(c);
        }
    }

    pub fn finish(&self) -> Result<MechanismSummary<T>> {
        if self.n == 0 {
            return Err(Error::EmptyStream);
        }
        let n = T::count(self.n);
        let [u, e, c, usage, completion, overhead, failed] = self.sums.map(|s| s / n);
        let [attendees, total_failed, edge, cloud, compensated, absent, bought] = self.totals;
        Ok(MechanismSummary {
            mechanism: self.mechanism,
            n_rounds: self.n,
            mean_user_utility: u,
            mean_edge_utility: e,
            mean_cloud_utility: c,
            mean_usage_rate: usage,
            mean_served_completion_s: completion,
            mean_negotiation_overhead_s: overhead,
            mean_failed_users: failed,
            failure_rate: if attendees == 0 {
                T::zero()
            } else {
                T::count(total_failed as usize) / T::count(attendees as usize)
            },
            total_attendees: attendees,
            total_failed,
            total_served_edge: edge,
            total_served_cloud: cloud,
            total_compensated: compensated,
            total_absent: absent,
            backup_purchase_rounds: bought,
        })
    }
}

/// Arithmetic means over a non-empty outcome stream.
pub fn aggregate<'a, T: Real>(
    mechanism: Mechanism,
    outcomes: impl IntoIterator<Item = &'a RoundOutcome<T>>,
) -> Result<MechanismSummary<T>> {
    let mut agg = Aggregator::new(mechanism);
    for o in outcomes {
        agg.push(o);
    }
    agg.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CampaignSummary<T> {
    pub schema: String,
    pub seed: u64,
    pub n_rounds: usize,
    pub oatf_contract: ContractTerms<T>,
    pub cbooking_contract: ContractTerms<T>,
    pub oatf_overbooking_rate: T,
    pub cbooking_overbooking_rate: T,
    pub mechanisms: Vec<MechanismSummary<T>>,
}

impl<T: Real> CampaignSummary<T> {
    pub fn get(&self, mechanism: Mechanism) -> Option<&MechanismSummary<T>> {
        self.mechanisms.iter().find(|m| m.mechanism == mechanism)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("summary serializes");
        s.push('\n');
        s
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# schema: {SUMMARY_SCHEMA}");
        let _ = writeln!(out, "seed {}  rounds {}", self.seed, self.n_rounds);
        for (name, t, rate) in [
            ("OATF", &self.oatf_contract, self.oatf_overbooking_rate),
            ("CBooking", &self.cbooking_contract, self.cbooking_overbooking_rate),
        ] {
            let _ = writeln!(
                out,
                "{name:<9} r_user={} p={:.4} q={:.4} c={:.4} | r_backup={} p={:.4} q={:.4} | overbooking {:+.2}%",
                t.reserved_per_user,
                t.price_user_to_edge.as_f64(),
                t.penalty_user_to_edge.as_f64(),
                t.compensation_edge_to_user.as_f64(),
                t.backup_slots,
                t.price_edge_to_cloud.as_f64(),
                t.penalty_edge_to_cloud.as_f64(),
                100.0 * rate.as_f64(),
            );
        }
        let _ = writeln!(
            out,
            "\n{:<9} {:>10} {:>11} {:>11} {:>7} {:>13} {:>11} {:>12} {:>12}",
            "mechanism",
            "user_util",
            "edge_util",
            "cloud_util",
            "usage",
            "completion_s",
            "overhead_s",
            "failed/round",
            "failure_rate"
        );
        for m in &self.mechanisms {
            let _ = writeln!(
                out,
                "{:<9} {:>10.4} {:>11.3} {:>11.3} {:>7.4} {:>13.4} {:>11.4} {:>12.4} {:>12.6}",
                m.mechanism.name(),
                m.mean_user_utility.as_f64(),
                m.mean_edge_utility.as_f64(),
                m.mean_cloud_utility.as_f64(),
                m.mean_usage_rate.as_f64(),
                m.mean_served_completion_s.as_f64(),
                m.mean_negotiation_overhead_s.as_f64(),
                m.mean_failed_users.as_f64(),
                m.failure_rate.as_f64(),
            );
        }
        out
    }
}

/// Writes per-round rows, preceded by the schema comment and the header.
pub struct RoundWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RoundWriter<W> {
    pub fn new(mut sink: W) -> std::io::Result<Self> {
        writeln!(sink, "# schema: {ROUNDS_SCHEMA}")?;
        let mut inner = csv::Writer::from_writer(sink);
        inner.write_record(ROUND_COLUMNS).map_err(std::io::Error::other)?;
        Ok(Self { inner })
    }

    pub fn write<T: Real>(&mut self, mechanism: Mechanism, round: usize, o: &RoundOutcome<T>) -> Result<()> {
        self.inner.write_record([
            mechanism.name().to_string(),
            round.to_string(),
            o.attendees().to_string(),
            o.absent_count.to_string(),
            o.served_edge_count.to_string(),
            o.served_cloud_count.to_string(),
            o.compensated_count.to_string(),
            o.failed_users.to_string(),
            u8::from(o.bought_backup).to_string(),
            o.usage_rate.to_string(),
            o.mean_user_utility().to_string(),
            o.edge_utility.to_string(),
            o.cloud_utility.to_string(),
            o.mean_served_completion().to_string(),
            o.negotiation_overhead.to_string(),
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("rounds", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("rounds", std::io::Error::other(e.to_string())))
    }
}

/// Negotiates both forward-contract variants under the same grid.
pub fn negotiate_contracts<T: Real>(config: &SimConfig<T>) -> Result<(Negotiated<T>, Negotiated<T>)> {
    let oatf = negotiate(&config.grid, &config.scenario, Mode::Oatf, &config.negotiation)?;
    let cbooking = negotiate(&config.grid, &config.scenario, Mode::CBooking, &config.negotiation)?;
    Ok((oatf, cbooking))
}

/// Runs the requested mechanisms on one shared sample stream, calling `on_round`
/// for every outcome in round order, mechanisms in the order given.
pub fn simulate<T: Real>(
    config: &SimConfig<T>,
    contracts: &ContractFile<T>,
    mechanisms: &[Mechanism],
    n_rounds: usize,
    seed: u64,
    mut on_round: impl FnMut(Mechanism, usize, &RoundOutcome<T>) -> Result<()>,
) -> Result<CampaignSummary<T>> {
    if mechanisms.is_empty() {
        return Err(Error::invalid("mechanisms", "select at least one mechanism"));
    }
    let scenario = &config.scenario;
    let oatf: Contracts<T> = contracts.oatf.into();
    let cbooking: Contracts<T> = contracts.cbooking.into();
    oatf.validate(&scenario.market)?;
    cbooking.validate(&scenario.market)?;
    let spot_terms = SpotTerms::from_contracts(&oatf, scenario);

    let mut aggs: Vec<Aggregator<T>> = mechanisms.iter().map(|&m| Aggregator::new(m)).collect();
    for (round, sample) in RoundSampler::with_seed(&scenario.market, seed)
        .take(n_rounds)
        .enumerate()
    {
        for (agg, &m) in aggs.iter_mut().zip(mechanisms) {
            let outcome = match m {
                Mechanism::Oatf => run_round(&sample, &oatf, scenario),
                Mechanism::CBooking => run_round(&sample, &cbooking, scenario),
                Mechanism::SpotUniform => spot_round(&sample, Pricing::Uniform, &spot_terms, &config.spot, scenario),
                Mechanism::SpotDifferential => {
                    spot_round(&sample, Pricing::Differential, &spot_terms, &config.spot, scenario)
                }
            };
            on_round(m, round, &outcome)?;
            agg.push(&outcome);
        }
    }
    Ok(CampaignSummary {
        schema: SUMMARY_SCHEMA.to_string(),
        seed,
        n_rounds,
        oatf_contract: contracts.oatf,
        cbooking_contract: contracts.cbooking,
        oatf_overbooking_rate: overbooking_rate(&oatf, &scenario.market),
        cbooking_overbooking_rate: overbooking_rate(&cbooking, &scenario.market),
        mechanisms: aggs.iter().map(Aggregator::finish).collect::<Result<_>>()?,
    })
}

/// Paths of the files written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFiles {
    pub rounds: PathBuf,
    pub summary_json: PathBuf,
    pub summary_text: PathBuf,
}

impl OutputFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            rounds: dir.join(ROUNDS_FILE),
            summary_json: dir.join(SUMMARY_JSON_FILE),
            summary_text: dir.join(SUMMARY_TEXT_FILE),
        }
    }
}

/// Simulates and writes the per-round CSV and both summary files into `out_dir`.
pub fn run_experiment<T: Real>(
    config: &SimConfig<T>,
    contracts: &ContractFile<T>,
    mechanisms: &[Mechanism],
    n_rounds: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<CampaignSummary<T>> {
    if n_rounds == 0 {
        return Err(Error::invalid("rounds", "must be at least 1"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = OutputFiles::in_dir(out_dir);
    let file = File::create(&files.rounds).map_err(|e| Error::io(&files.rounds, e))?;
    let mut rows = RoundWriter::new(BufWriter::new(file)).map_err(|e| Error::io(&files.rounds, e))?;
    let summary = simulate(config, contracts, mechanisms, n_rounds, seed, |m, i, o| {
        rows.write(m, i, o)
    })?;
    rows.finish()?.flush().map_err(|e| Error::io(&files.rounds, e))?;
    std::fs::write(&files.summary_json, summary.to_json()).map_err(|e| Error::io(&files.summary_json, e))?;
    std::fs::write(&files.summary_text, summary.to_table()).map_err(|e| Error::io(&files.summary_text, e))?;
    Ok(summary)
}
