use oatf::config::{Scenario, SimConfig};
use oatf::engine::{run_campaign, run_round};
use oatf::market::{rng_stream, sample_round, CloudContract, Contracts, EdgeContract, RoundSampler};
use oatf::negotiation::ContractFile;
use oatf::report::{self, Mechanism, ROUNDS_SCHEMA, ROUND_COLUMNS};
use oatf::risk;
use oatf::spot::{spot_round, Pricing, SpotSettings, SpotTerms};
use oatf::utility::UserStatus;

fn contracts(r: u32, backup: u32) -> Contracts<f64> {
    Contracts {
        edge: EdgeContract {
            reserved_per_user: r,
            price_user_to_edge: 0.85 * r as f64,
            penalty_user_to_edge: 0.85 * r as f64,
            compensation_edge_to_user: 0.425 * r as f64,
        },
        cloud: CloudContract {
            backup_slots: backup,
            price_edge_to_cloud: 0.3 * backup as f64,
            penalty_edge_to_cloud: 0.15 * backup as f64,
        },
    }
}

#[test]
fn attendee_mean_concentrates() {
    let s = Scenario::paper();
    let n = 5000.0;
    let mean = run_campaign(&contracts(4, 300), &s, 5000)
        .map(|o| o.attendees() as f64)
        .sum::<f64>()
        / n;
    let sigma = (137.0 * 0.76 * 0.24 / n).sqrt();
    assert!((mean - 137.0 * 0.76).abs() <= 3.0 * sigma, "{mean}");
}

#[test]
fn single_round_campaign_is_first_sample() {
    let s = Scenario::paper();
    let c = contracts(5, 350);
    let first = RoundSampler::new(&s.market).next().unwrap();
    let rounds: Vec<_> = run_campaign(&c, &s, 1).collect();
    assert_eq!(rounds, vec![run_round(&first, &c, &s)]);
}

#[test]
fn more_backup_never_more_failures() {
    let s = Scenario::paper();
    let mut rng = rng_stream(17, 0);
    for _ in 0..300 {
        let sample = sample_round(&s.market, &mut rng);
        for r in 1..=5 {
            let mut prev = u32::MAX;
            for b in (0..=600).step_by(50) {
                let failed = run_round(&sample, &contracts(r, b), &s).failed_users;
                assert!(failed <= prev);
                prev = failed;
            }
        }
    }
}

#[test]
fn engine_averages_match_expected_utilities() {
    let s = Scenario::paper();
    for (r, b) in [(5, 350), (4, 300), (3, 100)] {
        let c = contracts(r, b);
        let n = 20_000;
        let (mut edge, mut cloud, mut user) = (0.0, 0.0, 0.0);
        for o in run_campaign(&c, &s, n) {
            edge += o.edge_utility;
            cloud += o.cloud_utility;
            user += o.mean_user_utility();
        }
        let n = n as f64;
        let e = risk::expected_edge_utility(&c, &s.market);
        let cl = risk::expected_cloud_utility(&c, &s.cloud, &s.market);
        let u = risk::expected_user_utility(&c, &s);
        assert!(
            (edge / n - e).abs() <= 0.01 * e.abs().max(10.0),
            "edge {} vs {e}",
            edge / n
        );
        assert!((cloud / n - cl).abs() <= 0.01 * cl.abs(), "cloud {} vs {cl}", cloud / n);
        assert!((user / n - u).abs() <= 0.02, "user {} vs {u}", user / n);
    }
}

#[test]
fn spot_is_worse_than_contract_when_supply_suffices() {
    let s = Scenario::paper();
    let c = contracts(4, 300);
    let terms = SpotTerms::from_contracts(&c, &s);
    let mut rng = rng_stream(23, 0);
    let mut checked = 0;
    for _ in 0..500 {
        let sample = sample_round(&s.market, &mut rng);
        let spot = spot_round(&sample, Pricing::Uniform, &terms, &SpotSettings::default(), &s);
        if spot.failed_users > 0 {
            continue;
        }
        let fwd = run_round(&sample, &c, &s);
        for (a, b) in spot.user_outcomes.iter().zip(&fwd.user_outcomes) {
            if a.status.is_served() && b.status == a.status {
                assert!(a.utility < b.utility);
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn spot_fails_sometimes_and_oatf_seldom() {
    let s = Scenario::paper();
    let c = contracts(4, 300);
    let terms = SpotTerms::from_contracts(&c, &s);
    let mut rng = rng_stream(29, 0);
    let (mut spot_failed, mut spot_rounds_with_failure) = (0, 0);
    for _ in 0..1000 {
        let sample = sample_round(&s.market, &mut rng);
        let o = spot_round(&sample, Pricing::Differential, &terms, &SpotSettings::default(), &s);
        spot_failed += o.failed_users;
        spot_rounds_with_failure += u32::from(o.failed_users > 0);
        assert_eq!(o.served_count() + o.failed_users, o.attendees());
        assert!(o.user_outcomes.iter().all(|u| u.status != UserStatus::Compensated));
    }
    assert!(spot_failed > 0 && spot_rounds_with_failure > 0);
}

fn small_run(dir: &std::path::Path, n_rounds: usize) -> report::CampaignSummary<f64> {
    let config = SimConfig::paper();
    let file = ContractFile::new(contracts(5, 350), contracts(4, 375));
    report::run_experiment(&config, &file, &Mechanism::ALL, n_rounds, 7, dir).unwrap()
}

#[test]
fn summary_reconciles_with_rows() {
    let dir = tempfile::tempdir().unwrap();
    let summary = small_run(dir.path(), 5000);
    let text = std::fs::read_to_string(dir.path().join(report::ROUNDS_FILE)).unwrap();
    assert_eq!(text.lines().next().unwrap(), format!("# schema: {ROUNDS_SCHEMA}"));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ROUND_COLUMNS);
    let col = |name: &str| ROUND_COLUMNS.iter().position(|c| *c == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    for m in Mechanism::ALL {
        let mine: Vec<_> = rows.iter().filter(|r| &r[0] == m.name()).collect();
        assert_eq!(mine.len(), 5000);
        let mean = |name: &str| mine.iter().map(|r| r[col(name)].parse::<f64>().unwrap()).sum::<f64>() / 5000.0;
        let sum_u = |name: &str| mine.iter().map(|r| r[col(name)].parse::<u64>().unwrap()).sum::<u64>();
        let s = summary.get(m).unwrap();
        assert_eq!(mean("mean_user_utility"), s.mean_user_utility);
        assert_eq!(mean("edge_utility"), s.mean_edge_utility);
        assert_eq!(mean("cloud_utility"), s.mean_cloud_utility);
        assert_eq!(mean("usage_rate"), s.mean_usage_rate);
        assert_eq!(mean("mean_served_completion_s"), s.mean_served_completion_s);
        assert_eq!(mean("negotiation_overhead_s"), s.mean_negotiation_overhead_s);
        assert_eq!(sum_u("failed"), s.total_failed);
        assert_eq!(sum_u("attendees"), s.total_attendees);
        assert_eq!(sum_u("compensated"), s.total_compensated);
        assert!((0.0..=1.0).contains(&s.failure_rate));
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(report::SUMMARY_JSON_FILE)).unwrap()).unwrap();
    assert_eq!(json["schema"], "oatf-summary/1");
    assert_eq!(json["n_rounds"], 5000);
    assert_eq!(json["mechanisms"][0]["mechanism"], "OATF");
}

#[test]
fn schema_file_matches_header() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schema/rounds-v1.txt");
    let doc = std::fs::read_to_string(path).unwrap();
    assert!(doc.contains(ROUNDS_SCHEMA));
    let documented: Vec<&str> = doc
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(documented, ROUND_COLUMNS);
}

#[test]
fn single_precision_campaign_tracks_double() {
    let s64 = Scenario::<f64>::paper();
    let s32 = Scenario::<f32>::paper();
    let c64 = contracts(5, 350);
    let c32 = Contracts::<f32> {
        edge: EdgeContract {
            reserved_per_user: 5,
            price_user_to_edge: 4.25,
            penalty_user_to_edge: 4.25,
            compensation_edge_to_user: 2.125,
        },
        cloud: CloudContract {
            backup_slots: 350,
            price_edge_to_cloud: 105.0,
            penalty_edge_to_cloud: 52.5,
        },
    };
    let a: Vec<_> = run_campaign(&c64, &s64, 200).collect();
    let b: Vec<_> = run_campaign(&c32, &s32, 200).collect();
    let attendees_64: u32 = a.iter().map(|o| o.attendees()).sum();
    let attendees_32: u32 = b.iter().map(|o| o.attendees()).sum();
    // both consume the same integer and uniform draws
    assert_eq!(attendees_64, attendees_32);
    let u64_mean = a.iter().map(|o| o.usage_rate).sum::<f64>() / 200.0;
    let u32_mean = b.iter().map(|o| o.usage_rate as f64).sum::<f64>() / 200.0;
    assert!((u64_mean - u32_mean).abs() < 1e-5);
}
