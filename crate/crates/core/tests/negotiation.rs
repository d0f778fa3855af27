use oatf::market::{overbooking_rate, CloudContract, Contracts};
use oatf::negotiation::{
    cloud_feasible_backup, edge_feasible_backup, negotiate, user_feasible_r, Mode, NegotiationSettings, QuotationGrid,
};
use oatf::risk;
use oatf::Scenario;

fn quick() -> NegotiationSettings {
    NegotiationSettings {
        n_mc_certify: 20_000,
        ..Default::default()
    }
}

fn user_ok(c: &Contracts<f64>, s: &Scenario) -> bool {
    let th = &s.market.risk_thresholds;
    risk::user_risk_negative(c, s) <= th.user_negative_utility
        && risk::user_risk_unserved(c, &s.market) <= th.user_fail_to_acquire
        && risk::expected_user_utility(c, s) >= 0.0
}

#[test]
fn user_range_matches_scan() {
    let s = Scenario::paper();
    let grid = QuotationGrid::<f64>::paper();
    for q in &grid.edge_quotes {
        let got = user_feasible_r(q, &grid, &s);
        let scan: Vec<u32> = grid
            .r_user_domain
            .values()
            .into_iter()
            .filter(|&r| {
                grid.r_backup_domain.values().into_iter().any(|b| {
                    let c = Contracts {
                        edge: q.contract(r),
                        cloud: CloudContract {
                            backup_slots: b,
                            price_edge_to_cloud: 0.0,
                            penalty_edge_to_cloud: 0.0,
                        },
                    };
                    user_ok(&c, &s)
                })
            })
            .collect();
        assert_eq!(got, scan, "{q:?}");
    }
}

#[test]
fn backup_ranges_match_scan() {
    let s = Scenario::paper();
    let grid = QuotationGrid::<f64>::paper();
    let th = s.market.risk_thresholds;
    let baseline = risk::baseline_cloud_utility(&s.cloud, &s.market);
    for eq in grid.edge_quotes.iter().step_by(3) {
        for cq in &grid.cloud_quotes {
            for r in [2, 4, 5] {
                let edge = edge_feasible_backup(eq, cq, r, &grid, &s, &NegotiationSettings::default()).unwrap();
                let cloud = cloud_feasible_backup(cq, r, &edge, &s);
                for b in grid.r_backup_domain.values() {
                    let c = Contracts {
                        edge: eq.contract(r),
                        cloud: cq.contract(b),
                    };
                    let er = risk::edge_risks_exact(&c, &s.market);
                    let edge_ok = er.below_expectation <= th.edge_below_expectation
                        && er.underutilization <= th.edge_underutilization
                        && risk::expected_edge_utility(&c, &s.market) >= 0.0;
                    assert_eq!(edge.contains(&b), edge_ok, "edge r={r} b={b}");
                    let cloud_ok = risk::cloud_risk(&c, &s.cloud, &s.market) <= th.cloud_below_expectation
                        && risk::expected_cloud_utility(&c, &s.cloud, &s.market) >= baseline - 1e-6;
                    assert_eq!(cloud.contains(&b), edge_ok && cloud_ok, "cloud r={r} b={b}");
                }
            }
        }
    }
}

#[test]
fn oatf_overbooks_and_cbooking_does_not() {
    let s = Scenario::paper();
    let grid = QuotationGrid::<f64>::paper();
    let oatf = negotiate(&grid, &s, Mode::Oatf, &quick()).unwrap();
    let cb = negotiate(&grid, &s, Mode::CBooking, &quick()).unwrap();
    assert!(overbooking_rate(&oatf.winner.contracts(), &s.market) > 0.0);
    assert!(overbooking_rate(&cb.winner.contracts(), &s.market) <= 0.0);
    let booked = 137 * u64::from(cb.winner.edge_contract.reserved_per_user);
    assert!(booked <= 197 + u64::from(cb.winner.cloud_contract.backup_slots));
    for n in [&oatf, &cb] {
        assert!(n.winner.risk_report.satisfied);
        let bound = grid.edge_quotes.len() * grid.cloud_quotes.len() * 5 * 25;
        assert!(n.evaluations <= bound);
    }
}

#[test]
fn negotiation_is_deterministic() {
    let s = Scenario::paper();
    let grid = QuotationGrid::<f64>::paper();
    let a = negotiate(&grid, &s, Mode::Oatf, &quick()).unwrap();
    let b = negotiate(&grid, &s, Mode::Oatf, &quick()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sampled_edge_risks_reach_the_same_winner_on_a_small_grid() {
    let s = Scenario::paper();
    let mut grid = QuotationGrid::<f64>::paper();
    grid.edge_quotes.drain(..5);
    grid.cloud_quotes = grid.cloud_quotes[2..4].to_vec();
    grid.r_backup_domain.min = 250;
    grid.r_backup_domain.max = 400;
    let exact = negotiate(&grid, &s, Mode::Oatf, &quick()).unwrap();
    let sampled = negotiate(
        &grid,
        &s,
        Mode::Oatf,
        &NegotiationSettings {
            edge_risk_method: risk::EdgeRiskMethod::MonteCarlo,
            n_mc_negotiation: 10_000,
            n_mc_certify: 20_000,
        },
    )
    .unwrap();
    assert_eq!(exact.winner.contracts(), sampled.winner.contracts());
}
