use mbsim_core::audit::{best_response_gain, best_response_gain_parallel, interim_utility};
use mbsim_core::{AuditConfig, DistributionSpec, MarketSpec, MechanismId};

fn uniform_market(n: usize, m: usize) -> MarketSpec {
    MarketSpec::iid(n, m, &DistributionSpec::uniform(0.0, 1.0).unwrap())
}

fn violation_market() -> MarketSpec {
    let text = r#"{ "m": 2, "bidders": [
        { "items": ["uniform:0,1", "discrete:0@0.5,1@0.5"] },
        { "items": ["uniform:0,1", "discrete:0@0.5,1@0.5"] },
        { "items": ["uniform:0,1", "discrete:0@0.5,1@0.5"] },
        { "items": ["uniform:0,1", "discrete:0@0.5,1@0.5"] } ] }"#;
    MarketSpec::from_json(text).unwrap()
}

#[test]
fn prior_free_truthful_utility_on_violation_instance() {
    let config = AuditConfig {
        mechanism: MechanismId::PriorFreeFavorites,
        market: violation_market(),
        bidder: 0,
        true_type: vec![0.9, 1.0],
        reports: vec![],
        trials: 200_000,
        seed: 3,
    };
    let e = interim_utility(&config, &[0.9, 1.0]).unwrap();
    // 1/8 * (1 + 3 * 1/4 + 3 * 1/6 + 1/12)
    let exact = 0.291_666_666_666_666_7;
    assert!((e.mean - exact).abs() <= 3.0 * e.stderr, "{e:?}");
}

#[test]
fn audit_is_reproducible_across_thread_counts() {
    let config = AuditConfig {
        mechanism: MechanismId::PriorFreeFavorites,
        market: uniform_market(3, 3),
        bidder: 1,
        true_type: vec![0.7, 0.4, 0.2],
        reports: vec![vec![0.0, 1.0, 0.0]],
        trials: 20_000,
        seed: 42,
    };
    let one = best_response_gain(&config).unwrap();
    let four = best_response_gain_parallel(&config, 4).unwrap();
    assert_eq!(serde_json::to_string(&one).unwrap(), serde_json::to_string(&four).unwrap());
}

#[test]
fn audit_report_round_trips_through_json() {
    let config = AuditConfig {
        mechanism: MechanismId::RandomFavorites,
        market: uniform_market(2, 2),
        bidder: 0,
        true_type: vec![0.9, 0.2],
        reports: vec![],
        trials: 1000,
        seed: 1,
    };
    let r = best_response_gain(&config).unwrap();
    let back: mbsim_core::AuditReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back.config, config);
    assert_eq!(back.candidates.len(), r.candidates.len());
}
