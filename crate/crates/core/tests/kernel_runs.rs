mod common;

use chainsim::kernel::{run, EventKind, EventQueue, RunOptions, SimError};
use chainsim::orchestrator::LifecycleStatus;
use chainsim::qoe::predict_mos;
use chainsim::scenario::{parse_scenario, FaultsDoc, Scenario};
use chainsim::service::ChainRequest;
use common::{load, random_scenario, random_scenario_json};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn strict() -> RunOptions {
    RunOptions { strict_debug: true, ..RunOptions::default() }
}

/// The acceptance topology with only its chain-free request, held for the
/// whole run and with every fault removed.
fn single_flow() -> (Scenario, ChainRequest) {
    let mut sc = load("acceptance.json");
    sc.faults = FaultsDoc::default();
    sc.workload.arrival_jitter_ms = 0;
    sc.workload.requests.retain(|r| r.vnfs.is_empty());
    sc.workload.requests.truncate(1);
    sc.workload.requests[0].arrival_ms = 0;
    sc.workload.requests[0].holding_ms = sc.meta.duration_ms * 2;
    let req = sc.requests().remove(0);
    (sc, req)
}

#[test]
fn empty_workload_still_closes_every_window() {
    let sc = load("minimal.json");
    let report = run(&sc, &strict()).unwrap();
    assert_eq!(report.summary.windows, sc.meta.duration_ms / sc.meta.window_ms);
    assert!(report.qoe_series.is_empty());
    assert!(report.db_dump.is_empty());
    assert_eq!(report.summary.counters, Default::default());
}

#[test]
fn steady_flow_keeps_its_admission_prediction() {
    let (sc, req) = single_flow();
    let report = run(&sc, &strict()).unwrap();
    let rows: Vec<_> = report.qoe_series.iter().filter(|r| r.flow_id == req.id).collect();
    assert_eq!(rows.len() as u64, sc.meta.duration_ms / sc.meta.window_ms);

    let net = sc.network_state();
    let entry = &report.db_dump[0];
    let profile = sc.profiles.app_profiles.iter().find(|p| p.name == req.profile).unwrap();
    let predicted = predict_mos(&req, &entry.graph.segments, &[], profile, &net).unwrap().mos;
    for r in rows {
        assert!((r.mos - predicted).abs() <= 1e-9, "{} vs {predicted} at {}", r.mos, r.time_ms);
    }
    assert_eq!(entry.status, LifecycleStatus::Active);
}

#[test]
fn events_past_the_horizon_are_dropped() {
    let (mut sc, _) = single_flow();
    let mut late = sc.workload.requests[0].clone();
    late.id = 77;
    late.arrival_ms = sc.meta.duration_ms + 1;
    sc.workload.requests.push(late);
    let report = run(&sc, &strict()).unwrap();
    assert!(report.db_dump.iter().all(|e| e.request.id != 77));
    let summary = report.summary.flows.iter().find(|f| f.flow_id == 77).unwrap();
    assert_eq!(summary.status, None);
    assert_eq!(summary.windows, 0);
}

#[test]
fn arrival_jitter_is_seeded() {
    let mut sc = load("acceptance.json");
    sc.workload.arrival_jitter_ms = 900;
    let a = run(&sc, &RunOptions::default()).unwrap();
    assert_eq!(a, run(&sc, &RunOptions::default()).unwrap());
    let shifted = (1..20).any(|seed| {
        sc.meta.seed = seed;
        run(&sc, &RunOptions::default()).unwrap().qoe_series != a.qoe_series
    });
    assert!(shifted, "changing the seed never moved an arrival");
}

#[test]
fn ledger_fault_is_caught_in_both_modes() {
    assert!(RunOptions::FAULT_INJECTION);
    let sc = load("acceptance.json");
    for strict_debug in [true, false] {
        let mut opts = RunOptions { strict_debug, ..RunOptions::default() };
        assert!(opts.request_ledger_fault());
        match run(&sc, &opts) {
            Err(SimError::InternalInvariantViolation { .. }) => {}
            other => panic!("strict={strict_debug}: expected an invariant violation, got {other:?}"),
        }
    }
}

#[test]
fn invalid_scenarios_do_not_run() {
    let mut sc = load("minimal.json");
    sc.meta.window_ms = 0;
    assert!(matches!(run(&sc, &RunOptions::default()), Err(SimError::ScenarioInvalid(_))));
}

#[test]
fn queue_orders_by_time_then_insertion() {
    let mut q = EventQueue::new();
    q.schedule(10, EventKind::Arrival(2)).unwrap();
    q.schedule(5, EventKind::Arrival(1)).unwrap();
    q.schedule(10, EventKind::Departure(3)).unwrap();
    let order: Vec<u64> = std::iter::from_fn(|| q.next()).map(|e| e.time_ms).collect();
    assert_eq!(order, [5, 10, 10]);
    assert_eq!(q.now_ms(), 10);
    assert!(matches!(q.schedule(9, EventKind::Arrival(4)), Err(SimError::TimeTravel { .. })));
    assert!(q.schedule(10, EventKind::Arrival(4)).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counters_agree_with_the_record(seed in any::<u64>()) {
        let sc = random_scenario(&mut StdRng::seed_from_u64(seed));
        let r = run(&sc, &strict()).unwrap();
        let c = r.summary.counters;
        let count = |s: LifecycleStatus| r.db_dump.iter().filter(|e| e.status == s).count() as u64;
        prop_assert_eq!(c.admitted, r.db_dump.len() as u64);
        prop_assert_eq!(c.completed, count(LifecycleStatus::Completed));
        prop_assert_eq!(c.failed, count(LifecycleStatus::Failed));
        prop_assert_eq!(c.rejected(), r.summary.rejections.len() as u64);
        prop_assert_eq!(r.summary.flows.len(), sc.workload.requests.len());
        for row in &r.qoe_series {
            prop_assert!(row.time_ms % sc.meta.window_ms == 0 && row.time_ms <= sc.meta.duration_ms);
            prop_assert!((1.0..=5.0).contains(&row.mos));
        }
    }

    #[test]
    fn strict_and_plain_runs_agree(seed in any::<u64>()) {
        let doc = random_scenario_json(&mut StdRng::seed_from_u64(seed));
        let sc = parse_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap();
        prop_assert_eq!(run(&sc, &strict()).unwrap(), run(&sc, &RunOptions::default()).unwrap());
    }
}
