mod common;

use chainsim::net::NodeKind;
use chainsim::scenario::parse_scenario;
use chainsim::{LinkId, NodeId};
use common::{fixture_names, load, random_scenario};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn serialised_scenarios_parse_back_identically(seed in any::<u64>()) {
        let sc = random_scenario(&mut StdRng::seed_from_u64(seed));
        let again = parse_scenario(sc.to_json().as_bytes()).expect("round trip");
        prop_assert_eq!(again, sc);
    }

    #[test]
    fn fresh_substrate_has_full_residuals(seed in any::<u64>()) {
        let sc = random_scenario(&mut StdRng::seed_from_u64(seed));
        let net = sc.network_state();
        for n in &sc.network.nodes {
            if n.kind == NodeKind::Host {
                prop_assert_eq!(net.residual_cpu(NodeId(n.id)), Some(n.cpu));
                prop_assert_eq!(net.residual_mem(NodeId(n.id)), Some(n.mem));
            }
        }
        for l in &sc.network.links {
            prop_assert_eq!(net.residual_bw(LinkId(l.id)), Some(l.bandwidth));
        }
        prop_assert!(net.ledger().is_empty());
    }
}

#[test]
fn fixtures_round_trip() {
    for name in fixture_names() {
        let sc = load(name);
        assert_eq!(parse_scenario(sc.to_json().as_bytes()).unwrap(), sc, "{name}");
    }
}

#[test]
fn acceptance_topology_matches_declared_capacity() {
    let sc = load("acceptance.json");
    let net = sc.network_state();
    assert_eq!(net.residual_cpu(NodeId(1)), Some(8));
    assert_eq!(net.residual_mem(NodeId(2)), Some(8));
    assert_eq!(net.residual_cpu(NodeId(0)), None);
    let bw: Vec<f64> = (0..4).map(|l| net.residual_bw(LinkId(l)).unwrap().to_f64()).collect();
    let declared: Vec<f64> = sc.network.links.iter().map(|l| l.bandwidth.to_f64()).collect();
    assert_eq!(bw, declared);
    assert_eq!(net.hosts().count(), 2);
}

#[test]
fn every_problem_is_reported_with_a_path() {
    let mut doc = common::random_scenario_json(&mut StdRng::seed_from_u64(7));
    doc["network"]["links"][0]["loss"] = serde_json::json!(-1.0);
    doc["meta"]["window_ms"] = serde_json::json!(0);
    doc["catalog"]["surplus"] = serde_json::json!(true);
    let diags = parse_scenario(&serde_json::to_vec(&doc).unwrap()).unwrap_err();
    let paths: Vec<&str> = diags.iter().map(|d| d.path.as_str()).collect();
    assert!(paths.contains(&"network.links[0].loss"), "{paths:?}");
    assert!(paths.contains(&"meta.window_ms"), "{paths:?}");
    assert!(paths.iter().any(|p| p.starts_with("catalog")), "{paths:?}");
    for d in &diags {
        assert!(d.to_string().starts_with("ERROR "), "{d}");
    }
}

#[test]
fn empty_and_truncated_inputs_are_rejected() {
    for bytes in [&b""[..], b"{", b"[]", b"null", b"{\"meta\": 1}"] {
        let diags = parse_scenario(bytes).unwrap_err();
        assert!(!diags.is_empty());
    }
}
