#![allow(dead_code)]

use std::path::PathBuf;

use chainsim::scenario::{parse_scenario, Scenario};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;
use serde_json::{json, Value};

pub fn scenario_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> Scenario {
    let bytes = std::fs::read(scenario_path(name)).unwrap();
    parse_scenario(&bytes).unwrap_or_else(|d| panic!("{name}: {d:?}"))
}

pub fn fixture_names() -> Vec<&'static str> {
    vec!["acceptance.json", "failover.json", "feedback.json", "greedy_trap.json", "minimal.json"]
}

/// A number with up to three decimals drawn from `[lo, hi]`.
pub fn milli(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    let v: f64 = rng.gen_range(lo..=hi);
    (v * 1000.0).round() / 1000.0
}

/// A random valid scenario document as JSON.
pub fn random_scenario_json(rng: &mut StdRng) -> Value {
    let endpoints = rng.gen_range(2..=3);
    let hosts = rng.gen_range(0..=4);
    let switches = rng.gen_range(0..=1);
    let mut kinds = Vec::new();
    kinds.extend(std::iter::repeat("endpoint").take(endpoints));
    kinds.extend(std::iter::repeat("host").take(hosts));
    kinds.extend(std::iter::repeat("switch").take(switches));
    kinds.shuffle(rng);
    // Sparse ids: uniqueness matters, density does not.
    let ids: Vec<u32> = (0..kinds.len() as u32).map(|i| i * 3 + 1).collect();
    let nodes: Vec<Value> = ids
        .iter()
        .zip(&kinds)
        .map(|(id, kind)| {
            if *kind == "host" {
                json!({"id": id, "kind": kind, "cpu": rng.gen_range(0..=8), "mem": rng.gen_range(0..=8)})
            } else {
                json!({"id": id, "kind": kind})
            }
        })
        .collect();

    let mut links = Vec::new();
    let link = |rng: &mut StdRng, a: u32, b: u32, links: &mut Vec<Value>| {
        let loss = if rng.gen_bool(0.3) { milli(rng, 0.0, 3.0) } else { 0.0 };
        links.push(json!({
            "id": links.len() as u32 * 2,
            "a": a,
            "b": b,
            "bandwidth": milli(rng, 2.0, 60.0),
            "latency": milli(rng, 0.0, 40.0),
            "jitter": milli(rng, 0.0, 5.0),
            "loss": loss,
        }));
    };
    // Random spanning tree plus extras, parallel links allowed.
    for i in 1..ids.len() {
        let j = rng.gen_range(0..i);
        link(rng, ids[i], ids[j], &mut links);
    }
    for _ in 0..rng.gen_range(0..=4) {
        let a = rng.gen_range(0..ids.len());
        let mut b = rng.gen_range(0..ids.len());
        if a == b {
            b = (b + 1) % ids.len();
        }
        link(rng, ids[a], ids[b], &mut links);
    }

    let vnf_names = ["fw", "nat", "dpi"];
    let vnf_types: Vec<Value> = vnf_names
        .iter()
        .map(|n| {
            json!({"name": n, "cpu": rng.gen_range(1..=4), "mem": rng.gen_range(1..=4),
                   "proc_latency": milli(rng, 0.0, 3.0)})
        })
        .collect();
    let profile_names = ["iptv", "vod"];
    let profiles: Vec<Value> = profile_names
        .iter()
        .map(|n| {
            let opt = milli(rng, 10.0, 60.0);
            json!({"name": n, "bw_req": milli(rng, 1.0, 20.0), "delay_opt": opt,
                   "delay_max": opt + milli(rng, 30.0, 250.0), "loss_max": milli(rng, 1.0, 8.0),
                   "stall_max": milli(rng, 0.1, 1.0)})
        })
        .collect();

    let window_ms: u64 = *[250u64, 500, 1000].choose(rng).unwrap();
    let windows: u64 = rng.gen_range(2..=10);
    let duration = window_ms * windows;
    let endpoint_ids: Vec<u32> =
        ids.iter().zip(&kinds).filter(|(_, k)| **k == "endpoint").map(|(id, _)| *id).collect();
    let host_ids: Vec<u32> = ids.iter().zip(&kinds).filter(|(_, k)| **k == "host").map(|(id, _)| *id).collect();

    let n_requests = rng.gen_range(0..=8);
    let requests: Vec<Value> = (0..n_requests)
        .map(|i| {
            let pair: Vec<&u32> = endpoint_ids.choose_multiple(rng, 2).collect();
            let chain: Vec<&str> = (0..rng.gen_range(0..=3)).map(|_| *vnf_names.choose(rng).unwrap()).collect();
            let mut r = json!({
                "id": 100 + i as u64,
                "ingress": pair[0],
                "egress": pair[1],
                "vnfs": chain,
                "profile": profile_names.choose(rng).unwrap(),
                "arrival_ms": rng.gen_range(0..duration),
                "holding_ms": rng.gen_range(1..=duration),
            });
            if rng.gen_bool(0.3) {
                r["ela_target"] = json!(milli(rng, 1.0, 5.0));
            }
            r
        })
        .collect();

    let mut failing = host_ids.clone();
    failing.shuffle(rng);
    failing.truncate(rng.gen_range(0..=host_ids.len().min(2)));
    let host_failures: Vec<Value> =
        failing.iter().map(|h| json!({"at_ms": rng.gen_range(0..=duration), "host": h})).collect();
    let link_degradations: Vec<Value> = (0..rng.gen_range(0..=3))
        .map(|_| {
            let l = links.choose(rng).unwrap()["id"].clone();
            let loss = if rng.gen_bool(0.2) { 100.0 } else { milli(rng, 0.0, 10.0) };
            json!({"at_ms": rng.gen_range(0..=duration), "link": l, "latency": milli(rng, 0.0, 200.0),
                   "jitter": milli(rng, 0.0, 20.0), "loss": loss})
        })
        .collect();
    let stall_injections: Vec<Value> = if n_requests == 0 {
        Vec::new()
    } else {
        (0..rng.gen_range(0..=2))
            .map(|_| {
                json!({"at_ms": rng.gen_range(0..=duration), "flow": 100 + rng.gen_range(0..n_requests) as u64,
                       "stall_ratio": milli(rng, 0.0, 1.0)})
            })
            .collect()
    };

    let mut doc = json!({
        "meta": {"name": "random", "seed": rng.gen::<u64>(), "duration_ms": duration, "window_ms": window_ms},
        "network": {"nodes": nodes, "links": links},
        "catalog": {"vnf_types": vnf_types},
        "profiles": {"app_profiles": profiles},
        "ela": {"target_mos": milli(rng, 1.0, 4.5), "breach_windows": rng.gen_range(1..=3),
                "compliance_budget": milli(rng, 0.0, 1.0)},
        "workload": {"requests": requests},
        "faults": {"host_failures": host_failures, "link_degradations": link_degradations,
                   "stall_injections": stall_injections},
    });
    if rng.gen_bool(0.5) {
        doc["policy"] = json!({"predictor_alpha": milli(rng, 0.05, 1.0), "max_reroute_attempts": rng.gen_range(1..=3)});
    }
    if rng.gen_bool(0.3) {
        doc["workload"]["arrival_jitter_ms"] = json!(rng.gen_range(0..=window_ms));
    }
    doc
}

pub fn random_scenario(rng: &mut StdRng) -> Scenario {
    let doc = random_scenario_json(rng);
    let bytes = serde_json::to_vec(&doc).unwrap();
    parse_scenario(&bytes).unwrap_or_else(|d| panic!("generator produced an invalid scenario: {d:?}\n{doc:#}"))
}
