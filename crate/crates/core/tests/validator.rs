mod common;

use chainsim::controller::{Admission, Controller};
use chainsim::service::{validate_forwarding_graph, ForwardingGraph, Violation};
use chainsim::{LinkId, NodeId};
use common::random_scenario;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const KINDS: usize = 7;

/// Returns a damaged copy of `g`, or `None` when the chosen damage does not
/// apply to this graph.
fn perturb(g: &ForwardingGraph, kind: usize, links: &[LinkId], nodes: &[NodeId], rng: &mut StdRng) -> Option<ForwardingGraph> {
    let mut m = g.clone();
    let flat: Vec<LinkId> = g.links().collect();
    match kind {
        0 => {
            let pairs: Vec<(usize, usize)> = (0..flat.len())
                .flat_map(|i| (i + 1..flat.len()).map(move |j| (i, j)))
                .filter(|(i, j)| flat[*i] != flat[*j])
                .collect();
            let (i, j) = *pairs.choose(rng)?;
            let mut swapped = flat.clone();
            swapped.swap(i, j);
            let mut it = swapped.into_iter();
            for seg in &mut m.segments {
                for l in seg.iter_mut() {
                    *l = it.next().unwrap();
                }
            }
        }
        1 => {
            let seg = (0..m.segments.len()).filter(|s| !m.segments[*s].is_empty()).collect::<Vec<_>>();
            let s = *seg.choose(rng)?;
            let i = rng.gen_range(0..m.segments[s].len());
            let other: Vec<LinkId> = links.iter().copied().filter(|l| *l != m.segments[s][i]).collect();
            m.segments[s][i] = *other.choose(rng)?;
        }
        2 => {
            let p = rng.gen_range(0..m.placements.len().max(1));
            let place = m.placements.get_mut(p)?;
            let other: Vec<NodeId> = nodes.iter().copied().filter(|n| *n != place.host).collect();
            place.host = *other.choose(rng)?;
        }
        3 => {
            m.segments.pop()?;
        }
        4 => {
            let s = rng.gen_range(0..m.segments.len());
            let l = *links.choose(rng)?;
            m.segments[s].push(l);
        }
        5 => {
            let p = m.placements.first_mut()?;
            p.vnf.push('x');
        }
        _ => m.request_id += 1,
    }
    (m != *g).then_some(m)
}

#[test]
fn damaged_graphs_are_detected() {
    let mut rng = StdRng::seed_from_u64(0x7A);
    let mut tried = [0usize; KINDS];
    let mut caught = [0usize; KINDS];
    let mut clean = 0;
    for _ in 0..600 {
        let sc = random_scenario(&mut rng);
        let mut c = Controller::new(
            sc.network_state(),
            sc.vnf_catalog(),
            sc.profiles.app_profiles.iter().cloned(),
            sc.ela(),
            sc.policy,
        );
        let links: Vec<LinkId> = c.net().links().map(|l| l.id).collect();
        let nodes: Vec<NodeId> = c.net().nodes().map(|n| n.id).collect();
        for req in sc.requests() {
            let Ok(Admission::Admitted(g)) = c.embed_chain(&req) else { continue };
            assert_eq!(validate_forwarding_graph(&g, &req, c.catalog(), c.net()), Vec::<Violation>::new());
            clean += 1;
            for kind in 0..KINDS {
                if let Some(bad) = perturb(&g, kind, &links, &nodes, &mut rng) {
                    tried[kind] += 1;
                    if !validate_forwarding_graph(&bad, &req, c.catalog(), c.net()).is_empty() {
                        caught[kind] += 1;
                    }
                }
            }
        }
    }
    let (t, k): (usize, usize) = (tried.iter().sum(), caught.iter().sum());
    assert!(clean > 100, "only {clean} admitted graphs");
    assert!(k as f64 >= 0.99 * t as f64, "detected {k} of {t}: per kind {caught:?} of {tried:?}");
    for kind in [2, 3, 5, 6] {
        assert_eq!(caught[kind], tried[kind], "kind {kind}");
    }
}
