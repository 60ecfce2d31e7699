//! Bandwidth-constrained minimum-latency routing.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::net::NetworkState;
use crate::units::{Fixed, LinkId, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no feasible path")]
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub links: Vec<LinkId>,
    /// Sum of current link latencies, ms.
    pub latency: Fixed,
}

/// Total order used to rank candidate paths: latency, then hop count, then
/// the link-id sequence lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Label {
    latency: Fixed,
    hops: usize,
    links: Vec<LinkId>,
}

/// Minimum-latency simple path from `src` to `dst` using only links with at
/// least `bw_req` residual bandwidth that are not in `excluded`. Failed hosts
/// may be the source or destination but are never crossed.
///
/// The label order is preserved under extension by a common link, so a
/// Dijkstra over full labels returns the unique minimum of that order.
pub fn shortest_feasible_path(
    state: &NetworkState,
    src: NodeId,
    dst: NodeId,
    bw_req: Fixed,
    excluded: &BTreeSet<LinkId>,
) -> Result<Route, RouteError> {
    for n in [src, dst] {
        if state.node(n).is_none() {
            return Err(RouteError::UnknownNode(n));
        }
    }
    if src == dst {
        return Ok(Route { links: Vec::new(), latency: Fixed::ZERO });
    }

    let mut best: BTreeMap<NodeId, Label> = BTreeMap::new();
    let mut settled = BTreeSet::new();
    let mut heap = BinaryHeap::new();
    let start = Label { latency: Fixed::ZERO, hops: 0, links: Vec::new() };
    best.insert(src, start.clone());
    heap.push(Reverse((start, src)));

    while let Some(Reverse((label, node))) = heap.pop() {
        if !settled.insert(node) {
            continue;
        }
        if node == dst {
            return Ok(Route { links: label.links, latency: label.latency });
        }
        if node != src && state.is_failed(node) {
            continue;
        }
        for &(link, next) in state.neighbors(node) {
            if settled.contains(&next) || excluded.contains(&link) {
                continue;
            }
            if state.residual_bw(link).is_none_or(|r| r < bw_req) {
                continue;
            }
            let q = state.quality(link).expect("link in adjacency");
            let mut links = label.links.clone();
            links.push(link);
            let cand = Label { latency: label.latency + q.latency, hops: label.hops + 1, links };
            if best.get(&next).is_none_or(|b| cand < *b) {
                best.insert(next, cand.clone());
                heap.push(Reverse((cand, next)));
            }
        }
    }
    Err(RouteError::Infeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{LinkQuality, LinkSpec, NodeSpec};

    fn none() -> BTreeSet<LinkId> {
        BTreeSet::new()
    }

    #[test]
    fn same_node_is_empty() {
        let s = NetworkState::build(vec![NodeSpec::switch(0)], vec![]).unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(0), Fixed::from_int(1), &none()).unwrap();
        assert!(r.links.is_empty());
    }

    #[test]
    fn parallel_links_pick_lower_latency() {
        let s = NetworkState::build(
            vec![NodeSpec::switch(0), NodeSpec::switch(1)],
            vec![LinkSpec::new(0, 0, 1, 10.0, 10.0, 0.0, 0.0), LinkSpec::new(1, 0, 1, 10.0, 5.0, 0.0, 0.0)],
        )
        .unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(1), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(1)]);
        assert_eq!(r.latency, Fixed::from_int(5));
    }

    #[test]
    fn ties_prefer_fewer_hops_then_lower_ids() {
        // 0-1 direct (lat 4), 0-2-1 (2+2). Equal latency; direct wins on hops.
        let mut s = NetworkState::build(
            vec![NodeSpec::switch(0), NodeSpec::switch(1), NodeSpec::switch(2)],
            vec![
                LinkSpec::new(5, 0, 1, 10.0, 4.0, 0.0, 0.0),
                LinkSpec::new(1, 0, 2, 10.0, 2.0, 0.0, 0.0),
                LinkSpec::new(2, 2, 1, 10.0, 2.0, 0.0, 0.0),
                LinkSpec::new(3, 0, 1, 10.0, 4.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(1), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(3)]);

        s.degrade_link(LinkId(3), LinkQuality::new(9.0, 0.0, 0.0)).unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(1), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(5)]);
    }

    #[test]
    fn bandwidth_and_exclusion_filters() {
        let s = NetworkState::build(
            vec![NodeSpec::switch(0), NodeSpec::switch(1), NodeSpec::switch(2)],
            vec![
                LinkSpec::new(0, 0, 1, 2.0, 1.0, 0.0, 0.0),
                LinkSpec::new(1, 0, 2, 10.0, 5.0, 0.0, 0.0),
                LinkSpec::new(2, 2, 1, 10.0, 5.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(3), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(1), LinkId(2)]);
        let ex: BTreeSet<_> = [LinkId(1)].into();
        assert_eq!(
            shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(3), &ex),
            Err(RouteError::Infeasible)
        );
        assert_eq!(
            shortest_feasible_path(&s, NodeId(0), NodeId(9), Fixed::from_int(3), &ex),
            Err(RouteError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn failed_hosts_are_not_transit() {
        let mut s = NetworkState::build(
            vec![NodeSpec::endpoint(0), NodeSpec::host(1, 1, 1), NodeSpec::endpoint(2), NodeSpec::switch(3)],
            vec![
                LinkSpec::new(0, 0, 1, 10.0, 1.0, 0.0, 0.0),
                LinkSpec::new(1, 1, 2, 10.0, 1.0, 0.0, 0.0),
                LinkSpec::new(2, 0, 3, 10.0, 5.0, 0.0, 0.0),
                LinkSpec::new(3, 3, 2, 10.0, 5.0, 0.0, 0.0),
            ],
        )
        .unwrap();
        s.fail_host(NodeId(1)).unwrap();
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(2), Fixed::from_int(1), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(2), LinkId(3)]);
        // still reachable as an endpoint
        let r = shortest_feasible_path(&s, NodeId(0), NodeId(1), Fixed::from_int(1), &none()).unwrap();
        assert_eq!(r.links, vec![LinkId(0)]);
    }
}
