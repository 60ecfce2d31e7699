//! Exhaustive embedding over every host assignment and every simple path,
//! used to measure how far the greedy embedder is from optimal.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::NetworkState;
use crate::qoe::predict_mos;
use crate::service::{AppProfile, ChainRequest, ForwardingGraph, GraphStatus, Placement, VnfType};
use crate::units::{Fixed, LinkId, NodeId};

use super::embed::Plan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactLimits {
    pub max_hosts: usize,
    pub max_chain: usize,
    pub max_paths: usize,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { max_hosts: 6, max_chain: 3, max_paths: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("instance too large: {0}")]
    InstanceTooLarge(String),
    #[error("no feasible embedding")]
    Infeasible,
}

#[derive(Debug, Clone)]
struct Candidate {
    links: Vec<LinkId>,
    latency: Fixed,
}

/// Every node-simple path from `src` to `dst` over links with at least `bw`
/// residual, never crossing a failed host, sorted by (latency, hops, ids).
fn simple_paths(
    state: &NetworkState,
    src: NodeId,
    dst: NodeId,
    bw: Fixed,
    limit: usize,
) -> Result<Vec<Candidate>, ExactError> {
    if src == dst {
        return Ok(vec![Candidate { links: Vec::new(), latency: Fixed::ZERO }]);
    }
    let mut out = Vec::new();
    let mut visited = BTreeSet::from([src]);
    let mut stack = Vec::new();
    fn dfs(
        state: &NetworkState,
        node: NodeId,
        dst: NodeId,
        bw: Fixed,
        limit: usize,
        visited: &mut BTreeSet<NodeId>,
        stack: &mut Vec<LinkId>,
        latency: Fixed,
        out: &mut Vec<Candidate>,
    ) -> Result<(), ExactError> {
        for &(link, next) in state.neighbors(node) {
            if visited.contains(&next) || state.residual_bw(link).is_none_or(|r| r < bw) {
                continue;
            }
            let lat = latency + state.quality(link).expect("known link").latency;
            stack.push(link);
            if next == dst {
                out.push(Candidate { links: stack.clone(), latency: lat });
                if out.len() > limit {
                    return Err(ExactError::InstanceTooLarge(format!("more than {limit} simple paths between a node pair")));
                }
            } else if !state.is_failed(next) {
                visited.insert(next);
                dfs(state, next, dst, bw, limit, visited, stack, lat, out)?;
                visited.remove(&next);
            }
            stack.pop();
        }
        Ok(())
    }
    dfs(state, src, dst, bw, limit, &mut visited, &mut stack, Fixed::ZERO, &mut out)?;
    out.sort_by(|a, b| (a.latency, a.links.len(), &a.links).cmp(&(b.latency, b.links.len(), &b.links)));
    Ok(out)
}

struct Search<'a> {
    state: &'a NetworkState,
    request: &'a ChainRequest,
    vnfs: &'a [&'a VnfType],
    profile: &'a AppProfile,
    proc_latency: Fixed,
    best: Option<(Fixed, Vec<NodeId>, Vec<Vec<LinkId>>)>,
}

impl Search<'_> {
    fn descend(
        &mut self,
        options: &[&Vec<Candidate>],
        floor: &[Fixed],
        hosts: &[NodeId],
        seg: usize,
        chosen: &mut Vec<Vec<LinkId>>,
        used_bw: &mut BTreeMap<LinkId, Fixed>,
        latency: Fixed,
    ) {
        if seg == options.len() {
            let total = latency + self.proc_latency;
            if self.best.as_ref().is_some_and(|(b, _, _)| total >= *b) {
                return;
            }
            let Ok(pred) = predict_mos(self.request, chosen, self.vnfs, self.profile, self.state) else {
                return;
            };
            if pred.mos >= self.request.ela_target {
                self.best = Some((total, hosts.to_vec(), chosen.clone()));
            }
            return;
        }
        for cand in options[seg] {
            let bound = latency + cand.latency + floor[seg + 1] + self.proc_latency;
            if self.best.as_ref().is_some_and(|(b, _, _)| bound >= *b) {
                // candidates are sorted by latency
                break;
            }
            let fits = cand.links.iter().all(|l| {
                let used = used_bw.get(l).copied().unwrap_or_default();
                used + self.profile.bw_req <= self.state.residual_bw(*l).unwrap_or_default()
            });
            if !fits {
                continue;
            }
            for l in &cand.links {
                *used_bw.entry(*l).or_default() += self.profile.bw_req;
            }
            chosen.push(cand.links.clone());
            self.descend(options, floor, hosts, seg + 1, chosen, used_bw, latency + cand.latency);
            chosen.pop();
            for l in &cand.links {
                *used_bw.get_mut(l).expect("added above") -= self.profile.bw_req;
            }
        }
    }
}

/// Minimum end-to-end latency embedding that passes admission control.
///
/// Host tuples are enumerated in lexicographic id order and segment paths in
/// (latency, hops, link ids) order; among equal-latency embeddings the first
/// one found wins.
pub fn exact_embed(
    state: &NetworkState,
    request: &ChainRequest,
    vnfs: &[&VnfType],
    profile: &AppProfile,
    limits: &ExactLimits,
) -> Result<Plan, ExactError> {
    let hosts: Vec<NodeId> = state.hosts().filter(|h| !state.is_failed(*h)).collect();
    if hosts.len() > limits.max_hosts {
        return Err(ExactError::InstanceTooLarge(format!("{} hosts exceeds limit {}", hosts.len(), limits.max_hosts)));
    }
    if vnfs.len() > limits.max_chain {
        return Err(ExactError::InstanceTooLarge(format!(
            "chain length {} exceeds limit {}",
            vnfs.len(),
            limits.max_chain
        )));
    }

    let bw = profile.bw_req;
    let mut path_cache: BTreeMap<(NodeId, NodeId), Vec<Candidate>> = BTreeMap::new();
    let mut ends = vec![request.ingress];
    ends.extend(hosts.iter().copied());
    for &a in &ends {
        for &b in hosts.iter().chain(std::iter::once(&request.egress)) {
            path_cache.insert((a, b), simple_paths(state, a, b, bw, limits.max_paths)?);
        }
    }

    let mut search = Search {
        state,
        request,
        vnfs,
        profile,
        proc_latency: vnfs.iter().map(|v| v.proc_latency).sum(),
        best: None,
    };

    let k = vnfs.len();
    if k > 0 && hosts.is_empty() {
        return Err(ExactError::Infeasible);
    }
    let mut idx = vec![0usize; k];
    'tuples: loop {
        let assignment: Vec<NodeId> = idx.iter().map(|i| hosts[*i]).collect();
        if fits_compute(state, &assignment, vnfs) {
            let mut waypoints = vec![request.ingress];
            waypoints.extend(assignment.iter().copied());
            waypoints.push(request.egress);
            let options: Vec<&Vec<Candidate>> =
                waypoints.windows(2).map(|w| &path_cache[&(w[0], w[1])]).collect();
            if options.iter().all(|o| !o.is_empty()) {
                // floor[i] = sum of the cheapest remaining segments from i on
                let mut floor = vec![Fixed::ZERO; options.len() + 1];
                for i in (0..options.len()).rev() {
                    floor[i] = floor[i + 1] + options[i][0].latency;
                }
                search.descend(&options, &floor, &assignment, 0, &mut Vec::new(), &mut BTreeMap::new(), Fixed::ZERO);
            }
        }
        // advance the odometer
        let mut pos = k;
        loop {
            if pos == 0 {
                break 'tuples;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < hosts.len() {
                break;
            }
            idx[pos] = 0;
        }
    }

    let (_, assignment, segments) = search.best.ok_or(ExactError::Infeasible)?;
    let predicted = predict_mos(request, &segments, vnfs, profile, state).map_err(|_| ExactError::Infeasible)?;
    Ok(Plan {
        graph: ForwardingGraph {
            request_id: request.id,
            placements: vnfs.iter().zip(&assignment).map(|(v, h)| Placement { vnf: v.name.clone(), host: *h }).collect(),
            segments,
            reserved_bw: bw,
            status: GraphStatus::Active,
        },
        predicted,
    })
}

fn fits_compute(state: &NetworkState, assignment: &[NodeId], vnfs: &[&VnfType]) -> bool {
    let mut need: BTreeMap<NodeId, (u64, u64)> = BTreeMap::new();
    for (h, v) in assignment.iter().zip(vnfs) {
        let e = need.entry(*h).or_default();
        e.0 += v.cpu_demand;
        e.1 += v.mem_demand;
    }
    need.iter().all(|(h, (c, m))| {
        state.residual_cpu(*h).unwrap_or(0) >= *c && state.residual_mem(*h).unwrap_or(0) >= *m
    })
}
