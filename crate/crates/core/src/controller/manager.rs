use std::collections::BTreeSet;

use crate::net::{Demand, Eviction, NetworkState};
use crate::qoe::predict_mos;
use crate::service::{AppProfile, ForwardingGraph, GraphStatus, VnfType};
use crate::units::{LinkId, NodeId, RequestId};

use super::embed::{choose_host, plan_chain};
use super::routing::shortest_feasible_path;
use super::{Action, Controller, ControllerError, FlowRecord};

/// Nodes visited by a segment, starting at `start`.
fn walk(state: &NetworkState, start: NodeId, links: &[LinkId]) -> Vec<NodeId> {
    let mut nodes = vec![start];
    let mut cur = start;
    for l in links {
        if let Some(next) = state.link(*l).and_then(|s| s.other_end(cur)) {
            cur = next;
            nodes.push(cur);
        }
    }
    nodes
}

/// The graph's `n` worst distinct links: highest current loss, then highest
/// latency, then lowest id.
fn worst_links(state: &NetworkState, graph: &ForwardingGraph, n: usize) -> BTreeSet<LinkId> {
    let mut links: Vec<LinkId> = graph.links().collect::<BTreeSet<_>>().into_iter().collect();
    links.sort_by_key(|l| {
        let q = state.quality(*l).expect("graph links exist");
        (std::cmp::Reverse(q.loss), std::cmp::Reverse(q.latency), *l)
    });
    links.into_iter().take(n).collect()
}

impl Controller {
    /// Reacts to an ELA breach: first re-route with hosts fixed, then
    /// re-embed the whole chain while avoiding the graph's worst links (one
    /// more link per further attempt). The first variant whose predicted MOS
    /// meets the target is committed; if none does within
    /// `max_reroute_attempts`, the flow is marked degraded and left in place.
    pub fn handle_breach(&mut self, id: RequestId) -> Result<Action, ControllerError> {
        let flow = self.flows.get(&id).ok_or(ControllerError::UnknownFlow(id))?.clone();
        let (vnfs, profile) = self.resolve(&flow.request)?;
        let mut base = self.net.clone();
        base.release_owner(id);

        let mut chosen = None;
        for attempt in 0..self.policy.max_reroute_attempts as usize {
            let candidate = if attempt == 0 {
                reroute_fixed_hosts(&base, &flow, &vnfs, profile)
            } else {
                let excluded = worst_links(&self.net, &flow.graph, attempt);
                plan_chain(&base, &flow.request, &vnfs, profile, &excluded).ok().map(|p| p.graph)
            };
            let Some(graph) = candidate else { continue };
            if graph.segments == flow.graph.segments && graph.placements == flow.graph.placements {
                continue;
            }
            let predicted = predict_mos(&flow.request, &graph.segments, &vnfs, profile, &base)
                .map_err(|e| ControllerError::Invariant(e.to_string()))?;
            if predicted.mos >= flow.request.ela_target {
                chosen = Some(graph);
                break;
            }
        }

        match chosen {
            Some(mut graph) => {
                graph.status = GraphStatus::Active;
                let moved = graph.placements != flow.graph.placements;
                self.commit_graph(id, graph.clone())?;
                if moved {
                    self.counters.migrated += 1;
                    Ok(Action::Migrated(graph))
                } else {
                    self.counters.rerouted += 1;
                    Ok(Action::Rerouted(graph))
                }
            }
            None => {
                let graph = &mut self.flows.get_mut(&id).expect("checked").graph;
                if graph.status != GraphStatus::Degraded {
                    graph.status = GraphStatus::Degraded;
                    self.counters.degraded += 1;
                }
                Ok(Action::MarkedDegraded)
            }
        }
    }

    /// Repairs every flow hit by the failure of `host` (already applied to
    /// the state). Evicted VNFs are re-placed greedily; unaffected placements
    /// stay put; only segments adjacent to a moved VNF or crossing the failed
    /// host are recomputed. Flows that cannot be repaired are failed and all
    /// their resources released. Flows are handled in ascending id order.
    pub fn handle_host_failure(
        &mut self,
        host: NodeId,
        evictions: &[Eviction],
    ) -> Result<Vec<(RequestId, Action)>, ControllerError> {
        let mut affected: BTreeSet<RequestId> = evictions.iter().map(|e| e.owner).collect();
        for (id, flow) in &self.flows {
            let waypoints = flow.graph.waypoints(&flow.request);
            let crosses = flow
                .graph
                .segments
                .iter()
                .zip(&waypoints)
                .any(|(seg, start)| walk(&self.net, *start, seg).contains(&host));
            if crosses || flow.graph.touches_host(host) {
                affected.insert(*id);
            }
        }

        let mut actions = Vec::with_capacity(affected.len());
        for id in affected {
            let flow = self
                .flows
                .get(&id)
                .ok_or_else(|| ControllerError::Invariant(format!("eviction for unknown flow {id}")))?
                .clone();
            let (vnfs, profile) = self.resolve(&flow.request)?;
            match repair_after_failure(&self.net, &flow, &vnfs, profile) {
                Some(graph) => {
                    let moved = graph.placements != flow.graph.placements;
                    self.commit_graph(id, graph.clone())?;
                    if moved {
                        self.counters.migrated += 1;
                        actions.push((id, Action::Migrated(graph)));
                    } else {
                        self.counters.rerouted += 1;
                        actions.push((id, Action::Rerouted(graph)));
                    }
                }
                None => {
                    self.net.release_owner(id);
                    self.flows.remove(&id);
                    self.counters.failed += 1;
                    actions.push((id, Action::Failed));
                }
            }
        }
        Ok(actions)
    }
}

/// Recomputes every segment with placements unchanged.
fn reroute_fixed_hosts(
    base: &NetworkState,
    flow: &FlowRecord,
    vnfs: &[&VnfType],
    profile: &AppProfile,
) -> Option<ForwardingGraph> {
    let mut scratch = base.clone();
    let mut hosts = Demand::new();
    for (p, v) in flow.graph.placements.iter().zip(vnfs) {
        hosts.add_instance(p.host, v.cpu_demand, v.mem_demand);
    }
    scratch.reserve(flow.request.id, &hosts).ok()?;
    let waypoints = flow.graph.waypoints(&flow.request);
    let mut segments = Vec::with_capacity(waypoints.len() - 1);
    for w in waypoints.windows(2) {
        let route = shortest_feasible_path(&scratch, w[0], w[1], profile.bw_req, &BTreeSet::new()).ok()?;
        let mut d = Demand::new();
        d.add_path(&route.links, profile.bw_req);
        scratch.reserve(flow.request.id, &d).ok()?;
        segments.push(route.links);
    }
    Some(ForwardingGraph { segments, ..flow.graph.clone() })
}

fn repair_after_failure(
    state: &NetworkState,
    flow: &FlowRecord,
    vnfs: &[&VnfType],
    profile: &AppProfile,
) -> Option<ForwardingGraph> {
    let id = flow.request.id;
    let bw = profile.bw_req;
    let mut base = state.clone();
    base.release_owner(id);

    let old = &flow.graph;
    let k = old.placements.len();
    let evicted: Vec<bool> = old.placements.iter().map(|p| base.is_failed(p.host)).collect();
    let waypoints = old.waypoints(&flow.request);
    let recompute: Vec<bool> = (0..=k)
        .map(|j| {
            (j > 0 && evicted[j - 1])
                || (j < k && evicted[j])
                || walk(&base, waypoints[j], &old.segments[j]).iter().any(|n| base.is_failed(*n))
        })
        .collect();

    let mut scratch = base.clone();
    let mut kept = Demand::new();
    for (i, (p, v)) in old.placements.iter().zip(vnfs).enumerate() {
        if !evicted[i] {
            kept.add_instance(p.host, v.cpu_demand, v.mem_demand);
        }
    }
    for (j, seg) in old.segments.iter().enumerate() {
        if !recompute[j] {
            kept.add_path(seg, bw);
        }
    }
    scratch.reserve(id, &kept).ok()?;

    let mut placements = old.placements.clone();
    let mut segments = old.segments.clone();
    let mut anchor = flow.request.ingress;
    for i in 0..k {
        if evicted[i] {
            let (host, route) = choose_host(&scratch, anchor, vnfs[i], bw, &BTreeSet::new()).ok()?;
            let mut d = Demand::new();
            d.add_instance(host, vnfs[i].cpu_demand, vnfs[i].mem_demand);
            d.add_path(&route.links, bw);
            scratch.reserve(id, &d).ok()?;
            placements[i].host = host;
            segments[i] = route.links;
        } else if recompute[i] {
            let route = shortest_feasible_path(&scratch, anchor, placements[i].host, bw, &BTreeSet::new()).ok()?;
            let mut d = Demand::new();
            d.add_path(&route.links, bw);
            scratch.reserve(id, &d).ok()?;
            segments[i] = route.links;
        }
        anchor = placements[i].host;
    }
    if recompute[k] {
        let route = shortest_feasible_path(&scratch, anchor, flow.request.egress, bw, &BTreeSet::new()).ok()?;
        segments[k] = route.links;
    }

    let predicted = predict_mos(&flow.request, &segments, vnfs, profile, &base).ok()?;
    if predicted.mos < flow.request.ela_target {
        return None;
    }
    Some(ForwardingGraph { placements, segments, status: GraphStatus::Active, ..old.clone() })
}
