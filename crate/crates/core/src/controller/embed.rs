//! Greedy chain embedding.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::net::{Demand, NetworkState};
use crate::qoe::{predict_mos, QoeSample};
use crate::service::{AppProfile, ChainRequest, ForwardingGraph, GraphStatus, Placement, VnfType};
use crate::units::{Fixed, LinkId, NodeId};

use super::routing::{shortest_feasible_path, Route, RouteError};
use super::RejectReason;

/// A forwarding graph that passed admission, with the prediction that
/// admitted it.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub graph: ForwardingGraph,
    pub predicted: QoeSample,
}

/// CPU utilisation of `host` in `state`, as an exact fraction (used, cap).
fn utilization(state: &NetworkState, host: NodeId) -> (u64, u64) {
    let cap = state.node(host).map(|n| n.cpu_capacity).unwrap_or(0);
    let used = cap - state.residual_cpu(host).unwrap_or(cap);
    (used, cap)
}

fn cmp_fraction(a: (u64, u64), b: (u64, u64)) -> Ordering {
    // a.0/a.1 vs b.0/b.1; a zero-capacity host counts as idle
    let lhs = a.0 as u128 * b.1.max(1) as u128;
    let rhs = b.0 as u128 * a.1.max(1) as u128;
    lhs.cmp(&rhs)
}

/// Picks the host for one VNF: among non-failed hosts with enough residual
/// compute, the one reachable from `anchor` with the lowest path latency,
/// ties broken by lower CPU utilisation and then lower host id.
pub(crate) fn choose_host(
    state: &NetworkState,
    anchor: NodeId,
    vnf: &VnfType,
    bw_req: Fixed,
    excluded: &BTreeSet<LinkId>,
) -> Result<(NodeId, Route), RejectReason> {
    let mut any_candidate = false;
    let mut best: Option<(NodeId, Route)> = None;
    for host in state.hosts() {
        if state.is_failed(host)
            || state.residual_cpu(host).unwrap_or(0) < vnf.cpu_demand
            || state.residual_mem(host).unwrap_or(0) < vnf.mem_demand
        {
            continue;
        }
        any_candidate = true;
        let route = match shortest_feasible_path(state, anchor, host, bw_req, excluded) {
            Ok(r) => r,
            Err(RouteError::Infeasible) | Err(RouteError::UnknownNode(_)) => continue,
        };
        let better = match &best {
            None => true,
            Some((bh, br)) => match route.latency.cmp(&br.latency) {
                Ordering::Less => true,
                Ordering::Greater => false,
                Ordering::Equal => {
                    match cmp_fraction(utilization(state, host), utilization(state, *bh)) {
                        Ordering::Less => true,
                        Ordering::Greater => false,
                        Ordering::Equal => host < *bh,
                    }
                }
            },
        };
        if better {
            best = Some((host, route));
        }
    }
    match best {
        Some(b) => Ok(b),
        None if any_candidate => Err(RejectReason::NoPath),
        None => Err(RejectReason::NoHost),
    }
}

/// Greedy embedding in chain order, followed by admission control.
///
/// Resources picked for earlier hops are tentatively held while later hops
/// are chosen, so the resulting graph always fits as a whole. `state` is not
/// modified.
pub fn plan_chain(
    state: &NetworkState,
    request: &ChainRequest,
    vnfs: &[&VnfType],
    profile: &AppProfile,
    excluded: &BTreeSet<LinkId>,
) -> Result<Plan, RejectReason> {
    let bw = profile.bw_req;
    let mut scratch = state.clone();
    let mut anchor = request.ingress;
    let mut placements = Vec::with_capacity(vnfs.len());
    let mut segments = Vec::with_capacity(vnfs.len() + 1);

    for vnf in vnfs {
        let (host, route) = choose_host(&scratch, anchor, vnf, bw, excluded)?;
        let mut hold = Demand::new();
        hold.add_instance(host, vnf.cpu_demand, vnf.mem_demand);
        hold.add_path(&route.links, bw);
        scratch.reserve(request.id, &hold).expect("candidate fits by construction");
        placements.push(Placement { vnf: vnf.name.clone(), host });
        segments.push(route.links);
        anchor = host;
    }
    let last = shortest_feasible_path(&scratch, anchor, request.egress, bw, excluded).map_err(|_| RejectReason::NoPath)?;
    segments.push(last.links);

    let predicted = predict_mos(request, &segments, vnfs, profile, state).map_err(|_| RejectReason::NoPath)?;
    if predicted.mos < request.ela_target {
        return Err(RejectReason::QoeBelowTarget(predicted.mos));
    }
    Ok(Plan {
        graph: ForwardingGraph {
            request_id: request.id,
            placements,
            segments,
            reserved_bw: bw,
            status: GraphStatus::Active,
        },
        predicted,
    })
}
