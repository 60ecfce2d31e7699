//! VNF catalog, application profiles, chain requests and forwarding graphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Demand, NetError, NetworkState};
use crate::units::{Fixed, LinkId, NodeId, RequestId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VnfType {
    pub name: String,
    pub cpu_demand: u64,
    pub mem_demand: u64,
    /// Added once per traversal of an instance, in ms.
    pub proc_latency: Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CatalogError {
    #[error("duplicate vnf type {0:?}")]
    Duplicate(String),
    #[error("unknown vnf type {0:?}")]
    UnknownVnf(String),
    #[error("vnf type {0:?} has negative processing latency")]
    NegativeLatency(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Catalog {
    types: BTreeMap<String, VnfType>,
}

impl Catalog {
    pub fn new(types: impl IntoIterator<Item = VnfType>) -> Result<Self, CatalogError> {
        let mut map = BTreeMap::new();
        for t in types {
            if t.proc_latency.is_negative() {
                return Err(CatalogError::NegativeLatency(t.name));
            }
            if map.contains_key(&t.name) {
                return Err(CatalogError::Duplicate(t.name));
            }
            map.insert(t.name.clone(), t);
        }
        Ok(Catalog { types: map })
    }

    pub fn get(&self, name: &str) -> Option<&VnfType> {
        self.types.get(name)
    }

    pub fn types(&self) -> impl Iterator<Item = &VnfType> {
        self.types.values()
    }

    pub fn resolve<'a>(&'a self, names: &[String]) -> Result<Vec<&'a VnfType>, CatalogError> {
        names.iter().map(|n| self.get(n).ok_or_else(|| CatalogError::UnknownVnf(n.clone()))).collect()
    }
}

/// QoS/QoE requirements of one application class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppProfile {
    pub name: String,
    /// Mbps reserved along every segment of the chain.
    pub bw_req: Fixed,
    pub delay_opt: f64,
    pub delay_max: f64,
    /// Percent.
    pub loss_max: f64,
    /// Fraction of playback time spent stalled, in (0, 1].
    pub stall_max: f64,
}

impl AppProfile {
    /// Returns the name of the first offending field, if any.
    pub fn check(&self) -> Result<(), &'static str> {
        let finite = |v: f64| v.is_finite();
        if self.bw_req <= Fixed::ZERO {
            return Err("bw_req");
        }
        if !finite(self.delay_opt) || self.delay_opt < 0.0 {
            return Err("delay_opt");
        }
        if !finite(self.delay_max) || self.delay_max <= self.delay_opt {
            return Err("delay_max");
        }
        if !finite(self.loss_max) || self.loss_max <= 0.0 {
            return Err("loss_max");
        }
        if !finite(self.stall_max) || self.stall_max <= 0.0 || self.stall_max > 1.0 {
            return Err("stall_max");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRequest {
    pub id: RequestId,
    pub ingress: NodeId,
    pub egress: NodeId,
    pub vnfs: Vec<String>,
    pub profile: String,
    pub ela_target: f64,
    pub arrival_ms: u64,
    pub holding_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphStatus {
    Active,
    Degraded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub vnf: String,
    pub host: NodeId,
}

/// A chain embedded into the substrate: one host per VNF and one link path
/// per hop, ingress → host₁ → … → hostₖ → egress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardingGraph {
    pub request_id: RequestId,
    pub placements: Vec<Placement>,
    pub segments: Vec<Vec<LinkId>>,
    pub reserved_bw: Fixed,
    pub status: GraphStatus,
}

impl ForwardingGraph {
    /// Nodes the segments join: ingress, every placement host, egress.
    pub fn waypoints(&self, request: &ChainRequest) -> Vec<NodeId> {
        let mut w = Vec::with_capacity(self.placements.len() + 2);
        w.push(request.ingress);
        w.extend(self.placements.iter().map(|p| p.host));
        w.push(request.egress);
        w
    }

    pub fn links(&self) -> impl Iterator<Item = LinkId> + '_ {
        self.segments.iter().flatten().copied()
    }

    /// Resources the graph holds while live. Unknown VNF names contribute no
    /// compute.
    pub fn demand(&self, catalog: &Catalog) -> Demand {
        let mut d = Demand::new();
        for p in &self.placements {
            let (cpu, mem) = catalog.get(&p.vnf).map(|t| (t.cpu_demand, t.mem_demand)).unwrap_or((0, 0));
            d.add_instance(p.host, cpu, mem);
        }
        for seg in &self.segments {
            d.add_path(seg, self.reserved_bw);
        }
        d
    }

    pub fn touches_host(&self, host: NodeId) -> bool {
        self.placements.iter().any(|p| p.host == host)
    }
}

/// Structural problems found in a forwarding graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RequestMismatch,
    PlacementCount { expected: usize, found: usize },
    VnfMismatch { position: usize },
    SegmentCount { expected: usize, found: usize },
    NotAHost { position: usize, node: NodeId },
    PlacementOnFailedHost { position: usize, host: NodeId },
    UnknownLink { segment: usize, link: LinkId },
    SegmentDiscontinuity { segment: usize },
    RepeatedLink { segment: usize, link: LinkId },
    TransitThroughFailedHost { segment: usize, host: NodeId },
    NonPositiveBandwidth,
    InsufficientBandwidth { link: LinkId },
    InsufficientCompute { host: NodeId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RequestMismatch => write!(f, "request id mismatch"),
            Violation::PlacementCount { expected, found } => {
                write!(f, "placement count {found}, expected {expected}")
            }
            Violation::VnfMismatch { position } => write!(f, "vnf mismatch at position {position}"),
            Violation::SegmentCount { expected, found } => write!(f, "segment count {found}, expected {expected}"),
            Violation::NotAHost { position, node } => write!(f, "placement {position} on non-host {node}"),
            Violation::PlacementOnFailedHost { position, host } => {
                write!(f, "placement {position} on failed host {host}")
            }
            Violation::UnknownLink { segment, link } => write!(f, "unknown link {link} in segment {segment}"),
            Violation::SegmentDiscontinuity { segment } => write!(f, "segment discontinuity at segment {segment}"),
            Violation::RepeatedLink { segment, link } => write!(f, "repeated link {link} in segment {segment}"),
            Violation::TransitThroughFailedHost { segment, host } => {
                write!(f, "segment {segment} transits failed host {host}")
            }
            Violation::NonPositiveBandwidth => write!(f, "reserved bandwidth must be positive"),
            Violation::InsufficientBandwidth { link } => write!(f, "insufficient bandwidth on {link}"),
            Violation::InsufficientCompute { host } => write!(f, "insufficient compute on {host}"),
        }
    }
}

/// Lists every structural invariant `fg` violates against `state`.
///
/// If the state's ledger holds a reservation for the request, the graph's
/// resource demand must be covered by that reservation; otherwise it must fit
/// in the current residuals. Failed graphs are only checked structurally.
pub fn validate_forwarding_graph(
    fg: &ForwardingGraph,
    request: &ChainRequest,
    catalog: &Catalog,
    state: &NetworkState,
) -> Vec<Violation> {
    let mut out = Vec::new();
    let live = fg.status != GraphStatus::Failed;
    if fg.request_id != request.id {
        out.push(Violation::RequestMismatch);
    }
    if fg.placements.len() != request.vnfs.len() {
        out.push(Violation::PlacementCount { expected: request.vnfs.len(), found: fg.placements.len() });
    }
    for (i, (p, want)) in fg.placements.iter().zip(&request.vnfs).enumerate() {
        if &p.vnf != want {
            out.push(Violation::VnfMismatch { position: i });
        }
    }
    for (i, p) in fg.placements.iter().enumerate() {
        if !state.is_host(p.host) {
            out.push(Violation::NotAHost { position: i, node: p.host });
        } else if live && state.is_failed(p.host) {
            out.push(Violation::PlacementOnFailedHost { position: i, host: p.host });
        }
    }
    if fg.segments.len() != fg.placements.len() + 1 {
        out.push(Violation::SegmentCount { expected: fg.placements.len() + 1, found: fg.segments.len() });
    }
    if fg.reserved_bw <= Fixed::ZERO {
        out.push(Violation::NonPositiveBandwidth);
    }

    let waypoints = fg.waypoints(request);
    let mut structurally_sound = true;
    for (i, seg) in fg.segments.iter().enumerate() {
        let (Some(&start), Some(&end)) = (waypoints.get(i), waypoints.get(i + 1)) else {
            structurally_sound = false;
            continue;
        };
        let mut seen = BTreeSet::new();
        let mut cur = start;
        let mut broken = false;
        for (j, &l) in seg.iter().enumerate() {
            if !seen.insert(l) {
                out.push(Violation::RepeatedLink { segment: i, link: l });
            }
            let Some(spec) = state.link(l) else {
                out.push(Violation::UnknownLink { segment: i, link: l });
                broken = true;
                break;
            };
            match spec.other_end(cur) {
                Some(next) => {
                    cur = next;
                    if live && j + 1 < seg.len() && state.is_failed(cur) {
                        out.push(Violation::TransitThroughFailedHost { segment: i, host: cur });
                    }
                }
                None => {
                    broken = true;
                    break;
                }
            }
        }
        if broken || cur != end {
            if !matches!(out.last(), Some(Violation::UnknownLink { segment, .. }) if *segment == i) {
                out.push(Violation::SegmentDiscontinuity { segment: i });
            }
            structurally_sound = false;
        }
    }

    if live && structurally_sound {
        let need = fg.demand(catalog).normalized();
        match state.reservation(fg.request_id) {
            Some(held) => {
                for (l, bw) in &need.links {
                    if held.links.get(l).copied().unwrap_or_default() < *bw {
                        out.push(Violation::InsufficientBandwidth { link: *l });
                    }
                }
                for (h, d) in &need.hosts {
                    let got = held.hosts.get(h).copied().unwrap_or_default();
                    if got.cpu < d.cpu || got.mem < d.mem {
                        out.push(Violation::InsufficientCompute { host: *h });
                    }
                }
            }
            None => {
                for (l, bw) in &need.links {
                    if state.residual_bw(*l).unwrap_or_default() < *bw {
                        out.push(Violation::InsufficientBandwidth { link: *l });
                    }
                }
                for (h, d) in &need.hosts {
                    let cpu = state.residual_cpu(*h).unwrap_or(0);
                    let mem = state.residual_mem(*h).unwrap_or(0);
                    if cpu < d.cpu || mem < d.mem {
                        out.push(Violation::InsufficientCompute { host: *h });
                    }
                }
            }
        }
    }
    out
}

/// End-to-end figures of a chain's data path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMetrics {
    /// Link latency plus VNF processing latency, ms.
    pub latency: Fixed,
    pub jitter: Fixed,
    /// Percent.
    pub loss: f64,
}

/// Serial composition: latency and jitter add, delivery probabilities
/// multiply. Uses the current (possibly degraded) link quality.
pub fn path_metrics(segments: &[Vec<LinkId>], vnfs: &[&VnfType], state: &NetworkState) -> Result<PathMetrics, NetError> {
    let mut latency: Fixed = vnfs.iter().map(|v| v.proc_latency).sum();
    let mut jitter = Fixed::ZERO;
    let mut delivered = 1.0f64;
    for &l in segments.iter().flatten() {
        let q = state.quality(l).ok_or(NetError::UnknownLink(l))?;
        latency += q.latency;
        jitter += q.jitter;
        delivered *= 1.0 - q.loss.to_f64() / 100.0;
    }
    Ok(PathMetrics { latency, jitter, loss: 100.0 * (1.0 - delivered) })
}
