//! Substrate topology and residual-resource bookkeeping.
//!
//! A [`NetworkState`] pairs the immutable topology (hosts, switches, endpoints
//! and the links between them) with the mutable resource view: residual CPU
//! and memory per host, residual bandwidth per link, the set of failed hosts,
//! the current quality of every link, and a ledger of outstanding
//! reservations keyed by owner. The ledger is what lets the state answer
//! "which placements did this host failure evict" and lets every mutation be
//! checked against conservation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{Fixed, LinkId, NodeId, RequestId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Host,
    Switch,
    Endpoint,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Host => "host",
            NodeKind::Switch => "switch",
            NodeKind::Endpoint => "endpoint",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
    pub cpu_capacity: u64,
    pub mem_capacity: u64,
}

impl NodeSpec {
    pub fn host(id: u32, cpu: u64, mem: u64) -> Self {
        NodeSpec { id: NodeId(id), kind: NodeKind::Host, cpu_capacity: cpu, mem_capacity: mem }
    }

    pub fn switch(id: u32) -> Self {
        NodeSpec { id: NodeId(id), kind: NodeKind::Switch, cpu_capacity: 0, mem_capacity: 0 }
    }

    pub fn endpoint(id: u32) -> Self {
        NodeSpec { id: NodeId(id), kind: NodeKind::Endpoint, cpu_capacity: 0, mem_capacity: 0 }
    }
}

/// Per-link quality figures. Latency and jitter in ms, loss in percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkQuality {
    pub latency: Fixed,
    pub jitter: Fixed,
    pub loss: Fixed,
}

impl LinkQuality {
    pub fn new(latency_ms: f64, jitter_ms: f64, loss_pct: f64) -> Self {
        LinkQuality {
            latency: Fixed::from_f64(latency_ms).expect("finite latency"),
            jitter: Fixed::from_f64(jitter_ms).expect("finite jitter"),
            loss: Fixed::from_f64(loss_pct).expect("finite loss"),
        }
    }

    fn check(&self) -> Result<(), &'static str> {
        if self.latency.is_negative() {
            return Err("latency");
        }
        if self.jitter.is_negative() {
            return Err("jitter");
        }
        if self.loss.is_negative() || self.loss > Fixed::from_int(100) {
            return Err("loss");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpec {
    pub id: LinkId,
    pub endpoints: (NodeId, NodeId),
    pub bandwidth: Fixed,
    pub quality: LinkQuality,
}

impl LinkSpec {
    pub fn new(id: u32, a: u32, b: u32, bandwidth: f64, latency: f64, jitter: f64, loss: f64) -> Self {
        LinkSpec {
            id: LinkId(id),
            endpoints: (NodeId(a), NodeId(b)),
            bandwidth: Fixed::from_f64(bandwidth).expect("finite bandwidth"),
            quality: LinkQuality::new(latency, jitter, loss),
        }
    }

    /// The endpoint opposite `node`, if `node` is one of the link's ends.
    pub fn other_end(&self, node: NodeId) -> Option<NodeId> {
        let (a, b) = self.endpoints;
        if node == a {
            Some(b)
        } else if node == b {
            Some(a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Resource {
    Cpu,
    Mem,
    Bandwidth,
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Resource::Cpu => "cpu",
            Resource::Mem => "mem",
            Resource::Bandwidth => "bandwidth",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("duplicate {what} id {id}")]
    DuplicateId { what: &'static str, id: u32 },
    #[error("link {link} references missing node {node}")]
    DanglingEndpoint { link: LinkId, node: NodeId },
    #[error("link {0} is a self-loop")]
    SelfLoop(LinkId),
    #[error("{what} {id} has non-positive or negative capacity")]
    NegativeCapacity { what: &'static str, id: u32 },
    #[error("{kind} node {id} must not declare compute capacity")]
    CapacityOnNonHost { id: NodeId, kind: NodeKind },
    #[error("insufficient residual {resource} on {id}")]
    InsufficientResidual { resource: Resource, id: u32 },
    #[error("release of {resource} on {id} exceeds what was reserved")]
    OverRelease { resource: Resource, id: u32 },
    #[error("unknown host {0}")]
    UnknownHost(NodeId),
    #[error("node {0} is not a host")]
    NotAHost(NodeId),
    #[error("host {0} has failed")]
    HostFailed(NodeId),
    #[error("host {0} already failed")]
    AlreadyFailed(NodeId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("{field} out of range on link {link}")]
    InvalidRange { link: LinkId, field: &'static str },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostDemand {
    pub cpu: u64,
    pub mem: u64,
    /// Number of VNF instances this demand represents.
    pub instances: u32,
}

impl HostDemand {
    fn is_zero(&self) -> bool {
        self.cpu == 0 && self.mem == 0 && self.instances == 0
    }
}

/// A bundle of host and link resources requested or held by one owner.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub hosts: BTreeMap<NodeId, HostDemand>,
    pub links: BTreeMap<LinkId, Fixed>,
}

impl Demand {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one VNF instance worth of compute on `host`.
    pub fn add_instance(&mut self, host: NodeId, cpu: u64, mem: u64) {
        let d = self.hosts.entry(host).or_default();
        d.cpu += cpu;
        d.mem += mem;
        d.instances += 1;
    }

    pub fn add_link(&mut self, link: LinkId, bw: Fixed) {
        *self.links.entry(link).or_default() += bw;
    }

    pub fn add_path(&mut self, path: &[LinkId], bw: Fixed) {
        for &l in path {
            self.add_link(l, bw);
        }
    }

    pub fn merge(&mut self, other: &Demand) {
        for (h, d) in &other.hosts {
            let e = self.hosts.entry(*h).or_default();
            e.cpu += d.cpu;
            e.mem += d.mem;
            e.instances += d.instances;
        }
        for (l, bw) in &other.links {
            self.add_link(*l, *bw);
        }
    }

    /// Drops zero entries so that equal resource bundles compare equal.
    pub fn normalized(mut self) -> Self {
        self.hosts.retain(|_, d| !d.is_zero());
        self.links.retain(|_, bw| *bw != Fixed::ZERO);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.hosts.values().all(HostDemand::is_zero) && self.links.values().all(|b| *b == Fixed::ZERO)
    }
}

/// One VNF instance displaced by a host failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Eviction {
    pub owner: RequestId,
    pub host: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkState {
    nodes: BTreeMap<NodeId, NodeSpec>,
    links: BTreeMap<LinkId, LinkSpec>,
    adjacency: BTreeMap<NodeId, Vec<(LinkId, NodeId)>>,
    residual_cpu: BTreeMap<NodeId, u64>,
    residual_mem: BTreeMap<NodeId, u64>,
    residual_bw: BTreeMap<LinkId, Fixed>,
    failed_hosts: BTreeSet<NodeId>,
    quality: BTreeMap<LinkId, LinkQuality>,
    ledger: BTreeMap<RequestId, Demand>,
}

impl NetworkState {
    /// Validates the topology and produces a pristine state.
    pub fn build(nodes: Vec<NodeSpec>, links: Vec<LinkSpec>) -> Result<Self, NetError> {
        let mut node_map = BTreeMap::new();
        for n in nodes {
            if n.kind != NodeKind::Host && (n.cpu_capacity != 0 || n.mem_capacity != 0) {
                return Err(NetError::CapacityOnNonHost { id: n.id, kind: n.kind });
            }
            let id = n.id;
            if node_map.insert(id, n).is_some() {
                return Err(NetError::DuplicateId { what: "node", id: id.0 });
            }
        }

        let mut link_map = BTreeMap::new();
        let mut adjacency: BTreeMap<NodeId, Vec<(LinkId, NodeId)>> =
            node_map.keys().map(|id| (*id, Vec::new())).collect();
        for l in links {
            let (a, b) = l.endpoints;
            for end in [a, b] {
                if !node_map.contains_key(&end) {
                    return Err(NetError::DanglingEndpoint { link: l.id, node: end });
                }
            }
            if a == b {
                return Err(NetError::SelfLoop(l.id));
            }
            if l.bandwidth <= Fixed::ZERO {
                return Err(NetError::NegativeCapacity { what: "link", id: l.id.0 });
            }
            l.quality.check().map_err(|field| NetError::InvalidRange { link: l.id, field })?;
            if link_map.contains_key(&l.id) {
                return Err(NetError::DuplicateId { what: "link", id: l.id.0 });
            }
            adjacency.get_mut(&a).expect("checked").push((l.id, b));
            adjacency.get_mut(&b).expect("checked").push((l.id, a));
            link_map.insert(l.id, l);
        }
        for adj in adjacency.values_mut() {
            adj.sort();
        }

        let hosts = node_map.values().filter(|n| n.kind == NodeKind::Host);
        let residual_cpu = hosts.clone().map(|n| (n.id, n.cpu_capacity)).collect();
        let residual_mem = hosts.map(|n| (n.id, n.mem_capacity)).collect();
        let residual_bw = link_map.values().map(|l| (l.id, l.bandwidth)).collect();
        let quality = link_map.values().map(|l| (l.id, l.quality)).collect();

        Ok(NetworkState {
            nodes: node_map,
            links: link_map,
            adjacency,
            residual_cpu,
            residual_mem,
            residual_bw,
            failed_hosts: BTreeSet::new(),
            quality,
            ledger: BTreeMap::new(),
        })
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeSpec> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeSpec> {
        self.nodes.values()
    }

    pub fn link(&self, id: LinkId) -> Option<&LinkSpec> {
        self.links.get(&id)
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkSpec> {
        self.links.values()
    }

    /// Host ids in ascending order, including failed ones.
    pub fn hosts(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.residual_cpu.keys().copied()
    }

    pub fn is_host(&self, id: NodeId) -> bool {
        self.residual_cpu.contains_key(&id)
    }

    /// Incident links of `node` as (link, neighbour), sorted by link id.
    pub fn neighbors(&self, node: NodeId) -> &[(LinkId, NodeId)] {
        self.adjacency.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Current (possibly degraded) quality of a link.
    pub fn quality(&self, link: LinkId) -> Option<LinkQuality> {
        self.quality.get(&link).copied()
    }

    pub fn residual_bw(&self, link: LinkId) -> Option<Fixed> {
        self.residual_bw.get(&link).copied()
    }

    pub fn residual_cpu(&self, host: NodeId) -> Option<u64> {
        self.residual_cpu.get(&host).copied()
    }

    pub fn residual_mem(&self, host: NodeId) -> Option<u64> {
        self.residual_mem.get(&host).copied()
    }

    pub fn is_failed(&self, host: NodeId) -> bool {
        self.failed_hosts.contains(&host)
    }

    pub fn failed_hosts(&self) -> &BTreeSet<NodeId> {
        &self.failed_hosts
    }

    pub fn ledger(&self) -> &BTreeMap<RequestId, Demand> {
        &self.ledger
    }

    pub fn reservation(&self, owner: RequestId) -> Option<&Demand> {
        self.ledger.get(&owner)
    }

    /// Reserves `demand` for `owner`. Either every component applies or the
    /// state is left untouched.
    pub fn reserve(&mut self, owner: RequestId, demand: &Demand) -> Result<(), NetError> {
        for (&host, d) in &demand.hosts {
            if d.is_zero() {
                continue;
            }
            let cpu = match self.residual_cpu.get(&host) {
                Some(c) => *c,
                None if self.nodes.contains_key(&host) => return Err(NetError::NotAHost(host)),
                None => return Err(NetError::UnknownHost(host)),
            };
            if self.failed_hosts.contains(&host) {
                return Err(NetError::HostFailed(host));
            }
            if d.cpu > cpu {
                return Err(NetError::InsufficientResidual { resource: Resource::Cpu, id: host.0 });
            }
            if d.mem > self.residual_mem[&host] {
                return Err(NetError::InsufficientResidual { resource: Resource::Mem, id: host.0 });
            }
        }
        for (&link, &bw) in &demand.links {
            let residual = self.residual_bw.get(&link).ok_or(NetError::UnknownLink(link))?;
            if bw.is_negative() || bw > *residual {
                return Err(NetError::InsufficientResidual { resource: Resource::Bandwidth, id: link.0 });
            }
        }

        let demand = demand.clone().normalized();
        if demand.is_empty() {
            return Ok(());
        }
        for (host, d) in &demand.hosts {
            *self.residual_cpu.get_mut(host).expect("checked") -= d.cpu;
            *self.residual_mem.get_mut(host).expect("checked") -= d.mem;
        }
        for (link, bw) in &demand.links {
            *self.residual_bw.get_mut(link).expect("checked") -= *bw;
        }
        self.ledger.entry(owner).or_default().merge(&demand);
        Ok(())
    }

    /// Returns resources previously reserved by `owner`.
    pub fn release(&mut self, owner: RequestId, demand: &Demand) -> Result<(), NetError> {
        let demand = demand.clone().normalized();
        if demand.is_empty() {
            return Ok(());
        }
        let empty = Demand::default();
        let held = self.ledger.get(&owner).unwrap_or(&empty);
        for (host, d) in &demand.hosts {
            let h = held.hosts.get(host).copied().unwrap_or_default();
            if d.cpu > h.cpu || d.instances > h.instances {
                return Err(NetError::OverRelease { resource: Resource::Cpu, id: host.0 });
            }
            if d.mem > h.mem {
                return Err(NetError::OverRelease { resource: Resource::Mem, id: host.0 });
            }
        }
        for (link, bw) in &demand.links {
            let h = held.links.get(link).copied().unwrap_or_default();
            if *bw > h || bw.is_negative() {
                return Err(NetError::OverRelease { resource: Resource::Bandwidth, id: link.0 });
            }
        }

        let entry = self.ledger.get_mut(&owner).expect("non-empty release implies an entry");
        for (host, d) in &demand.hosts {
            let h = entry.hosts.get_mut(host).expect("checked");
            h.cpu -= d.cpu;
            h.mem -= d.mem;
            h.instances -= d.instances;
            *self.residual_cpu.get_mut(host).expect("host") += d.cpu;
            *self.residual_mem.get_mut(host).expect("host") += d.mem;
        }
        for (link, bw) in &demand.links {
            *entry.links.get_mut(link).expect("checked") -= *bw;
            *self.residual_bw.get_mut(link).expect("link") += *bw;
        }
        let normalized = std::mem::take(entry).normalized();
        if normalized.is_empty() {
            self.ledger.remove(&owner);
        } else {
            *entry = normalized;
        }
        Ok(())
    }

    /// Releases everything `owner` holds and returns what was released.
    pub fn release_owner(&mut self, owner: RequestId) -> Demand {
        let held = self.ledger.get(&owner).cloned().unwrap_or_default();
        self.release(owner, &held).expect("releasing exactly the ledger entry cannot over-release");
        held
    }

    /// Marks `host` as failed, frees all compute reserved on it and reports
    /// one eviction per displaced VNF instance (ascending owner order).
    pub fn fail_host(&mut self, host: NodeId) -> Result<Vec<Eviction>, NetError> {
        if !self.nodes.contains_key(&host) {
            return Err(NetError::UnknownHost(host));
        }
        if !self.is_host(host) {
            return Err(NetError::NotAHost(host));
        }
        if self.failed_hosts.contains(&host) {
            return Err(NetError::AlreadyFailed(host));
        }
        let owners: Vec<RequestId> = self
            .ledger
            .iter()
            .filter(|(_, d)| d.hosts.contains_key(&host))
            .map(|(o, _)| *o)
            .collect();
        let mut evicted = Vec::new();
        for owner in owners {
            let hd = self.ledger[&owner].hosts[&host];
            let mut part = Demand::new();
            part.hosts.insert(host, hd);
            self.release(owner, &part)?;
            evicted.extend((0..hd.instances).map(|_| Eviction { owner, host }));
        }
        self.failed_hosts.insert(host);
        Ok(evicted)
    }

    /// Overrides the current quality of a link. Capacity is unaffected.
    pub fn degrade_link(&mut self, link: LinkId, quality: LinkQuality) -> Result<(), NetError> {
        if !self.links.contains_key(&link) {
            return Err(NetError::UnknownLink(link));
        }
        quality.check().map_err(|field| NetError::InvalidRange { link, field })?;
        self.quality.insert(link, quality);
        Ok(())
    }

    /// Sum of all ledger entries.
    pub fn ledger_total(&self) -> Demand {
        let mut total = Demand::new();
        for d in self.ledger.values() {
            total.merge(d);
        }
        total.normalized()
    }

    /// Checks `capacity - residual == Σ ledger` for every resource, bounds on
    /// residuals, and that failed hosts carry nothing.
    pub fn check_conservation(&self) -> Result<(), String> {
        let total = self.ledger_total();
        for (host, cap) in self.nodes.values().filter(|n| n.kind == NodeKind::Host).map(|n| (n.id, n)) {
            let held = total.hosts.get(&host).copied().unwrap_or_default();
            let rc = self.residual_cpu[&host];
            let rm = self.residual_mem[&host];
            if rc > cap.cpu_capacity || cap.cpu_capacity - rc != held.cpu {
                return Err(format!("cpu on {host}: capacity {} residual {rc} ledger {}", cap.cpu_capacity, held.cpu));
            }
            if rm > cap.mem_capacity || cap.mem_capacity - rm != held.mem {
                return Err(format!("mem on {host}: capacity {} residual {rm} ledger {}", cap.mem_capacity, held.mem));
            }
            if self.failed_hosts.contains(&host) && held.instances > 0 {
                return Err(format!("failed host {host} still carries {} instances", held.instances));
            }
        }
        for (id, link) in &self.links {
            let held = total.links.get(id).copied().unwrap_or_default();
            let r = self.residual_bw[id];
            if r.is_negative() || r > link.bandwidth || link.bandwidth - r != held {
                return Err(format!("bandwidth on {id}: capacity {} residual {r} ledger {held}", link.bandwidth));
            }
        }
        Ok(())
    }

    #[cfg(feature = "fault-injection")]
    #[doc(hidden)]
    /// Shaves one unit of bandwidth off the first link without touching the
    /// ledger, breaking conservation on purpose.
    pub fn corrupt_for_testing(&mut self) {
        if let Some(bw) = self.residual_bw.values_mut().next() {
            *bw -= Fixed::from_milli(1);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> NetworkState {
        NetworkState::build(
            vec![NodeSpec::endpoint(0), NodeSpec::host(1, 8, 16), NodeSpec::host(2, 4, 8), NodeSpec::endpoint(3)],
            vec![
                LinkSpec::new(0, 0, 1, 100.0, 10.0, 1.0, 0.0),
                LinkSpec::new(1, 1, 3, 50.0, 20.0, 1.0, 0.0),
                LinkSpec::new(2, 0, 2, 100.0, 5.0, 1.0, 0.0),
                LinkSpec::new(3, 2, 3, 25.5, 30.0, 2.0, 1.0),
            ],
        )
        .unwrap()
    }

    fn bw(v: f64) -> Fixed {
        Fixed::from_f64(v).unwrap()
    }

    #[test]
    fn single_host_no_links() {
        let s = NetworkState::build(vec![NodeSpec::host(7, 12, 3)], vec![]).unwrap();
        assert_eq!(s.residual_cpu(NodeId(7)), Some(12));
        assert_eq!(s.residual_mem(NodeId(7)), Some(3));
        assert!(s.failed_hosts().is_empty());
    }

    #[test]
    fn dangling_endpoint_rejected() {
        let err = NetworkState::build(vec![NodeSpec::host(0, 1, 1)], vec![LinkSpec::new(0, 0, 99, 1.0, 0.0, 0.0, 0.0)])
            .unwrap_err();
        assert_eq!(err, NetError::DanglingEndpoint { link: LinkId(0), node: NodeId(99) });
    }

    #[test]
    fn build_rejects_bad_input() {
        let dup = NetworkState::build(vec![NodeSpec::switch(1), NodeSpec::switch(1)], vec![]);
        assert!(matches!(dup, Err(NetError::DuplicateId { what: "node", id: 1 })));
        let zero_bw =
            NetworkState::build(vec![NodeSpec::switch(0), NodeSpec::switch(1)], vec![LinkSpec::new(0, 0, 1, 0.0, 1.0, 0.0, 0.0)]);
        assert!(matches!(zero_bw, Err(NetError::NegativeCapacity { .. })));
        let self_loop = NetworkState::build(vec![NodeSpec::switch(0)], vec![LinkSpec::new(0, 0, 0, 1.0, 1.0, 0.0, 0.0)]);
        assert_eq!(self_loop.unwrap_err(), NetError::SelfLoop(LinkId(0)));
        let mut sw = NodeSpec::switch(0);
        sw.cpu_capacity = 3;
        assert!(matches!(NetworkState::build(vec![sw], vec![]), Err(NetError::CapacityOnNonHost { .. })));
    }

    #[test]
    fn pristine_residuals_match_capacities() {
        let s = diamond();
        for l in s.links() {
            assert_eq!(s.residual_bw(l.id), Some(l.bandwidth));
            assert_eq!(s.quality(l.id), Some(l.quality));
        }
        s.check_conservation().unwrap();
    }

    #[test]
    fn zero_reserve_is_noop() {
        let mut s = diamond();
        let before = s.clone();
        let mut d = Demand::new();
        d.add_link(LinkId(0), Fixed::ZERO);
        d.hosts.insert(NodeId(1), HostDemand::default());
        s.reserve(1, &d).unwrap();
        assert_eq!(s, before);
    }

    #[test]
    fn exhausting_cpu() {
        let mut s = diamond();
        let mut d = Demand::new();
        d.add_instance(NodeId(1), 8, 0);
        s.reserve(1, &d).unwrap();
        assert_eq!(s.residual_cpu(NodeId(1)), Some(0));
        let before = s.clone();
        let err = s.reserve(2, &d).unwrap_err();
        assert_eq!(err, NetError::InsufficientResidual { resource: Resource::Cpu, id: 1 });
        assert_eq!(s, before);
    }

    #[test]
    fn two_link_path_reservation() {
        let mut s = diamond();
        let mut d = Demand::new();
        d.add_path(&[LinkId(0), LinkId(1)], bw(3.0));
        s.reserve(5, &d).unwrap();
        assert_eq!(s.residual_bw(LinkId(0)), Some(bw(97.0)));
        assert_eq!(s.residual_bw(LinkId(1)), Some(bw(47.0)));
    }

    #[test]
    fn failed_reserve_is_atomic() {
        let mut s = diamond();
        let mut d = Demand::new();
        d.add_instance(NodeId(1), 1, 1);
        d.add_path(&[LinkId(2), LinkId(3)], bw(26.0));
        let before = s.clone();
        assert!(matches!(
            s.reserve(1, &d),
            Err(NetError::InsufficientResidual { resource: Resource::Bandwidth, id: 3 })
        ));
        assert_eq!(s, before);
    }

    #[test]
    fn release_inverse_and_over_release() {
        let mut s = diamond();
        let before = s.clone();
        let mut d = Demand::new();
        d.add_instance(NodeId(2), 2, 3);
        d.add_path(&[LinkId(2)], bw(1.5));
        s.reserve(9, &d).unwrap();
        s.release(9, &d).unwrap();
        assert_eq!(s, before);

        assert!(matches!(s.release(9, &d), Err(NetError::OverRelease { .. })));
    }

    #[test]
    fn reserve_twice_release_once() {
        let mut s = diamond();
        let mut d = Demand::new();
        d.add_path(&[LinkId(0)], bw(10.0));
        s.reserve(1, &d).unwrap();
        s.reserve(1, &d).unwrap();
        s.release(1, &d).unwrap();
        assert_eq!(s.residual_bw(LinkId(0)), Some(bw(90.0)));
        assert_eq!(s.reservation(1).unwrap().links[&LinkId(0)], bw(10.0));
        s.check_conservation().unwrap();
    }

    #[test]
    fn fail_host_evicts_instances() {
        let mut s = diamond();
        assert!(s.fail_host(NodeId(2)).unwrap().is_empty());

        let mut d = Demand::new();
        d.add_instance(NodeId(1), 2, 2);
        d.add_instance(NodeId(1), 3, 1);
        d.add_path(&[LinkId(0)], bw(2.0));
        s.reserve(4, &d).unwrap();
        let ev = s.fail_host(NodeId(1)).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.owner == 4 && e.host == NodeId(1)));
        assert_eq!(s.residual_cpu(NodeId(1)), Some(8));
        // bandwidth stays held until the controller reacts
        assert_eq!(s.residual_bw(LinkId(0)), Some(bw(98.0)));
        s.check_conservation().unwrap();

        assert_eq!(s.fail_host(NodeId(1)), Err(NetError::AlreadyFailed(NodeId(1))));
        assert_eq!(s.fail_host(NodeId(0)), Err(NetError::NotAHost(NodeId(0))));
        assert_eq!(s.fail_host(NodeId(42)), Err(NetError::UnknownHost(NodeId(42))));

        let mut again = Demand::new();
        again.add_instance(NodeId(1), 1, 1);
        assert_eq!(s.reserve(4, &again), Err(NetError::HostFailed(NodeId(1))));
    }

    #[test]
    fn degrade_link_overrides() {
        let mut s = diamond();
        let base = s.link(LinkId(3)).unwrap().quality;
        s.degrade_link(LinkId(3), base).unwrap();
        assert_eq!(s.quality(LinkId(3)), Some(base));

        s.degrade_link(LinkId(3), LinkQuality::new(200.0, 2.0, 1.0)).unwrap();
        assert_eq!(s.quality(LinkId(3)).unwrap().latency, bw(200.0));
        assert_eq!(s.link(LinkId(3)).unwrap().bandwidth, bw(25.5));

        assert!(matches!(
            s.degrade_link(LinkId(3), LinkQuality::new(1.0, 0.0, 150.0)),
            Err(NetError::InvalidRange { field: "loss", .. })
        ));
        assert_eq!(s.degrade_link(LinkId(77), base), Err(NetError::UnknownLink(LinkId(77))));
    }
}
