//! The SDN controller: topology view, QoE monitor and QoE manager.
//!
//! The monitor side ([`Controller::monitor_window`]) turns the current state
//! of each live flow's path into a smoothed QoS sample, estimates MOS and
//! raises a [`BreachAlert`] when the flow's ELA is breached. The manager side
//! decides admission ([`Controller::embed_chain`]), reacts to breaches
//! ([`Controller::handle_breach`]) and to host failures
//! ([`Controller::handle_host_failure`]).

mod embed;
mod exact;
mod manager;
mod monitor;
mod routing;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Demand, Eviction, LinkQuality, NetError, NetworkState};
use crate::qoe::{Ela, QoeSample};
use crate::service::{validate_forwarding_graph, AppProfile, Catalog, CatalogError, ChainRequest, ForwardingGraph, VnfType};
use crate::units::{LinkId, NodeId, RequestId};

pub use embed::{plan_chain, Plan};
pub use exact::{exact_embed, ExactError, ExactLimits};
pub use monitor::{ewma, predict_traffic, BreachAlert};
pub use routing::{shortest_feasible_path, Route, RouteError};

/// Tunable controller policy.
///
/// Host selection is fixed: nearest feasible host by path latency, ties by
/// lowest CPU utilisation then lowest host id. Paths are weighted by current
/// latency. A chain is admitted iff its predicted MOS reaches its ELA target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// EWMA coefficient in (0, 1] for metric smoothing and traffic prediction.
    pub predictor_alpha: f64,
    /// Structural changes tried per breach before giving up.
    pub max_reroute_attempts: u32,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { predictor_alpha: 0.3, max_reroute_attempts: 2 }
    }
}

impl PolicyConfig {
    pub fn check(&self) -> Result<(), &'static str> {
        if !(self.predictor_alpha > 0.0 && self.predictor_alpha <= 1.0) {
            return Err("predictor_alpha");
        }
        if self.max_reroute_attempts < 1 {
            return Err("max_reroute_attempts");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", content = "predicted_mos", rename_all = "snake_case")]
pub enum RejectReason {
    NoHost,
    NoPath,
    QoeBelowTarget(f64),
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::NoHost => f.write_str("no host"),
            RejectReason::NoPath => f.write_str("no path"),
            RejectReason::QoeBelowTarget(m) => write!(f, "predicted mos {m:.6} below target"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Admission {
    Admitted(ForwardingGraph),
    Rejected(RejectReason),
}

/// What the manager did to a flow.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// New paths, same hosts.
    Rerouted(ForwardingGraph),
    /// At least one VNF moved to another host.
    Migrated(ForwardingGraph),
    MarkedDegraded,
    /// The flow could not be kept alive; all its resources are released.
    Failed,
}

impl Action {
    pub fn label(&self) -> &'static str {
        match self {
            Action::Rerouted(_) => "rerouted",
            Action::Migrated(_) => "migrated",
            Action::MarkedDegraded => "marked_degraded",
            Action::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error("unknown flow {0}")]
    UnknownFlow(RequestId),
    #[error("flow {0} already exists")]
    DuplicateFlow(RequestId),
    #[error("invalid request {id}: {reason}")]
    InvalidRequest { id: RequestId, reason: String },
    #[error("unknown profile {0:?}")]
    UnknownProfile(String),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub admitted: u64,
    pub rejected_no_host: u64,
    pub rejected_no_path: u64,
    pub rejected_qoe: u64,
    pub rerouted: u64,
    pub migrated: u64,
    pub degraded: u64,
    pub failed: u64,
    pub completed: u64,
}

impl Counters {
    pub fn rejected(&self) -> u64 {
        self.rejected_no_host + self.rejected_no_path + self.rejected_qoe
    }
}

/// Smoothed metrics of one flow (EWMA state).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Smoothed {
    pub throughput: f64,
    pub delay: f64,
    pub jitter: f64,
    pub loss: f64,
    pub stall_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub request: ChainRequest,
    pub graph: ForwardingGraph,
    pub history: Vec<QoeSample>,
    /// Raw (unsmoothed) throughput per window.
    pub throughput_history: Vec<f64>,
    pub(crate) smoothed: Option<Smoothed>,
    pub(crate) pending_stall: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    net: NetworkState,
    catalog: Catalog,
    profiles: BTreeMap<String, AppProfile>,
    ela: Ela,
    policy: PolicyConfig,
    flows: BTreeMap<RequestId, FlowRecord>,
    counters: Counters,
}

impl Controller {
    pub fn new(
        net: NetworkState,
        catalog: Catalog,
        profiles: impl IntoIterator<Item = AppProfile>,
        ela: Ela,
        policy: PolicyConfig,
    ) -> Self {
        Controller {
            net,
            catalog,
            profiles: profiles.into_iter().map(|p| (p.name.clone(), p)).collect(),
            ela,
            policy,
            flows: BTreeMap::new(),
            counters: Counters::default(),
        }
    }

    pub fn net(&self) -> &NetworkState {
        &self.net
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn policy(&self) -> &PolicyConfig {
        &self.policy
    }

    pub fn ela(&self) -> &Ela {
        &self.ela
    }

    /// The ELA of one request: the global one with the request's target.
    pub fn ela_for(&self, request: &ChainRequest) -> Ela {
        self.ela.with_target(request.ela_target)
    }

    pub fn counters(&self) -> &Counters {
        &self.counters
    }

    pub fn flows(&self) -> &BTreeMap<RequestId, FlowRecord> {
        &self.flows
    }

    pub fn flow(&self, id: RequestId) -> Option<&FlowRecord> {
        self.flows.get(&id)
    }

    pub fn profile(&self, name: &str) -> Result<&AppProfile, ControllerError> {
        self.profiles.get(name).ok_or_else(|| ControllerError::UnknownProfile(name.to_string()))
    }

    fn resolve(&self, request: &ChainRequest) -> Result<(Vec<&VnfType>, &AppProfile), ControllerError> {
        Ok((self.catalog.resolve(&request.vnfs)?, self.profile(&request.profile)?))
    }

    fn check_request(&self, request: &ChainRequest) -> Result<(), ControllerError> {
        let bad = |reason: &str| ControllerError::InvalidRequest { id: request.id, reason: reason.to_string() };
        if self.net.node(request.ingress).is_none() || self.net.node(request.egress).is_none() {
            return Err(bad("unknown ingress or egress"));
        }
        if request.ingress == request.egress {
            return Err(bad("ingress equals egress"));
        }
        if !(1.0..=5.0).contains(&request.ela_target) {
            return Err(bad("ela_target outside [1, 5]"));
        }
        if request.holding_ms == 0 {
            return Err(bad("holding time must be positive"));
        }
        self.resolve(request).map(|_| ())
    }

    /// Greedy embedding plus admission control. On admission the graph's
    /// resources are reserved and the flow starts being monitored; on
    /// rejection nothing changes apart from the counters.
    pub fn embed_chain(&mut self, request: &ChainRequest) -> Result<Admission, ControllerError> {
        if self.flows.contains_key(&request.id) || self.net.reservation(request.id).is_some() {
            return Err(ControllerError::DuplicateFlow(request.id));
        }
        self.check_request(request)?;
        let (vnfs, profile) = self.resolve(request)?;
        match plan_chain(&self.net, request, &vnfs, profile, &BTreeSet::new()) {
            Ok(plan) => {
                let demand = plan.graph.demand(&self.catalog);
                self.net.reserve(request.id, &demand)?;
                self.counters.admitted += 1;
                self.flows.insert(
                    request.id,
                    FlowRecord {
                        request: request.clone(),
                        graph: plan.graph.clone(),
                        history: Vec::new(),
                        throughput_history: Vec::new(),
                        smoothed: None,
                        pending_stall: None,
                    },
                );
                Ok(Admission::Admitted(plan.graph))
            }
            Err(reason) => {
                match reason {
                    RejectReason::NoHost => self.counters.rejected_no_host += 1,
                    RejectReason::NoPath => self.counters.rejected_no_path += 1,
                    RejectReason::QoeBelowTarget(_) => self.counters.rejected_qoe += 1,
                }
                Ok(Admission::Rejected(reason))
            }
        }
    }

    /// Greedy plan for `request` on the current state without committing it.
    pub fn plan(&self, request: &ChainRequest) -> Result<Result<Plan, RejectReason>, ControllerError> {
        self.check_request(request)?;
        let (vnfs, profile) = self.resolve(request)?;
        Ok(plan_chain(&self.net, request, &vnfs, profile, &BTreeSet::new()))
    }

    /// Exhaustive optimum for `request` on the current state.
    pub fn exact(&self, request: &ChainRequest, limits: &ExactLimits) -> Result<Result<Plan, ExactError>, ControllerError> {
        self.check_request(request)?;
        let (vnfs, profile) = self.resolve(request)?;
        Ok(exact_embed(&self.net, request, &vnfs, profile, limits))
    }

    /// Ends a flow (holding time expired) and returns what it held.
    pub fn release_flow(&mut self, id: RequestId) -> Result<Demand, ControllerError> {
        self.flows.remove(&id).ok_or(ControllerError::UnknownFlow(id))?;
        self.counters.completed += 1;
        Ok(self.net.release_owner(id))
    }

    pub fn degrade_link(&mut self, link: LinkId, quality: LinkQuality) -> Result<(), ControllerError> {
        Ok(self.net.degrade_link(link, quality)?)
    }

    pub fn fail_host(&mut self, host: NodeId) -> Result<Vec<Eviction>, ControllerError> {
        Ok(self.net.fail_host(host)?)
    }

    /// Records a stall ratio to be folded into the flow's next measurement.
    pub fn inject_stall(&mut self, id: RequestId, stall_ratio: f64) -> Result<(), ControllerError> {
        let flow = self.flows.get_mut(&id).ok_or(ControllerError::UnknownFlow(id))?;
        flow.pending_stall = Some(stall_ratio.clamp(0.0, 1.0));
        Ok(())
    }

    /// EWMA forecast of the flow's next-window throughput.
    pub fn predicted_traffic(&self, id: RequestId) -> Option<f64> {
        let flow = self.flows.get(&id)?;
        predict_traffic(&flow.throughput_history, self.policy.predictor_alpha).ok()
    }

    /// Full consistency check: conservation in the substrate, every live
    /// graph valid, and each flow holding exactly what its graph implies.
    pub fn check_invariants(&self) -> Result<(), ControllerError> {
        self.net.check_conservation().map_err(ControllerError::Invariant)?;
        for (id, flow) in &self.flows {
            let v = validate_forwarding_graph(&flow.graph, &flow.request, &self.catalog, &self.net);
            if let Some(first) = v.first() {
                return Err(ControllerError::Invariant(format!("flow {id}: {first}")));
            }
            let want = flow.graph.demand(&self.catalog).normalized();
            let held = self.net.reservation(*id).cloned().unwrap_or_default();
            if want != held {
                return Err(ControllerError::Invariant(format!("flow {id}: ledger does not match its graph")));
            }
        }
        for owner in self.net.ledger().keys() {
            if !self.flows.contains_key(owner) {
                return Err(ControllerError::Invariant(format!("orphan reservation for {owner}")));
            }
        }
        Ok(())
    }

    /// Replaces the flow's graph and reservation in one step. The commit
    /// happens on a copy of the state, so a failure leaves nothing changed.
    fn commit_graph(&mut self, id: RequestId, graph: ForwardingGraph) -> Result<(), ControllerError> {
        let mut next = self.net.clone();
        next.release_owner(id);
        next.reserve(id, &graph.demand(&self.catalog))?;
        self.net = next;
        let flow = self.flows.get_mut(&id).ok_or(ControllerError::UnknownFlow(id))?;
        flow.graph = graph;
        flow.smoothed = None;
        Ok(())
    }

    #[cfg(feature = "fault-injection")]
    #[doc(hidden)]
    pub fn corrupt_for_testing(&mut self) {
        self.net.corrupt_for_testing();
    }
}
