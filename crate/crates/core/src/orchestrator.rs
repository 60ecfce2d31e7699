//! Service lifecycle and the VNF database.
//!
//! Every admitted request gets one [`DbEntry`] holding its forwarding graph,
//! its lifecycle status and an append-only log of status transitions.
//! Rejected requests are only counted (by the controller), never stored.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{Action, Admission, Controller, ControllerError};
use crate::net::Demand;
use crate::service::{ChainRequest, ForwardingGraph, GraphStatus};
use crate::units::RequestId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LifecycleStatus {
    Requested,
    Active,
    Degraded,
    Migrating,
    Failed,
    Completed,
}

impl LifecycleStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, LifecycleStatus::Failed | LifecycleStatus::Completed)
    }

    pub fn can_move_to(self, to: LifecycleStatus) -> bool {
        use LifecycleStatus::*;
        matches!(
            (self, to),
            (Requested, Active | Failed)
                | (Active, Degraded | Migrating | Completed | Failed)
                | (Degraded, Active | Migrating | Failed | Completed)
                | (Migrating, Active | Failed)
        )
    }
}

impl fmt::Display for LifecycleStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LifecycleStatus::Requested => "requested",
            LifecycleStatus::Active => "active",
            LifecycleStatus::Degraded => "degraded",
            LifecycleStatus::Migrating => "migrating",
            LifecycleStatus::Failed => "failed",
            LifecycleStatus::Completed => "completed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub time_ms: u64,
    pub from: LifecycleStatus,
    pub to: LifecycleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbEntry {
    /// Order of instantiation.
    pub seq: u64,
    pub request: ChainRequest,
    pub graph: ForwardingGraph,
    pub status: LifecycleStatus,
    pub log: Vec<Transition>,
}

impl DbEntry {
    fn transition(&mut self, to: LifecycleStatus, time_ms: u64) -> Result<(), OrchestratorError> {
        let from = self.status;
        if !from.can_move_to(to) {
            return Err(OrchestratorError::IllegalTransition { id: self.request.id, from, to });
        }
        self.log.push(Transition { time_ms, from, to });
        self.status = to;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrchestratorError {
    #[error("request {0} already submitted")]
    DuplicateRequest(RequestId),
    #[error("unknown request {0}")]
    UnknownRequest(RequestId),
    #[error("request {0} already reached a terminal state")]
    AlreadyTerminal(RequestId),
    #[error("illegal transition {from} -> {to} for request {id}")]
    IllegalTransition { id: RequestId, from: LifecycleStatus, to: LifecycleStatus },
    #[error(transparent)]
    Controller(#[from] ControllerError),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VnfDb {
    entries: BTreeMap<RequestId, DbEntry>,
    next_seq: u64,
}

impl VnfDb {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, id: RequestId) -> Option<&DbEntry> {
        self.entries.get(&id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &DbEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Runs admission for `request` and, if admitted, instantiates its entry.
    pub fn submit_request(
        &mut self,
        controller: &mut Controller,
        request: &ChainRequest,
        now_ms: u64,
    ) -> Result<Admission, OrchestratorError> {
        if self.entries.contains_key(&request.id) {
            return Err(OrchestratorError::DuplicateRequest(request.id));
        }
        let admission = controller.embed_chain(request).map_err(|e| match e {
            ControllerError::DuplicateFlow(id) => OrchestratorError::DuplicateRequest(id),
            other => other.into(),
        })?;
        if let Admission::Admitted(graph) = &admission {
            let mut entry = DbEntry {
                seq: self.next_seq,
                request: request.clone(),
                graph: graph.clone(),
                status: LifecycleStatus::Requested,
                log: Vec::new(),
            };
            entry.transition(LifecycleStatus::Active, now_ms)?;
            self.next_seq += 1;
            self.entries.insert(request.id, entry);
        }
        Ok(admission)
    }

    /// Ends a live request and releases everything it holds.
    pub fn complete_request(
        &mut self,
        controller: &mut Controller,
        id: RequestId,
        now_ms: u64,
    ) -> Result<Demand, OrchestratorError> {
        let entry = self.entries.get_mut(&id).ok_or(OrchestratorError::UnknownRequest(id))?;
        if entry.status.is_terminal() {
            return Err(OrchestratorError::AlreadyTerminal(id));
        }
        entry.transition(LifecycleStatus::Completed, now_ms)?;
        Ok(controller.release_flow(id)?)
    }

    /// Records a controller decision for `id`.
    pub fn apply_action(&mut self, id: RequestId, action: &Action, now_ms: u64) -> Result<&DbEntry, OrchestratorError> {
        let entry = self.entries.get_mut(&id).ok_or(OrchestratorError::UnknownRequest(id))?;
        match action {
            Action::Rerouted(graph) | Action::Migrated(graph) => {
                entry.transition(LifecycleStatus::Migrating, now_ms)?;
                entry.transition(LifecycleStatus::Active, now_ms)?;
                entry.graph = graph.clone();
            }
            Action::MarkedDegraded => {
                if entry.status != LifecycleStatus::Degraded {
                    entry.transition(LifecycleStatus::Degraded, now_ms)?;
                }
                entry.graph.status = GraphStatus::Degraded;
            }
            Action::Failed => {
                entry.transition(LifecycleStatus::Failed, now_ms)?;
                entry.graph.status = GraphStatus::Failed;
            }
        }
        Ok(entry)
    }

    /// Checks that the live entries account for exactly the controller's
    /// reservation ledger.
    pub fn check_consistency(&self, controller: &Controller) -> Result<(), String> {
        let mut implied: BTreeMap<RequestId, Demand> = BTreeMap::new();
        for e in self.entries.values().filter(|e| !e.status.is_terminal()) {
            let d = e.graph.demand(controller.catalog()).normalized();
            if !d.is_empty() {
                implied.insert(e.request.id, d);
            }
        }
        if &implied != controller.net().ledger() {
            let db: Vec<_> = implied.keys().collect();
            let ledger: Vec<_> = controller.net().ledger().keys().collect();
            return Err(format!("db implies reservations for {db:?}, ledger holds {ledger:?}"));
        }
        Ok(())
    }

    pub fn dump(&self) -> Vec<DbEntry> {
        self.entries.values().cloned().collect()
    }
}

/// Returns a description of every lifecycle log that is not a walk through
/// the transition automaton starting at `requested` and ending at the
/// entry's status, with non-decreasing timestamps.
pub fn audit_lifecycle(entries: &[DbEntry]) -> Vec<String> {
    let mut problems = Vec::new();
    for e in entries {
        let id = e.request.id;
        let mut state = LifecycleStatus::Requested;
        let mut last_time = 0;
        for (i, t) in e.log.iter().enumerate() {
            if t.from != state {
                problems.push(format!("request {id}: log[{i}] starts at {} but status was {state}", t.from));
            }
            if !t.from.can_move_to(t.to) {
                problems.push(format!("request {id}: log[{i}] {} -> {} is not allowed", t.from, t.to));
            }
            if t.time_ms < last_time {
                problems.push(format!("request {id}: log[{i}] goes back in time"));
            }
            last_time = t.time_ms;
            state = t.to;
        }
        if state != e.status {
            problems.push(format!("request {id}: log ends at {state} but status is {}", e.status));
        }
    }
    problems
}
