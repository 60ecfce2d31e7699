//! Discrete-event simulation kernel.
//!
//! Events are ordered by `(time_ms, seq)` where `seq` is the order in which
//! they were scheduled, so a run is a pure function of the scenario. At
//! start-up the kernel schedules, in this order: every measurement window,
//! host failures, link degradations, stall injections, then arrivals. A
//! departure is scheduled when its request is admitted. Anything later than
//! `duration_ms` never happens.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::controller::{Action, Admission, Controller, Counters, RejectReason};
use crate::net::LinkQuality;
use crate::orchestrator::{DbEntry, LifecycleStatus, VnfDb};
use crate::qoe::{ela_compliance, QoeSample};
use crate::rng::SplitMix64;
use crate::scenario::{parse_scenario, Diagnostic, Scenario};
use crate::units::{LinkId, NodeId, RequestId};

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    Arrival(RequestId),
    Departure(RequestId),
    MeasureWindow(u64),
    HostFailure(NodeId),
    LinkDegradation { link: LinkId, quality: LinkQuality },
    StallInjection { flow: RequestId, stall_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub time_ms: u64,
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid scenario ({} problem(s))", .0.len())]
    ScenarioInvalid(Vec<Diagnostic>),
    #[error("cannot schedule an event at {at_ms} ms, clock is already at {now_ms} ms")]
    TimeTravel { now_ms: u64, at_ms: u64 },
    #[error("internal invariant violated at {time_ms} ms: {detail}")]
    InternalInvariantViolation { time_ms: u64, detail: String },
}

/// Pending events in firing order.
#[derive(Debug, Default)]
pub struct EventQueue {
    pending: BTreeMap<(u64, u64), EventKind>,
    next_seq: u64,
    now_ms: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now_ms(&self) -> u64 {
        self.now_ms
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn schedule(&mut self, time_ms: u64, kind: EventKind) -> Result<u64, SimError> {
        if time_ms < self.now_ms {
            return Err(SimError::TimeTravel { now_ms: self.now_ms, at_ms: time_ms });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.pending.insert((time_ms, seq), kind);
        Ok(seq)
    }

    /// Removes the earliest event and advances the clock to it.
    pub fn next(&mut self) -> Option<Event> {
        let ((time_ms, seq), kind) = self.pending.pop_first()?;
        self.now_ms = time_ms;
        Some(Event { time_ms, seq, kind })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Check every invariant after every event instead of once at the end.
    pub strict_debug: bool,
    /// Corrupts one residual right after the first admission.
    #[cfg(feature = "fault-injection")]
    #[doc(hidden)]
    pub inject_ledger_fault: bool,
}

impl RunOptions {
    /// True when this build was compiled with fault injection.
    pub const FAULT_INJECTION: bool = cfg!(feature = "fault-injection");

    /// Requests the ledger fault. Returns false if this build cannot inject it.
    #[doc(hidden)]
    pub fn request_ledger_fault(&mut self) -> bool {
        #[cfg(feature = "fault-injection")]
        {
            self.inject_ledger_fault = true;
        }
        Self::FAULT_INJECTION
    }
}

/// One row of the QoE time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QoeRow {
    pub time_ms: u64,
    pub flow_id: RequestId,
    pub mos: f64,
    pub q_bw: f64,
    pub q_delay: f64,
    pub q_loss: f64,
    pub q_stall: f64,
}

impl QoeRow {
    fn new(time_ms: u64, s: &QoeSample) -> Self {
        QoeRow {
            time_ms,
            flow_id: s.flow_id,
            mos: s.mos,
            q_bw: s.factors.q_bw,
            q_delay: s.factors.q_delay,
            q_loss: s.factors.q_loss,
            q_stall: s.factors.q_stall,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    Breach,
    HostFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActionRecord {
    pub time_ms: u64,
    pub flow_id: RequestId,
    pub trigger: Trigger,
    pub action: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub time_ms: u64,
    pub flow_id: RequestId,
    #[serde(flatten)]
    pub reason: RejectReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub flow_id: RequestId,
    /// Final lifecycle status, or `None` if the request was never admitted
    /// (rejected, or arriving after the end of the run).
    pub status: Option<LifecycleStatus>,
    pub windows: usize,
    pub mean_mos: Option<f64>,
    pub min_mos: Option<f64>,
    pub compliance: Option<f64>,
    pub compliant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub duration_ms: u64,
    pub window_ms: u64,
    pub windows: u64,
    pub requests: usize,
    pub counters: Counters,
    pub flows: Vec<FlowSummary>,
    pub rejections: Vec<Rejection>,
    pub actions: Vec<ActionRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub summary: Summary,
    pub qoe_series: Vec<QoeRow>,
    pub db_dump: Vec<DbEntry>,
}

struct Sim<'a> {
    scenario: &'a Scenario,
    controller: Controller,
    db: VnfDb,
    queue: EventQueue,
    rows: Vec<QoeRow>,
    rejections: Vec<Rejection>,
    actions: Vec<ActionRecord>,
    requests: BTreeMap<RequestId, crate::service::ChainRequest>,
    strict: bool,
    #[cfg(feature = "fault-injection")]
    pending_fault: bool,
}

fn internal(time_ms: u64, detail: impl ToString) -> SimError {
    SimError::InternalInvariantViolation { time_ms, detail: detail.to_string() }
}

/// Runs a validated scenario to completion.
pub fn run(scenario: &Scenario, options: &RunOptions) -> Result<SimReport, SimError> {
    // Fields may have been edited after parsing (CLI overrides, tests), so
    // the document is checked again in full.
    parse_scenario(scenario.to_json().as_bytes()).map_err(SimError::ScenarioInvalid)?;
    let meta = &scenario.meta;
    let controller = Controller::new(
        scenario.network_state(),
        scenario.vnf_catalog(),
        scenario.profiles.app_profiles.iter().cloned(),
        scenario.ela(),
        scenario.policy,
    );

    let mut rng = SplitMix64::new(meta.seed);
    let mut requests = BTreeMap::new();
    let mut arrivals = Vec::new();
    for mut r in scenario.requests() {
        if scenario.workload.arrival_jitter_ms > 0 {
            r.arrival_ms = r.arrival_ms.saturating_add(rng.below_inclusive(scenario.workload.arrival_jitter_ms));
        }
        arrivals.push((r.arrival_ms, r.id));
        requests.insert(r.id, r);
    }

    let mut queue = EventQueue::new();
    let windows = meta.duration_ms / meta.window_ms;
    let mut schedule = |t: u64, kind: EventKind| -> Result<(), SimError> {
        if t <= meta.duration_ms {
            queue.schedule(t, kind)?;
        }
        Ok(())
    };
    for i in 0..windows {
        schedule((i + 1) * meta.window_ms, EventKind::MeasureWindow(i))?;
    }
    for f in &scenario.faults.host_failures {
        schedule(f.at_ms, EventKind::HostFailure(NodeId(f.host)))?;
    }
    for f in &scenario.faults.link_degradations {
        let quality = LinkQuality { latency: f.latency, jitter: f.jitter, loss: f.loss };
        schedule(f.at_ms, EventKind::LinkDegradation { link: LinkId(f.link), quality })?;
    }
    for f in &scenario.faults.stall_injections {
        schedule(f.at_ms, EventKind::StallInjection { flow: f.flow, stall_ratio: f.stall_ratio })?;
    }
    for (t, id) in arrivals {
        schedule(t, EventKind::Arrival(id))?;
    }

    let mut sim = Sim {
        scenario,
        controller,
        db: VnfDb::new(),
        queue,
        rows: Vec::new(),
        rejections: Vec::new(),
        actions: Vec::new(),
        requests,
        strict: options.strict_debug,
        #[cfg(feature = "fault-injection")]
        pending_fault: options.inject_ledger_fault,
    };
    while let Some(event) = sim.queue.next() {
        sim.dispatch(&event)?;
        if sim.strict {
            sim.check(event.time_ms)?;
        }
    }
    sim.check(meta.duration_ms)?;
    Ok(sim.finish(windows))
}

impl Sim<'_> {
    fn dispatch(&mut self, event: &Event) -> Result<(), SimError> {
        let t = event.time_ms;
        match &event.kind {
            EventKind::Arrival(id) => {
                let request = self.requests[id].clone();
                match self.db.submit_request(&mut self.controller, &request, t).map_err(|e| internal(t, e))? {
                    Admission::Admitted(_) => {
                        let end = t.saturating_add(request.holding_ms);
                        if end <= self.scenario.meta.duration_ms {
                            self.queue.schedule(end, EventKind::Departure(*id))?;
                        }
                        #[cfg(feature = "fault-injection")]
                        if std::mem::take(&mut self.pending_fault) {
                            self.controller.corrupt_for_testing();
                        }
                    }
                    Admission::Rejected(reason) => {
                        self.rejections.push(Rejection { time_ms: t, flow_id: *id, reason });
                    }
                }
            }
            EventKind::Departure(id) => {
                let live = self.db.get(*id).is_some_and(|e| !e.status.is_terminal());
                if live {
                    self.db.complete_request(&mut self.controller, *id, t).map_err(|e| internal(t, e))?;
                }
            }
            EventKind::MeasureWindow(i) => {
                let (samples, alerts) = self.controller.monitor_window(*i).map_err(|e| internal(t, e))?;
                self.rows.extend(samples.iter().map(|s| QoeRow::new(t, s)));
                for alert in alerts {
                    let action = self.controller.handle_breach(alert.flow_id).map_err(|e| internal(t, e))?;
                    self.record(t, alert.flow_id, Trigger::Breach, &action)?;
                }
            }
            EventKind::HostFailure(host) => {
                let evictions = self.controller.fail_host(*host).map_err(|e| internal(t, e))?;
                let actions = self.controller.handle_host_failure(*host, &evictions).map_err(|e| internal(t, e))?;
                for (id, action) in actions {
                    self.record(t, id, Trigger::HostFailure, &action)?;
                }
            }
            EventKind::LinkDegradation { link, quality } => {
                self.controller.degrade_link(*link, *quality).map_err(|e| internal(t, e))?;
            }
            EventKind::StallInjection { flow, stall_ratio } => {
                // Stalls aimed at flows that are not live have nothing to hit.
                if self.controller.flow(*flow).is_some() {
                    self.controller.inject_stall(*flow, *stall_ratio).map_err(|e| internal(t, e))?;
                }
            }
        }
        Ok(())
    }

    fn record(&mut self, t: u64, id: RequestId, trigger: Trigger, action: &Action) -> Result<(), SimError> {
        self.db.apply_action(id, action, t).map_err(|e| internal(t, e))?;
        self.actions.push(ActionRecord { time_ms: t, flow_id: id, trigger, action: action.label() });
        Ok(())
    }

    fn check(&self, t: u64) -> Result<(), SimError> {
        self.controller.check_invariants().map_err(|e| internal(t, e))?;
        self.db.check_consistency(&self.controller).map_err(|e| internal(t, e))
    }

    fn finish(mut self, windows: u64) -> SimReport {
        self.rows.sort_by_key(|r| (r.time_ms, r.flow_id));
        let mut per_flow: BTreeMap<RequestId, Vec<QoeSample>> = BTreeMap::new();
        for r in &self.rows {
            per_flow.entry(r.flow_id).or_default().push(QoeSample {
                flow_id: r.flow_id,
                window_index: 0,
                mos: r.mos,
                factors: crate::qoe::QoeFactors { q_bw: r.q_bw, q_delay: r.q_delay, q_loss: r.q_loss, q_stall: r.q_stall },
            });
        }
        let flows = self
            .requests
            .values()
            .map(|req| {
                let history = per_flow.get(&req.id).map(Vec::as_slice).unwrap_or(&[]);
                let ela = self.controller.ela_for(req);
                let compliance = ela_compliance(history, &ela).ok();
                FlowSummary {
                    flow_id: req.id,
                    status: self.db.get(req.id).map(|e| e.status),
                    windows: history.len(),
                    mean_mos: (!history.is_empty())
                        .then(|| history.iter().map(|s| s.mos).sum::<f64>() / history.len() as f64),
                    min_mos: history.iter().map(|s| s.mos).reduce(f64::min),
                    compliance,
                    compliant: compliance.map(|c| c >= ela.compliance_budget),
                }
            })
            .collect();
        let meta = &self.scenario.meta;
        SimReport {
            summary: Summary {
                scenario: meta.name.clone(),
                seed: meta.seed,
                duration_ms: meta.duration_ms,
                window_ms: meta.window_ms,
                windows,
                requests: self.requests.len(),
                counters: *self.controller.counters(),
                flows,
                rejections: self.rejections,
                actions: self.actions,
            },
            qoe_series: self.rows,
            db_dump: self.db.dump(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queue_orders_by_time_then_seq() {
        let mut q = EventQueue::new();
        q.schedule(10, EventKind::Arrival(1)).unwrap();
        q.schedule(5, EventKind::Arrival(2)).unwrap();
        q.schedule(10, EventKind::Departure(3)).unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.next()).map(|e| (e.time_ms, e.kind)).collect();
        assert_eq!(
            order,
            vec![(5, EventKind::Arrival(2)), (10, EventKind::Arrival(1)), (10, EventKind::Departure(3))]
        );
        assert_eq!(q.now_ms(), 10);
    }

    #[test]
    fn queue_rejects_the_past() {
        let mut q = EventQueue::new();
        q.schedule(10, EventKind::MeasureWindow(0)).unwrap();
        q.next();
        assert_eq!(
            q.schedule(9, EventKind::MeasureWindow(1)),
            Err(SimError::TimeTravel { now_ms: 10, at_ms: 9 })
        );
        assert!(q.schedule(10, EventKind::MeasureWindow(1)).is_ok());
    }
}
