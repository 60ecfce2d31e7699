use serde::{Deserialize, Serialize};

use crate::qoe::{ela_breached, estimate_mos, FlowSample, QoeError, QoeSample};
use crate::service::path_metrics;
use crate::units::{Fixed, RequestId};

use super::{Controller, ControllerError, Smoothed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreachAlert {
    pub flow_id: RequestId,
    pub window_index: u64,
    pub mos: f64,
}

/// Exponentially weighted moving average: p₀ = x₀, pₜ = α·xₜ + (1−α)·pₜ₋₁.
pub fn ewma(series: &[f64], alpha: f64) -> Option<f64> {
    let (first, rest) = series.split_first()?;
    Some(rest.iter().fold(*first, |p, x| alpha * x + (1.0 - alpha) * p))
}

/// Next-window throughput forecast from per-window observations.
pub fn predict_traffic(history: &[f64], alpha: f64) -> Result<f64, QoeError> {
    ewma(history, alpha).ok_or(QoeError::EmptyHistory)
}

impl Controller {
    /// Measures every live flow for window `window_index`.
    ///
    /// Raw figures come from the flow's current paths. Throughput is the
    /// tightest per-link capacity available to the flow (residual plus what
    /// the flow itself holds), capped at the profile's requirement. Injected
    /// stalls apply to this window only. Each metric is EWMA-smoothed before
    /// estimation; the smoothing restarts whenever the flow's graph changes.
    pub fn monitor_window(&mut self, window_index: u64) -> Result<(Vec<QoeSample>, Vec<BreachAlert>), ControllerError> {
        let alpha = self.policy.predictor_alpha;
        let mut samples = Vec::with_capacity(self.flows.len());
        let mut alerts = Vec::new();
        let ids: Vec<RequestId> = self.flows.keys().copied().collect();
        for id in ids {
            let flow = &self.flows[&id];
            let profile = self.profile(&flow.request.profile)?.clone();
            let vnfs = self.catalog.resolve(&flow.request.vnfs)?;
            let metrics = path_metrics(&flow.graph.segments, &vnfs, &self.net)?;
            let held = self.net.reservation(id);
            let available = flow
                .graph
                .links()
                .map(|l| {
                    let own = held.and_then(|h| h.links.get(&l).copied()).unwrap_or_default();
                    self.net.residual_bw(l).unwrap_or_default() + own
                })
                .fold(profile.bw_req, Fixed::min);

            let flow = self.flows.get_mut(&id).expect("listed above");
            let raw = Smoothed {
                throughput: available.to_f64(),
                delay: metrics.latency.to_f64(),
                jitter: metrics.jitter.to_f64(),
                loss: metrics.loss,
                stall_ratio: flow.pending_stall.take().unwrap_or(0.0),
            };
            let smooth = match flow.smoothed {
                None => raw,
                Some(p) => {
                    let mix = |x: f64, prev: f64| alpha * x + (1.0 - alpha) * prev;
                    Smoothed {
                        throughput: mix(raw.throughput, p.throughput),
                        delay: mix(raw.delay, p.delay),
                        jitter: mix(raw.jitter, p.jitter),
                        loss: mix(raw.loss, p.loss),
                        stall_ratio: mix(raw.stall_ratio, p.stall_ratio),
                    }
                }
            };
            flow.smoothed = Some(smooth);
            flow.throughput_history.push(raw.throughput);

            let sample = FlowSample {
                flow_id: id,
                window_index,
                throughput: smooth.throughput,
                delay: smooth.delay,
                jitter: smooth.jitter,
                loss: smooth.loss,
                stall_ratio: smooth.stall_ratio,
            };
            let q = estimate_mos(&sample, &profile).map_err(|e| ControllerError::Invariant(e.to_string()))?;
            flow.history.push(q);
            samples.push(q);
            let ela = self.ela.with_target(flow.request.ela_target);
            if ela_breached(&flow.history, &ela) {
                alerts.push(BreachAlert { flow_id: id, window_index, mos: q.mos });
            }
        }
        Ok((samples, alerts))
    }
}
