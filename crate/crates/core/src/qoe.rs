//! Per-flow QoE estimation and ELA evaluation.
//!
//! MOS is computed from four factors in `[0, 1]`, one per QoS dimension:
//!
//! ```text
//! d_eff   = delay + 2·jitter
//! q_bw    = min(1, throughput / bw_req)
//! q_delay = 1                                   if d_eff ≤ delay_opt
//!         = clamp((delay_max − d_eff) / (delay_max − delay_opt), 0, 1)
//! q_loss  = max(0, 1 − loss / loss_max)
//! q_stall = max(0, 1 − stall_ratio / stall_max)
//! mos     = 1 + 4 · q_bw · q_delay · q_loss · q_stall
//! ```
//!
//! A single zero factor pins MOS to exactly 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{NetError, NetworkState};
use crate::service::{path_metrics, AppProfile, ChainRequest, VnfType};
use crate::units::{Fixed, LinkId, RequestId};

/// Weight of jitter in the effective delay.
pub const JITTER_WEIGHT: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QoeError {
    #[error("invalid profile {profile:?}: bad {field}")]
    InvalidProfile { profile: String, field: &'static str },
    #[error("empty history")]
    EmptyHistory,
    #[error(transparent)]
    Net(#[from] NetError),
}

/// One measurement window of one flow. Throughput in Mbps, delay and jitter
/// in ms, loss in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub flow_id: RequestId,
    pub window_index: u64,
    pub throughput: f64,
    pub delay: f64,
    pub jitter: f64,
    pub loss: f64,
    pub stall_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeFactors {
    pub q_bw: f64,
    pub q_delay: f64,
    pub q_loss: f64,
    pub q_stall: f64,
}

impl QoeFactors {
    pub fn product(&self) -> f64 {
        self.q_bw * self.q_delay * self.q_loss * self.q_stall
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QoeSample {
    pub flow_id: RequestId,
    pub window_index: u64,
    pub mos: f64,
    pub factors: QoeFactors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ela {
    pub target_mos: f64,
    pub window_ms: u64,
    /// Consecutive sub-target windows that constitute a breach.
    pub breach_windows: usize,
    /// Minimum fraction of compliant windows over a flow's lifetime.
    pub compliance_budget: f64,
}

impl Ela {
    pub fn with_target(&self, target_mos: f64) -> Ela {
        Ela { target_mos, ..*self }
    }
}

fn unit_clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

pub fn estimate_mos(sample: &FlowSample, profile: &AppProfile) -> Result<QoeSample, QoeError> {
    profile
        .check()
        .map_err(|field| QoeError::InvalidProfile { profile: profile.name.clone(), field })?;

    let q_bw = unit_clamp(sample.throughput / profile.bw_req.to_f64());
    let d_eff = sample.delay + JITTER_WEIGHT * sample.jitter;
    let q_delay = if d_eff <= profile.delay_opt {
        1.0
    } else {
        unit_clamp((profile.delay_max - d_eff) / (profile.delay_max - profile.delay_opt))
    };
    let q_loss = unit_clamp(1.0 - sample.loss / profile.loss_max);
    let q_stall = unit_clamp(1.0 - sample.stall_ratio / profile.stall_max);

    let factors = QoeFactors { q_bw, q_delay, q_loss, q_stall };
    Ok(QoeSample {
        flow_id: sample.flow_id,
        window_index: sample.window_index,
        mos: 1.0 + 4.0 * factors.product(),
        factors,
    })
}

/// True iff the last `breach_windows` samples are all strictly below target.
pub fn ela_breached(history: &[QoeSample], ela: &Ela) -> bool {
    let k = ela.breach_windows;
    k > 0 && history.len() >= k && history[history.len() - k..].iter().all(|s| s.mos < ela.target_mos)
}

/// Fraction of windows at or above target.
pub fn ela_compliance(history: &[QoeSample], ela: &Ela) -> Result<f64, QoeError> {
    if history.is_empty() {
        return Err(QoeError::EmptyHistory);
    }
    let ok = history.iter().filter(|s| s.mos >= ela.target_mos).count();
    Ok(ok as f64 / history.len() as f64)
}

pub fn is_compliant(history: &[QoeSample], ela: &Ela) -> Result<bool, QoeError> {
    Ok(ela_compliance(history, ela)? >= ela.compliance_budget)
}

/// Builds the sample a chain would see on `segments` right now: measured
/// path figures, throughput limited by the tightest residual along the path
/// (capped at the profile's requirement) and no stalls.
pub fn predict_mos(
    request: &ChainRequest,
    segments: &[Vec<LinkId>],
    vnfs: &[&VnfType],
    profile: &AppProfile,
    state: &NetworkState,
) -> Result<QoeSample, QoeError> {
    let m = path_metrics(segments, vnfs, state)?;
    let bottleneck = segments
        .iter()
        .flatten()
        .map(|l| state.residual_bw(*l).ok_or(NetError::UnknownLink(*l)))
        .try_fold(profile.bw_req, |acc: Fixed, r| r.map(|r| acc.min(r)))?;
    let sample = FlowSample {
        flow_id: request.id,
        window_index: 0,
        throughput: bottleneck.to_f64(),
        delay: m.latency.to_f64(),
        jitter: m.jitter.to_f64(),
        loss: m.loss,
        stall_ratio: 0.0,
    };
    estimate_mos(&sample, profile)
}
