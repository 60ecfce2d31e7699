//! Deterministic discrete-event simulation of QoE-aware service function
//! chaining on an SDN/NFV substrate.
//!
//! The layers, bottom up:
//!
//! * [`net`]: substrate topology and residual-resource ledger.
//! * [`service`]: VNF catalog, application profiles, chain requests and
//!   forwarding graphs.
//! * [`qoe`]: MOS estimation from QoS figures and ELA evaluation.
//! * [`controller`]: routing, embedding, monitoring and breach/failure
//!   handling.
//! * [`orchestrator`]: the VNF database and service lifecycle.
//! * [`kernel`]: the event queue and simulation loop.
//! * [`scenario`] and [`report`]: the file formats.

pub mod controller;
pub mod kernel;
pub mod net;
pub mod orchestrator;
pub mod qoe;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod service;
pub mod units;

pub use units::{Fixed, LinkId, NodeId, RequestId};
