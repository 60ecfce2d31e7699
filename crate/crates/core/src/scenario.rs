//! Scenario documents: strict parsing with located diagnostics.
//!
//! A scenario is a JSON object with the sections `meta`, `network`,
//! `catalog`, `profiles`, `ela`, `workload`, `faults` and an optional
//! `policy`. Every key is checked; unknown keys are errors. Parsing never
//! returns a partial document: either the whole thing validates or the
//! caller gets every diagnostic found.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::controller::PolicyConfig;
use crate::net::{LinkQuality, LinkSpec, NetworkState, NodeKind, NodeSpec};
use crate::qoe::Ela;
use crate::service::{AppProfile, Catalog, ChainRequest, VnfType};
use crate::units::{Fixed, LinkId, NodeId, RequestId};

/// One problem in a scenario document, located by a path such as
/// `network.links[2].loss`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ERROR {}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub name: String,
    pub seed: u64,
    pub duration_ms: u64,
    pub window_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeDoc {
    pub id: u32,
    pub kind: NodeKind,
    pub cpu: u64,
    pub mem: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkDoc {
    pub id: u32,
    pub a: u32,
    pub b: u32,
    pub bandwidth: Fixed,
    pub latency: Fixed,
    pub jitter: Fixed,
    pub loss: Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkDoc {
    pub nodes: Vec<NodeDoc>,
    pub links: Vec<LinkDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VnfDoc {
    pub name: String,
    pub cpu: u64,
    pub mem: u64,
    pub proc_latency: Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CatalogDoc {
    pub vnf_types: Vec<VnfDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfilesDoc {
    pub app_profiles: Vec<AppProfile>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ElaDoc {
    pub target_mos: f64,
    pub breach_windows: usize,
    pub compliance_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RequestDoc {
    pub id: RequestId,
    pub ingress: u32,
    pub egress: u32,
    pub vnfs: Vec<String>,
    pub profile: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ela_target: Option<f64>,
    pub arrival_ms: u64,
    pub holding_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorkloadDoc {
    pub requests: Vec<RequestDoc>,
    /// When positive, each arrival is delayed by a uniform draw from
    /// `[0, arrival_jitter_ms]` using SplitMix64 seeded with `meta.seed`.
    pub arrival_jitter_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HostFailureDoc {
    pub at_ms: u64,
    pub host: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkDegradationDoc {
    pub at_ms: u64,
    pub link: u32,
    pub latency: Fixed,
    pub jitter: Fixed,
    pub loss: Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StallInjectionDoc {
    pub at_ms: u64,
    pub flow: RequestId,
    pub stall_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FaultsDoc {
    pub host_failures: Vec<HostFailureDoc>,
    pub link_degradations: Vec<LinkDegradationDoc>,
    pub stall_injections: Vec<StallInjectionDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub meta: Meta,
    pub policy: PolicyConfig,
    pub network: NetworkDoc,
    pub catalog: CatalogDoc,
    pub profiles: ProfilesDoc,
    pub ela: ElaDoc,
    pub workload: WorkloadDoc,
    pub faults: FaultsDoc,
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn network_state(&self) -> NetworkState {
        let nodes = self
            .network
            .nodes
            .iter()
            .map(|n| NodeSpec { id: NodeId(n.id), kind: n.kind, cpu_capacity: n.cpu, mem_capacity: n.mem })
            .collect();
        let links = self
            .network
            .links
            .iter()
            .map(|l| LinkSpec {
                id: LinkId(l.id),
                endpoints: (NodeId(l.a), NodeId(l.b)),
                bandwidth: l.bandwidth,
                quality: LinkQuality { latency: l.latency, jitter: l.jitter, loss: l.loss },
            })
            .collect();
        NetworkState::build(nodes, links).expect("validated scenario builds")
    }

    pub fn vnf_catalog(&self) -> Catalog {
        Catalog::new(self.catalog.vnf_types.iter().map(|v| VnfType {
            name: v.name.clone(),
            cpu_demand: v.cpu,
            mem_demand: v.mem,
            proc_latency: v.proc_latency,
        }))
        .expect("validated scenario has a valid catalog")
    }

    pub fn ela(&self) -> Ela {
        Ela {
            target_mos: self.ela.target_mos,
            window_ms: self.meta.window_ms,
            breach_windows: self.ela.breach_windows,
            compliance_budget: self.ela.compliance_budget,
        }
    }

    /// Requests in declaration order, with the default ELA target filled in.
    /// Arrival times are as declared (before any jitter).
    pub fn requests(&self) -> Vec<ChainRequest> {
        self.workload
            .requests
            .iter()
            .map(|r| ChainRequest {
                id: r.id,
                ingress: NodeId(r.ingress),
                egress: NodeId(r.egress),
                vnfs: r.vnfs.clone(),
                profile: r.profile.clone(),
                ela_target: r.ela_target.unwrap_or(self.ela.target_mos),
                arrival_ms: r.arrival_ms,
                holding_ms: r.holding_ms,
            })
            .collect()
    }
}

// --- low-level walker -------------------------------------------------------

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic { path: path.into(), message: message.into() });
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Field access on one JSON object, tracking which keys were consumed.
struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
    known: Vec<&'static str>,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str, d: &mut Diags) -> Option<Self> {
        match v {
            Value::Object(map) => Some(Obj { map, path: path.to_string(), known: Vec::new() }),
            other => {
                d.push(if path.is_empty() { "$" } else { path }, format!("expected object, found {}", type_name(other)));
                None
            }
        }
    }

    fn at(&self, key: &str) -> String {
        join(&self.path, key)
    }

    fn get(&mut self, key: &'static str, required: bool, d: &mut Diags) -> Option<&'a Value> {
        self.known.push(key);
        match self.map.get(key) {
            Some(v) => Some(v),
            None => {
                if required {
                    d.push(self.at(key), "missing required field");
                }
                None
            }
        }
    }

    fn u64_field(&mut self, key: &'static str, required: bool, d: &mut Diags) -> Option<u64> {
        let v = self.get(key, required, d)?;
        match v.as_u64() {
            Some(n) => Some(n),
            None => {
                d.push(self.at(key), format!("expected non-negative integer, found {v}"));
                None
            }
        }
    }

    fn u32_field(&mut self, key: &'static str, d: &mut Diags) -> Option<u32> {
        let n = self.u64_field(key, true, d)?;
        match u32::try_from(n) {
            Ok(v) => Some(v),
            Err(_) => {
                d.push(self.at(key), "identifier out of range");
                None
            }
        }
    }

    fn f64_field(&mut self, key: &'static str, required: bool, d: &mut Diags) -> Option<f64> {
        let v = self.get(key, required, d)?;
        match v.as_f64() {
            Some(n) => Some(n),
            None => {
                d.push(self.at(key), format!("expected number, found {}", type_name(v)));
                None
            }
        }
    }

    fn fixed_field(&mut self, key: &'static str, d: &mut Diags) -> Option<Fixed> {
        let v = self.f64_field(key, true, d)?;
        match Fixed::from_f64(v) {
            Some(f) => Some(f),
            None => {
                d.push(self.at(key), "number out of range");
                None
            }
        }
    }

    fn str_field(&mut self, key: &'static str, d: &mut Diags) -> Option<String> {
        let v = self.get(key, true, d)?;
        match v.as_str() {
            Some(s) => Some(s.to_string()),
            None => {
                d.push(self.at(key), format!("expected string, found {}", type_name(v)));
                None
            }
        }
    }

    fn array_field(&mut self, key: &'static str, required: bool, d: &mut Diags) -> Option<&'a Vec<Value>> {
        let v = self.get(key, required, d)?;
        match v.as_array() {
            Some(a) => Some(a),
            None => {
                d.push(self.at(key), format!("expected array, found {}", type_name(v)));
                None
            }
        }
    }

    fn obj_field(&mut self, key: &'static str, required: bool, d: &mut Diags) -> Option<Obj<'a>> {
        let path = self.at(key);
        let v = self.get(key, required, d)?;
        Obj::new(v, &path, d)
    }

    /// Reports every key that was never asked for.
    fn finish(self, d: &mut Diags) {
        for key in self.map.keys() {
            if !self.known.contains(&key.as_str()) {
                d.push(self.at(key), "unknown field");
            }
        }
    }
}

fn each_object<'a, T>(
    items: Option<&'a Vec<Value>>,
    path: &str,
    d: &mut Diags,
    mut f: impl FnMut(&mut Obj<'a>, &mut Diags) -> Option<T>,
) -> Vec<(String, Option<T>)> {
    let mut out = Vec::new();
    for (i, v) in items.into_iter().flatten().enumerate() {
        let p = format!("{path}[{i}]");
        let parsed = Obj::new(v, &p, d).and_then(|mut o| {
            let r = f(&mut o, d);
            o.finish(d);
            r
        });
        out.push((p, parsed));
    }
    out
}

// --- parsing ----------------------------------------------------------------

/// Parses and fully validates a scenario document.
pub fn parse_scenario(bytes: &[u8]) -> Result<Scenario, Vec<Diagnostic>> {
    let root: Value = match serde_json::from_slice(bytes) {
        Ok(v) => v,
        Err(e) => {
            return Err(vec![Diagnostic {
                path: "$".into(),
                message: format!("malformed JSON at line {} column {}: {e}", e.line(), e.column()),
            }])
        }
    };
    let mut d = Diags(Vec::new());
    let scenario = parse_root(&root, &mut d);
    match scenario {
        Some(s) if d.0.is_empty() => Ok(s),
        _ => {
            if d.0.is_empty() {
                d.push("$", "invalid scenario");
            }
            Err(d.0)
        }
    }
}

fn parse_root(root: &Value, d: &mut Diags) -> Option<Scenario> {
    let mut top = Obj::new(root, "", d)?;

    let meta = top.obj_field("meta", true, d).and_then(|mut o| {
        let name = o.str_field("name", d);
        let seed = o.u64_field("seed", true, d);
        let duration_ms = o.u64_field("duration_ms", true, d);
        let window_ms = o.u64_field("window_ms", true, d);
        if window_ms == Some(0) {
            d.push(o.at("window_ms"), "must be positive");
        }
        if duration_ms == Some(0) {
            d.push(o.at("duration_ms"), "must be positive");
        }
        if let (Some(dur), Some(w)) = (duration_ms, window_ms) {
            if w > 0 && dur % w != 0 {
                d.push(o.at("duration_ms"), format!("{dur} is not a multiple of window_ms {w}"));
            }
        }
        o.finish(d);
        Some(Meta { name: name?, seed: seed?, duration_ms: duration_ms?, window_ms: window_ms? })
    });

    let policy = match top.obj_field("policy", false, d) {
        None => Some(PolicyConfig::default()),
        Some(mut o) => {
            let mut p = PolicyConfig::default();
            if let Some(a) = o.f64_field("predictor_alpha", false, d) {
                p.predictor_alpha = a;
                if !(a > 0.0 && a <= 1.0) {
                    d.push(o.at("predictor_alpha"), "must be in (0, 1]");
                }
            }
            if let Some(m) = o.u64_field("max_reroute_attempts", false, d) {
                p.max_reroute_attempts = u32::try_from(m).unwrap_or(u32::MAX);
                if m < 1 {
                    d.push(o.at("max_reroute_attempts"), "must be at least 1");
                }
            }
            o.finish(d);
            Some(p)
        }
    };

    let network = top.obj_field("network", true, d).and_then(|o| parse_network(o, d));
    let catalog = top.obj_field("catalog", true, d).and_then(|o| parse_catalog(o, d));
    let profiles = top.obj_field("profiles", true, d).and_then(|o| parse_profiles(o, d));
    let ela = top.obj_field("ela", true, d).and_then(|mut o| {
        let target = o.f64_field("target_mos", true, d);
        let k = o.u64_field("breach_windows", true, d);
        let budget = o.f64_field("compliance_budget", true, d);
        if target.is_some_and(|t| !(1.0..=5.0).contains(&t)) {
            d.push(o.at("target_mos"), "must be in [1, 5]");
        }
        if k == Some(0) {
            d.push(o.at("breach_windows"), "must be at least 1");
        }
        if budget.is_some_and(|b| !(0.0..=1.0).contains(&b)) {
            d.push(o.at("compliance_budget"), "must be in [0, 1]");
        }
        o.finish(d);
        Some(ElaDoc { target_mos: target?, breach_windows: k? as usize, compliance_budget: budget? })
    });
    let workload = top.obj_field("workload", true, d).and_then(|o| parse_workload(o, d));
    let faults = match top.obj_field("faults", false, d) {
        None => Some(FaultsDoc::default()),
        Some(o) => parse_faults(o, d),
    };
    top.finish(d);

    let scenario = Scenario {
        meta: meta?,
        policy: policy?,
        network: network?,
        catalog: catalog?,
        profiles: profiles?,
        ela: ela?,
        workload: workload?,
        faults: faults?,
    };
    cross_check(&scenario, d);
    Some(scenario)
}

fn parse_network(mut o: Obj<'_>, d: &mut Diags) -> Option<NetworkDoc> {
    let nodes_path = o.at("nodes");
    let links_path = o.at("links");
    let nodes_raw = o.array_field("nodes", true, d);
    let links_raw = o.array_field("links", true, d);
    o.finish(d);

    let nodes = each_object(nodes_raw, &nodes_path, d, |n, d| {
        let id = n.u32_field("id", d);
        let kind = n.str_field("kind", d).and_then(|k| match k.as_str() {
            "host" => Some(NodeKind::Host),
            "switch" => Some(NodeKind::Switch),
            "endpoint" => Some(NodeKind::Endpoint),
            other => {
                d.push(n.at("kind"), format!("unknown node kind {other:?} (expected host, switch or endpoint)"));
                None
            }
        });
        let cpu = n.u64_field("cpu", false, d);
        let mem = n.u64_field("mem", false, d);
        if let Some(k) = kind {
            if k != NodeKind::Host {
                for (key, v) in [("cpu", cpu), ("mem", mem)] {
                    if v.is_some_and(|v| v > 0) {
                        d.push(n.at(key), format!("{k} nodes have no compute capacity"));
                    }
                }
            }
        }
        Some(NodeDoc { id: id?, kind: kind?, cpu: cpu.unwrap_or(0), mem: mem.unwrap_or(0) })
    });

    let mut node_ids = BTreeSet::new();
    for (p, n) in &nodes {
        if let Some(n) = n {
            if !node_ids.insert(n.id) {
                d.push(format!("{p}.id"), format!("duplicate node id {}", n.id));
            }
        }
    }

    let links = each_object(links_raw, &links_path, d, |l, d| {
        let id = l.u32_field("id", d);
        let a = l.u32_field("a", d);
        let b = l.u32_field("b", d);
        let bandwidth = l.fixed_field("bandwidth", d);
        let latency = l.fixed_field("latency", d);
        let jitter = l.fixed_field("jitter", d);
        let loss = l.fixed_field("loss", d);
        for (key, end) in [("a", a), ("b", b)] {
            if let Some(e) = end {
                if !node_ids.contains(&e) {
                    d.push(l.at(key), format!("references undeclared node {e}"));
                }
            }
        }
        if a.is_some() && a == b {
            d.push(l.at("b"), "self-loop");
        }
        if bandwidth.is_some_and(|b| b <= Fixed::ZERO) {
            d.push(l.at("bandwidth"), "must be positive");
        }
        check_quality(l, latency, jitter, loss, d);
        Some(LinkDoc { id: id?, a: a?, b: b?, bandwidth: bandwidth?, latency: latency?, jitter: jitter?, loss: loss? })
    });
    let mut link_ids = BTreeSet::new();
    for (p, l) in &links {
        if let Some(l) = l {
            if !link_ids.insert(l.id) {
                d.push(format!("{p}.id"), format!("duplicate link id {}", l.id));
            }
        }
    }

    Some(NetworkDoc {
        nodes: nodes.into_iter().map(|(_, n)| n).collect::<Option<_>>()?,
        links: links.into_iter().map(|(_, l)| l).collect::<Option<_>>()?,
    })
}

fn check_quality(o: &Obj<'_>, latency: Option<Fixed>, jitter: Option<Fixed>, loss: Option<Fixed>, d: &mut Diags) {
    if latency.is_some_and(Fixed::is_negative) {
        d.push(o.at("latency"), "must be non-negative");
    }
    if jitter.is_some_and(Fixed::is_negative) {
        d.push(o.at("jitter"), "must be non-negative");
    }
    if loss.is_some_and(|l| l.is_negative() || l > Fixed::from_int(100)) {
        d.push(o.at("loss"), "must be a percentage in [0, 100]");
    }
}

fn parse_catalog(mut o: Obj<'_>, d: &mut Diags) -> Option<CatalogDoc> {
    let path = o.at("vnf_types");
    let raw = o.array_field("vnf_types", true, d);
    o.finish(d);
    let items = each_object(raw, &path, d, |v, d| {
        let name = v.str_field("name", d);
        let cpu = v.u64_field("cpu", true, d);
        let mem = v.u64_field("mem", true, d);
        let proc_latency = v.fixed_field("proc_latency", d);
        if proc_latency.is_some_and(Fixed::is_negative) {
            d.push(v.at("proc_latency"), "must be non-negative");
        }
        Some(VnfDoc { name: name?, cpu: cpu?, mem: mem?, proc_latency: proc_latency? })
    });
    let mut seen = BTreeSet::new();
    for (p, v) in &items {
        if let Some(v) = v {
            if !seen.insert(v.name.clone()) {
                d.push(format!("{p}.name"), format!("duplicate vnf type {:?}", v.name));
            }
        }
    }
    Some(CatalogDoc { vnf_types: items.into_iter().map(|(_, v)| v).collect::<Option<_>>()? })
}

fn parse_profiles(mut o: Obj<'_>, d: &mut Diags) -> Option<ProfilesDoc> {
    let path = o.at("app_profiles");
    let raw = o.array_field("app_profiles", true, d);
    o.finish(d);
    let items = each_object(raw, &path, d, |p, d| {
        let profile = AppProfile {
            name: p.str_field("name", d)?,
            bw_req: p.fixed_field("bw_req", d)?,
            delay_opt: p.f64_field("delay_opt", true, d)?,
            delay_max: p.f64_field("delay_max", true, d)?,
            loss_max: p.f64_field("loss_max", true, d)?,
            stall_max: p.f64_field("stall_max", true, d)?,
        };
        if let Err(field) = profile.check() {
            let msg = match field {
                "bw_req" => "must be positive",
                "delay_opt" => "must be non-negative",
                "delay_max" => "must exceed delay_opt",
                "loss_max" => "must be positive",
                _ => "must be in (0, 1]",
            };
            d.push(p.at(field), msg);
        }
        Some(profile)
    });
    let mut seen = BTreeSet::new();
    for (p, v) in &items {
        if let Some(v) = v {
            if !seen.insert(v.name.clone()) {
                d.push(format!("{p}.name"), format!("duplicate profile {:?}", v.name));
            }
        }
    }
    Some(ProfilesDoc { app_profiles: items.into_iter().map(|(_, v)| v).collect::<Option<_>>()? })
}

fn parse_workload(mut o: Obj<'_>, d: &mut Diags) -> Option<WorkloadDoc> {
    let path = o.at("requests");
    let raw = o.array_field("requests", true, d);
    let jitter = o.u64_field("arrival_jitter_ms", false, d).unwrap_or(0);
    o.finish(d);
    let items = each_object(raw, &path, d, |r, d| {
        let id = r.u64_field("id", true, d);
        let ingress = r.u32_field("ingress", d);
        let egress = r.u32_field("egress", d);
        let vnfs = r.array_field("vnfs", true, d).and_then(|arr| {
            let mut names = Vec::new();
            let mut ok = true;
            for (i, v) in arr.iter().enumerate() {
                match v.as_str() {
                    Some(s) => names.push(s.to_string()),
                    None => {
                        d.push(format!("{}[{i}]", r.at("vnfs")), "expected string");
                        ok = false;
                    }
                }
            }
            ok.then_some(names)
        });
        let profile = r.str_field("profile", d);
        let ela_target = r.f64_field("ela_target", false, d);
        let arrival_ms = r.u64_field("arrival_ms", true, d);
        let holding_ms = r.u64_field("holding_ms", true, d);
        if ingress.is_some() && ingress == egress {
            d.push(r.at("egress"), "must differ from ingress");
        }
        if ela_target.is_some_and(|t| !(1.0..=5.0).contains(&t)) {
            d.push(r.at("ela_target"), "must be in [1, 5]");
        }
        if holding_ms == Some(0) {
            d.push(r.at("holding_ms"), "must be positive");
        }
        Some(RequestDoc {
            id: id?,
            ingress: ingress?,
            egress: egress?,
            vnfs: vnfs?,
            profile: profile?,
            ela_target,
            arrival_ms: arrival_ms?,
            holding_ms: holding_ms?,
        })
    });
    let mut seen = BTreeSet::new();
    for (p, r) in &items {
        if let Some(r) = r {
            if !seen.insert(r.id) {
                d.push(format!("{p}.id"), format!("duplicate request id {}", r.id));
            }
        }
    }
    Some(WorkloadDoc { requests: items.into_iter().map(|(_, v)| v).collect::<Option<_>>()?, arrival_jitter_ms: jitter })
}

fn parse_faults(mut o: Obj<'_>, d: &mut Diags) -> Option<FaultsDoc> {
    let hf_path = o.at("host_failures");
    let ld_path = o.at("link_degradations");
    let si_path = o.at("stall_injections");
    let hf = o.array_field("host_failures", false, d);
    let ld = o.array_field("link_degradations", false, d);
    let si = o.array_field("stall_injections", false, d);
    o.finish(d);

    let host_failures = each_object(hf, &hf_path, d, |f, d| {
        Some(HostFailureDoc { at_ms: f.u64_field("at_ms", true, d)?, host: f.u32_field("host", d)? })
    });
    let link_degradations = each_object(ld, &ld_path, d, |f, d| {
        let at_ms = f.u64_field("at_ms", true, d);
        let link = f.u32_field("link", d);
        let latency = f.fixed_field("latency", d);
        let jitter = f.fixed_field("jitter", d);
        let loss = f.fixed_field("loss", d);
        check_quality(f, latency, jitter, loss, d);
        Some(LinkDegradationDoc { at_ms: at_ms?, link: link?, latency: latency?, jitter: jitter?, loss: loss? })
    });
    let stall_injections = each_object(si, &si_path, d, |f, d| {
        let at_ms = f.u64_field("at_ms", true, d);
        let flow = f.u64_field("flow", true, d);
        let stall_ratio = f.f64_field("stall_ratio", true, d);
        if stall_ratio.is_some_and(|s| !(0.0..=1.0).contains(&s)) {
            d.push(f.at("stall_ratio"), "must be in [0, 1]");
        }
        Some(StallInjectionDoc { at_ms: at_ms?, flow: flow?, stall_ratio: stall_ratio? })
    });
    Some(FaultsDoc {
        host_failures: host_failures.into_iter().map(|(_, v)| v).collect::<Option<_>>()?,
        link_degradations: link_degradations.into_iter().map(|(_, v)| v).collect::<Option<_>>()?,
        stall_injections: stall_injections.into_iter().map(|(_, v)| v).collect::<Option<_>>()?,
    })
}

/// References between sections, checked once every section parsed.
fn cross_check(s: &Scenario, d: &mut Diags) {
    let kinds: BTreeMap<u32, NodeKind> = s.network.nodes.iter().map(|n| (n.id, n.kind)).collect();
    let links: BTreeSet<u32> = s.network.links.iter().map(|l| l.id).collect();
    let vnfs: BTreeSet<&str> = s.catalog.vnf_types.iter().map(|v| v.name.as_str()).collect();
    let profiles: BTreeSet<&str> = s.profiles.app_profiles.iter().map(|p| p.name.as_str()).collect();
    let requests: BTreeSet<RequestId> = s.workload.requests.iter().map(|r| r.id).collect();

    for (i, r) in s.workload.requests.iter().enumerate() {
        let p = format!("workload.requests[{i}]");
        for (key, node) in [("ingress", r.ingress), ("egress", r.egress)] {
            match kinds.get(&node) {
                None => d.push(format!("{p}.{key}"), format!("references undeclared node {node}")),
                Some(NodeKind::Endpoint) => {}
                Some(k) => d.push(format!("{p}.{key}"), format!("node {node} is a {k}, expected an endpoint")),
            }
        }
        for (j, name) in r.vnfs.iter().enumerate() {
            if !vnfs.contains(name.as_str()) {
                d.push(format!("{p}.vnfs[{j}]"), format!("undeclared vnf type {name:?}"));
            }
        }
        if !profiles.contains(r.profile.as_str()) {
            d.push(format!("{p}.profile"), format!("undeclared profile {:?}", r.profile));
        }
    }

    let mut failed = BTreeSet::new();
    for (i, f) in s.faults.host_failures.iter().enumerate() {
        let p = format!("faults.host_failures[{i}].host");
        match kinds.get(&f.host) {
            None => d.push(p, format!("references undeclared node {}", f.host)),
            Some(NodeKind::Host) => {
                if !failed.insert(f.host) {
                    d.push(p, format!("host {} fails more than once", f.host));
                }
            }
            Some(k) => d.push(p, format!("node {} is a {k}, only hosts can fail", f.host)),
        }
    }
    for (i, f) in s.faults.link_degradations.iter().enumerate() {
        if !links.contains(&f.link) {
            d.push(format!("faults.link_degradations[{i}].link"), format!("references undeclared link {}", f.link));
        }
    }
    for (i, f) in s.faults.stall_injections.iter().enumerate() {
        if !requests.contains(&f.flow) {
            d.push(format!("faults.stall_injections[{i}].flow"), format!("references undeclared request {}", f.flow));
        }
    }
}
