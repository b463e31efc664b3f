//! Deterministic simulated infrastructure.
//!
//! [`Environment::deploy`] turns a [`Specification`] into live resources with
//! templated telemetry. Drift faults mutate the live state, and every
//! observation surface (logs, metrics, traces, exec, ping) renders from that
//! state, so a single fault shows up consistently across surfaces.
//!
//! Telemetry is generated from `(seed, resource name)`; the logical clock only
//! counts observations and never feeds into rendered output, so `observe` is a
//! pure function of spec, seed, injected faults and request.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spec::{PropertyId, PropertyPredicate, Scalar, Specification};

pub const LOG_DIR: &str = "/var/log";
pub const ATTRIBUTES_PATH: &str = "/etc/infra/attributes";
pub const METRICS_PATH: &str = "/var/lib/metrics.prom";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Logs,
    Metrics,
    Traces,
    Exec,
    Ping,
}

impl Surface {
    pub const ALL: [Surface; 5] = [
        Surface::Logs,
        Surface::Metrics,
        Surface::Traces,
        Surface::Exec,
        Surface::Ping,
    ];
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Surface::Logs => "logs",
            Surface::Metrics => "metrics",
            Surface::Traces => "traces",
            Surface::Exec => "exec",
            Surface::Ping => "ping",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "surface", rename_all = "snake_case")]
pub enum ObservationRequest {
    Logs { target: String },
    Metrics { target: String },
    Traces { target: String },
    Exec { target: String, command: String },
    /// ICMP probe to the address the static node table lists for `node_id`.
    Ping { node_id: String },
    /// Application-level message routed by service discovery to `node_id`.
    Message { node_id: String, body: String },
}

impl ObservationRequest {
    pub fn surface(&self) -> Surface {
        match self {
            ObservationRequest::Logs { .. } => Surface::Logs,
            ObservationRequest::Metrics { .. } => Surface::Metrics,
            ObservationRequest::Traces { .. } => Surface::Traces,
            ObservationRequest::Exec { .. } => Surface::Exec,
            ObservationRequest::Ping { .. } | ObservationRequest::Message { .. } => Surface::Ping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub id: String,
    pub operation: String,
    pub duration_ms: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resource {
    pub name: String,
    pub attributes: IndexMap<String, Scalar>,
    pub processes: Vec<String>,
    pub log_lines: Vec<String>,
    pub metrics: IndexMap<String, Vec<f64>>,
    pub traces: Vec<Span>,
    /// Error lines reported by callers when this resource's own spans vanish.
    pub upstream_errors: Vec<String>,
    primary: String,
}

impl Resource {
    pub fn primary_service(&self) -> &str {
        &self.primary
    }

    pub fn is_up(&self) -> bool {
        self.processes.iter().any(|p| p == &self.primary)
    }

    fn node_id(&self) -> Option<String> {
        self.attributes.get("node_id").map(Scalar::render)
    }

    fn ip(&self) -> Option<String> {
        self.attributes.get("ip").map(Scalar::render)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum Phase {
    Provisioning,
    #[default]
    PostDeployment,
}


/// Kind of configuration drift, without its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    AttributeDrift,
    ServiceDown,
    StaleMapping,
    MetricAnomaly,
    LogErrorBurst,
}

impl FaultKind {
    pub const ALL: [FaultKind; 5] = [
        FaultKind::AttributeDrift,
        FaultKind::ServiceDown,
        FaultKind::StaleMapping,
        FaultKind::MetricAnomaly,
        FaultKind::LogErrorBurst,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FaultKind::AttributeDrift => "attribute_drift",
            FaultKind::ServiceDown => "service_down",
            FaultKind::StaleMapping => "stale_mapping",
            FaultKind::MetricAnomaly => "metric_anomaly",
            FaultKind::LogErrorBurst => "log_error_burst",
        }
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    AttributeDrift {
        resource: String,
        attr: String,
        /// `None` removes the attribute.
        new_value: Option<Scalar>,
    },
    ServiceDown {
        resource: String,
        service: String,
    },
    /// The node with `logical_id` moves to a fresh address and the node with
    /// `wrong_target` now answers at the old one.
    StaleMapping {
        logical_id: String,
        wrong_target: String,
    },
    MetricAnomaly {
        resource: String,
        metric: String,
        multiplier: f64,
    },
    LogErrorBurst {
        resource: String,
        pattern: String,
    },
}

impl DriftKind {
    pub fn fault_kind(&self) -> FaultKind {
        match self {
            DriftKind::AttributeDrift { .. } => FaultKind::AttributeDrift,
            DriftKind::ServiceDown { .. } => FaultKind::ServiceDown,
            DriftKind::StaleMapping { .. } => FaultKind::StaleMapping,
            DriftKind::MetricAnomaly { .. } => FaultKind::MetricAnomaly,
            DriftKind::LogErrorBurst { .. } => FaultKind::LogErrorBurst,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFault {
    #[serde(flatten)]
    pub kind: DriftKind,
    #[serde(default)]
    pub phase: Phase,
}

impl DriftFault {
    pub fn post_deployment(kind: DriftKind) -> Self {
        Self { kind, phase: Phase::PostDeployment }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub violated_properties: BTreeSet<PropertyId>,
    pub faulty_component: Option<String>,
    pub root_cause: Option<FaultKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnvError {
    #[error("unknown target {0:?}")]
    UnknownTarget(String),
    #[error("unsupported command {0:?}")]
    UnsupportedCommand(String),
    #[error("cat: {0}: No such file or directory")]
    NoSuchFile(String),
    #[error("surface {0} is not available for this environment")]
    SurfaceUnavailable(Surface),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Environment {
    spec: Specification,
    resources: IndexMap<String, Resource>,
    seed: u64,
    clock: u64,
    injected: Vec<DriftFault>,
    /// Which resource currently answers at an address.
    address_table: BTreeMap<String, String>,
    surfaces: BTreeSet<Surface>,
}

const ROUTES: [&str; 5] = ["/api/items", "/api/cart", "/api/checkout", "/healthz", "/api/users"];
const SAMPLES: usize = 6;

fn name_hash(name: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

fn timestamp(second: usize) -> String {
    format!("2026-03-01T12:{:02}:{:02}Z", second / 60 % 60, second % 60)
}

impl Environment {
    /// Deploys the specification with every surface available.
    pub fn deploy(spec: &Specification, seed: u64) -> Self {
        let mut resources = IndexMap::new();
        let mut address_table = BTreeMap::new();
        for decl in &spec.resources {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ name_hash(&decl.name));
            let primary = decl.primary_service();

            let mut metrics: IndexMap<String, Vec<f64>> = IndexMap::new();
            metrics.insert("up".into(), vec![1.0; SAMPLES]);
            let cpu = rng.random_range(15.0..40.0);
            metrics.insert(
                "cpu_percent".into(),
                (0..SAMPLES).map(|_| round1(cpu + rng.random_range(-3.0..3.0))).collect(),
            );
            let lat = rng.random_range(60.0..140.0);
            metrics.insert(
                "latency_ms".into(),
                (0..SAMPLES).map(|_| round1(lat + rng.random_range(-8.0..8.0))).collect(),
            );
            let rps = rng.random_range(30.0..70.0);
            metrics.insert(
                "requests_per_s".into(),
                (0..SAMPLES).map(|_| round1(rps + rng.random_range(-5.0..5.0))).collect(),
            );
            // Metrics a property constrains start well inside their range.
            for p in spec.properties.iter().filter(|p| p.subject == decl.name) {
                if let PropertyPredicate::MetricInRange { name, lo, hi } = &p.predicate {
                    let mid = (lo + hi) / 2.0;
                    let spread = (hi - lo) / 2.0 * 0.1;
                    let series = (0..SAMPLES)
                        .map(|_| {
                            let v = if spread > 0.0 { mid + rng.random_range(-spread..spread) } else { mid };
                            let r = round1(v);
                            if r >= *lo && r <= *hi { r } else { mid }
                        })
                        .collect();
                    metrics.insert(name.clone(), series);
                }
            }

            let latencies = metrics["latency_ms"].clone();
            let mut second = rng.random_range(0..5usize);
            let mut log_lines = Vec::new();
            for lat in latencies.iter().chain(latencies.iter().take(2)) {
                let route = ROUTES[rng.random_range(0..ROUTES.len())];
                log_lines.push(format!(
                    "{} INFO {primary} request handled route={route} status=200 latency_ms={lat}",
                    timestamp(second)
                ));
                second += rng.random_range(5..9usize);
            }
            let traces = latencies
                .iter()
                .take(5)
                .map(|d| Span {
                    id: format!("{:08x}", rng.random::<u32>()),
                    operation: format!("GET {}", ROUTES[rng.random_range(0..ROUTES.len())]),
                    duration_ms: *d,
                    error: None,
                })
                .collect();

            let res = Resource {
                name: decl.name.clone(),
                attributes: decl.attributes.clone(),
                processes: vec!["init".into(), primary.clone()],
                log_lines,
                metrics,
                traces,
                upstream_errors: Vec::new(),
                primary,
            };
            if let Some(ip) = res.ip() {
                address_table.insert(ip, res.name.clone());
            }
            resources.insert(decl.name.clone(), res);
        }
        Self {
            spec: spec.clone(),
            resources,
            seed,
            clock: 0,
            injected: Vec::new(),
            address_table,
            surfaces: Surface::ALL.into_iter().collect(),
        }
    }

    /// Restricts the observation surfaces this environment answers on.
    pub fn with_surfaces(mut self, surfaces: impl IntoIterator<Item = Surface>) -> Self {
        self.surfaces = surfaces.into_iter().collect();
        self
    }

    pub fn surfaces(&self) -> &BTreeSet<Surface> {
        &self.surfaces
    }

    pub fn spec(&self) -> &Specification {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn injected(&self) -> &[DriftFault] {
        &self.injected
    }

    pub fn resource(&self, name: &str) -> Option<&Resource> {
        self.resources.get(name)
    }

    fn live_node(&self, logical_id: &str) -> Option<&Resource> {
        self.resources.values().find(|r| r.node_id().as_deref() == Some(logical_id))
    }

    fn fresh_address(&self) -> String {
        let mut n = 10 + (self.seed % 200) as u32;
        loop {
            let ip = format!("172.17.1.{}", n % 250 + 2);
            if !self.address_table.contains_key(&ip) {
                return ip;
            }
            n += 1;
        }
    }

    fn next_second(res: &Resource) -> usize {
        res.log_lines
            .last()
            .and_then(|l| {
                let t = l.split_whitespace().next()?;
                let mm: usize = t.get(14..16)?.parse().ok()?;
                let ss: usize = t.get(17..19)?.parse().ok()?;
                Some(mm * 60 + ss + 3)
            })
            .unwrap_or(0)
    }

    pub fn inject_drift(&mut self, fault: DriftFault) -> Result<(), EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (self.injected.len() as u64 + 1).wrapping_mul(0x9e37_79b9));
        match &fault.kind {
            DriftKind::AttributeDrift { resource, attr, new_value } => {
                let res = self
                    .resources
                    .get_mut(resource)
                    .ok_or_else(|| EnvError::UnknownTarget(resource.clone()))?;
                let old = match new_value {
                    Some(v) => res.attributes.insert(attr.clone(), v.clone()),
                    None => res.attributes.shift_remove(attr),
                };
                if attr == "ip" {
                    if let Some(old) = old.map(|s| s.render()) {
                        if self.address_table.get(&old) == Some(resource) {
                            self.address_table.remove(&old);
                        }
                    }
                    if let Some(new) = new_value {
                        self.address_table.insert(new.render(), resource.clone());
                    }
                }
            }
            DriftKind::ServiceDown { resource, service } => {
                let res = self
                    .resources
                    .get_mut(resource)
                    .ok_or_else(|| EnvError::UnknownTarget(resource.clone()))?;
                if !res.processes.contains(service) {
                    return Err(EnvError::UnknownTarget(format!("{resource}/{service}")));
                }
                res.processes.retain(|p| p != service);
                let second = Self::next_second(res);
                if service == &res.primary {
                    res.log_lines.push(format!(
                        "{} FATAL {service} process exited with status 137",
                        timestamp(second)
                    ));
                    for (name, series) in res.metrics.iter_mut() {
                        if name == "up" || name == "requests_per_s" {
                            series.iter_mut().for_each(|v| *v = 0.0);
                        }
                    }
                    res.traces.clear();
                    res.upstream_errors.push(format!(
                        "span {:08x} upstream -> {service} connect status=ERROR message=\"connection refused\"",
                        rng.random::<u32>()
                    ));
                } else {
                    res.log_lines.push(format!("{} WARN process {service} exited", timestamp(second)));
                }
            }
            DriftKind::StaleMapping { logical_id, wrong_target } => {
                let moved = self
                    .live_node(logical_id)
                    .ok_or_else(|| EnvError::UnknownTarget(logical_id.clone()))?
                    .name
                    .clone();
                let answering = self
                    .live_node(wrong_target)
                    .ok_or_else(|| EnvError::UnknownTarget(wrong_target.clone()))?
                    .name
                    .clone();
                if moved == answering {
                    return Err(EnvError::UnknownTarget(wrong_target.clone()));
                }
                let old_ip = self.resources[&moved]
                    .ip()
                    .ok_or_else(|| EnvError::UnknownTarget(format!("{moved}.ip")))?;
                let new_ip = self.fresh_address();
                self.resources[&moved].attributes.insert("ip".into(), Scalar::Str(new_ip.clone()));
                self.address_table.insert(old_ip, answering);
                self.address_table.insert(new_ip, moved);
            }
            DriftKind::MetricAnomaly { resource, metric, multiplier } => {
                let res = self
                    .resources
                    .get_mut(resource)
                    .ok_or_else(|| EnvError::UnknownTarget(resource.clone()))?;
                let series = res
                    .metrics
                    .get_mut(metric)
                    .ok_or_else(|| EnvError::UnknownTarget(format!("{resource}/{metric}")))?;
                series.iter_mut().for_each(|v| *v = round1(*v * multiplier));
                if metric == "latency_ms" {
                    res.traces.iter_mut().for_each(|s| s.duration_ms = round1(s.duration_ms * multiplier));
                }
            }
            DriftKind::LogErrorBurst { resource, pattern } => {
                let res = self
                    .resources
                    .get_mut(resource)
                    .ok_or_else(|| EnvError::UnknownTarget(resource.clone()))?;
                let mut second = Self::next_second(res);
                for _ in 0..3 {
                    res.log_lines.push(format!(
                        "{} {pattern} service={} request_id={:08x}",
                        timestamp(second),
                        res.primary,
                        rng.random::<u32>()
                    ));
                    second += rng.random_range(1..4usize);
                }
                for _ in 0..2 {
                    res.traces.push(Span {
                        id: format!("{:08x}", rng.random::<u32>()),
                        operation: format!("POST {}", ROUTES[rng.random_range(0..ROUTES.len())]),
                        duration_ms: round1(rng.random_range(200.0..900.0)),
                        error: Some(pattern.clone()),
                    });
                }
            }
        }
        self.injected.push(fault);
        Ok(())
    }

    fn lookup(&self, target: &str) -> Result<&Resource, EnvError> {
        self.resources
            .get(target)
            .or_else(|| self.resources.values().find(|r| r.primary == target))
            .ok_or_else(|| EnvError::UnknownTarget(target.to_string()))
    }

    /// Answers one observation request. Every call advances the clock.
    pub fn observe(&mut self, request: &ObservationRequest) -> Result<String, EnvError> {
        self.clock += 1;
        self.render(request)
    }

    /// Side-effect-free rendering behind [`observe`](Self::observe).
    pub fn render(&self, request: &ObservationRequest) -> Result<String, EnvError> {
        if !self.surfaces.contains(&request.surface()) {
            return Err(EnvError::SurfaceUnavailable(request.surface()));
        }
        match request {
            ObservationRequest::Logs { target } => Ok(render_logs(self.lookup(target)?)),
            ObservationRequest::Metrics { target } => Ok(render_metrics(self.lookup(target)?)),
            ObservationRequest::Traces { target } => Ok(render_traces(self.lookup(target)?)),
            ObservationRequest::Exec { target, command } => self.exec(target, command),
            ObservationRequest::Ping { node_id } => {
                let decl = self
                    .spec
                    .node_by_id(node_id)
                    .ok_or_else(|| EnvError::UnknownTarget(node_id.clone()))?;
                let ip = decl.ip().ok_or_else(|| EnvError::UnknownTarget(node_id.clone()))?;
                let answering = self
                    .address_table
                    .get(&ip)
                    .and_then(|n| self.resources.get(n))
                    .filter(|r| r.is_up());
                Ok(match answering {
                    Some(r) => {
                        let t = 0.2 + (name_hash(&r.name) % 50) as f64 / 100.0;
                        format!(
                            "PING {ip} (id={node_id}): 3 packets transmitted, 3 received, 0% packet loss\nreply from {ip}: icmp_seq=1 time={t:.2} ms\n"
                        )
                    }
                    None => format!(
                        "PING {ip} (id={node_id}): 3 packets transmitted, 0 received, 100% packet loss\n"
                    ),
                })
            }
            ObservationRequest::Message { node_id, body } => {
                if self.spec.node_by_id(node_id).is_none() {
                    return Err(EnvError::UnknownTarget(node_id.clone()));
                }
                Ok(match self.live_node(node_id).filter(|r| r.is_up()) {
                    Some(r) => format!(
                        "delivered {body:?} to node id={node_id}\nack from {} ip={}\n",
                        r.name,
                        r.ip().unwrap_or_else(|| "unknown".into())
                    ),
                    None => format!("no ack from node id={node_id}: request timed out\n"),
                })
            }
        }
    }

    fn exec(&self, target: &str, command: &str) -> Result<String, EnvError> {
        let declared = self.lookup(target)?;
        let command = command.split_whitespace().collect::<Vec<_>>().join(" ");
        let whitelisted = command == "hostname"
            || command == "ps"
            || command == "ps aux"
            || command == format!("cat {ATTRIBUTES_PATH}")
            || command == format!("cat {METRICS_PATH}")
            || (command.starts_with(&format!("cat {LOG_DIR}/")) && command.ends_with(".log"));
        if !whitelisted {
            return Err(EnvError::UnsupportedCommand(command));
        }

        // Nodes are reached over ssh at their declared address; anything else
        // is entered directly by name.
        let host = match self.spec.resource(&declared.name).and_then(|d| d.node_id().and(d.ip())) {
            Some(ip) => match self.address_table.get(&ip).and_then(|n| self.resources.get(n)) {
                Some(r) if r.is_up() => r,
                _ => return Ok(format!("ssh: connect to host {ip} port 22: Connection timed out\n")),
            },
            None => declared,
        };

        if command == "hostname" {
            return Ok(format!("{}\n", host.name));
        }
        if command.starts_with("ps") {
            let mut out = String::from("PID   COMMAND\n");
            for (i, p) in host.processes.iter().enumerate() {
                let pid = if i == 0 { 1 } else { 40 + i * 17 };
                out.push_str(&format!("{pid:<5} {p}\n"));
            }
            return Ok(out);
        }
        if command == format!("cat {ATTRIBUTES_PATH}") {
            let mut out = format!("name={}\n", host.name);
            for (k, v) in &host.attributes {
                out.push_str(&format!("{k}={}\n", v.render()));
            }
            return Ok(out);
        }
        if command == format!("cat {METRICS_PATH}") {
            return Ok(render_metrics(host));
        }
        let path = &command["cat ".len()..];
        let file = &path[LOG_DIR.len() + 1..path.len() - ".log".len()];
        if file == host.name || file == host.primary {
            Ok(render_logs(host))
        } else {
            Err(EnvError::NoSuchFile(path.to_string()))
        }
    }

    /// Evaluates one predicate directly against live state.
    pub fn holds(&self, property: &crate::spec::Property) -> bool {
        let Some(res) = self.resources.get(&property.subject) else {
            return false;
        };
        match &property.predicate {
            PropertyPredicate::Reachable => {
                let Some(ip) = self.spec.resource(&property.subject).and_then(|d| d.ip()) else {
                    return false;
                };
                self.address_table.get(&ip) == Some(&res.name) && res.is_up()
            }
            PropertyPredicate::ServiceRunning => res.is_up(),
            PropertyPredicate::AttributeEquals { name, expected } => {
                res.attributes.get(name) == Some(expected)
            }
            PropertyPredicate::LogsClean { pattern } => {
                !res.log_lines.iter().any(|l| l.contains(pattern.as_str()))
            }
            PropertyPredicate::MetricInRange { name, lo, hi } => res
                .metrics
                .get(name)
                .is_some_and(|s| s.iter().all(|v| v >= lo && v <= hi)),
        }
    }

    /// Harness-side oracle; never shown to agents.
    pub fn ground_truth(&self) -> GroundTruth {
        let violated_properties = self
            .spec
            .properties
            .iter()
            .filter(|p| !self.holds(p))
            .map(|p| p.id.clone())
            .collect();
        let first = self.injected.first();
        let faulty_component = first.map(|f| match &f.kind {
            DriftKind::AttributeDrift { resource, .. }
            | DriftKind::ServiceDown { resource, .. }
            | DriftKind::MetricAnomaly { resource, .. }
            | DriftKind::LogErrorBurst { resource, .. } => resource.clone(),
            DriftKind::StaleMapping { logical_id, .. } => self
                .spec
                .node_by_id(logical_id)
                .map(|d| d.name.clone())
                .unwrap_or_else(|| logical_id.clone()),
        });
        GroundTruth {
            violated_properties,
            faulty_component,
            root_cause: first.map(|f| f.kind.fault_kind()),
        }
    }
}

fn render_logs(res: &Resource) -> String {
    let mut out = res.log_lines.join("\n");
    out.push('\n');
    out
}

fn render_metrics(res: &Resource) -> String {
    let mut out = format!("# metrics for {} ({SAMPLES} samples, 15s interval)\n", res.name);
    for (name, series) in &res.metrics {
        let values: Vec<String> = series.iter().map(|v| v.to_string()).collect();
        out.push_str(&format!("{name} {}\n", values.join(" ")));
    }
    let labels: Vec<String> = res
        .attributes
        .iter()
        .map(|(k, v)| format!("{k}=\"{}\"", v.render()))
        .collect();
    out.push_str(&format!("info{{{}}} 1\n", labels.join(",")));
    out
}

fn render_traces(res: &Resource) -> String {
    let mut out = format!("trace window for {}: {} spans\n", res.name, res.traces.len());
    let attrs: Vec<String> = res
        .attributes
        .iter()
        .map(|(k, v)| format!("{k}=\"{}\"", v.render()))
        .collect();
    out.push_str(&format!("resource.attributes {}\n", attrs.join(" ")));
    for s in &res.traces {
        match &s.error {
            None => out.push_str(&format!(
                "span {} {} {} duration_ms={} status=OK\n",
                s.id, res.primary, s.operation, s.duration_ms
            )),
            Some(msg) => out.push_str(&format!(
                "span {} {} {} duration_ms={} status=ERROR message={msg:?}\n",
                s.id, res.primary, s.operation, s.duration_ms
            )),
        }
    }
    for line in &res.upstream_errors {
        out.push_str(line);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    const PAIR: &str = r#"
resource node0 {
  node_id = "0"
  ip = "172.17.0.5"
}
resource node1 {
  node_id = "1"
  ip = "172.17.0.6"
}
resource web {
  security_group = "sg-web"
}
property n0: reachable on node0
property n1: reachable on node1
property n1-ip: attribute ip == "172.17.0.6" on node1
property sg: attribute security_group == "sg-web" on web
property web-up: service_running on web
property web-logs: logs_clean "ERROR" on web
property web-lat: metric latency_ms in [0, 250] on web
"#;

    fn env() -> Environment {
        Environment::deploy(&parse_spec(PAIR).unwrap(), 7)
    }

    fn violated(env: &Environment) -> Vec<String> {
        env.ground_truth().violated_properties.iter().map(|p| p.to_string()).collect()
    }

    #[test]
    fn fresh_deployment_is_healthy() {
        let e = env();
        assert!(violated(&e).is_empty());
        assert_eq!(e.resource("web").unwrap().attributes["security_group"], Scalar::from("sg-web"));
        assert_eq!(e.ground_truth().faulty_component, None);
    }

    #[test]
    fn deployment_is_deterministic() {
        let mut a = env();
        let mut b = env();
        for req in [
            ObservationRequest::Logs { target: "web".into() },
            ObservationRequest::Metrics { target: "web".into() },
            ObservationRequest::Traces { target: "node1".into() },
            ObservationRequest::Ping { node_id: "1".into() },
        ] {
            assert_eq!(a.observe(&req), b.observe(&req));
        }
        let other = Environment::deploy(&parse_spec(PAIR).unwrap(), 8);
        assert_ne!(
            a.render(&ObservationRequest::Logs { target: "web".into() }),
            other.render(&ObservationRequest::Logs { target: "web".into() })
        );
    }

    #[test]
    fn clock_advances_per_observation() {
        let mut e = env();
        let req = ObservationRequest::Exec { target: "web".into(), command: "hostname".into() };
        e.observe(&req).unwrap();
        let _ = e.observe(&ObservationRequest::Logs { target: "nope".into() });
        assert_eq!(e.clock(), 2);
    }

    #[test]
    fn stale_mapping_fools_ping_but_not_identity_checks() {
        let mut e = env();
        e.inject_drift(DriftFault::post_deployment(DriftKind::StaleMapping {
            logical_id: "1".into(),
            wrong_target: "0".into(),
        }))
        .unwrap();
        let ping = e.observe(&ObservationRequest::Ping { node_id: "1".into() }).unwrap();
        assert!(ping.contains("3 received"), "{ping}");
        let host = e
            .observe(&ObservationRequest::Exec { target: "node1".into(), command: "hostname".into() })
            .unwrap();
        assert_eq!(host, "node0\n");
        let msg = e
            .observe(&ObservationRequest::Message { node_id: "1".into(), body: "whoami".into() })
            .unwrap();
        assert!(msg.contains("ack from node1") && !msg.contains("172.17.0.6"), "{msg}");
        assert_eq!(violated(&e), vec!["n1", "n1-ip"]);
        let gt = e.ground_truth();
        assert_eq!(gt.faulty_component.as_deref(), Some("node1"));
        assert_eq!(gt.root_cause, Some(FaultKind::StaleMapping));
    }

    #[test]
    fn removed_security_group_violates_attribute() {
        let mut e = env();
        e.inject_drift(DriftFault {
            kind: DriftKind::AttributeDrift { resource: "web".into(), attr: "security_group".into(), new_value: None },
            phase: Phase::Provisioning,
        })
        .unwrap();
        assert_eq!(violated(&e), vec!["sg"]);
        let attrs = e
            .observe(&ObservationRequest::Exec { target: "web".into(), command: format!("cat {ATTRIBUTES_PATH}") })
            .unwrap();
        assert!(!attrs.contains("security_group"));
    }

    #[test]
    fn metric_anomaly_breaks_range() {
        let mut e = env();
        e.inject_drift(DriftFault::post_deployment(DriftKind::MetricAnomaly {
            resource: "web".into(),
            metric: "latency_ms".into(),
            multiplier: 10.0,
        }))
        .unwrap();
        // Recompute the predicate from the mutated series.
        let series = &e.resource("web").unwrap().metrics["latency_ms"];
        assert!(series.iter().any(|v| *v > 250.0));
        assert_eq!(violated(&e), vec!["web-lat"]);
    }

    #[test]
    fn service_down_shows_on_every_surface() {
        let mut e = env();
        e.inject_drift(DriftFault::post_deployment(DriftKind::ServiceDown {
            resource: "web".into(),
            service: "web".into(),
        }))
        .unwrap();
        let logs = e.observe(&ObservationRequest::Logs { target: "web".into() }).unwrap();
        assert!(logs.contains("FATAL web process exited"));
        let metrics = e.observe(&ObservationRequest::Metrics { target: "web".into() }).unwrap();
        assert!(metrics.contains("\nup 0 0 0 0 0 0\n"), "{metrics}");
        let traces = e.observe(&ObservationRequest::Traces { target: "web".into() }).unwrap();
        assert!(traces.contains(": 0 spans") && traces.contains("connection refused"));
        let ps = e
            .observe(&ObservationRequest::Exec { target: "web".into(), command: "ps".into() })
            .unwrap();
        assert!(!ps.lines().skip(1).any(|l| l.ends_with(" web")));
        assert_eq!(violated(&e), vec!["web-up"]);
    }

    #[test]
    fn log_burst_lines_carry_the_pattern() {
        let mut e = env();
        e.inject_drift(DriftFault::post_deployment(DriftKind::LogErrorBurst {
            resource: "web".into(),
            pattern: "ERROR upstream timeout".into(),
        }))
        .unwrap();
        let logs = e.observe(&ObservationRequest::Logs { target: "web".into() }).unwrap();
        assert_eq!(logs.lines().filter(|l| l.contains("ERROR upstream timeout")).count(), 3);
        let via_file = e
            .observe(&ObservationRequest::Exec { target: "web".into(), command: "cat /var/log/web.log".into() })
            .unwrap();
        assert_eq!(logs, via_file);
        assert_eq!(violated(&e), vec!["web-logs"]);
    }

    #[test]
    fn faults_on_distinct_resources_union() {
        let mut e = env();
        e.inject_drift(DriftFault::post_deployment(DriftKind::AttributeDrift {
            resource: "web".into(),
            attr: "security_group".into(),
            new_value: Some("sg-open".into()),
        }))
        .unwrap();
        e.inject_drift(DriftFault::post_deployment(DriftKind::ServiceDown {
            resource: "node0".into(),
            service: "node0".into(),
        }))
        .unwrap();
        assert_eq!(violated(&e), vec!["n0", "sg"]);
        // First fault names the component.
        assert_eq!(e.ground_truth().faulty_component.as_deref(), Some("web"));
    }

    #[test]
    fn unknown_targets_and_commands() {
        let mut e = env();
        assert_eq!(
            e.inject_drift(DriftFault::post_deployment(DriftKind::ServiceDown {
                resource: "db".into(),
                service: "db".into()
            })),
            Err(EnvError::UnknownTarget("db".into()))
        );
        assert_eq!(
            e.observe(&ObservationRequest::Exec { target: "web".into(), command: "rm -rf /".into() }),
            Err(EnvError::UnsupportedCommand("rm -rf /".into()))
        );
        assert!(matches!(
            e.observe(&ObservationRequest::Exec { target: "web".into(), command: "cat /var/log/db.log".into() }),
            Err(EnvError::NoSuchFile(_))
        ));
        assert_eq!(
            e.observe(&ObservationRequest::Ping { node_id: "9".into() }),
            Err(EnvError::UnknownTarget("9".into()))
        );
    }

    #[test]
    fn restricted_surfaces_refuse_requests() {
        let mut e = env().with_surfaces([Surface::Logs, Surface::Exec]);
        assert_eq!(
            e.observe(&ObservationRequest::Metrics { target: "web".into() }),
            Err(EnvError::SurfaceUnavailable(Surface::Metrics))
        );
        assert!(e.observe(&ObservationRequest::Logs { target: "web".into() }).is_ok());
    }

    #[test]
    fn healthy_logs_hold_no_error_pattern() {
        let e = env();
        let logs = e.render(&ObservationRequest::Logs { target: "web".into() }).unwrap();
        assert!(!logs.is_empty());
        assert!(logs.lines().all(|l| !l.contains("ERROR")));
    }
}
