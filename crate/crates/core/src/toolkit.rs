//! Tool registry and silent-fault wrapper.
//!
//! Tools are named, schema-checked bindings onto environment observations.
//! Argument validation always runs first; a faulted tool then answers every
//! valid call with an empty successful result, while invalid calls keep
//! raising interface errors exactly as an unfaulted registry would.

use std::collections::BTreeSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Environment, ObservationRequest, Surface, ATTRIBUTES_PATH, LOG_DIR, METRICS_PATH};
use crate::history::ToolCall;
use crate::spec::{Property, PropertyPredicate, Scalar, Specification};

pub const GET_LOGS: &str = "get_logs";
pub const READ_METRICS: &str = "read_metrics";
pub const READ_TRACES: &str = "read_traces";
pub const EXEC: &str = "exec";
pub const PING_NODE: &str = "ping_node";
pub const SEND_MESSAGE: &str = "send_message";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamType {
    #[serde(rename = "string")]
    Str,
    #[serde(rename = "integer")]
    Int,
    /// Identifier given either as a string or an integer.
    #[serde(rename = "string|integer")]
    Id,
}

impl ParamType {
    fn accepts(self, v: &Scalar) -> bool {
        matches!(
            (self, v),
            (ParamType::Str, Scalar::Str(_))
                | (ParamType::Int, Scalar::Int(_))
                | (ParamType::Id, Scalar::Str(_) | Scalar::Int(_))
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: String,
}

/// Which observation a tool issues.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    Logs,
    Metrics,
    Traces,
    Exec,
    Ping,
    Message,
}

impl Binding {
    pub fn surface(self) -> Surface {
        match self {
            Binding::Logs => Surface::Logs,
            Binding::Metrics => Surface::Metrics,
            Binding::Traces => Surface::Traces,
            Binding::Exec => Surface::Exec,
            Binding::Ping | Binding::Message => Surface::Ping,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub parameters: Vec<ParamSpec>,
    #[serde(skip)]
    pub binding: Option<Binding>,
}

impl ToolDescriptor {
    fn new(name: &str, description: &str, binding: Binding) -> Self {
        Self {
            name: name.into(),
            description: description.into(),
            parameters: Vec::new(),
            binding: Some(binding),
        }
    }

    fn param(mut self, name: &str, ty: ParamType, required: bool, description: &str) -> Self {
        self.parameters.push(ParamSpec {
            name: name.into(),
            ty,
            required,
            description: description.into(),
        });
        self
    }

    /// Total schema check: `Ok` or a specific message.
    pub fn validate(&self, call: &ToolCall) -> Result<(), String> {
        for (name, value) in &call.args {
            match self.parameters.iter().find(|p| &p.name == name) {
                None => {
                    return Err(format!("{}() got an unexpected keyword argument '{name}'", self.name))
                }
                Some(p) if !p.ty.accepts(value) => {
                    return Err(format!(
                        "{}(): argument '{name}' must be {}",
                        self.name,
                        serde_json::to_value(p.ty).unwrap().as_str().unwrap_or("valid")
                    ))
                }
                Some(_) => {}
            }
        }
        if let Some(p) = self.parameters.iter().find(|p| p.required && !call.args.contains_key(&p.name)) {
            return Err(format!("{}() missing required argument '{}'", self.name, p.name));
        }
        Ok(())
    }

    fn request(&self, call: &ToolCall) -> ObservationRequest {
        let get = |n: &str| call.args.get(n).map(Scalar::render).unwrap_or_default();
        match self.binding.expect("registered tools carry a binding") {
            Binding::Logs => ObservationRequest::Logs { target: get("service") },
            Binding::Metrics => ObservationRequest::Metrics { target: get("service") },
            Binding::Traces => ObservationRequest::Traces { target: get("service") },
            Binding::Exec => ObservationRequest::Exec { target: get("target"), command: get("command") },
            Binding::Ping => ObservationRequest::Ping { node_id: get("id") },
            Binding::Message => ObservationRequest::Message {
                node_id: get("id"),
                body: call
                    .args
                    .get("message")
                    .map(Scalar::render)
                    .unwrap_or_else(|| "ping".into()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "output", rename_all = "snake_case")]
pub enum ToolOutcome {
    Success(String),
    InterfaceError(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    #[default]
    EmptyString,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFaultConfig {
    pub faulted_tools: BTreeSet<String>,
    #[serde(default)]
    pub mode: FaultMode,
}

impl ToolFaultConfig {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn of<I, S>(tools: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            faulted_tools: tools.into_iter().map(Into::into).collect(),
            mode: FaultMode::EmptyString,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ToolkitError {
    #[error("tool {0:?} is already registered")]
    DuplicateName(String),
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
}

#[derive(Debug, Clone, Default)]
pub struct ToolRegistry {
    tools: IndexMap<String, ToolDescriptor>,
    faults: ToolFaultConfig,
}

impl ToolRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The six tools agents get in every scenario.
    pub fn standard() -> Self {
        let mut r = Self::empty();
        let service = "name of the service or resource";
        for d in [
            ToolDescriptor::new(GET_LOGS, "Fetch recent log lines of a service.", Binding::Logs)
                .param("service", ParamType::Str, true, service),
            ToolDescriptor::new(READ_METRICS, "Read the metric series a service exports.", Binding::Metrics)
                .param("service", ParamType::Str, true, service),
            ToolDescriptor::new(READ_TRACES, "Read recent trace spans of a service.", Binding::Traces)
                .param("service", ParamType::Str, true, service),
            ToolDescriptor::new(
                EXEC,
                "Run a whitelisted shell command on a resource: `hostname`, `ps`, \
                 `cat /var/log/<name>.log`, `cat /etc/infra/attributes`, `cat /var/lib/metrics.prom`.",
                Binding::Exec,
            )
            .param("target", ParamType::Str, true, "resource to run the command on")
            .param("command", ParamType::Str, true, "the command line"),
            ToolDescriptor::new(PING_NODE, "Ping a node by its logical id using the node address table.", Binding::Ping)
                .param("id", ParamType::Id, true, "logical node id"),
            ToolDescriptor::new(
                SEND_MESSAGE,
                "Send a message to a node by logical id through service discovery; the node acknowledges with its identity.",
                Binding::Message,
            )
            .param("id", ParamType::Id, true, "logical node id")
            .param("message", ParamType::Str, false, "message body"),
        ] {
            r.register(d).expect("standard names are unique");
        }
        r
    }

    pub fn register(&mut self, descriptor: ToolDescriptor) -> Result<(), ToolkitError> {
        if self.tools.contains_key(&descriptor.name) {
            return Err(ToolkitError::DuplicateName(descriptor.name));
        }
        self.tools.insert(descriptor.name.clone(), descriptor);
        Ok(())
    }

    pub fn list_tools(&self) -> Vec<&ToolDescriptor> {
        self.tools.values().collect()
    }

    pub fn tool(&self, name: &str) -> Option<&ToolDescriptor> {
        self.tools.get(name)
    }

    pub fn surface_of(&self, name: &str) -> Option<Surface> {
        self.tools.get(name).and_then(|d| d.binding).map(Binding::surface)
    }

    /// Replaces the active fault configuration. Applying the same config twice
    /// is a no-op.
    pub fn apply_fault(&mut self, config: ToolFaultConfig) -> Result<(), ToolkitError> {
        if let Some(bad) = config.faulted_tools.iter().find(|t| !self.tools.contains_key(*t)) {
            return Err(ToolkitError::UnknownTool(bad.clone()));
        }
        self.faults = config;
        Ok(())
    }

    pub fn faults(&self) -> &ToolFaultConfig {
        &self.faults
    }

    /// Never fails past this boundary; every failure is an `InterfaceError`.
    pub fn invoke(&self, call: &ToolCall, env: &mut Environment) -> ToolOutcome {
        let Some(tool) = self.tools.get(&call.tool_name) else {
            return ToolOutcome::InterfaceError(format!("unknown tool '{}'", call.tool_name));
        };
        if let Err(msg) = tool.validate(call) {
            return ToolOutcome::InterfaceError(msg);
        }
        if self.faults.faulted_tools.contains(&call.tool_name) {
            return match self.faults.mode {
                FaultMode::EmptyString => ToolOutcome::Success(String::new()),
            };
        }
        match env.observe(&tool.request(call)) {
            Ok(out) => ToolOutcome::Success(out),
            Err(e) => ToolOutcome::InterfaceError(e.to_string()),
        }
    }

    /// JSON manifest of tool schemas shown to agents.
    pub fn manifest_json(&self) -> String {
        serde_json::to_string_pretty(&self.list_tools()).expect("manifest serializes")
    }
}

/// Independent ways of checking a property, most direct first.
pub fn diagnostic_paths(spec: &Specification, property: &Property) -> Vec<ToolCall> {
    let subject = property.subject.as_str();
    let exec = |cmd: String| ToolCall::new(EXEC).arg("target", subject).arg("command", cmd.as_str());
    let by_service = |tool: &str| ToolCall::new(tool).arg("service", subject);
    match &property.predicate {
        PropertyPredicate::Reachable => {
            let id = spec
                .resource(subject)
                .and_then(|r| r.node_id())
                .unwrap_or_else(|| subject.to_string());
            vec![
                ToolCall::new(PING_NODE).arg("id", id.as_str()),
                ToolCall::new(SEND_MESSAGE).arg("id", id.as_str()).arg("message", "whoami"),
                exec("hostname".into()),
            ]
        }
        PropertyPredicate::ServiceRunning => vec![
            exec("ps".into()),
            by_service(GET_LOGS),
            by_service(READ_METRICS),
            by_service(READ_TRACES),
        ],
        PropertyPredicate::AttributeEquals { .. } => vec![
            exec(format!("cat {ATTRIBUTES_PATH}")),
            by_service(READ_METRICS),
            by_service(READ_TRACES),
        ],
        PropertyPredicate::LogsClean { .. } => vec![
            by_service(GET_LOGS),
            exec(format!("cat {LOG_DIR}/{subject}.log")),
            by_service(READ_TRACES),
        ],
        PropertyPredicate::MetricInRange { name, .. } => {
            let mut v = vec![by_service(READ_METRICS), exec(format!("cat {METRICS_PATH}"))];
            if name == "latency_ms" {
                v.push(by_service(READ_TRACES));
            }
            v
        }
    }
}

/// Diagnostic paths whose surface the environment exposes.
pub fn available_paths(registry: &ToolRegistry, env: &Environment, property: &Property) -> Vec<ToolCall> {
    diagnostic_paths(env.spec(), property)
        .into_iter()
        .filter(|c| registry.surface_of(&c.tool_name).is_some_and(|s| env.surfaces().contains(&s)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    fn env() -> Environment {
        let spec = parse_spec(
            "resource web {\n}\nresource node1 {\n node_id = \"1\"\n ip = \"10.0.0.1\"\n}\nproperty p: service_running on web\n",
        )
        .unwrap();
        Environment::deploy(&spec, 3)
    }

    #[test]
    fn standard_registry_has_the_six_tools() {
        let registry = ToolRegistry::standard();
        let names: Vec<&str> = registry.list_tools().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(names, [GET_LOGS, READ_METRICS, READ_TRACES, EXEC, PING_NODE, SEND_MESSAGE]);
    }

    #[test]
    fn duplicate_registration_fails() {
        let mut r = ToolRegistry::standard();
        let d = r.tool(GET_LOGS).unwrap().clone();
        assert_eq!(r.register(d), Err(ToolkitError::DuplicateName(GET_LOGS.into())));
    }

    #[test]
    fn faulted_valid_call_returns_empty() {
        let mut r = ToolRegistry::standard();
        r.apply_fault(ToolFaultConfig::of([GET_LOGS])).unwrap();
        let mut e = env();
        let call = ToolCall::new(GET_LOGS).arg("service", "web");
        assert_eq!(r.invoke(&call, &mut e), ToolOutcome::Success(String::new()));
    }

    #[test]
    fn misspelled_argument_raises_with_or_without_fault() {
        let call = ToolCall::new(GET_LOGS).arg("servcie", "web");
        let healthy = ToolRegistry::standard().invoke(&call, &mut env());
        let mut faulted = ToolRegistry::standard();
        faulted.apply_fault(ToolFaultConfig::of([GET_LOGS])).unwrap();
        let out = faulted.invoke(&call, &mut env());
        assert_eq!(out, healthy);
        assert!(matches!(out, ToolOutcome::InterfaceError(m) if m.contains("servcie")));
    }

    #[test]
    fn ping_on_a_healthy_node_replies() {
        let out = ToolRegistry::standard().invoke(&ToolCall::new(PING_NODE).arg("id", 1), &mut env());
        assert!(matches!(out, ToolOutcome::Success(s) if s.contains("reply from 10.0.0.1")));
    }

    #[test]
    fn fault_config_rules() {
        let mut r = ToolRegistry::standard();
        assert_eq!(
            r.apply_fault(ToolFaultConfig::of(["get_log"])),
            Err(ToolkitError::UnknownTool("get_log".into()))
        );
        r.apply_fault(ToolFaultConfig::of([GET_LOGS, READ_METRICS])).unwrap();
        r.apply_fault(ToolFaultConfig::of([GET_LOGS, READ_METRICS])).unwrap();
        let mut e = env();
        let traces = r.invoke(&ToolCall::new(READ_TRACES).arg("service", "web"), &mut e);
        assert!(matches!(traces, ToolOutcome::Success(s) if !s.is_empty()));
        for t in [GET_LOGS, READ_METRICS] {
            assert_eq!(
                r.invoke(&ToolCall::new(t).arg("service", "web"), &mut e),
                ToolOutcome::Success(String::new())
            );
        }
        r.apply_fault(ToolFaultConfig::none()).unwrap();
        let logs = r.invoke(&ToolCall::new(GET_LOGS).arg("service", "web"), &mut e);
        assert!(matches!(logs, ToolOutcome::Success(s) if !s.is_empty()));
    }

    #[test]
    fn schema_errors_are_specific() {
        let r = ToolRegistry::standard();
        let mut e = env();
        let missing = r.invoke(&ToolCall::new(EXEC).arg("target", "web"), &mut e);
        assert_eq!(missing, ToolOutcome::InterfaceError("exec() missing required argument 'command'".into()));
        let wrong_type = r.invoke(&ToolCall::new(GET_LOGS).arg("service", 3), &mut e);
        assert_eq!(wrong_type, ToolOutcome::InterfaceError("get_logs(): argument 'service' must be string".into()));
        let unknown = r.invoke(&ToolCall::new("kubectl"), &mut e);
        assert_eq!(unknown, ToolOutcome::InterfaceError("unknown tool 'kubectl'".into()));
    }

    #[test]
    fn environment_errors_become_interface_errors() {
        let out = ToolRegistry::standard().invoke(&ToolCall::new(GET_LOGS).arg("service", "db"), &mut env());
        assert_eq!(out, ToolOutcome::InterfaceError("unknown target \"db\"".into()));
    }
}
