//! Deterministic reference behaviour for all three agents.
//!
//! The scripted backend falls back to [`respond`] when no script rule
//! matches. It reads only what a real model would see (the system prompt and
//! the context blocks of the conversation) and never touches ground truth.

use std::sync::OnceLock;

use regex::Regex;
use serde::Serialize;
use serde_json::{json, Value};

use super::prompts::{agent_of, extract_context, latest_context};
use super::protocol::{parse_action, AgentAction};
use super::{Actor, TaskType};
use crate::env::FaultKind;
use crate::history::ToolCall;
use crate::llm::{ChatMessage, Role};
use crate::spec::{parse_spec, Property, PropertyId, PropertyPredicate, Specification, VerdictValue};
use crate::toolkit::{diagnostic_paths, EXEC, GET_LOGS, PING_NODE, READ_METRICS, READ_TRACES, SEND_MESSAGE};

/// What one tool output says about one property.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "assessment", content = "reason", rename_all = "snake_case")]
pub enum Assessment {
    Consistent(String),
    Drift(String),
    /// Empty output: the observable signature of a silent fault.
    NoData,
    /// Output that does not bear on the property.
    Unknown(String),
}

impl Assessment {
    pub fn is_substantive(&self) -> bool {
        matches!(self, Assessment::Consistent(_) | Assessment::Drift(_))
    }
}

const IDENTITY: &str = "identity mismatch: ";

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("static regex"))
}

fn received_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"(\d+) received")
}

fn ack_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"ack from (\S+) ip=(\S+)")
}

fn label_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r#"([A-Za-z0-9_.-]+)="([^"]*)""#)
}

fn span_count_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r": (\d+) spans")
}

fn message_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r#"message="([^"]*)""#)
}

fn duration_re() -> &'static Regex {
    static R: OnceLock<Regex> = OnceLock::new();
    re(&R, r"duration_ms=([0-9.]+) status=OK")
}

fn series(output: &str, name: &str) -> Option<Vec<f64>> {
    output.lines().find_map(|l| {
        let mut parts = l.split_whitespace();
        (parts.next() == Some(name)).then(|| parts.filter_map(|v| v.parse().ok()).collect())
    })
}

fn labels(line: &str) -> Vec<(String, String)> {
    label_re()
        .captures_iter(line)
        .map(|c| (c[1].to_string(), c[2].to_string()))
        .collect()
}

fn compare_attr(found: Option<String>, name: &str, expected: &str) -> Assessment {
    match found {
        Some(v) if v == expected => Assessment::Consistent(format!("{name} is {v} as declared")),
        Some(v) => Assessment::Drift(format!("{name} is {v}, declared {expected}")),
        None => Assessment::Drift(format!("{name} is missing, declared {expected}")),
    }
}

/// Interprets one tool output against one property.
pub fn interpret(spec: &Specification, property: &Property, call: &ToolCall, output: &str) -> Assessment {
    if output.trim().is_empty() {
        return Assessment::NoData;
    }
    let subject = property.subject.as_str();
    let decl = spec.resource(subject);
    let primary = decl.map(|d| d.primary_service()).unwrap_or_else(|| subject.to_string());
    let tool = call.tool_name.as_str();
    let command = call
        .args
        .get("command")
        .map(|c| c.render().split_whitespace().collect::<Vec<_>>().join(" "))
        .unwrap_or_default();
    let ssh_down = output.starts_with("ssh: ");

    match &property.predicate {
        PropertyPredicate::Reachable => match tool {
            PING_NODE => match received_re().captures(output).and_then(|c| c[1].parse::<u32>().ok()) {
                Some(0) => Assessment::Drift("no ping reply at the declared address".into()),
                Some(_) => Assessment::Consistent("ping replies at the declared address".into()),
                None => Assessment::Unknown("unrecognised ping output".into()),
            },
            SEND_MESSAGE => {
                if let Some(c) = ack_re().captures(output) {
                    let declared_ip = decl.and_then(|d| d.ip()).unwrap_or_default();
                    if &c[1] == subject && c[2] == declared_ip {
                        Assessment::Consistent(format!("{subject} acknowledged from {declared_ip}"))
                    } else {
                        Assessment::Drift(format!(
                            "{IDENTITY}{} answered from {}, declared {subject} at {declared_ip}",
                            &c[1], &c[2]
                        ))
                    }
                } else if output.contains("no ack") {
                    Assessment::Drift("message was not acknowledged".into())
                } else {
                    Assessment::Unknown("unrecognised message output".into())
                }
            }
            EXEC if command == "hostname" => {
                if ssh_down {
                    Assessment::Drift("ssh to the declared address timed out".into())
                } else {
                    let host = output.trim();
                    if host == subject {
                        Assessment::Consistent(format!("declared address is served by {host}"))
                    } else {
                        Assessment::Drift(format!("{IDENTITY}declared address is served by {host}"))
                    }
                }
            }
            _ => Assessment::Unknown("tool does not check reachability".into()),
        },
        PropertyPredicate::ServiceRunning => match tool {
            EXEC if command.starts_with("ps") => {
                if ssh_down {
                    return Assessment::Drift("host unreachable over ssh".into());
                }
                let running = output.lines().skip(1).any(|l| l.split_whitespace().nth(1) == Some(primary.as_str()));
                if running {
                    Assessment::Consistent(format!("{primary} is in the process list"))
                } else {
                    Assessment::Drift(format!("{primary} is not in the process list"))
                }
            }
            GET_LOGS => {
                if output.contains(&format!("{primary} process exited")) {
                    Assessment::Drift(format!("logs show {primary} exited"))
                } else if output.contains(primary.as_str()) {
                    Assessment::Consistent(format!("{primary} is logging requests"))
                } else {
                    Assessment::Unknown("logs do not mention the service".into())
                }
            }
            READ_METRICS => match series(output, "up") {
                Some(v) if v.contains(&0.0) => Assessment::Drift("up metric dropped to 0".into()),
                Some(v) if !v.is_empty() => Assessment::Consistent("up metric is 1".into()),
                _ => Assessment::Unknown("no up metric".into()),
            },
            READ_TRACES => {
                let spans = span_count_re().captures(output).and_then(|c| c[1].parse::<u32>().ok());
                if spans == Some(0) || output.contains("connection refused") {
                    Assessment::Drift("no spans served and callers see connection refused".into())
                } else if spans.is_some() {
                    Assessment::Consistent("service is serving spans".into())
                } else {
                    Assessment::Unknown("unrecognised trace output".into())
                }
            }
            _ => Assessment::Unknown("tool does not check the service".into()),
        },
        PropertyPredicate::AttributeEquals { name, expected } => {
            let expected = expected.render();
            match tool {
                EXEC if command.starts_with("cat ") && command.ends_with("attributes") => {
                    if ssh_down {
                        return Assessment::Unknown("host unreachable over ssh".into());
                    }
                    let kv: Vec<(&str, &str)> = output.lines().filter_map(|l| l.split_once('=')).collect();
                    if let Some((_, host)) = kv.iter().find(|(k, _)| *k == "name") {
                        if *host != subject {
                            return Assessment::Drift(format!("{IDENTITY}attributes served by {host}"));
                        }
                    }
                    let found = kv.iter().find(|(k, _)| k == name).map(|(_, v)| v.to_string());
                    compare_attr(found, name, &expected)
                }
                READ_METRICS => match output.lines().find(|l| l.starts_with("info{")) {
                    Some(line) => {
                        let found = labels(line).into_iter().find(|(k, _)| k == name).map(|(_, v)| v);
                        compare_attr(found, name, &expected)
                    }
                    None => Assessment::Unknown("no info metric".into()),
                },
                READ_TRACES => match output.lines().find(|l| l.starts_with("resource.attributes")) {
                    Some(line) => {
                        let found = labels(line).into_iter().find(|(k, _)| k == name).map(|(_, v)| v);
                        compare_attr(found, name, &expected)
                    }
                    None => Assessment::Unknown("no resource attributes in traces".into()),
                },
                _ => Assessment::Unknown("tool does not show attributes".into()),
            }
        }
        PropertyPredicate::LogsClean { pattern } => match tool {
            _ if tool == GET_LOGS || (tool == EXEC && command.starts_with("cat ") && command.ends_with(".log")) => {
                if ssh_down {
                    return Assessment::Unknown("host unreachable over ssh".into());
                }
                let n = output.lines().filter(|l| l.contains(pattern.as_str())).count();
                if n > 0 {
                    Assessment::Drift(format!("{n} log lines match {pattern:?}"))
                } else {
                    Assessment::Consistent(format!("no log line matches {pattern:?}"))
                }
            }
            READ_TRACES => {
                let n = output
                    .lines()
                    .filter(|l| l.starts_with("span "))
                    .filter_map(|l| message_re().captures(l))
                    .filter(|c| c[1].contains(pattern.as_str()))
                    .count();
                if n > 0 {
                    Assessment::Drift(format!("{n} error spans match {pattern:?}"))
                } else if span_count_re().is_match(output) {
                    Assessment::Consistent(format!("no error span matches {pattern:?}"))
                } else {
                    Assessment::Unknown("unrecognised trace output".into())
                }
            }
            _ => Assessment::Unknown("tool does not show logs".into()),
        },
        PropertyPredicate::MetricInRange { name, lo, hi } => {
            let values = match tool {
                READ_METRICS => series(output, name),
                EXEC if command.ends_with("metrics.prom") => series(output, name),
                READ_TRACES if name == "latency_ms" => {
                    let v: Vec<f64> = duration_re()
                        .captures_iter(output)
                        .filter_map(|c| c[1].parse().ok())
                        .collect();
                    (!v.is_empty()).then_some(v)
                }
                _ => return Assessment::Unknown("tool does not show the metric".into()),
            };
            match values {
                Some(v) if !v.is_empty() => {
                    let out: Vec<String> = v.iter().filter(|x| *x < lo || *x > hi).map(f64::to_string).collect();
                    if out.is_empty() {
                        Assessment::Consistent(format!("{name} within [{lo}, {hi}]"))
                    } else {
                        Assessment::Drift(format!("{name} outside [{lo}, {hi}]: {}", out.join(", ")))
                    }
                }
                _ => Assessment::Unknown(format!("no {name} samples")),
            }
        }
    }
}

/// Fault kind suggested by the violated property and its drift evidence.
pub fn infer_fault_kind(property: &Property, drift_reasons: &[String]) -> FaultKind {
    match property.predicate {
        PropertyPredicate::Reachable => {
            if drift_reasons.iter().any(|r| r.starts_with(IDENTITY)) {
                FaultKind::StaleMapping
            } else {
                FaultKind::ServiceDown
            }
        }
        PropertyPredicate::ServiceRunning => FaultKind::ServiceDown,
        PropertyPredicate::AttributeEquals { .. } => FaultKind::AttributeDrift,
        PropertyPredicate::LogsClean { .. } => FaultKind::LogErrorBurst,
        PropertyPredicate::MetricInRange { .. } => FaultKind::MetricAnomaly,
    }
}

/// Answer reporting a violation of `property`.
pub fn positive_answer(task: TaskType, property: &Property, drift_reasons: &[String]) -> String {
    let reason = drift_reasons.first().map(|r| r.trim_start_matches(IDENTITY)).unwrap_or("drift observed");
    match task {
        TaskType::Detection => format!("yes: {} is violated on {} ({reason})", property.id, property.subject),
        TaskType::Localization => property.subject.clone(),
        TaskType::Analysis => format!(
            "{}: {} ({} violated: {reason})",
            property.subject,
            infer_fault_kind(property, drift_reasons),
            property.id
        ),
    }
}

pub fn negative_answer(task: TaskType) -> String {
    match task {
        TaskType::Detection => "no: every property holds".into(),
        TaskType::Localization => "none".into(),
        TaskType::Analysis => "none: no fault found".into(),
    }
}

/// Verdict over a full goal: any drift wins, then any consistent record,
/// otherwise there is no substantive evidence.
pub fn decide(
    spec: &Specification,
    property: &Property,
    records: &[(ToolCall, String)],
) -> (VerdictValue, String, Vec<String>) {
    let assessed: Vec<Assessment> = records.iter().map(|(c, out)| interpret(spec, property, c, out)).collect();
    let drifts: Vec<String> = assessed
        .iter()
        .filter_map(|a| if let Assessment::Drift(r) = a { Some(r.clone()) } else { None })
        .collect();
    let empty = assessed.iter().filter(|a| **a == Assessment::NoData).count();
    let note = if empty > 0 { format!("; {empty} record(s) returned no data and were discounted") } else { String::new() };
    if !drifts.is_empty() {
        let r = format!("{}{note}", drifts.join("; "));
        return (VerdictValue::Violated, r, drifts);
    }
    let consistent: Vec<&str> = assessed
        .iter()
        .filter_map(|a| if let Assessment::Consistent(r) = a { Some(r.as_str()) } else { None })
        .collect();
    if !consistent.is_empty() {
        return (VerdictValue::Satisfied, format!("{}{note}", consistent.join("; ")), Vec::new());
    }
    (VerdictValue::Inconclusive, format!("no substantive evidence{note}"), Vec::new())
}

/// Scripted reply for whichever agent owns the conversation.
pub fn respond(messages: &[ChatMessage]) -> String {
    match agent_of(messages) {
        Some(Actor::Verifier) => verifier(messages),
        Some(Actor::Toolgen) => toolgen(messages),
        Some(Actor::React) => react(messages),
        _ => fence(&json!({"action": "give_up", "reason": "unrecognised conversation"})),
    }
}

fn fence(v: &Value) -> String {
    format!("```json\n{}\n```", serde_json::to_string(v).expect("action serializes"))
}

fn task_type(ctx: &Value) -> TaskType {
    serde_json::from_value(ctx["task"]["type"].clone()).unwrap_or(TaskType::Detection)
}

fn spec_of(ctx: &Value) -> Option<Specification> {
    parse_spec(ctx["spec"].as_str()?).ok()
}

fn records_of(goal: &Value) -> Vec<(ToolCall, String)> {
    goal["records"]
        .as_array()
        .map(|rs| {
            rs.iter()
                .filter_map(|r| {
                    let call: ToolCall = serde_json::from_value(r.clone()).ok()?;
                    Some((call, r["result"].as_str().unwrap_or("").to_string()))
                })
                .collect()
        })
        .unwrap_or_default()
}

fn verifier(messages: &[ChatMessage]) -> String {
    let Some(ctx) = latest_context(messages) else {
        return "I have no verification state to work from.".into();
    };
    let Some(spec) = spec_of(&ctx) else {
        return fence(&json!({"action": "submit", "answer": "unable to read the specification"}));
    };
    let task = task_type(&ctx);
    let k = ctx["k"].as_u64().unwrap_or(2) as usize;
    let goals: Vec<&Value> = ctx["goals"].as_array().map(|g| g.iter().collect()).unwrap_or_default();
    let mut actions = Vec::new();

    for g in &goals {
        if g["status"] != "open" {
            continue;
        }
        let Some(property) = g["property"].as_str().and_then(|id| spec.property(&PropertyId::new(id))) else {
            continue;
        };
        if let Some(v) = g.get("verdict").filter(|v| !v.is_null()) {
            // Already concluded; a violation would have been submitted then.
            if v["value"] == "violated" {
                let reasons = vec![v["rationale"].as_str().unwrap_or("").to_string()];
                actions.push(json!({"action": "submit", "answer": positive_answer(task, property, &reasons)}));
                return fence(&Value::Array(actions));
            }
            continue;
        }
        let records = records_of(g);
        if records.len() < k {
            continue;
        }
        let (value, rationale, drifts) = decide(&spec, property, &records);
        actions.push(json!({
            "action": "conclude",
            "property": property.id,
            "verdict": value,
            "evidence": (0..records.len()).collect::<Vec<_>>(),
            "rationale": rationale,
        }));
        if value == VerdictValue::Violated {
            actions.push(json!({"action": "submit", "answer": positive_answer(task, property, &drifts)}));
            return fence(&Value::Array(actions));
        }
    }

    let concluded: Vec<&str> = actions.iter().filter_map(|a| a["property"].as_str()).collect();
    let pending: Vec<&str> = goals
        .iter()
        .filter(|g| g["status"] == "open" && g.get("verdict").is_none_or(Value::is_null))
        .filter_map(|g| g["property"].as_str())
        .filter(|id| !concluded.contains(id) && spec.property(&PropertyId::new(*id)).is_some())
        .collect();
    if pending.is_empty() {
        actions.push(json!({"action": "submit", "answer": negative_answer(task)}));
        return fence(&Value::Array(actions));
    }
    // After a starved request, move on to the next pending goal, wrapping.
    let starved = ctx["last_generation"]
        .as_object()
        .filter(|lg| lg.get("outcome").and_then(Value::as_str) == Some("starved"))
        .and_then(|lg| lg.get("property").and_then(Value::as_str));
    let next = match starved.and_then(|s| pending.iter().position(|p| *p == s)) {
        Some(i) => pending[(i + 1) % pending.len()],
        None => pending[0],
    };
    actions.push(json!({"action": "request_generation", "property": next}));
    if actions.len() == 1 {
        fence(&actions[0])
    } else {
        fence(&Value::Array(actions))
    }
}

fn toolgen(messages: &[ChatMessage]) -> String {
    let Some(ctx) = latest_context(messages) else {
        return fence(&json!({"action": "give_up", "reason": "no request context"}));
    };
    let Some(spec) = spec_of(&ctx) else {
        return fence(&json!({"action": "give_up", "reason": "unreadable specification"}));
    };
    let Some(property) = ctx["property"]["id"].as_str().and_then(|id| spec.property(&PropertyId::new(id))) else {
        return fence(&json!({"action": "give_up", "reason": "unknown property"}));
    };

    if ctx["phase"] == "analysis" {
        let call: Option<ToolCall> = serde_json::from_value(ctx["call"].clone()).ok();
        let result = ctx["result"].as_str().unwrap_or("");
        let analysis = match call.map(|c| interpret(&spec, property, &c, result)) {
            Some(Assessment::Consistent(r)) => format!("consistent with {}: {r}", property.id),
            Some(Assessment::Drift(r)) => format!("drift against {}: {}", property.id, r.trim_start_matches(IDENTITY)),
            Some(Assessment::NoData) => "the tool returned no output".to_string(),
            Some(Assessment::Unknown(r)) => format!("inconclusive: {r}"),
            None => "could not read the call".to_string(),
        };
        return fence(&json!({"action": "record", "analysis": analysis}));
    }

    let names = |key: &str| -> Vec<String> {
        ctx[key]
            .as_array()
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_str().or_else(|| v["tool"].as_str()).map(str::to_string))
                    .collect()
            })
            .unwrap_or_default()
    };
    let used = names("used_tools");
    let failed = names("failed_attempts");
    let paths = diagnostic_paths(&spec, property);
    let fresh = paths.iter().find(|c| !used.contains(&c.tool_name) && !failed.contains(&c.tool_name));
    // With nothing new left, keep proposing the most direct path; the
    // orchestrator rejects it and the request eventually starves.
    let call = fresh.or(paths.first()).cloned().unwrap_or_else(|| ToolCall::new(READ_TRACES));
    fence(&json!({"action": "call", "tool": call.tool_name, "args": call.args}))
}

fn react(messages: &[ChatMessage]) -> String {
    let Some(first) = messages.iter().find(|m| m.role == Role::User) else {
        return fence(&json!({"action": "submit", "answer": "no task"}));
    };
    let Some(ctx) = extract_context(&first.content) else {
        return fence(&json!({"action": "submit", "answer": "no task"}));
    };
    let Some(spec) = spec_of(&ctx) else {
        return fence(&json!({"action": "submit", "answer": "unable to read the specification"}));
    };
    let task = task_type(&ctx);
    let plan: Vec<(&Property, Vec<ToolCall>)> =
        spec.properties.iter().map(|p| (p, diagnostic_paths(&spec, p))).collect();

    // Replay the conversation to find where the plan stands.
    let (mut prop, mut path) = (0usize, 0usize);
    let mut pending_call: Option<ToolCall> = None;
    for m in messages.iter().skip_while(|m| m.role != Role::User).skip(1) {
        match m.role {
            Role::Assistant => {
                pending_call = match parse_action(&m.content) {
                    Ok(AgentAction::Call { call }) => Some(call),
                    _ => None,
                };
            }
            Role::User => {
                let Some(call) = pending_call.take() else { continue };
                let Some((property, _)) = plan.get(prop) else { continue };
                if m.content.starts_with("Error:") {
                    path += 1;
                    if path >= plan[prop].1.len() {
                        prop += 1;
                        path = 0;
                    }
                } else if let Some(output) = m.content.strip_prefix("Observation:") {
                    let output = output.strip_prefix('\n').unwrap_or(output);
                    if let Assessment::Drift(r) = interpret(&spec, property, &call, output) {
                        let answer = positive_answer(task, property, &[r]);
                        return fence(&json!({"action": "submit", "answer": answer, "thought": "found drift"}));
                    }
                    // Empty or clean output is taken at face value.
                    prop += 1;
                    path = 0;
                }
            }
            Role::System => {}
        }
    }
    match plan.get(prop) {
        Some((p, paths)) if path < paths.len() => {
            let call = &paths[path];
            fence(&json!({
                "action": "call",
                "tool": call.tool_name,
                "args": call.args,
                "thought": format!("check {}", p.id),
            }))
        }
        _ => fence(&json!({"action": "submit", "answer": negative_answer(task), "thought": "nothing found"})),
    }
}
