//! The two-agent loop: the verifier decides, the tool generator gathers one
//! record per request, and the orchestrator enforces the K-distinct-tools
//! gate between them.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::protocol::{parse_action, parse_actions, AgentAction};
use super::prompts::{toolgen_system, verifier_system, with_context};
use super::session::{Session, Stop};
use super::trajectory::StepKind;
use super::{Actor, AgentTask, ConfigError, OrchestratorConfig, RunOutcome, Solution};
use crate::env::Environment;
use crate::history::{GoalOrigin, GoalStatus, ToolExecutionRecord, ToolHistory};
use crate::llm::{ChatBackend, ChatMessage};
use crate::spec::{EvidenceRef, PropertyId, Verdict, VerdictValue};
use crate::toolkit::{ToolOutcome, ToolRegistry};

struct Riva<'a> {
    task: &'a AgentTask,
    env: &'a mut Environment,
    registry: &'a ToolRegistry,
    config: &'a OrchestratorConfig,
    session: Session<'a>,
    history: ToolHistory,
    verdicts: BTreeMap<PropertyId, Verdict>,
    descriptions: BTreeMap<PropertyId, String>,
    snapshots: Vec<ToolHistory>,
    solution: Option<Solution>,
}

/// Runs the verifier/tool-generator pair until submission or the step cap.
pub fn run_riva(
    task: &AgentTask,
    env: &mut Environment,
    registry: &ToolRegistry,
    backend: &dyn ChatBackend,
    config: &OrchestratorConfig,
) -> Result<RunOutcome, ConfigError> {
    config.validate()?;
    let mut history = ToolHistory::new(config.k).map_err(|_| ConfigError::InvalidK)?;
    let mut descriptions = BTreeMap::new();
    for p in &task.spec.properties {
        history
            .add_goal(p.id.clone(), GoalOrigin::FromSpec)
            .expect("specification ids are unique");
        descriptions.insert(p.id.clone(), p.description.clone());
    }
    let mut run = Riva {
        task,
        env,
        registry,
        config,
        session: Session::new(backend, config.max_steps),
        history,
        verdicts: BTreeMap::new(),
        descriptions,
        snapshots: Vec::new(),
        solution: None,
    };
    let stop = run.verifier_loop().err();
    Ok(RunOutcome {
        trajectory: run.session.finish(stop),
        history: Some(run.history),
        verdicts: run.verdicts,
        solution: run.solution,
        history_snapshots: run.snapshots,
    })
}

impl Riva<'_> {
    fn goals_json(&self) -> Value {
        let goals: Vec<Value> = self
            .history
            .goals()
            .map(|(id, g)| {
                json!({
                    "property": id,
                    "origin": g.origin,
                    "status": g.status,
                    "description": self.descriptions.get(id),
                    "conclusive": self.history.is_conclusive(id).unwrap_or(false),
                    "records": g.records,
                    "verdict": self.verdicts.get(id),
                })
            })
            .collect();
        Value::Array(goals)
    }

    fn verifier_context(&self, feedback: &[String], last_generation: &Value) -> Value {
        json!({
            "task": {"id": self.task.id, "type": self.task.task_type},
            "k": self.config.k,
            "spec": self.task.spec_text,
            "goals": self.goals_json(),
            "last_generation": last_generation,
            "feedback": feedback,
            "steps_used": self.session.steps(),
            "max_steps": self.config.max_steps,
        })
    }

    fn snapshot(&mut self) {
        if self.config.snapshot_history {
            self.snapshots.push(self.history.clone());
        }
    }

    fn verifier_loop(&mut self) -> Result<(), Stop> {
        let system = ChatMessage::system(verifier_system(self.config.k));
        // Earlier turns keep their prose and replies; only the newest turn
        // carries the full state snapshot.
        let mut transcript: Vec<(String, String)> = Vec::new();
        let mut feedback: Vec<String> = Vec::new();
        let mut last_generation = Value::Null;

        loop {
            let turn = transcript.len() + 1;
            let mut prose = format!("Turn {turn}. Current verification state is below.");
            for f in &feedback {
                prose.push_str(&format!("\nOrchestrator: {f}"));
            }
            let mut messages = vec![system.clone()];
            for (u, a) in &transcript {
                messages.push(ChatMessage::user(u.clone()));
                messages.push(ChatMessage::assistant(a.clone()));
            }
            messages.push(ChatMessage::user(with_context(
                &prose,
                &self.verifier_context(&feedback, &std::mem::take(&mut last_generation)),
            )));
            feedback.clear();

            let conv = self.session.new_conversation();
            let (mut idx, mut reply) = self.session.chat(Actor::Verifier, conv, &messages, StepKind::Reasoning)?;
            let mut actions = parse_actions(&reply);
            if let Err(pf) = &actions {
                self.session
                    .note(Actor::Orchestrator, StepKind::Feedback, format!("verifier reply rejected: {pf}"));
                messages.push(ChatMessage::assistant(reply.clone()));
                messages.push(ChatMessage::user(format!(
                    "Your reply could not be parsed: {pf}. Reply again with actions in a ```json block."
                )));
                (idx, reply) = self.session.chat(Actor::Verifier, conv, &messages, StepKind::Reasoning)?;
                actions = parse_actions(&reply);
            }
            transcript.push((prose, reply.clone()));
            let actions = match actions {
                Ok(a) => a,
                Err(pf) => {
                    let msg = format!("protocol violation, step wasted: {pf}");
                    self.session.note(Actor::Orchestrator, StepKind::Feedback, msg.clone());
                    feedback.push(msg);
                    continue;
                }
            };

            let mut generated = false;
            for action in actions {
                match action {
                    AgentAction::RequestGeneration { property } => {
                        if generated {
                            self.reject(&mut feedback, format!("one generation per reply; ignored request for {property}"));
                            continue;
                        }
                        if let Err(msg) = self.check_generation_target(&property) {
                            self.reject(&mut feedback, msg);
                            continue;
                        }
                        generated = true;
                        last_generation = self.generate(&property)?;
                    }
                    AgentAction::Conclude { property, verdict, evidence, rationale } => {
                        match self.conclude(&property, verdict, &evidence, rationale) {
                            Ok(()) => self.session.note(
                                Actor::Verifier,
                                StepKind::HistoryMutation,
                                format!("concluded {property}: {verdict}"),
                            ),
                            Err(msg) => self.reject(&mut feedback, msg),
                        }
                    }
                    AgentAction::AddGoal { property, description } => {
                        match self.history.add_goal(property.clone(), GoalOrigin::AgentAdded) {
                            Ok(()) => {
                                self.descriptions.insert(property.clone(), description);
                                self.session.note(
                                    Actor::Verifier,
                                    StepKind::HistoryMutation,
                                    format!("added goal {property}"),
                                );
                                self.snapshot();
                            }
                            Err(e) => self.reject(&mut feedback, e.to_string()),
                        }
                    }
                    AgentAction::AbandonGoal { property } => {
                        if self.verdicts.contains_key(&property) {
                            self.reject(&mut feedback, format!("goal {property} is already concluded"));
                            continue;
                        }
                        match self.history.abandon_goal(&property) {
                            Ok(()) => {
                                self.session.note(
                                    Actor::Verifier,
                                    StepKind::HistoryMutation,
                                    format!("abandoned goal {property}"),
                                );
                                self.snapshot();
                            }
                            Err(e) => self.reject(&mut feedback, e.to_string()),
                        }
                    }
                    AgentAction::Submit { answer } => {
                        if answer.trim().is_empty() {
                            self.reject(&mut feedback, "submitted answer is empty".into());
                            continue;
                        }
                        self.session.set_kind(idx, StepKind::Submission);
                        self.solution = Some(Solution { task_type: self.task.task_type, answer });
                        return Ok(());
                    }
                    other => self.reject(&mut feedback, format!("{} is not a verifier action", other.name())),
                }
            }
        }
    }

    fn reject(&mut self, feedback: &mut Vec<String>, msg: String) {
        self.session.note(Actor::Orchestrator, StepKind::Feedback, format!("rejected: {msg}"));
        feedback.push(msg);
    }

    fn check_generation_target(&self, p: &PropertyId) -> Result<(), String> {
        let goal = self.history.goal(p).map_err(|e| e.to_string())?;
        if goal.status == GoalStatus::Abandoned {
            return Err(format!("goal {p} is abandoned"));
        }
        if self.verdicts.contains_key(p) {
            return Err(format!("goal {p} is already concluded"));
        }
        if goal.records.len() >= self.history.k() {
            return Err(format!("goal {p} already holds {} records; conclude it", self.history.k()));
        }
        Ok(())
    }

    fn conclude(
        &mut self,
        p: &PropertyId,
        value: VerdictValue,
        evidence: &[usize],
        rationale: String,
    ) -> Result<(), String> {
        let goal = self.history.goal(p).map_err(|e| e.to_string())?;
        if goal.status == GoalStatus::Abandoned {
            return Err(format!("goal {p} is abandoned"));
        }
        if self.verdicts.contains_key(p) {
            return Err(format!("goal {p} is already concluded"));
        }
        let n = goal.records.len();
        let k = self.history.k();
        let mut ev = evidence.to_vec();
        ev.sort_unstable();
        ev.dedup();
        if ev.iter().any(|i| *i >= n) {
            return Err(format!("evidence for {p} cites a record that does not exist"));
        }
        if value != VerdictValue::Inconclusive {
            if !self.history.is_conclusive(p).unwrap_or(false) {
                return Err(format!("goal {p} has {n} of {k} records; a {value} verdict needs {k} distinct tools"));
            }
            if ev.len() != k {
                return Err(format!("a {value} verdict must cite all {k} records of {p}"));
            }
        }
        self.verdicts.insert(
            p.clone(),
            Verdict {
                value,
                rationale,
                evidence: ev.into_iter().map(|record| EvidenceRef { property: p.clone(), record }).collect(),
            },
        );
        Ok(())
    }

    fn property_json(&self, p: &PropertyId) -> Value {
        match self.task.spec.property(p) {
            Some(prop) => json!({
                "id": prop.id,
                "subject": prop.subject,
                "predicate": prop.predicate,
                "description": prop.description,
            }),
            None => json!({"id": p, "description": self.descriptions.get(p)}),
        }
    }

    fn generation_context(&self, p: &PropertyId, failed: &[Value]) -> Value {
        let g = self.history.goal(p).expect("checked before generation");
        json!({
            "phase": "generate",
            "property": self.property_json(p),
            "spec": self.task.spec_text,
            "k": self.config.k,
            "used_tools": self.history.used_tools(p).unwrap_or_default(),
            "previous_records": g.records.iter().map(|r| &r.command).collect::<Vec<_>>(),
            "failed_attempts": failed,
        })
    }

    /// One generation request: at most one new record for `p`.
    fn generate(&mut self, p: &PropertyId) -> Result<Value, Stop> {
        let conv = self.session.new_conversation();
        let mut messages = vec![
            ChatMessage::system(toolgen_system(&self.registry.manifest_json())),
            ChatMessage::user(with_context(
                &format!("Generate one verification tool call for property {p}."),
                &self.generation_context(p, &[]),
            )),
        ];
        let mut failed: Vec<Value> = Vec::new();
        let mut last_problem = String::new();

        for _ in 0..self.config.toolgen_retry_limit {
            let (idx, text) = self.session.chat(Actor::Toolgen, conv, &messages, StepKind::ToolInvocation)?;
            messages.push(ChatMessage::assistant(text.clone()));
            let used = self.history.used_tools(p).unwrap_or_default();

            let (call, problem) = match parse_action(&text) {
                Err(pf) => (None, format!("could not parse reply: {pf}")),
                Ok(AgentAction::GiveUp { reason }) => {
                    self.session.set_kind(idx, StepKind::Reasoning);
                    return Ok(json!({"property": p, "outcome": "starved", "detail": format!("generator gave up: {reason}")}));
                }
                Ok(AgentAction::Call { call }) if used.contains(&call.tool_name) => {
                    let msg = format!("tool {} was already used for {p}; a different tool is required", call.tool_name);
                    (Some(call), msg)
                }
                Ok(AgentAction::Call { call }) | Ok(AgentAction::Explore { call }) => {
                    let exploratory = matches!(parse_action(&text), Ok(AgentAction::Explore { .. }));
                    let outcome = self.registry.invoke(&call, self.env);
                    self.session.note(
                        Actor::Toolgen,
                        StepKind::ToolInvocation,
                        serde_json::to_string(&json!({"call": call, "outcome": outcome})).expect("serializes"),
                    );
                    match outcome {
                        ToolOutcome::InterfaceError(e) => (Some(call), format!("interface error: {e}")),
                        ToolOutcome::Success(out) if exploratory => {
                            if self.config.record_exploratory && !used.contains(&call.tool_name) {
                                let rec = ToolExecutionRecord {
                                    command: call.clone(),
                                    result: out,
                                    analysis: "exploratory call kept in the history".into(),
                                };
                                return Ok(self.store(p, rec));
                            }
                            messages.push(ChatMessage::user(format!(
                                "Exploration output (not recorded):\n```output\n{out}```\nNow propose the call to record."
                            )));
                            continue;
                        }
                        ToolOutcome::Success(out) => {
                            messages.push(ChatMessage::user(with_context(
                                &format!(
                                    "The call succeeded. Its output is below. Reply with a record action analysing what it says about {p}.\n```output\n{out}```"
                                ),
                                &json!({
                                    "phase": "analysis",
                                    "property": self.property_json(p),
                                    "spec": self.task.spec_text,
                                    "call": call,
                                    "result": out,
                                }),
                            )));
                            let (_, atext) =
                                self.session.chat(Actor::Toolgen, conv, &messages, StepKind::Reasoning)?;
                            let analysis = match parse_action(&atext) {
                                Ok(AgentAction::Record { analysis }) => analysis,
                                _ if !atext.trim().is_empty() => atext.trim().to_string(),
                                _ => "no analysis provided".into(),
                            };
                            return Ok(self.store(p, ToolExecutionRecord { command: call, result: out, analysis }));
                        }
                    }
                }
                Ok(other) => (None, format!("expected a call action, got {}", other.name())),
            };

            if call.is_none() {
                self.session.set_kind(idx, StepKind::Reasoning);
            }
            self.session.note(Actor::Orchestrator, StepKind::Feedback, format!("generation attempt rejected: {problem}"));
            failed.push(json!({
                "tool": call.as_ref().map(|c| c.tool_name.clone()),
                "args": call.as_ref().map(|c| c.args.clone()),
                "error": problem,
            }));
            last_problem = problem.clone();
            messages.push(ChatMessage::user(with_context(
                &format!("That attempt failed: {problem}. Propose a corrected call."),
                &self.generation_context(p, &failed),
            )));
        }
        let detail = format!(
            "no usable call after {} attempts; last problem: {last_problem}",
            self.config.toolgen_retry_limit
        );
        self.session.note(Actor::Orchestrator, StepKind::Feedback, format!("generation for {p} starved: {detail}"));
        Ok(json!({"property": p, "outcome": "starved", "detail": detail}))
    }

    fn store(&mut self, p: &PropertyId, rec: ToolExecutionRecord) -> Value {
        let tool = rec.command.tool_name.clone();
        match self.history.record(p, rec) {
            Ok(i) => {
                self.session
                    .note(Actor::Toolgen, StepKind::HistoryMutation, format!("recorded {p}[{i}] via {tool}"));
                self.snapshot();
                json!({"property": p, "outcome": "recorded", "record": i, "tool": tool})
            }
            Err(e) => {
                self.session.note(Actor::Orchestrator, StepKind::Feedback, format!("record rejected: {e}"));
                json!({"property": p, "outcome": "rejected", "detail": e.to_string()})
            }
        }
    }
}
