//! Single-agent ReAct baseline: one conversation of thought, action and
//! observation, with no shared history and no cross-validation.

use serde_json::json;

use super::prompts::{react_system, with_context};
use super::protocol::{parse_action, AgentAction};
use super::session::{Session, Stop};
use super::trajectory::StepKind;
use super::{Actor, AgentTask, ConfigError, RunOutcome, Solution};
use crate::env::Environment;
use crate::llm::{ChatBackend, ChatMessage};
use crate::toolkit::{ToolOutcome, ToolRegistry};

pub fn run_react(
    task: &AgentTask,
    env: &mut Environment,
    registry: &ToolRegistry,
    backend: &dyn ChatBackend,
    max_steps: usize,
) -> Result<RunOutcome, ConfigError> {
    if max_steps == 0 {
        return Err(ConfigError::InvalidMaxSteps);
    }
    let mut session = Session::new(backend, max_steps);
    let mut solution = None;
    let stop = react_loop(task, env, registry, &mut session, &mut solution).err();
    Ok(RunOutcome {
        trajectory: session.finish(stop),
        history: None,
        verdicts: Default::default(),
        solution,
        history_snapshots: Vec::new(),
    })
}

fn react_loop(
    task: &AgentTask,
    env: &mut Environment,
    registry: &ToolRegistry,
    session: &mut Session<'_>,
    solution: &mut Option<Solution>,
) -> Result<(), Stop> {
    let conv = session.new_conversation();
    let mut messages = vec![
        ChatMessage::system(react_system(&registry.manifest_json())),
        ChatMessage::user(with_context(
            &format!("Task ({}): check the infrastructure against its specification.", task.task_type),
            &json!({"task": {"id": task.id, "type": task.task_type}, "spec": task.spec_text}),
        )),
    ];
    let mut reprompted = false;
    loop {
        let (idx, text) = session.chat(Actor::React, conv, &messages, StepKind::Reasoning)?;
        messages.push(ChatMessage::assistant(text.clone()));
        match parse_action(&text) {
            Err(pf) => {
                let msg = if reprompted {
                    format!("protocol violation, step wasted: {pf}")
                } else {
                    format!("Your reply could not be parsed: {pf}. Reply again with one action in a ```json block.")
                };
                reprompted = true;
                session.note(Actor::Orchestrator, StepKind::Feedback, msg.clone());
                messages.push(ChatMessage::user(msg));
                continue;
            }
            Ok(AgentAction::Submit { answer }) if !answer.trim().is_empty() => {
                session.set_kind(idx, StepKind::Submission);
                *solution = Some(Solution { task_type: task.task_type, answer });
                return Ok(());
            }
            Ok(AgentAction::Call { call }) => {
                session.set_kind(idx, StepKind::ToolInvocation);
                let outcome = registry.invoke(&call, env);
                session.note(
                    Actor::React,
                    StepKind::ToolInvocation,
                    serde_json::to_string(&json!({"call": call, "outcome": outcome})).expect("serializes"),
                );
                messages.push(ChatMessage::user(match outcome {
                    ToolOutcome::Success(out) => format!("Observation:\n{out}"),
                    ToolOutcome::InterfaceError(e) => format!("Error: {e}"),
                }));
            }
            Ok(other) => {
                let msg = format!("{} is not available here; use call or submit", other.name());
                session.note(Actor::Orchestrator, StepKind::Feedback, msg.clone());
                messages.push(ChatMessage::user(msg));
            }
        }
        reprompted = false;
    }
}
