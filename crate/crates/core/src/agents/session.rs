//! Step accounting shared by both orchestrators.

use super::trajectory::{StepKind, Termination, Trajectory};
use super::Actor;
use crate::llm::{prompt_chars, BackendError, ChatBackend, ChatMessage};

/// Why a run stopped before its agent submitted.
pub(crate) enum Stop {
    Budget,
    Backend(BackendError),
}

pub(crate) struct Session<'a> {
    backend: &'a dyn ChatBackend,
    max_steps: usize,
    steps: usize,
    conversations: usize,
    pub traj: Trajectory,
}

impl<'a> Session<'a> {
    pub fn new(backend: &'a dyn ChatBackend, max_steps: usize) -> Self {
        Self { backend, max_steps, steps: 0, conversations: 0, traj: Trajectory::default() }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Starts a fresh context and returns its id.
    pub fn new_conversation(&mut self) -> usize {
        self.conversations += 1;
        self.conversations
    }

    /// One backend reply, counted against the budget. Returns the step index
    /// and the reply text.
    pub fn chat(
        &mut self,
        actor: Actor,
        conversation: usize,
        messages: &[ChatMessage],
        kind: StepKind,
    ) -> Result<(usize, String), Stop> {
        if self.steps >= self.max_steps {
            return Err(Stop::Budget);
        }
        let reply = self.backend.chat(messages).map_err(Stop::Backend)?;
        self.steps += 1;
        if reply.estimated {
            self.traj.tokens_estimated = true;
        }
        let pc = prompt_chars(messages);
        let cc = reply.text.chars().count();
        let step = self.traj.push(actor, kind, reply.text.clone());
        step.counted = true;
        step.conversation = Some(conversation);
        step.token_usage = Some(reply.usage);
        step.prompt_chars = pc;
        step.completion_chars = cc;
        Ok((step.index, reply.text))
    }

    pub fn note(&mut self, actor: Actor, kind: StepKind, payload: impl Into<String>) {
        self.traj.push(actor, kind, payload);
    }

    pub fn set_kind(&mut self, index: usize, kind: StepKind) {
        self.traj.steps[index].kind = kind;
    }

    pub fn finish(mut self, stop: Option<Stop>) -> Trajectory {
        match stop {
            None => self.traj.terminated_by = Termination::Submit,
            Some(Stop::Budget) => self.traj.terminated_by = Termination::StepCapReached,
            Some(Stop::Backend(e)) => {
                self.traj.terminated_by = Termination::BackendFailure;
                self.traj.error = Some(e.to_string());
            }
        }
        self.traj
    }
}
