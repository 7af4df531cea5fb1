//! Decision backends that produce the next raw command string.

mod llm;
mod random;
mod replay;
mod rule;

pub use llm::{llm_complete, LlmBackendConfig, LlmClient, LlmError, LlmPlanner};
pub use random::RandomPlanner;
pub use replay::ReplayPlanner;
pub use rule::RulePlanner;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::Skill;
use crate::perception::{Feedback, SoundReading};
use crate::prompt::{PromptError, PromptTemplate, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    #[serde(rename = "llm")]
    RemoteLlm,
    Rule,
    Random,
    Replay,
}

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("replay script exhausted after {0} commands")]
    ScriptExhausted(usize),
    #[error("feedback carries no material classification")]
    UnsupportedFeedback,
    #[error(transparent)]
    Prompt(#[from] PromptError),
}

/// What the last perceiving command produced, with the structured sound
/// classification when one exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    pub object_index: usize,
    pub label: String,
    pub skill: Skill,
    pub feedback: Feedback,
    pub sound: Option<SoundReading>,
}

/// Everything a planner may look at before emitting a command.
pub struct StepView<'a> {
    pub transcript: &'a Transcript,
    pub visible: Vec<&'a str>,
    pub last_percept: Option<&'a Percept>,
    template: &'a PromptTemplate,
    budget: usize,
}

impl<'a> StepView<'a> {
    pub fn new(
        template: &'a PromptTemplate,
        budget: usize,
        transcript: &'a Transcript,
        visible: Vec<&'a str>,
        last_percept: Option<&'a Percept>,
    ) -> Self {
        StepView {
            transcript,
            visible,
            last_percept,
            template,
            budget,
        }
    }

    /// Rendered prompt ending in `AI:`. Built on demand.
    pub fn context(&self) -> Result<String, PromptError> {
        self.template.render_context(self.transcript, self.budget)
    }
}

pub trait Planner {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError>;
}

impl<P: Planner + ?Sized> Planner for Box<P> {
    fn next_command(&mut self, view: &StepView<'_>) -> Result<String, PlannerError> {
        (**self).next_command(view)
    }
}
