//! Initial prompt and the running Human/AI/Feedback transcript.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{parse_command_with, SkillRegistry};

pub const HUMAN_LABEL: &str = "Human:";
pub const AI_LABEL: &str = "AI:";
pub const FEEDBACK_LABEL: &str = "Feedback:";

/// Feedback text appended after a rejected command under the retry policy.
pub const INVALID_COMMAND_FEEDBACK: &str = "Invalid command.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Human,
    #[serde(rename = "AI")]
    Ai,
    Feedback,
}

impl Role {
    pub fn label(self) -> &'static str {
        match self {
            Role::Human => HUMAN_LABEL,
            Role::Ai => AI_LABEL,
            Role::Feedback => FEEDBACK_LABEL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub role: Role,
    pub text: String,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("context budget of {budget} chars is below the {needed} chars needed for the prompt and instruction")]
    BudgetTooSmall { budget: usize, needed: usize },
    #[error("few-shot line {line}: text before any role label")]
    OrphanText { line: usize },
    #[error("reading prompt file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("transcript is empty")]
    Empty,
    #[error("turn {0} has empty text")]
    EmptyTurn(usize),
    #[error("transcript does not start with a human instruction")]
    NoInstruction,
    #[error("turn {0} is a second human instruction")]
    ExtraInstruction(usize),
    #[error("feedback turn {0} does not follow an AI turn")]
    OrphanFeedback(usize),
    #[error("feedback turn {0} follows a command that does not perceive")]
    FeedbackWithoutPercept(usize),
}

/// Ordered turns of one episode, starting with the human instruction.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Transcript {
    turns: Vec<Turn>,
}

impl Transcript {
    pub fn new() -> Self {
        Self::default()
    }

    /// A transcript whose first turn is `instruction`.
    pub fn with_instruction(instruction: impl Into<String>) -> Self {
        let mut t = Self::new();
        t.push(Role::Human, instruction);
        t
    }

    pub fn push(&mut self, role: Role, text: impl Into<String>) {
        self.turns.push(Turn {
            role,
            text: text.into(),
        });
    }

    pub fn turns(&self) -> &[Turn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn from_turns(turns: Vec<Turn>) -> Self {
        Transcript { turns }
    }

    /// Check ordering rules: one leading human instruction, every feedback
    /// right after an AI turn that perceived (or that was rejected).
    pub fn audit(&self, registry: &SkillRegistry) -> Result<(), AuditError> {
        let first = self.turns.first().ok_or(AuditError::Empty)?;
        if first.role != Role::Human {
            return Err(AuditError::NoInstruction);
        }
        for (i, turn) in self.turns.iter().enumerate() {
            if turn.text.trim().is_empty() {
                return Err(AuditError::EmptyTurn(i));
            }
            match turn.role {
                Role::Human if i > 0 => return Err(AuditError::ExtraInstruction(i)),
                Role::Feedback => {
                    let prev = &self.turns[i - 1];
                    if prev.role != Role::Ai {
                        return Err(AuditError::OrphanFeedback(i));
                    }
                    if turn.text != INVALID_COMMAND_FEEDBACK {
                        let perceives = parse_command_with(registry, &prev.text)
                            .map(|c| c.skill.is_perceiving())
                            .unwrap_or(false);
                        if !perceives {
                            return Err(AuditError::FeedbackWithoutPercept(i));
                        }
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn render_turn(out: &mut String, turn: &Turn) {
    out.push_str(turn.role.label());
    out.push(' ');
    out.push_str(&turn.text);
    out.push('\n');
}

impl fmt::Display for Transcript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for t in &self.turns {
            render_turn(&mut out, t);
        }
        f.write_str(&out)
    }
}

/// Parse few-shot episodes from labelled text. Lines without a label continue
/// the previous turn; blank lines separate episodes.
pub fn parse_fewshot(text: &str) -> Result<Vec<Transcript>, PromptError> {
    let mut episodes = Vec::new();
    let mut current = Transcript::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end();
        if line.trim().is_empty() {
            if !current.is_empty() {
                episodes.push(std::mem::take(&mut current));
            }
            continue;
        }
        let labelled = [Role::Human, Role::Ai, Role::Feedback]
            .into_iter()
            .find_map(|r| line.strip_prefix(r.label()).map(|rest| (r, rest.trim())));
        match labelled {
            Some((role, rest)) => current.push(role, rest),
            None => match current.turns.last_mut() {
                Some(last) => {
                    last.text.push('\n');
                    last.text.push_str(line.trim());
                }
                None => return Err(PromptError::OrphanText { line: lineno + 1 }),
            },
        }
    }
    if !current.is_empty() {
        episodes.push(current);
    }
    Ok(episodes)
}

/// Human turn text for an instruction and scene description.
pub fn instruction_turn(instruction: &str, scene_description: &str) -> String {
    let mut desc = scene_description.to_string();
    if let Some(first) = desc.get(..1) {
        let lower = first.to_lowercase();
        desc.replace_range(..1, &lower);
    }
    format!("\"{instruction}\" in {desc}")
}

const GUIDELINES: &str = "\
The robot works at a table with several blocks on it and a brown box next to it. \
The blocks may look alike, so their names only tell their colors. \
The material of a block cannot be seen and has to be found out by interacting with it. \
Each skill takes exactly one block, written with the same name as in the scene description, \
for example robot.knock_on(red block). Skill names are case-sensitive and no other commands exist. \
After every perceiving skill the robot reports what it sensed in a line that starts with \"Feedback:\". \
Sound is the most informative sense for telling materials apart, but similar materials can sound alike, \
so it is often wise to combine it with touching and weighing. \
Metal is usually the heaviest and feels cold, glass and ceramic both feel hard and may both make a tinkling sound, \
plastic sounds dull and is light, and fibre is soft and nearly weightless. \
Think about which block is most likely to satisfy the instruction and which skill would reduce the remaining doubt the most. \
Do not repeat a skill on the same block unless the earlier feedback was unclear. \
Use robot.pick_up() only once you are confident, and only on the block that satisfies the instruction, \
since picking up a block finishes the task. \
When all requested blocks have been placed into the box, answer with done(). \
Write exactly one command per answer and nothing else. Here are some example tasks:";

/// Skill definitions followed by usage guidelines.
pub fn build_preamble(registry: &SkillRegistry) -> String {
    let mut out = String::from("AI has the following skills to help complete a task:\n");
    for (i, spec) in registry.skills().iter().enumerate() {
        out.push_str(&format!(
            "{}. \"{}\": {}\n",
            i + 1,
            spec.skill.signature(),
            spec.description
        ));
    }
    out.push_str(GUIDELINES);
    out.push('\n');
    out
}

/// Prompt prefix: skill definitions and few-shot episodes.
pub fn build_initial_prompt(registry: &SkillRegistry, fewshot: &[Transcript]) -> String {
    PromptTemplate::new(registry, fewshot.to_vec()).prefix().to_string()
}

/// The glass-block example episode.
pub fn default_fewshot() -> Vec<Transcript> {
    let mut t = Transcript::with_instruction(instruction_turn(
        "pick up the glass block",
        "The scene contains [yellow block, blue block, green block]",
    ));
    t.push(Role::Ai, "robot.weigh(yellow block)");
    t.push(Role::Feedback, "It weighs light");
    t.push(Role::Ai, "robot.weigh(blue block)");
    t.push(Role::Feedback, "It weighs a little bit heavy");
    t.push(Role::Ai, "robot.knock_on(blue block)");
    t.push(Role::Feedback, "It sounds tinkling");
    t.push(Role::Ai, "robot.pick_up(blue block)\ndone()");
    vec![t]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    preamble: String,
    fewshot: Vec<Transcript>,
    prefix: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        PromptTemplate::new(&SkillRegistry::default(), default_fewshot())
    }
}

impl PromptTemplate {
    pub fn new(registry: &SkillRegistry, fewshot: Vec<Transcript>) -> Self {
        Self::from_parts(build_preamble(registry), fewshot)
    }

    pub fn from_parts(preamble: String, fewshot: Vec<Transcript>) -> Self {
        let mut prefix = preamble.trim_end().to_string();
        prefix.push('\n');
        for ep in &fewshot {
            prefix.push('\n');
            prefix.push_str(&ep.to_string());
        }
        prefix.push('\n');
        PromptTemplate {
            preamble,
            fewshot,
            prefix,
        }
    }

    /// Preamble from a plain-text file, few-shot episodes from another.
    pub fn from_files(preamble: &Path, fewshot: Option<&Path>) -> Result<Self, PromptError> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| PromptError::Io(e.to_string()));
        let pre = read(preamble)?;
        let shots = match fewshot {
            Some(p) => parse_fewshot(&read(p)?)?,
            None => Vec::new(),
        };
        Ok(Self::from_parts(pre, shots))
    }

    pub fn preamble(&self) -> &str {
        &self.preamble
    }

    pub fn fewshot(&self) -> &[Transcript] {
        &self.fewshot
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    /// Render the context for the next command. When it exceeds `budget`
    /// characters, the oldest AI turns of the current episode are dropped
    /// together with the feedback that followed them.
    pub fn render_context(&self, transcript: &Transcript, budget: usize) -> Result<String, PromptError> {
        let turns = transcript.turns();
        let (head, rest) = match turns.split_first() {
            Some((h, r)) if h.role == Role::Human => (Some(h), r),
            _ => (None, turns),
        };
        let mut head_text = String::new();
        if let Some(h) = head {
            render_turn(&mut head_text, h);
        }

        // exchanges: an AI turn plus the feedback right after it
        let mut units: Vec<String> = Vec::new();
        for t in rest {
            match (t.role, units.last_mut()) {
                (Role::Feedback, Some(last)) => render_turn(last, t),
                _ => {
                    let mut s = String::new();
                    render_turn(&mut s, t);
                    units.push(s);
                }
            }
        }

        let chars = |s: &str| s.chars().count();
        let fixed = chars(&self.prefix) + chars(&head_text) + chars(AI_LABEL);
        if fixed > budget {
            return Err(PromptError::BudgetTooSmall {
                budget,
                needed: fixed,
            });
        }
        let mut total = fixed + units.iter().map(|u| chars(u)).sum::<usize>();
        let mut skip = 0;
        while total > budget {
            total -= chars(&units[skip]);
            skip += 1;
        }

        let mut out = String::with_capacity(total);
        out.push_str(&self.prefix);
        out.push_str(&head_text);
        for u in &units[skip..] {
            out.push_str(u);
        }
        out.push_str(AI_LABEL);
        Ok(out)
    }
}

pub fn stop_sequences() -> Vec<String> {
    [FEEDBACK_LABEL, HUMAN_LABEL]
        .into_iter()
        .flat_map(|s| [s.to_string(), format!("\n{s}")])
        .collect()
}

/// Cut `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop<'a>(text: &'a str, stops: &[String]) -> &'a str {
    let end = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..end]
}
