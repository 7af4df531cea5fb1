//! The `robot.<skill>(<object>)` command language.
//!
//! Grammar of the first non-empty line of planner output:
//!
//! ```text
//! command  := call ws*
//! call     := [ident "."] ident "(" args ")"
//! args     := ws* | arg ("," arg)*
//! arg      := ws* text ws*        text has no ',', '(', ')'
//! ```
//!
//! Checks run in a fixed order and the first failure wins: syntax, skill name,
//! arity, then (against a scene) object reference.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::Scene;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skill {
    KnockOn,
    Touch,
    Weigh,
    PickUp,
    Done,
}

impl Skill {
    pub const ALL: [Skill; 5] = [
        Skill::KnockOn,
        Skill::Touch,
        Skill::Weigh,
        Skill::PickUp,
        Skill::Done,
    ];

    pub fn surface_name(self) -> &'static str {
        match self {
            Skill::KnockOn => "knock_on",
            Skill::Touch => "touch",
            Skill::Weigh => "weigh",
            Skill::PickUp => "pick_up",
            Skill::Done => "done",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Skill::Done => 0,
            _ => 1,
        }
    }

    /// Skills that gather information without changing the scene.
    pub fn is_perceiving(self) -> bool {
        matches!(self, Skill::KnockOn | Skill::Touch | Skill::Weigh)
    }

    fn is_robot_skill(self) -> bool {
        self != Skill::Done
    }

    /// Call signature as written in the prompt, e.g. `robot.touch()`.
    pub fn signature(self) -> String {
        if self.is_robot_skill() {
            format!("robot.{}()", self.surface_name())
        } else {
            format!("{}()", self.surface_name())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSpec {
    pub skill: Skill,
    pub description: String,
}

/// The skills a planner may use, in prompt order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillRegistry {
    skills: Vec<SkillSpec>,
}

impl Default for SkillRegistry {
    fn default() -> Self {
        let d = |skill, text: &str| SkillSpec {
            skill,
            description: text.to_string(),
        };
        SkillRegistry {
            skills: vec![
                d(Skill::KnockOn, "to knock on any object and hear the sound to determine the material it consists of. Most of the materials can be determined by this skill."),
                d(Skill::Touch, "to touch with haptics sensors. It is useful for some of the materials."),
                d(Skill::Weigh, "to weigh an object with the force sensor of the arm. It tells how heavy the object is, which helps to tell some materials apart."),
                d(Skill::PickUp, "to pick up an object and place it into the brown box. Only use it once you are confident that the object is the one asked for, because the task ends after it."),
                d(Skill::Done, "to tell the human that the task is finished."),
            ],
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("skill {0:?} registered twice")]
    Duplicate(Skill),
    #[error("skill {0:?} has an empty description")]
    EmptyDescription(Skill),
    #[error("registry is empty")]
    Empty,
}

impl SkillRegistry {
    pub fn new(skills: Vec<SkillSpec>) -> Result<Self, RegistryError> {
        if skills.is_empty() {
            return Err(RegistryError::Empty);
        }
        for (i, s) in skills.iter().enumerate() {
            if s.description.trim().is_empty() {
                return Err(RegistryError::EmptyDescription(s.skill));
            }
            if skills[..i].iter().any(|o| o.skill == s.skill) {
                return Err(RegistryError::Duplicate(s.skill));
            }
        }
        Ok(SkillRegistry { skills })
    }

    pub fn skills(&self) -> &[SkillSpec] {
        &self.skills
    }

    pub fn contains(&self, skill: Skill) -> bool {
        self.skills.iter().any(|s| s.skill == skill)
    }

    fn lookup(&self, receiver: Option<&str>, name: &str) -> Option<Skill> {
        self.skills
            .iter()
            .map(|s| s.skill)
            .find(|s| {
                s.surface_name() == name
                    && match receiver {
                        Some("robot") => s.is_robot_skill(),
                        None => !s.is_robot_skill(),
                        Some(_) => false,
                    }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Command {
    pub skill: Skill,
    pub args: Vec<String>,
}

impl Command {
    pub fn new(skill: Skill, args: Vec<String>) -> Self {
        Command { skill, args }
    }

    pub fn on(skill: Skill, object: impl Into<String>) -> Self {
        Command {
            skill,
            args: vec![object.into()],
        }
    }

    pub fn done() -> Self {
        Command {
            skill: Skill::Done,
            args: Vec::new(),
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_command(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationKind {
    ParseFailure,
    UnknownSkill,
    ArityMismatch,
    UnresolvableReference,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind:?}: {text:?}")]
pub struct ValidationError {
    pub kind: ValidationKind,
    pub text: String,
}

impl ValidationError {
    fn new(kind: ValidationKind, text: impl Into<String>) -> Self {
        ValidationError {
            kind,
            text: text.into(),
        }
    }
}

/// A command bound to a scene object.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidatedCommand {
    pub skill: Skill,
    pub target: Option<usize>,
}

struct Call<'a> {
    receiver: Option<&'a str>,
    name: &'a str,
    args: Vec<&'a str>,
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek().filter(|c| c.is_whitespace()) {
            self.pos += c.len_utf8();
        }
    }

    fn ident(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
            self.pos += c.len_utf8();
        }
        (self.pos > start).then(|| &self.src[start..self.pos])
    }

    fn arg(&mut self) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|c| !matches!(c, ',' | '(' | ')')) {
            self.pos += c.len_utf8();
        }
        self.src[start..self.pos].trim()
    }

    fn at_end(&self) -> bool {
        self.pos == self.src.len()
    }
}

fn parse_call(line: &str) -> Option<Call<'_>> {
    let mut cur = Cursor { src: line, pos: 0 };
    let first = cur.ident()?;
    let (receiver, name) = if cur.eat('.') {
        (Some(first), cur.ident()?)
    } else {
        (None, first)
    };
    cur.skip_ws();
    if !cur.eat('(') {
        return None;
    }
    let mut args = Vec::new();
    loop {
        let arg = cur.arg();
        if cur.eat(')') {
            if !arg.is_empty() {
                args.push(arg);
            } else if !args.is_empty() {
                return None;
            }
            break;
        }
        if !cur.eat(',') || arg.is_empty() {
            return None;
        }
        args.push(arg);
    }
    cur.skip_ws();
    cur.at_end().then_some(Call {
        receiver,
        name,
        args,
    })
}

/// Parse the first non-empty line with the default registry.
pub fn parse_command(raw: &str) -> Result<Command, ValidationError> {
    parse_command_with(&SkillRegistry::default(), raw)
}

pub fn parse_command_with(
    registry: &SkillRegistry,
    raw: &str,
) -> Result<Command, ValidationError> {
    let line = raw
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .unwrap_or("");
    let call =
        parse_call(line).ok_or_else(|| ValidationError::new(ValidationKind::ParseFailure, line))?;
    let skill = registry
        .lookup(call.receiver, call.name)
        .ok_or_else(|| ValidationError::new(ValidationKind::UnknownSkill, line))?;
    if call.args.len() != skill.arity() {
        return Err(ValidationError::new(ValidationKind::ArityMismatch, line));
    }
    Ok(Command {
        skill,
        args: call.args.into_iter().map(str::to_string).collect(),
    })
}

/// Exact, case-sensitive match against a visible label.
pub fn resolve_reference(arg: &str, scene: &Scene) -> Result<usize, ValidationError> {
    scene
        .find_visible(arg)
        .ok_or_else(|| ValidationError::new(ValidationKind::UnresolvableReference, arg))
}

/// Parse and bind to `scene`.
pub fn validate(
    registry: &SkillRegistry,
    raw: &str,
    scene: &Scene,
) -> Result<(Command, ValidatedCommand), ValidationError> {
    let command = parse_command_with(registry, raw)?;
    let target = match command.args.first() {
        Some(arg) => Some(resolve_reference(arg, scene)?),
        None => None,
    };
    let validated = ValidatedCommand {
        skill: command.skill,
        target,
    };
    Ok((command, validated))
}

pub fn render_command(command: &Command) -> String {
    let name = command.skill.surface_name();
    let args = command.args.join(", ");
    if command.skill.is_robot_skill() {
        format!("robot.{name}({args})")
    } else {
        format!("{name}({args})")
    }
}
