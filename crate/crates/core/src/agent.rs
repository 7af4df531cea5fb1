//! The episode loop: context, command, validation, action, perception, feedback.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grammar::{validate, Skill, SkillRegistry};
use crate::perception::{
    describe_scene, ConfusionMatrix, ConfusionShape, DescriptionTable, Perception, PerceptionError,
    SoundMode, SoundSensorModel, WeightStyle,
};
use crate::planner::{Percept, Planner, PlannerError, StepView};
use crate::prompt::{instruction_turn, PromptTemplate, Role, Transcript, INVALID_COMMAND_FEEDBACK};
use crate::world::{apply_action, evaluate_success, ActionEvent, Cardinality, ObjectSpec, Scene, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidCommandPolicy {
    FailFast,
    /// Re-prompt up to `k` times per step.
    Retry(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationMode {
    OnFirstPick,
    OnDone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingConfig {
    pub sound_mode: SoundMode,
    pub weight_style: WeightStyle,
    pub confusion: ConfusionShape,
    pub accuracy: f64,
    pub render_threshold: f64,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            sound_mode: SoundMode::Distinct,
            weight_style: WeightStyle::Numeric,
            confusion: ConfusionShape::Uniform,
            accuracy: 0.9333,
            render_threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub max_steps: u32,
    pub invalid_policy: InvalidCommandPolicy,
    /// `None` picks by task cardinality.
    pub termination: Option<TerminationMode>,
    /// Context budget in characters.
    pub context_budget: usize,
    pub sensing: SensingConfig,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            max_steps: 20,
            invalid_policy: InvalidCommandPolicy::FailFast,
            termination: None,
            context_budget: 16_000,
            sensing: SensingConfig::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn termination_for(&self, task: &Task) -> TerminationMode {
        self.termination.unwrap_or(match task.cardinality {
            Cardinality::SingleTarget => TerminationMode::OnFirstPick,
            Cardinality::AllMatching => TerminationMode::OnDone,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Completed,
    MaxSteps,
    InvalidCommand,
    BackendError,
    ScriptExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub success: bool,
    pub steps: u32,
    pub termination: Termination,
    pub transcript: Transcript,
    pub picked: Vec<usize>,
    pub seed: u64,
}

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid episode configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error(transparent)]
    Prompt(#[from] crate::prompt::PromptError),
}

/// Shared, immutable pieces every episode needs.
#[derive(Debug, Clone)]
pub struct Agent {
    pub registry: SkillRegistry,
    pub template: PromptTemplate,
    pub table: Arc<DescriptionTable>,
    pub config: EpisodeConfig,
}

impl Default for Agent {
    fn default() -> Self {
        Agent::new(EpisodeConfig::default())
    }
}

impl Agent {
    pub fn new(config: EpisodeConfig) -> Self {
        Agent {
            registry: SkillRegistry::default(),
            template: PromptTemplate::default(),
            table: Arc::new(DescriptionTable::default()),
            config,
        }
    }

    pub fn validate_config(&self) -> Result<(), AgentError> {
        if self.config.max_steps < 1 {
            return Err(AgentError::Config("max_steps must be at least 1".into()));
        }
        if self.config.invalid_policy == InvalidCommandPolicy::Retry(0) {
            return Err(AgentError::Config("retry count must be at least 1".into()));
        }
        Ok(())
    }

    /// Sensor stack for a task; the worst-case matrix needs a target material.
    pub fn perception_for(&self, task: &Task) -> Result<Perception, AgentError> {
        let s = &self.config.sensing;
        let sound = match s.sound_mode {
            SoundMode::Indistinct => SoundSensorModel::indistinct(),
            SoundMode::Distinct => {
                let matrix = match (s.confusion, task.target_material()) {
                    (ConfusionShape::Uniform, _) => ConfusionMatrix::uniform(s.accuracy)?,
                    (ConfusionShape::WorstCase, Some(t)) => ConfusionMatrix::worst_case(s.accuracy, t)?,
                    (ConfusionShape::WorstCase, None) => {
                        return Err(AgentError::Config(
                            "worst-case confusion needs a single target material".into(),
                        ))
                    }
                };
                SoundSensorModel::new(SoundMode::Distinct, matrix, s.render_threshold)?
            }
        };
        Ok(Perception::new(self.table.clone(), sound, s.weight_style))
    }

    /// Run one episode to termination. `rng` drives perception noise only.
    pub fn run_episode(
        &self,
        mut scene: Scene,
        task: &Task,
        planner: &mut dyn Planner,
        rng: &mut ChaCha8Rng,
        seed: u64,
    ) -> Result<EpisodeResult, AgentError> {
        self.validate_config()?;
        let perception = self.perception_for(task)?;
        let mode = self.config.termination_for(task);
        let budget = self.config.context_budget;
        let retries = match self.config.invalid_policy {
            InvalidCommandPolicy::FailFast => 0,
            InvalidCommandPolicy::Retry(k) => k,
        };

        let mut transcript = Transcript::with_instruction(instruction_turn(
            &task.instruction,
            &describe_scene(&scene).text,
        ));
        // fail on an impossible budget before the planner is ever called
        self.template.render_context(&transcript, budget)?;

        let mut last_percept: Option<Percept> = None;
        let mut steps = 0;
        let termination = 'episode: loop {
            if steps >= self.config.max_steps {
                break Termination::MaxSteps;
            }
            steps += 1;

            let mut rejected = 0;
            let command = loop {
                let view = StepView::new(
                    &self.template,
                    budget,
                    &transcript,
                    scene.visible_labels(),
                    last_percept.as_ref(),
                );
                let raw = match planner.next_command(&view) {
                    Ok(raw) if !raw.trim().is_empty() => raw,
                    Ok(_) => break 'episode Termination::BackendError,
                    Err(PlannerError::ScriptExhausted(_)) => break 'episode Termination::ScriptExhausted,
                    Err(_) => break 'episode Termination::BackendError,
                };
                let checked = validate(&self.registry, &raw, &scene);
                transcript.push(Role::Ai, raw);
                match checked {
                    Ok((_, validated)) => break validated,
                    Err(_) if rejected < retries => {
                        rejected += 1;
                        transcript.push(Role::Feedback, INVALID_COMMAND_FEEDBACK);
                    }
                    Err(_) => break 'episode Termination::InvalidCommand,
                }
            };

            if command.skill == Skill::Done {
                break Termination::Completed;
            }
            let outcome = apply_action(&mut scene, &command)
                .map_err(|e| AgentError::Config(format!("validated command failed: {e}")))?;
            match outcome.event {
                ActionEvent::PickedUp => {
                    last_percept = None;
                    if mode == TerminationMode::OnFirstPick {
                        break Termination::Completed;
                    }
                }
                ActionEvent::Sensation(sensation) => {
                    let (feedback, sound) = perception.perceive(&sensation, rng);
                    transcript.push(Role::Feedback, feedback.text.clone());
                    last_percept = Some(Percept {
                        object_index: outcome.object_index,
                        label: scene.objects[outcome.object_index].color_label.clone(),
                        skill: outcome.skill,
                        feedback,
                        sound,
                    });
                }
            }
        };

        let success = termination == Termination::Completed && evaluate_success(task, &scene);
        Ok(EpisodeResult {
            success,
            steps,
            termination,
            transcript,
            picked: scene.picked.iter().copied().collect(),
            seed,
        })
    }
}

/// Transcript ordering check: one instruction, feedback only after a
/// perceiving (or rejected) AI turn.
pub fn audit_transcript(transcript: &Transcript) -> bool {
    transcript.audit(&SkillRegistry::default()).is_ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneLog {
    pub objects: Vec<ObjectSpec>,
}

/// One line of the episode JSONL log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode_id: usize,
    pub seed: u64,
    pub scene: SceneLog,
    pub instruction: String,
    pub turns: Transcript,
    pub picked: Vec<usize>,
    pub success: bool,
    pub termination: Termination,
    pub steps: u32,
}

impl EpisodeRecord {
    pub fn new(episode_id: usize, scene: &Scene, task: &Task, result: &EpisodeResult) -> Self {
        EpisodeRecord {
            episode_id,
            seed: result.seed,
            scene: SceneLog {
                objects: scene.objects.clone(),
            },
            instruction: task.instruction.clone(),
            turns: result.transcript.clone(),
            picked: result.picked.clone(),
            success: result.success,
            termination: result.termination,
            steps: result.steps,
        }
    }
}
