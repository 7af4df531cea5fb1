//! Batch experiments: seeded episodes, aggregation and analytic baselines.

mod baseline;
mod map_planner;
mod oracle;

pub use baseline::{
    baseline_rate, chance_rate, rule_success_rate, uniform_q, wilson_interval, worst_case_q,
};
pub use map_planner::MapPlanner;
pub use oracle::{
    indistinct_oracle_rate, indistinct_oracle_rate_capped, phrase_likelihood, scene_layouts,
    OracleError, ProbeSet, DEFAULT_ENUMERATION_CAP,
};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{Agent, AgentError, EpisodeRecord, Termination};
use crate::perception::{ConfusionShape, SoundMode, WeightStyle};
use crate::planner::{
    LlmBackendConfig, LlmClient, LlmPlanner, Planner, PlannerKind, RandomPlanner, ReplayPlanner,
    RulePlanner,
};
use crate::world::{Material, SceneDocument, SceneParams, Task, WorldError};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid bench configuration: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("building thread pool: {0}")]
    Pool(String),
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Stable per-episode seed.
pub fn episode_seed(master_seed: u64, episode: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(episode as u64))
}

/// Independent random stream of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Perception = 1,
    Planner = 2,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerSpec {
    Llm(LlmBackendConfig),
    Rule,
    Random,
    Replay(Vec<String>),
    /// Posterior-maximising prober used to check the indistinct ceiling.
    Map(ProbeSet),
}

impl PlannerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PlannerSpec::Llm(_) => "llm",
            PlannerSpec::Rule => "rule",
            PlannerSpec::Random => "random",
            PlannerSpec::Replay(_) => "replay",
            PlannerSpec::Map(_) => "map",
        }
    }

    pub fn kind(&self) -> Option<PlannerKind> {
        match self {
            PlannerSpec::Llm(_) => Some(PlannerKind::RemoteLlm),
            PlannerSpec::Rule => Some(PlannerKind::Rule),
            PlannerSpec::Random => Some(PlannerKind::Random),
            PlannerSpec::Replay(_) => Some(PlannerKind::Replay),
            PlannerSpec::Map(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Generated(SceneParams),
    Fixed(SceneDocument),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub episodes: usize,
    pub master_seed: u64,
    pub planner: PlannerSpec,
    pub agent: Agent,
    pub scenes: SceneSource,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
    pub log_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

impl BenchConfig {
    pub fn new(planner: PlannerSpec, agent: Agent, scenes: SceneSource) -> Self {
        BenchConfig {
            episodes: 50,
            master_seed: 0,
            planner,
            agent,
            scenes,
            jobs: None,
            log_path: None,
            report_path: None,
        }
    }

    fn n_objects(&self) -> usize {
        match &self.scenes {
            SceneSource::Generated(p) => p.n_objects,
            SceneSource::Fixed(doc) => doc.objects.len(),
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        if self.episodes < 1 {
            return Err(BenchError::Config("episodes must be at least 1".into()));
        }
        self.agent.validate_config()?;
        let mode = self.agent.config.sensing.sound_mode;
        match (&self.planner, mode) {
            (PlannerSpec::Rule, SoundMode::Indistinct) => Err(BenchError::Config(
                "the rule planner needs distinct sound descriptions".into(),
            )),
            (PlannerSpec::Map(_), SoundMode::Distinct) => Err(BenchError::Config(
                "the MAP planner reads indistinct sound descriptions".into(),
            )),
            (PlannerSpec::Map(p), _)
                if p.weight && self.agent.config.sensing.weight_style != WeightStyle::Qualitative =>
            {
                Err(BenchError::Config("the MAP planner needs qualitative weights".into()))
            }
            (PlannerSpec::Map(_), _) if !matches!(self.scenes, SceneSource::Generated(_)) => Err(
                BenchError::Config("the MAP planner needs generated scenes for its prior".into()),
            ),
            (PlannerSpec::Replay(s), _) if s.is_empty() => {
                Err(BenchError::Config("replay script is empty".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub chance: f64,
    /// Closed-form rate of the rule planner for this sensor, when applicable.
    pub rule: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub planner: String,
    pub sound_mode: SoundMode,
    pub confusion: ConfusionShape,
    pub weight_style: WeightStyle,
    pub accuracy: f64,
    pub n_objects: usize,
    pub master_seed: u64,
    pub episodes: usize,
    pub completed: usize,
    /// Backend failures, left out of the success rate.
    pub excluded: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub wilson_95: (f64, f64),
    pub mean_steps: f64,
    pub terminations: BTreeMap<Termination, usize>,
    pub baselines: Baselines,
}

struct Shared {
    llm: Option<Arc<LlmClient>>,
    layouts: Option<Arc<Vec<Vec<Material>>>>,
}

fn build_planner(
    spec: &PlannerSpec,
    shared: &Shared,
    config: &BenchConfig,
    labels: Vec<String>,
    task: &Task,
    seed: u64,
) -> Result<Box<dyn Planner>, BenchError> {
    let target = || {
        task.target_material()
            .ok_or_else(|| BenchError::Config(format!("{} planner needs a material target", spec.name())))
    };
    Ok(match spec {
        PlannerSpec::Llm(_) => Box::new(LlmPlanner::new(
            shared.llm.clone().expect("client built for llm planner"),
        )),
        PlannerSpec::Rule => Box::new(RulePlanner::new(
            labels,
            target()?,
            &mut stream_rng(seed, Stream::Planner),
        )),
        PlannerSpec::Random => Box::new(RandomPlanner::new(stream_rng(seed, Stream::Planner))),
        PlannerSpec::Replay(script) => Box::new(ReplayPlanner::new(script.clone())),
        PlannerSpec::Map(probes) => Box::new(MapPlanner::new(
            labels,
            config.agent.table.clone(),
            shared.layouts.clone().expect("layouts built for map planner"),
            target()?,
            *probes,
        )),
    })
}

fn run_one(config: &BenchConfig, shared: &Shared, episode: usize) -> Result<EpisodeRecord, BenchError> {
    let seed = episode_seed(config.master_seed, episode);
    let (scene, task) = match &config.scenes {
        SceneSource::Generated(params) => params.generate(seed)?,
        SceneSource::Fixed(doc) => doc.clone().into_parts()?,
    };
    let labels = scene.objects.iter().map(|o| o.color_label.clone()).collect();
    let mut planner = build_planner(&config.planner, shared, config, labels, &task, seed)?;
    let mut rng = stream_rng(seed, Stream::Perception);
    let result = config
        .agent
        .run_episode(scene.clone(), &task, planner.as_mut(), &mut rng, seed)?;
    Ok(EpisodeRecord::new(episode, &scene, &task, &result))
}

/// Run every episode; records come back ordered by episode id regardless of
/// scheduling.
pub fn run_episodes(config: &BenchConfig) -> Result<Vec<EpisodeRecord>, BenchError> {
    config.validate()?;
    let shared = Shared {
        llm: match &config.planner {
            PlannerSpec::Llm(cfg) => Some(Arc::new(LlmClient::new(cfg.clone()))),
            _ => None,
        },
        layouts: match (&config.planner, &config.scenes) {
            (PlannerSpec::Map(_), SceneSource::Generated(p)) => Some(Arc::new(scene_layouts(p)?)),
            _ => None,
        },
    };
    let work = || {
        (0..config.episodes)
            .into_par_iter()
            .map(|i| run_one(config, &shared, i))
            .collect::<Result<Vec<_>, _>>()
    };
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BenchError::Pool(e.to_string()))?
            .install(work),
        None => work(),
    }
}

/// Aggregate records into a report.
pub fn summarize(config: &BenchConfig, records: &[EpisodeRecord]) -> BenchReport {
    let mut terminations = BTreeMap::new();
    for r in records {
        *terminations.entry(r.termination).or_insert(0) += 1;
    }
    let excluded = terminations.get(&Termination::BackendError).copied().unwrap_or(0);
    let completed = records.len() - excluded;
    let successes = records.iter().filter(|r| r.success).count();
    let success_rate = if completed == 0 {
        0.0
    } else {
        successes as f64 / completed as f64
    };
    let mean_steps = if records.is_empty() {
        0.0
    } else {
        records.iter().map(|r| r.steps as f64).sum::<f64>() / records.len() as f64
    };

    let sensing = config.agent.config.sensing;
    let n = config.n_objects();
    let (p, q) = match sensing.sound_mode {
        SoundMode::Distinct => {
            let p = sensing.accuracy;
            let q = match sensing.confusion {
                ConfusionShape::Uniform => uniform_q(&p),
                ConfusionShape::WorstCase => worst_case_q(&p),
            };
            (Some(p), Some(q))
        }
        SoundMode::Indistinct => (None, None),
    };
    let rule = p.zip(q).map(|(p, q)| rule_success_rate(&p, &q, n));

    BenchReport {
        planner: config.planner.name().to_string(),
        sound_mode: sensing.sound_mode,
        confusion: sensing.confusion,
        weight_style: sensing.weight_style,
        accuracy: sensing.accuracy,
        n_objects: n,
        master_seed: config.master_seed,
        episodes: records.len(),
        completed,
        excluded,
        successes,
        success_rate,
        wilson_95: wilson_interval(successes, completed),
        mean_steps,
        terminations,
        baselines: Baselines {
            chance: chance_rate(n),
            rule,
            p,
            q,
        },
    }
}

fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One JSON object per line, in episode order.
pub fn write_jsonl(path: &std::path::Path, records: &[EpisodeRecord]) -> Result<(), BenchError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("records serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Run, log and aggregate.
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport, BenchError> {
    let records = run_episodes(config)?;
    if let Some(path) = &config.log_path {
        write_jsonl(path, &records)?;
    }
    let report = summarize(config, &records);
    if let Some(path) = &config.report_path {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(path, text + "\n").map_err(io_err(path))?;
    }
    Ok(report)
}
