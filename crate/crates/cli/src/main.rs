use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use chatenv::agent::{audit_transcript, Agent, EpisodeConfig, EpisodeRecord, InvalidCommandPolicy};
use chatenv::bench::{
    episode_seed, indistinct_oracle_rate, run_bench, rule_success_rate, uniform_q, worst_case_q,
    write_jsonl, BenchConfig, PlannerSpec, ProbeSet, SceneSource,
};
use chatenv::fixtures;
use chatenv::perception::{ConfusionShape, DescriptionTable, SoundMode, WeightStyle};
use chatenv::planner::{LlmBackendConfig, ReplayPlanner};
use chatenv::prompt::{default_fewshot, PromptTemplate};
use chatenv::world::{Distractors, Material, SceneDocument, SceneParams};
use chatenv::Rational;

#[derive(Parser)]
#[command(name = "chatenv", version, about = "Interactive multimodal pick-up benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a batch of episodes and write a report.
    Run(RunArgs),
    /// Closed-form success rate of the sound-only rule planner.
    Baseline(BaselineArgs),
    /// Drive one episode from a script of planner outputs.
    Replay(ReplayArgs),
    /// Best achievable rate when sounds are described only qualitatively.
    Ceiling(CeilingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum PlannerArg {
    Llm,
    Rule,
    Random,
    Replay,
    Map,
}

#[derive(Clone, Copy, ValueEnum)]
enum SoundArg {
    Distinct,
    Indistinct,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConfusionArg {
    Uniform,
    Worst,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Numeric,
    Qualitative,
}

impl From<SoundArg> for SoundMode {
    fn from(a: SoundArg) -> Self {
        match a {
            SoundArg::Distinct => SoundMode::Distinct,
            SoundArg::Indistinct => SoundMode::Indistinct,
        }
    }
}

impl From<ConfusionArg> for ConfusionShape {
    fn from(a: ConfusionArg) -> Self {
        match a {
            ConfusionArg::Uniform => ConfusionShape::Uniform,
            ConfusionArg::Worst => ConfusionShape::WorstCase,
        }
    }
}

impl From<WeightArg> for WeightStyle {
    fn from(a: WeightArg) -> Self {
        match a {
            WeightArg::Numeric => WeightStyle::Numeric,
            WeightArg::Qualitative => WeightStyle::Qualitative,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct PolicyArg(InvalidCommandPolicy);

impl FromStr for PolicyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fail" => Ok(PolicyArg(InvalidCommandPolicy::FailFast)),
            _ => match s.strip_prefix("retry:").map(str::parse::<u32>) {
                Some(Ok(k)) => Ok(PolicyArg(InvalidCommandPolicy::Retry(k))),
                _ => Err(format!("expected `fail` or `retry:K`, got `{s}`")),
            },
        }
    }
}

#[derive(Clone, Debug)]
enum QArg {
    Value(f64),
    Worst,
    Uniform,
}

impl FromStr for QArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "worst" => Ok(QArg::Worst),
            "uniform" => Ok(QArg::Uniform),
            _ => s
                .parse::<f64>()
                .map(QArg::Value)
                .map_err(|_| format!("expected a probability, `worst` or `uniform`, got `{s}`")),
        }
    }
}

#[derive(Args)]
struct SensingArgs {
    #[arg(long, value_enum, default_value = "distinct")]
    sound_mode: SoundArg,
    #[arg(long, value_enum, default_value = "uniform")]
    confusion: ConfusionArg,
    #[arg(long, value_enum, default_value = "numeric")]
    weight_style: WeightArg,
    /// Sound classifier accuracy.
    #[arg(long, default_value_t = 0.9333)]
    accuracy: f64,
    #[arg(long, default_value = "fail")]
    invalid_policy: PolicyArg,
    #[arg(long, default_value_t = 20)]
    max_steps: u32,
    /// Context budget in characters.
    #[arg(long, default_value_t = 16_000)]
    budget: usize,
    /// Description table (JSON or TOML).
    #[arg(long)]
    table: Option<PathBuf>,
    /// Guidelines/preamble text file.
    #[arg(long)]
    preamble: Option<PathBuf>,
    /// Few-shot episodes file.
    #[arg(long)]
    fewshot: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "rule")]
    planner: PlannerArg,
    #[arg(long, default_value_t = 50)]
    episodes: usize,
    #[arg(long, default_value_t = 3)]
    objects: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "glass")]
    target: Material,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Planner script (replay planner).
    #[arg(long)]
    script: Option<PathBuf>,
    /// Fixed scene document (JSON) instead of generated scenes.
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Remote model name.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    log: Option<PathBuf>,
    #[command(flatten)]
    sensing: SensingArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    p: f64,
    /// Probability a non-target reads as the target, or `worst` / `uniform`.
    #[arg(long, default_value = "worst")]
    q: QArg,
    #[arg(long, default_value_t = 3)]
    objects: usize,
}

#[derive(Args)]
struct ReplayArgs {
    /// One planner output per line.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Scene document (JSON); defaults to the glass-block scene.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "indistinct")]
    sound_mode: SoundArg,
    #[arg(long, value_enum, default_value = "qualitative")]
    weight_style: WeightArg,
    /// Also write the episode record as JSON.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CeilingArgs {
    #[arg(long, default_value = "glass")]
    target: Material,
    /// Comma-separated fixed distractors; sampled when omitted.
    #[arg(long, value_delimiter = ',')]
    distractors: Vec<Material>,
    #[arg(long, default_value_t = 3)]
    objects: usize,
    /// Also probe qualitative weight.
    #[arg(long)]
    weight: bool,
    /// Print the exact fraction.
    #[arg(long)]
    exact: bool,
    #[arg(long)]
    table: Option<PathBuf>,
}

fn load_table(path: Option<&Path>) -> Result<DescriptionTable> {
    match path {
        Some(p) => DescriptionTable::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(DescriptionTable::default()),
    }
}

fn load_scene(path: &Path) -> Result<SceneDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_script(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(ReplayPlanner::from_text(&text).script().to_vec())
}

fn build_agent(s: &SensingArgs) -> Result<Agent> {
    let mut config = EpisodeConfig {
        max_steps: s.max_steps,
        invalid_policy: s.invalid_policy.0,
        context_budget: s.budget,
        ..EpisodeConfig::default()
    };
    config.sensing.sound_mode = s.sound_mode.into();
    config.sensing.confusion = s.confusion.into();
    config.sensing.weight_style = s.weight_style.into();
    config.sensing.accuracy = s.accuracy;
    let mut agent = Agent::new(config);
    agent.table = load_table(s.table.as_deref())?.into();
    agent.template = match (&s.preamble, &s.fewshot) {
        (Some(pre), shots) => PromptTemplate::from_files(pre, shots.as_deref())?,
        (None, Some(shots)) => {
            let text = std::fs::read_to_string(shots)?;
            PromptTemplate::new(&agent.registry, chatenv::prompt::parse_fewshot(&text)?)
        }
        (None, None) => PromptTemplate::new(&agent.registry, default_fewshot()),
    };
    Ok(agent)
}

fn run(args: RunArgs) -> Result<()> {
    let agent = build_agent(&args.sensing)?;
    let planner = match args.planner {
        PlannerArg::Llm => {
            let mut cfg = LlmBackendConfig::from_env();
            if let Some(m) = args.model {
                cfg.model = m;
            }
            PlannerSpec::Llm(cfg)
        }
        PlannerArg::Rule => PlannerSpec::Rule,
        PlannerArg::Random => PlannerSpec::Random,
        PlannerArg::Replay => {
            let Some(path) = &args.script else {
                bail!("--planner replay needs --script");
            };
            PlannerSpec::Replay(load_script(path)?)
        }
        PlannerArg::Map => PlannerSpec::Map(ProbeSet {
            weight: matches!(args.sensing.weight_style, WeightArg::Qualitative),
            ..ProbeSet::SOUND_AND_HAPTICS
        }),
    };
    let scenes = match &args.scene {
        Some(path) => SceneSource::Fixed(load_scene(path)?),
        None => {
            let mut params = SceneParams {
                n_objects: args.objects,
                target: args.target,
                ..SceneParams::default()
            };
            params.variants = agent.table.variant_counts();
            SceneSource::Generated(params)
        }
    };
    let mut config = BenchConfig::new(planner, agent, scenes);
    config.episodes = args.episodes;
    config.master_seed = args.seed;
    config.jobs = args.jobs;
    config.log_path = args.log;
    config.report_path = args.report.clone();
    let report = run_bench(&config)?;
    if args.report.is_none() {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{} / {} succeeded ({:.4}, 95% CI [{:.4}, {:.4}])",
            report.successes,
            report.completed,
            report.success_rate,
            report.wilson_95.0,
            report.wilson_95.1
        );
    }
    Ok(())
}

fn baseline(args: BaselineArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.p) {
        bail!("p must lie in [0, 1]");
    }
    if args.objects < 1 {
        bail!("at least one object");
    }
    let q = match args.q {
        QArg::Value(q) if (0.0..=1.0).contains(&q) => q,
        QArg::Value(_) => bail!("q must lie in [0, 1]"),
        QArg::Worst => worst_case_q(&args.p),
        QArg::Uniform => uniform_q(&args.p),
    };
    println!("{:.6}", rule_success_rate(&args.p, &q, args.objects));
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let script = match &args.script {
        Some(p) => load_script(p)?,
        None => fixtures::glass_block_script(),
    };
    let doc = match &args.scene {
        Some(p) => load_scene(p)?,
        None => fixtures::glass_block_document(),
    };
    let (scene, task) = doc.into_parts()?;
    let mut config = EpisodeConfig::default();
    config.sensing.sound_mode = args.sound_mode.into();
    config.sensing.weight_style = args.weight_style.into();
    let agent = Agent::new(config);
    let mut planner = ReplayPlanner::new(script);
    let seed = episode_seed(args.seed, 0);
    let mut rng = chatenv::bench::stream_rng(seed, chatenv::bench::Stream::Perception);
    let result = agent.run_episode(scene.clone(), &task, &mut planner, &mut rng, seed)?;
    print!("{}", result.transcript);
    println!(
        "success={} termination={:?} steps={} audit={}",
        result.success,
        result.termination,
        result.steps,
        audit_transcript(&result.transcript)
    );
    if let Some(path) = &args.log {
        write_jsonl(path, &[EpisodeRecord::new(0, &scene, &task, &result)])?;
    }
    Ok(())
}

fn ceiling(args: CeilingArgs) -> Result<()> {
    let table = load_table(args.table.as_deref())?;
    let distractors = if args.distractors.is_empty() {
        Distractors::Sampled
    } else {
        Distractors::Fixed(args.distractors.clone())
    };
    let n_objects = if args.distractors.is_empty() {
        args.objects
    } else {
        args.distractors.len() + 1
    };
    let params = SceneParams {
        n_objects,
        target: args.target,
        distractors,
        variants: table.variant_counts(),
        ..SceneParams::default()
    };
    let probes = ProbeSet {
        weight: args.weight,
        ..ProbeSet::SOUND_AND_HAPTICS
    };
    if args.exact {
        let r: Rational = indistinct_oracle_rate(&table, &params, probes)?;
        println!("{r}");
    } else {
        let r: f64 = indistinct_oracle_rate(&table, &params, probes)?;
        println!("{r:.6}");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Cmd::Run(a) => run(a),
        Cmd::Baseline(a) => baseline(a),
        Cmd::Replay(a) => replay(a),
        Cmd::Ceiling(a) => ceiling(a),
    }
}
