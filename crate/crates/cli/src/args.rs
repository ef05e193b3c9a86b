use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pacroute_core::{AnswerExtractor, BoundKind, ScoreKind};
use pacroute_gateway::{LossKind, SplitSpec};
use serde::Serialize;

/// Route between a cheap model and an expensive reasoning model while
/// keeping the risk relative to the expensive model below a tolerance.
#[derive(Debug, Parser)]
#[command(name = "pacroute", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Answer prompts with the cheap model and attach uncertainty scores.
    Score(ScoreArgs),
    /// Partition an input file into calibration and test sets.
    Split(SplitArgs),
    /// Pick the routing threshold on a calibration set.
    Calibrate(CalibrateArgs),
    /// Apply a calibrated policy to scored test records.
    Route(RouteArgs),
    /// Recompute expert-call and token-saving metrics for routed decisions.
    Evaluate(EvaluateArgs),
    /// Label a fixed dataset, querying the expert only where needed.
    Label(LabelArgs),
    /// Check the coverage guarantees on a synthetic population.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score(_) => "score",
            Command::Split(_) => "split",
            Command::Calibrate(_) => "calibrate",
            Command::Route(_) => "route",
            Command::Evaluate(_) => "evaluate",
            Command::Label(_) => "label",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BudgetArgs {
    /// Tolerated risk relative to the expert.
    #[arg(long)]
    pub epsilon: f64,
    /// Allowed failure probability of the guarantee.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Loss between cheap and expert answers (sets the loss range).
    #[arg(long, default_value = "binary")]
    pub loss: LossKind,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PlanArgs {
    /// Probability of querying the expert for a sampled record.
    #[arg(long, default_value_t = 0.5)]
    pub pi: f64,
    /// Number of importance samples; defaults to ceil(n / pi).
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "clt")]
    pub bound: BoundKind,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ExpertArgs {
    /// Endpoint config; needed only when records lack expert labels.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// How final answers are pulled out of model output before comparison.
    #[arg(long, default_value = "identity")]
    pub extractor: AnswerExtractor,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "logits")]
    pub score_kind: ScoreKind,
    /// Confidence queries per item for verbalized scoring.
    #[arg(long, default_value_t = pacroute_gateway::DEFAULT_TRIALS)]
    pub trials: u32,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPreset {
    /// 300 calibration / 200 test.
    Math500,
    /// 500 / 500.
    ZebraLogic,
    /// 450 / 300.
    ArenaHard,
}

impl SplitPreset {
    pub fn spec(self) -> SplitSpec {
        match self {
            SplitPreset::Math500 => SplitSpec::MATH500,
            SplitPreset::ZebraLogic => SplitSpec::ZEBRA_LOGIC,
            SplitPreset::ArenaHard => SplitSpec::ARENA_HARD,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, conflicts_with_all = ["cal_size", "test_size"])]
    pub preset: Option<SplitPreset>,
    #[arg(long, requires = "test_size")]
    pub cal_size: Option<usize>,
    #[arg(long, requires = "cal_size")]
    pub test_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub cal_out: PathBuf,
    #[arg(long)]
    pub test_out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Scored calibration records (JSONL).
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub expert: ExpertArgs,
    /// Where to write the policy JSON.
    #[arg(long)]
    pub output: PathBuf,
    /// Also write the records with any newly fetched expert labels.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RouteArgs {
    /// Scored test records (JSONL).
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub policy: PathBuf,
    #[command(flatten)]
    pub expert: ExpertArgs,
    #[arg(long)]
    pub decisions_out: PathBuf,
    #[arg(long)]
    pub report_out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub decisions: PathBuf,
    /// Test records carrying token counts and, where known, losses.
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub expert: ExpertArgs,
    /// Loss used when labels have to be fetched.
    #[arg(long, default_value = "binary")]
    pub loss: LossKind,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabelArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[command(flatten)]
    pub budget: BudgetArgs,
    #[command(flatten)]
    pub plan: PlanArgs,
    #[command(flatten)]
    pub expert: ExpertArgs,
    /// Final labels (JSONL).
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub policy_out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Scenario TOML; the bundled default is used when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub bound: Option<BoundKind>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Coverage report JSON.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}
