use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;

use nds_core::search::{InsertionOrder, PolicyChoice};
use nds_core::{CapacityProfile, LocationMode, SearchConfig, Variant};

use crate::error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "nds", version, about = "Neural deconstruction search for vehicle routing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate seeded instance sets.
    Generate(GenerateArgs),
    /// Train a deconstruction policy.
    Train(TrainArgs),
    /// Solve one instance or every instance in a directory.
    Solve(SolveArgs),
    /// Solve a directory and summarize objective, gap and time.
    Eval(EvalArgs),
    /// Run canned ablation studies.
    Ablate(AblateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Solve(_) => "solve",
            Command::Eval(_) => "eval",
            Command::Ablate(_) => "ablate",
        }
    }
}

/// Parse a lowercase serde enum name, e.g. `cvrp` or `clustered`.
fn lower<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|e| e.to_string())
}

pub fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    match s.to_ascii_lowercase().as_str() {
        "cvrp" => Ok(Variant::Cvrp),
        "vrptw" => Ok(Variant::Vrptw),
        "pcvrp" => Ok(Variant::Pcvrp),
        _ => Err(format!("unknown variant {s:?}, expected cvrp, vrptw or pcvrp")),
    }
}

fn parse_location(s: &str) -> std::result::Result<LocationMode, String> {
    lower(s)
}

fn parse_capacity(s: &str) -> std::result::Result<CapacityProfile, String> {
    lower(s)
}

#[derive(Debug, Clone, Args)]
pub struct InstanceSpecArgs {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_parser = parse_location)]
    pub location: Option<LocationMode>,
    #[arg(long, value_parser = parse_capacity)]
    pub capacity: Option<CapacityProfile>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// JSON file with `generator` and `count` fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub spec: InstanceSpecArgs,
    /// Number of instances.
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSON training configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub spec: InstanceSpecArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub instances_per_epoch: Option<usize>,
    /// Iterations per instance.
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Rollouts per solution.
    #[arg(long)]
    pub rollouts: Option<usize>,
    /// Warm-up improvement steps per instance.
    #[arg(long)]
    pub warmup_steps: Option<usize>,
    /// Customers removed per deconstruction.
    #[arg(long)]
    pub removals: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub embed_dim: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ff_dim: Option<usize>,
    #[arg(long)]
    pub no_mpl: bool,
    #[arg(long)]
    pub no_tel: bool,
    #[arg(long)]
    pub validation_dir: Option<PathBuf>,
    #[arg(long)]
    pub validation_count: Option<usize>,
    #[arg(long)]
    pub checkpoint_every: Option<usize>,
    /// Continue from this checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Neural,
    Heuristic,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderKind {
    PolicyThenRandom,
    RandomOnly,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// JSON search configuration; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Wall-clock seconds per instance.
    #[arg(long, alias = "time-limit-per-instance")]
    pub time_limit: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub augmentations: Option<usize>,
    #[arg(long)]
    pub rollouts: Option<usize>,
    #[arg(long)]
    pub reconstructions: Option<usize>,
    #[arg(long)]
    pub removals: Option<usize>,
    #[arg(long)]
    pub lambda_start: Option<f64>,
    #[arg(long)]
    pub lambda_end: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, value_enum)]
    pub insertion_order: Option<OrderKind>,
}

impl SearchArgs {
    /// Resolve the search configuration: file (if any), then flags.
    pub fn resolve(&self, seed: Option<u64>) -> Result<SearchConfig> {
        let mut cfg: SearchConfig = match &self.config {
            Some(p) => read_json(p)?,
            None => SearchConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = v; } )* };
        }
        set!(max_iter, augmentations, rollouts, reconstructions, removals, lambda_start, lambda_end, delta);
        if let Some(t) = self.time_limit {
            cfg.time_limit = Some(t);
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = self.insertion_order {
            cfg.insertion_order = match o {
                OrderKind::PolicyThenRandom => InsertionOrder::PolicyThenRandom,
                OrderKind::RandomOnly => InsertionOrder::RandomOnly,
            };
        }
        match (self.policy, &self.checkpoint) {
            (Some(PolicyKind::Heuristic), _) => cfg.policy = PolicyChoice::Heuristic,
            (Some(PolicyKind::Random), _) => cfg.policy = PolicyChoice::Random,
            (Some(PolicyKind::Neural), Some(c)) | (None, Some(c)) => cfg.policy = PolicyChoice::Neural { checkpoint: c.clone() },
            (Some(PolicyKind::Neural), None) => {
                if !matches!(cfg.policy, PolicyChoice::Neural { .. }) {
                    return Err(CliError::Usage("--policy neural needs --checkpoint".into()));
                }
            }
            (None, None) => {}
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance file or directory of instance files. Without it, one
    /// instance is generated from the generator flags.
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[command(flatten)]
    pub spec: InstanceSpecArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of instance files.
    #[arg(long)]
    pub instances: PathBuf,
    /// CSV with `instance,objective` columns to compute gaps against.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Study {
    /// Message-passing and tour-encoding layers on and off.
    MplTel,
    /// Policy-then-random versus random-only insertion order.
    InsertionOrder,
    /// Neural versus heuristic deconstruction.
    Policy,
    All,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub study: Study,
    /// Directory of instance files; otherwise instances are generated.
    #[arg(long)]
    pub instances: Option<PathBuf>,
    #[command(flatten)]
    pub spec: InstanceSpecArgs,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Checkpoints of models trained without the layers named in the flag.
    #[arg(long)]
    pub checkpoint_no_mpl: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_no_tel: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint_no_mpl_tel: Option<PathBuf>,
    #[command(flatten)]
    pub search: SearchArgs,
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
}

pub fn read_json<T: DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}
