use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nds_core::io::{load_instance, save_instance, save_solution};
use nds_core::search::{HeuristicPolicy, InsertionOrder, PolicyChoice, RandomPolicy};
use nds_core::{asa_search, check_feasibility, DeconstructionPolicy, GeneratorSpec, Instance, SearchConfig, Variant};
use nds_policy::{load_checkpoint, train, Checkpoint, NeuralPolicy, TrainConfig, TrainOutputs, Trainer};

use crate::args::{read_json, AblateArgs, Command, EvalArgs, GenerateArgs, InstanceSpecArgs, SolveArgs, Study, TrainArgs};
use crate::error::{usage, Result};
use crate::report::{format_percent, gap, read_reference, write_csv};

/// State collected while a subcommand runs, reported in the manifest.
#[derive(Debug, Default)]
pub struct Run {
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub artifacts: Vec<PathBuf>,
}

impl Run {
    fn record(&mut self, path: PathBuf) {
        self.artifacts.push(path);
    }

    fn snapshot<T: Serialize>(&mut self, out_dir: &Path, config: &T) -> Result<()> {
        self.config = serde_json::to_value(config)?;
        let path = out_dir.join("config.json");
        fs::write(&path, serde_json::to_string_pretty(config)? + "\n")?;
        self.record(path);
        Ok(())
    }
}

pub fn out_dir(cmd: &Command) -> &Path {
    match cmd {
        Command::Generate(a) => &a.out_dir,
        Command::Train(a) => &a.out_dir,
        Command::Solve(a) => &a.out_dir,
        Command::Eval(a) => &a.out_dir,
        Command::Ablate(a) => &a.out_dir,
    }
}

pub fn execute(cmd: &Command, run: &mut Run) -> Result<()> {
    match cmd {
        Command::Generate(a) => generate(a, run),
        Command::Train(a) => train_cmd(a, run),
        Command::Solve(a) => solve(a, run),
        Command::Eval(a) => eval(a, run),
        Command::Ablate(a) => ablate(a, run),
    }
}

fn apply_spec(args: &InstanceSpecArgs, mut spec: GeneratorSpec) -> GeneratorSpec {
    if let Some(v) = args.variant {
        spec.variant = v;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if let Some(l) = args.location {
        spec.location = l;
    }
    if let Some(c) = args.capacity {
        spec.capacity = c;
    }
    spec
}

fn default_spec() -> GeneratorSpec {
    GeneratorSpec::new(Variant::Cvrp, 100, 0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenerateConfig {
    generator: GeneratorSpec,
    #[serde(default = "one")]
    count: usize,
}

fn one() -> usize {
    1
}

#[derive(Serialize)]
struct SetEntry<'a> {
    path: String,
    seed: u64,
    spec: &'a GeneratorSpec,
}

fn instance_file_name(spec: &GeneratorSpec, index: usize) -> String {
    format!("{}-n{}-{index:04}.json", spec.variant, spec.n)
}

fn generate(a: &GenerateArgs, run: &mut Run) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => read_json::<GenerateConfig>(p)?,
        None => GenerateConfig { generator: default_spec(), count: 1 },
    };
    cfg.generator = apply_spec(&a.spec, cfg.generator);
    if let Some(c) = a.count {
        cfg.count = c;
    }
    if cfg.count == 0 || cfg.generator.n == 0 {
        return Err(usage("count and n must be positive"));
    }
    run.seed = Some(cfg.generator.seed);
    run.snapshot(&a.out_dir, &cfg)?;
    let dir = a.out_dir.join("instances");
    fs::create_dir_all(&dir)?;
    let specs: Vec<GeneratorSpec> = (0..cfg.count as u64).map(|i| cfg.generator.derived(i)).collect();
    let paths: Vec<PathBuf> = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| {
            let path = dir.join(instance_file_name(&cfg.generator, i));
            save_instance(&spec.generate()?, &path)?;
            Ok(path)
        })
        .collect::<Result<_>>()?;
    let entries: Vec<SetEntry> = specs
        .iter()
        .zip(&paths)
        .map(|(spec, p)| SetEntry { path: format!("instances/{}", p.file_name().unwrap().to_string_lossy()), seed: spec.seed, spec })
        .collect();
    let set = a.out_dir.join("instance-set.json");
    fs::write(&set, serde_json::to_string_pretty(&entries)? + "\n")?;
    info!("wrote {} instances to {}", paths.len(), dir.display());
    run.artifacts.extend(paths);
    run.record(set);
    Ok(())
}

fn train_cmd(a: &TrainArgs, run: &mut Run) -> Result<()> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    cfg.generator = apply_spec(&a.spec, cfg.generator);
    cfg.model.variant = cfg.generator.variant;
    if let Some(s) = a.spec.seed {
        cfg.seed = s;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = a.$f { cfg.$f = v; } )* };
    }
    set!(epochs, instances_per_epoch, iterations, rollouts, warmup_steps, learning_rate, batch, validation_count, checkpoint_every);
    if let Some(m) = a.removals {
        cfg.model.removals = m;
        cfg.validation_search.removals = m;
    }
    if let Some(d) = a.embed_dim {
        cfg.model.embed_dim = d;
    }
    if let Some(h) = a.heads {
        cfg.model.heads = h;
    }
    if let Some(f) = a.ff_dim {
        cfg.model.ff_dim = f;
    }
    cfg.model.use_mpl &= !a.no_mpl;
    cfg.model.use_tel &= !a.no_tel;
    if let Some(d) = &a.validation_dir {
        cfg.validation_dir = Some(d.clone());
    }
    cfg.validate().map_err(usage)?;
    if let Some(d) = &cfg.validation_dir {
        if !d.is_dir() {
            return Err(usage(format!("validation directory {} does not exist", d.display())));
        }
    }
    run.seed = Some(cfg.seed);
    run.snapshot(&a.out_dir, &cfg)?;
    let trainer = match &a.resume {
        Some(p) => {
            let ck: Checkpoint = load_checkpoint(p, Some(&cfg.model)).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            Trainer::resume(cfg.clone(), ck)?
        }
        None => Trainer::new(cfg.clone())?,
    };
    let outputs = TrainOutputs { dir: a.out_dir.clone() };
    let (trainer, rows) = train(trainer, Some(&outputs))?;
    for r in &rows {
        println!(
            "epoch {} instances {} mean_reward {:.6} validation {:.6}",
            r.epoch, r.instances_seen, r.mean_reward, r.mean_validation_objective
        );
    }
    run.record(outputs.metrics());
    run.record(outputs.latest_checkpoint());
    for e in 1..=trainer.progress().epochs_done {
        let p = outputs.epoch_checkpoint(e);
        if p.exists() {
            run.record(p);
        }
    }
    Ok(())
}

/// Named instances from a file or a directory of `*.json` files.
fn load_named(path: &Path) -> Result<Vec<(String, Instance)>> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let load = |p: &Path| load_instance(p).map_err(|e| usage(format!("{}: {e}", p.display())));
    if path.is_file() {
        return Ok(vec![(stem(path), load(path)?)]);
    }
    if !path.is_dir() {
        return Err(usage(format!("{} does not exist", path.display())));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(usage(format!("no instance files in {}", path.display())));
    }
    files.iter().map(|p| Ok((stem(p), load(p)?))).collect()
}

fn build_policy(cfg: &SearchConfig, variant: Variant) -> Result<Box<dyn DeconstructionPolicy>> {
    Ok(match &cfg.policy {
        PolicyChoice::Heuristic => Box::new(HeuristicPolicy::default()),
        PolicyChoice::Random => Box::new(RandomPolicy),
        PolicyChoice::Neural { checkpoint } => Box::new(load_neural(checkpoint, variant)?),
    })
}

fn load_neural(path: &Path, variant: Variant) -> Result<NeuralPolicy> {
    let ck = load_checkpoint(path, None).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    if ck.policy.config().variant != variant {
        return Err(usage(format!("checkpoint {} is for {}, instances are {variant}", path.display(), ck.policy.config().variant)));
    }
    Ok(ck.policy)
}

fn common_variant(instances: &[(String, Instance)]) -> Result<Variant> {
    let v = instances[0].1.variant();
    if instances.iter().any(|(_, i)| i.variant() != v) {
        return Err(usage("instances mix problem variants"));
    }
    Ok(v)
}

#[derive(Debug, Serialize)]
struct SolveRow {
    instance: String,
    objective: f64,
    feasible: bool,
    iterations: usize,
    exchanges: usize,
    time_seconds: f64,
}

struct Solved {
    row: SolveRow,
    solution: PathBuf,
    trace: PathBuf,
}

fn solve_all(
    instances: &[(String, Instance)],
    cfg: &SearchConfig,
    policy: &dyn DeconstructionPolicy,
    dir: &Path,
) -> Result<Vec<Solved>> {
    fs::create_dir_all(dir)?;
    instances
        .par_iter()
        .map(|(name, inst)| {
            let out = asa_search(inst, cfg, policy)?;
            let solution = dir.join(format!("{name}.solution.json"));
            save_solution(inst, &out.best, &solution)?;
            let trace = dir.join(format!("{name}.trace.csv"));
            write_csv(&trace, &out.trace)?;
            info!("{name}: objective {:.6} after {} iterations", out.best.cost(), out.iterations);
            Ok(Solved {
                row: SolveRow {
                    instance: name.clone(),
                    objective: out.best.cost(),
                    feasible: check_feasibility(inst, &out.best).is_empty(),
                    iterations: out.iterations,
                    exchanges: out.exchanges,
                    time_seconds: out.elapsed_seconds,
                },
                solution,
                trace,
            })
        })
        .collect()
}

fn solve(a: &SolveArgs, run: &mut Run) -> Result<()> {
    let instances = match &a.instance {
        Some(p) => load_named(p)?,
        None => {
            let spec = apply_spec(&a.spec, default_spec());
            let inst = spec.generate()?;
            vec![(format!("{}-n{}-s{}", spec.variant, spec.n, spec.seed), inst)]
        }
    };
    let cfg = a.search.resolve(a.spec.seed)?;
    run.seed = Some(cfg.seed);
    run.snapshot(&a.out_dir, &cfg)?;
    let policy = build_policy(&cfg, common_variant(&instances)?)?;
    let solved = solve_all(&instances, &cfg, policy.as_ref(), &a.out_dir)?;
    for s in &solved {
        println!("{} objective {:.6} feasible {}", s.row.instance, s.row.objective, s.row.feasible);
    }
    let summary = a.out_dir.join("solve-summary.csv");
    let rows: Vec<&SolveRow> = solved.iter().map(|s| &s.row).collect();
    write_csv(&summary, &rows)?;
    for s in solved {
        run.record(s.solution);
        run.record(s.trace);
    }
    run.record(summary);
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalRow {
    instance: String,
    objective: f64,
    reference: Option<f64>,
    gap_percent: Option<String>,
    feasible: bool,
    time_seconds: f64,
}

#[derive(Debug, Serialize)]
struct EvalSummary {
    instances: usize,
    mean_objective: f64,
    mean_gap_percent: Option<String>,
    mean_time_seconds: f64,
}

fn eval(a: &EvalArgs, run: &mut Run) -> Result<()> {
    let instances = load_named(&a.instances)?;
    let reference = a.reference.as_deref().map(read_reference).transpose()?;
    let cfg = a.search.resolve(a.seed)?;
    run.seed = Some(cfg.seed);
    run.snapshot(&a.out_dir, &cfg)?;
    let policy = build_policy(&cfg, common_variant(&instances)?)?;
    let solved = solve_all(&instances, &cfg, policy.as_ref(), &a.out_dir.join("solutions"))?;
    let mut rows = Vec::with_capacity(solved.len());
    let mut gaps = Vec::new();
    for s in &solved {
        let r = reference.as_ref().and_then(|m| m.get(&s.row.instance).copied());
        if reference.is_some() && r.is_none() {
            warn!("no reference objective for {}", s.row.instance);
        }
        let g = r.map(|r| gap(s.row.objective, r));
        gaps.extend(g);
        rows.push(EvalRow {
            instance: s.row.instance.clone(),
            objective: s.row.objective,
            reference: r,
            gap_percent: g.map(format_percent),
            feasible: s.row.feasible,
            time_seconds: s.row.time_seconds,
        });
    }
    let n = rows.len() as f64;
    let summary = EvalSummary {
        instances: rows.len(),
        mean_objective: rows.iter().map(|r| r.objective).sum::<f64>() / n,
        mean_gap_percent: (!gaps.is_empty()).then(|| format_percent(gaps.iter().sum::<f64>() / gaps.len() as f64)),
        mean_time_seconds: rows.iter().map(|r| r.time_seconds).sum::<f64>() / n,
    };
    println!(
        "instances {} mean objective {:.6} mean gap {}% mean time {:.3}s",
        summary.instances,
        summary.mean_objective,
        summary.mean_gap_percent.as_deref().unwrap_or("n/a"),
        summary.mean_time_seconds
    );
    let results = a.out_dir.join("results.csv");
    write_csv(&results, &rows)?;
    let summary_path = a.out_dir.join("summary.csv");
    write_csv(&summary_path, &[summary])?;
    for s in solved {
        run.record(s.solution);
        run.record(s.trace);
    }
    run.record(results);
    run.record(summary_path);
    Ok(())
}

#[derive(Debug, Serialize)]
struct AblationRow {
    study: &'static str,
    setting: String,
    instances: usize,
    mean_objective: f64,
    mean_time_seconds: f64,
}

fn ablate(a: &AblateArgs, run: &mut Run) -> Result<()> {
    let instances = match &a.instances {
        Some(p) => load_named(p)?,
        None => {
            let spec = apply_spec(&a.spec, default_spec());
            (0..a.count as u64)
                .map(|i| Ok((format!("{}-n{}-{i:04}", spec.variant, spec.n), spec.derived(i).generate()?)))
                .collect::<Result<_>>()?
        }
    };
    let variant = common_variant(&instances)?;
    let base = a.search.resolve(a.spec.seed)?;
    let neural = match &base.policy {
        PolicyChoice::Neural { checkpoint } => Some(checkpoint.clone()),
        _ => None,
    };
    let wants = |s: Study| a.study == s || a.study == Study::All;
    let mut settings: Vec<(&'static str, String, SearchConfig)> = Vec::new();
    let with = |policy: PolicyChoice, order: InsertionOrder| SearchConfig { policy, insertion_order: order, ..base.clone() };
    if wants(Study::MplTel) {
        let mut variants = Vec::new();
        if let Some(c) = &neural {
            variants.push(("mpl+tel", c.clone()));
        }
        for (label, p) in [("no-mpl", &a.checkpoint_no_mpl), ("no-tel", &a.checkpoint_no_tel), ("no-mpl-tel", &a.checkpoint_no_mpl_tel)] {
            if let Some(p) = p {
                variants.push((label, p.clone()));
            }
        }
        if variants.is_empty() && a.study == Study::MplTel {
            return Err(usage("the mpl-tel study needs --checkpoint and/or --checkpoint-no-* flags"));
        }
        for (label, ck) in variants {
            settings.push(("mpl-tel", label.into(), with(PolicyChoice::Neural { checkpoint: ck }, base.insertion_order)));
        }
    }
    if wants(Study::InsertionOrder) {
        match &neural {
            Some(c) => {
                settings.push(("insertion-order", "policy-then-random".into(), with(PolicyChoice::Neural { checkpoint: c.clone() }, InsertionOrder::PolicyThenRandom)));
                settings.push(("insertion-order", "random-only".into(), with(PolicyChoice::Neural { checkpoint: c.clone() }, InsertionOrder::RandomOnly)));
            }
            None if a.study == Study::InsertionOrder => return Err(usage("the insertion-order study needs --checkpoint")),
            None => warn!("skipping the insertion-order study: no --checkpoint"),
        }
    }
    if wants(Study::Policy) {
        if let Some(c) = &neural {
            settings.push(("policy", "neural".into(), with(PolicyChoice::Neural { checkpoint: c.clone() }, base.insertion_order)));
        }
        settings.push(("policy", "heuristic".into(), with(PolicyChoice::Heuristic, base.insertion_order)));
        settings.push(("policy", "random".into(), with(PolicyChoice::Random, base.insertion_order)));
    }
    run.seed = Some(base.seed);
    let snapshot: Vec<serde_json::Value> = settings
        .iter()
        .map(|(study, setting, cfg)| serde_json::json!({ "study": study, "setting": setting, "search": cfg }))
        .collect();
    run.snapshot(&a.out_dir, &snapshot)?;
    let mut rows = Vec::new();
    for (study, setting, cfg) in &settings {
        let policy = build_policy(cfg, variant)?;
        let dir = a.out_dir.join(study).join(setting);
        let start = Instant::now();
        let solved = solve_all(&instances, cfg, policy.as_ref(), &dir)?;
        let n = solved.len() as f64;
        let row = AblationRow {
            study,
            setting: setting.clone(),
            instances: solved.len(),
            mean_objective: solved.iter().map(|s| s.row.objective).sum::<f64>() / n,
            mean_time_seconds: solved.iter().map(|s| s.row.time_seconds).sum::<f64>() / n,
        };
        println!("{study} {setting}: mean objective {:.6} ({:.1}s)", row.mean_objective, start.elapsed().as_secs_f64());
        rows.push(row);
        for s in solved {
            run.record(s.solution);
            run.record(s.trace);
        }
    }
    let path = a.out_dir.join("ablation.csv");
    write_csv(&path, &rows)?;
    run.record(path);
    Ok(())
}

