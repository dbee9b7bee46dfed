//! Policy-gradient training with clamped improvement rewards, a mean
//! baseline and a best-of-K gradient.

use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nds_core::io::load_instance;
use nds_core::search::{InsertionOrder, StepParams};
use nds_core::{
    asa_search, greedy_insert, improvement_step, initial_solution, mix_seed, remove_customers, stream_rng, FEAS_EPS,
    CapacityProfile, DeconstructionPolicy, GeneratorSpec, Instance, LocationMode, SearchConfig, Solution, Variant,
};

use crate::adam::Adam;
use crate::checkpoint::{save_checkpoint, Checkpoint, Progress};
use crate::error::{PolicyError, Result};
use crate::model::ModelConfig;
use crate::policy::NeuralPolicy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub generator: GeneratorSpec,
    pub epochs: usize,
    pub instances_per_epoch: usize,
    /// Iterations per instance (I).
    pub iterations: usize,
    /// Rollouts per solution (K).
    pub rollouts: usize,
    /// Warm-up improvement steps before the training iterations (J).
    pub warmup_steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Instances whose gradients are summed into one optimizer update.
    pub batch: usize,
    pub validation_count: usize,
    pub validation_seed: u64,
    pub validation_dir: Option<PathBuf>,
    pub validation_search: SearchConfig,
    /// Save the rolling checkpoint every this many instances (0: epoch ends only).
    pub checkpoint_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            generator: GeneratorSpec::new(Variant::Cvrp, 100, 0).with_location(LocationMode::Mixed).with_capacity(CapacityProfile::Medium),
            epochs: 10,
            instances_per_epoch: 100,
            iterations: 100,
            rollouts: 128,
            warmup_steps: 10,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch: 1,
            validation_count: 10,
            validation_seed: 0x5EED,
            validation_dir: None,
            validation_search: SearchConfig { max_iter: 50, augmentations: 1, rollouts: 20, ..SearchConfig::default() },
            checkpoint_every: 0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let bad = |m: String| Err(PolicyError::Config(m));
        if self.generator.variant != self.model.variant {
            return bad(format!("generator variant {} differs from model variant {}", self.generator.variant, self.model.variant));
        }
        if self.rollouts < 2 {
            return bad("at least two rollouts are needed for the baseline".into());
        }
        if self.batch == 0 {
            return bad("batch must be at least 1".into());
        }
        if self.instances_per_epoch == 0 {
            return bad("instances_per_epoch must be at least 1".into());
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning rate must be positive".into());
        }
        self.validation_search.validate()?;
        Ok(())
    }
}

/// Index of the first highest reward and its advantage over the mean.
pub fn best_of_k(rewards: &[f64]) -> (usize, f64) {
    let baseline = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let best = rewards.iter().enumerate().fold(0, |b, (k, &r)| if r > rewards[b] { k } else { b });
    (best, rewards[best] - baseline)
}

/// Outcome of training on one instance with a fixed parameter snapshot.
#[derive(Debug, Clone)]
pub struct InstanceOutcome {
    pub index: u64,
    pub grad: Vec<f64>,
    /// Mean clamped reward over all rollouts of all iterations.
    pub mean_reward: f64,
    pub start_cost: f64,
    pub final_cost: f64,
    /// Solution cost after each training iteration.
    pub costs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub instances_seen: u64,
    pub mean_reward: f64,
    pub mean_validation_objective: f64,
    pub wall_clock_seconds: f64,
}

pub struct Trainer {
    cfg: TrainConfig,
    policy: NeuralPolicy,
    optimizer: Adam,
    progress: Progress,
    validation: Vec<Instance>,
    rewards: Vec<(u64, f64)>,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Trainer> {
        cfg.validate()?;
        let policy = NeuralPolicy::new(cfg.model.clone(), cfg.seed)?;
        let optimizer = Self::fresh_optimizer(&cfg, policy.params().len());
        Self::assemble(cfg, policy, optimizer, Progress::default())
    }

    /// Continue from a checkpoint; the configuration must describe the same model.
    pub fn resume(cfg: TrainConfig, ckpt: Checkpoint) -> Result<Trainer> {
        cfg.validate()?;
        if ckpt.policy.config() != &cfg.model {
            return Err(PolicyError::ShapeMismatch("checkpoint model differs from the training configuration".into()));
        }
        let mut optimizer = ckpt.optimizer;
        optimizer.lr = cfg.learning_rate;
        Self::assemble(cfg, ckpt.policy, optimizer, ckpt.progress)
    }

    fn fresh_optimizer(cfg: &TrainConfig, n: usize) -> Adam {
        let mut a = Adam::new(n, cfg.learning_rate);
        a.beta1 = cfg.beta1;
        a.beta2 = cfg.beta2;
        a.eps = cfg.eps;
        a
    }

    fn assemble(cfg: TrainConfig, policy: NeuralPolicy, optimizer: Adam, progress: Progress) -> Result<Trainer> {
        let validation = validation_set(&cfg)?;
        Ok(Trainer { cfg, policy, optimizer, progress, validation, rewards: Vec::new() })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn policy(&self) -> &NeuralPolicy {
        &self.policy
    }

    pub fn optimizer(&self) -> &Adam {
        &self.optimizer
    }

    pub fn progress(&self) -> Progress {
        self.progress
    }

    /// `(instance index, mean reward)` for every instance trained by this trainer.
    pub fn reward_log(&self) -> &[(u64, f64)] {
        &self.rewards
    }

    pub fn validation_instances(&self) -> &[Instance] {
        &self.validation
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint { policy: self.policy.clone(), optimizer: self.optimizer.clone(), progress: self.progress }
    }

    pub fn is_finished(&self) -> bool {
        self.progress.instances_seen >= (self.cfg.epochs * self.cfg.instances_per_epoch) as u64
    }

    /// Train on instance `index` with the current parameters, returning the
    /// accumulated gradient without applying it.
    pub fn train_instance(&self, index: u64) -> Result<InstanceOutcome> {
        let cfg = &self.cfg;
        let inst = cfg.generator.derived(index).generate()?;
        let mut rng = stream_rng(mix_seed(cfg.seed, 0x7A41), index);
        let policy = &self.policy;
        let mut s = initial_solution(&inst);
        let start_cost = s.cost();
        let warm = StepParams {
            removals: cfg.model.removals,
            lambda: 0.0,
            rollouts: cfg.rollouts,
            reconstructions: 1,
            order: InsertionOrder::PolicyThenRandom,
        };
        for _ in 0..cfg.warmup_steps {
            s = improvement_step(&inst, &s, policy, &warm, &mut rng)?.current;
        }
        let mut grad = vec![0.0; policy.params().len()];
        let mut reward_sum = 0.0;
        let mut reward_count = 0usize;
        let mut costs = Vec::with_capacity(cfg.iterations);
        for it in 0..cfg.iterations {
            let m = cfg.model.removals.min(policy.selectable(&inst, &s));
            if m == 0 {
                costs.push(s.cost());
                continue;
            }
            let rollouts = policy.sample(&inst, &s, m, cfg.rollouts, &mut rng)?;
            let mut rebuilt: Vec<Solution> = Vec::with_capacity(rollouts.len());
            let mut rewards = Vec::with_capacity(rollouts.len());
            for r in &rollouts {
                let partial = remove_customers(&inst, &s, &r.actions)?;
                let next = greedy_insert(&inst, &partial);
                let gain = s.cost() - next.cost();
                rewards.push(if gain > FEAS_EPS { gain } else { 0.0 });
                rebuilt.push(next);
            }
            let (best, advantage) = best_of_k(&rewards);
            if !advantage.is_finite() {
                return Err(PolicyError::NonFinite(format!("instance {index}, iteration {it}: advantage {advantage}")));
            }
            if advantage != 0.0 {
                let (_, g) = policy.rollout_logp_and_grad(&inst, &s, &rollouts[best], advantage)?;
                if let Some(i) = g.iter().position(|x| !x.is_finite()) {
                    return Err(PolicyError::NonFinite(format!(
                        "instance {index}, iteration {it}: gradient entry {i} is {}",
                        g[i]
                    )));
                }
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
            }
            reward_sum += rewards.iter().sum::<f64>();
            reward_count += rewards.len();
            if rewards[best] > 0.0 {
                s = rebuilt.swap_remove(best);
            }
            costs.push(s.cost());
        }
        Ok(InstanceOutcome {
            index,
            grad,
            mean_reward: if reward_count > 0 { reward_sum / reward_count as f64 } else { 0.0 },
            start_cost,
            final_cost: s.cost(),
            costs,
        })
    }

    /// Train the next block of up to `batch` instances (never crossing an
    /// epoch boundary) and apply one optimizer update with their summed
    /// gradients.
    pub fn step_block(&mut self) -> Result<Vec<InstanceOutcome>> {
        let ipe = self.cfg.instances_per_epoch as u64;
        let first = self.progress.instances_seen;
        let epoch_end = (first / ipe + 1) * ipe;
        let last = (first + self.cfg.batch as u64).min(epoch_end);
        let outcomes: Vec<InstanceOutcome> =
            (first..last).into_par_iter().map(|g| self.train_instance(g)).collect::<Result<_>>()?;
        let mut total = vec![0.0; self.policy.params().len()];
        for o in &outcomes {
            for (a, b) in total.iter_mut().zip(&o.grad) {
                *a += b;
            }
        }
        self.optimizer.ascend(self.policy.params_mut(), &total);
        if let Some(i) = self.policy.params().iter().position(|x| !x.is_finite()) {
            return Err(PolicyError::NonFinite(format!("parameter {i} after update at instance {last}")));
        }
        for o in &outcomes {
            self.rewards.push((o.index, o.mean_reward));
        }
        self.progress.instances_seen = last;
        if last == epoch_end {
            self.progress.epochs_done = last / ipe;
        }
        Ok(outcomes)
    }

    /// Mean best objective found by the search on the validation set.
    pub fn validate(&self) -> Result<f64> {
        mean_search_objective(&self.validation, &self.cfg.validation_search, &self.policy)
    }
}

/// Mean best cost of the search over `instances`, using search seed
/// `search.seed` mixed with the instance position.
pub fn mean_search_objective(instances: &[Instance], search: &SearchConfig, policy: &dyn DeconstructionPolicy) -> Result<f64> {
    if instances.is_empty() {
        return Ok(f64::NAN);
    }
    let costs: Vec<f64> = instances
        .par_iter()
        .enumerate()
        .map(|(i, inst)| {
            let cfg = SearchConfig { seed: mix_seed(search.seed, i as u64), ..search.clone() };
            Ok(asa_search(inst, &cfg, policy)?.best.cost())
        })
        .collect::<Result<_>>()?;
    Ok(costs.iter().sum::<f64>() / costs.len() as f64)
}

fn validation_set(cfg: &TrainConfig) -> Result<Vec<Instance>> {
    if let Some(dir) = &cfg.validation_dir {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        return paths.iter().map(|p| Ok(load_instance(p)?)).collect();
    }
    let spec = GeneratorSpec { seed: cfg.validation_seed, ..cfg.generator.clone() };
    (0..cfg.validation_count as u64).map(|i| Ok(spec.derived(i).generate()?)).collect()
}

/// Where `train` writes its artifacts.
#[derive(Debug, Clone)]
pub struct TrainOutputs {
    pub dir: PathBuf,
}

impl TrainOutputs {
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn latest_checkpoint(&self) -> PathBuf {
        self.dir.join("policy.ckpt")
    }

    pub fn epoch_checkpoint(&self, epoch: u64) -> PathBuf {
        self.dir.join(format!("policy-epoch{epoch:04}.ckpt"))
    }

    pub fn diagnostic_checkpoint(&self) -> PathBuf {
        self.dir.join("diagnostic.ckpt")
    }
}

fn append_metrics(path: &Path, row: &EpochMetrics) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    w.serialize(row).map_err(|e| PolicyError::Io(std::io::Error::other(e)))?;
    w.flush()?;
    Ok(())
}

/// Run training to completion, writing metrics and checkpoints when
/// `outputs` is given. Returns the trainer and one metrics row per epoch
/// completed in this call.
pub fn train(mut trainer: Trainer, outputs: Option<&TrainOutputs>) -> Result<(Trainer, Vec<EpochMetrics>)> {
    let start = Instant::now();
    if let Some(o) = outputs {
        fs::create_dir_all(&o.dir)?;
    }
    let ipe = trainer.cfg.instances_per_epoch as u64;
    let mut rows = Vec::new();
    let mut epoch_reward = 0.0;
    let mut epoch_count = 0usize;
    let mut since_ckpt = 0usize;
    while !trainer.is_finished() {
        let outcomes = match trainer.step_block() {
            Ok(o) => o,
            Err(e) => {
                if let (PolicyError::NonFinite(_), Some(o)) = (&e, outputs) {
                    let ck = trainer.checkpoint();
                    if let Err(se) = save_checkpoint(o.diagnostic_checkpoint(), &ck.policy, &ck.optimizer, ck.progress) {
                        warn!("could not write diagnostic snapshot: {se}");
                    }
                }
                return Err(e);
            }
        };
        epoch_reward += outcomes.iter().map(|o| o.mean_reward).sum::<f64>();
        epoch_count += outcomes.len();
        since_ckpt += outcomes.len();
        let seen = trainer.progress.instances_seen;
        if let Some(o) = outputs {
            if trainer.cfg.checkpoint_every > 0 && since_ckpt >= trainer.cfg.checkpoint_every {
                since_ckpt = 0;
                save_checkpoint(o.latest_checkpoint(), &trainer.policy, &trainer.optimizer, trainer.progress)?;
            }
        }
        if seen.is_multiple_of(ipe) {
            let epoch = seen / ipe;
            let validation = trainer.validate()?;
            let row = EpochMetrics {
                epoch,
                instances_seen: seen,
                mean_reward: epoch_reward / epoch_count.max(1) as f64,
                mean_validation_objective: validation,
                wall_clock_seconds: start.elapsed().as_secs_f64(),
            };
            info!(
                "epoch {epoch}: {seen} instances, mean reward {:.5}, validation {:.5}",
                row.mean_reward, row.mean_validation_objective
            );
            if let Some(o) = outputs {
                append_metrics(&o.metrics(), &row)?;
                save_checkpoint(o.latest_checkpoint(), &trainer.policy, &trainer.optimizer, trainer.progress)?;
                save_checkpoint(o.epoch_checkpoint(epoch), &trainer.policy, &trainer.optimizer, trainer.progress)?;
            }
            rows.push(row);
            epoch_reward = 0.0;
            epoch_count = 0;
        }
    }
    Ok((trainer, rows))
}
