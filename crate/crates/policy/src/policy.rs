use nds_core::{DeconstructionPolicy, Instance, PlanSource, RemovalPlan, SearchRng, Solution};

use crate::error::Result;
use crate::model::{Model, ModelConfig, Rollout, StepDistribution};

/// A model together with its parameter vector.
#[derive(Debug, Clone)]
pub struct NeuralPolicy {
    model: Model,
    params: Vec<f64>,
}

impl NeuralPolicy {
    /// Freshly initialized policy.
    pub fn new(cfg: ModelConfig, init_seed: u64) -> Result<NeuralPolicy> {
        let model = Model::new(cfg)?;
        let params = model.init_params(init_seed);
        Ok(NeuralPolicy { model, params })
    }

    pub fn from_parts(model: Model, params: Vec<f64>) -> NeuralPolicy {
        assert_eq!(params.len(), model.n_params(), "parameter vector length");
        NeuralPolicy { model, params }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn sample(&self, inst: &Instance, sol: &Solution, m: usize, k: usize, rng: &mut SearchRng) -> Result<Vec<Rollout>> {
        self.model.sample(&self.params, inst, sol, m, k, rng, None)
    }

    /// Like [`NeuralPolicy::sample`], also returning every step's action
    /// distribution.
    pub fn sample_traced(
        &self,
        inst: &Instance,
        sol: &Solution,
        m: usize,
        k: usize,
        rng: &mut SearchRng,
    ) -> Result<(Vec<Rollout>, Vec<StepDistribution>)> {
        let mut trace = Vec::new();
        let rollouts = self.model.sample(&self.params, inst, sol, m, k, rng, Some(&mut trace))?;
        Ok((rollouts, trace))
    }

    pub fn rollout_logp(&self, inst: &Instance, sol: &Solution, rollout: &Rollout) -> Result<f64> {
        self.model.rollout_logp(&self.params, inst, sol, rollout)
    }

    pub fn rollout_logp_and_grad(
        &self,
        inst: &Instance,
        sol: &Solution,
        rollout: &Rollout,
        advantage: f64,
    ) -> Result<(f64, Vec<f64>)> {
        self.model.rollout_logp_and_grad(&self.params, inst, sol, rollout, advantage)
    }
}

impl DeconstructionPolicy for NeuralPolicy {
    fn name(&self) -> &str {
        "neural"
    }

    fn selectable(&self, inst: &Instance, sol: &Solution) -> usize {
        self.model.selectable(inst, sol)
    }

    fn propose(&self, inst: &Instance, sol: &Solution, m: usize, k: usize, rng: &mut SearchRng) -> nds_core::Result<Vec<RemovalPlan>> {
        Ok(self
            .sample(inst, sol, m, k, rng)?
            .into_iter()
            .map(|r| RemovalPlan { customers: r.actions, source: PlanSource::Neural })
            .collect())
    }
}
