//! Network definition: parameter layout, encoder and pointer decoder.

use rand::Rng;
use serde::{Deserialize, Serialize};

use nds_core::{Instance, SearchRng, Solution, Variant};

use crate::error::{PolicyError, Result};
use crate::features::{build_features, feature_width};
use crate::tape::{Mat, RowMap, Tape, Var};

const POINTER_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub embed_dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub seed_dim: usize,
    /// Customers removed per deconstruction.
    pub removals: usize,
    pub use_mpl: bool,
    pub use_tel: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::Cvrp,
            embed_dim: 128,
            heads: 8,
            ff_dim: 512,
            seed_dim: 10,
            removals: 15,
            use_mpl: true,
            use_tel: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.heads == 0 || self.ff_dim == 0 {
            return Err(PolicyError::Config("model widths must be positive".into()));
        }
        if !self.embed_dim.is_multiple_of(self.heads) {
            return Err(PolicyError::Config(format!(
                "embedding width {} is not divisible by {} heads",
                self.embed_dim, self.heads
            )));
        }
        Ok(())
    }

    pub fn feature_width(&self) -> usize {
        feature_width(self.variant)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Uniform(f64),
    Const(f64),
}

/// A named slice of the flat parameter vector, read as a row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamView {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    init: Init,
}

impl ParamView {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy)]
struct Block {
    offset: usize,
    rows: usize,
    cols: usize,
}

#[derive(Default)]
struct LayoutBuilder {
    views: Vec<ParamView>,
    total: usize,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> Block {
        let offset = self.total;
        self.views.push(ParamView { name, rows, cols, offset, init });
        self.total += rows * cols;
        Block { offset, rows, cols }
    }

    fn weight(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Block {
        self.add(format!("{name}.w"), fan_in, fan_out, Init::Uniform(1.0 / (fan_in as f64).sqrt()))
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Linear {
        let w = self.weight(name, fan_in, fan_out);
        let b = self.add(format!("{name}.b"), 1, fan_out, Init::Uniform(1.0 / (fan_in as f64).sqrt()));
        Linear { w, b: Some(b) }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            gamma: self.add(format!("{name}.gamma"), 1, d, Init::Const(1.0)),
            beta: self.add(format!("{name}.beta"), 1, d, Init::Const(0.0)),
        }
    }

    fn feed_forward(&mut self, name: &str, d: usize, ff: usize) -> FeedForward {
        FeedForward { up: self.linear(&format!("{name}.ff1"), d, ff), down: self.linear(&format!("{name}.ff2"), ff, d) }
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: Block,
    b: Option<Block>,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: Block,
    beta: Block,
}

#[derive(Debug, Clone, Copy)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Debug, Clone, Copy)]
struct AttentionBlock {
    wq: Block,
    wk: Block,
    wv: Block,
    out: Linear,
    norm1: Norm,
    ff: FeedForward,
    norm2: Norm,
}

#[derive(Debug, Clone, Copy)]
struct MessagePassing {
    w_prev: Block,
    w_next: Block,
    mix: Linear,
    ff: FeedForward,
    norm: Norm,
}

#[derive(Debug, Clone, Copy)]
struct TourEncoding {
    mix: Linear,
    ff: FeedForward,
    norm: Norm,
}

#[derive(Debug, Clone, Copy)]
struct DecoderWeights {
    start: Block,
    gru_input: Linear,
    gru_hidden: Linear,
    ctx_hidden: Block,
    ctx_graph: Linear,
    seed: Block,
    glimpse_q: Block,
    glimpse_k: Block,
    glimpse_v: Block,
    glimpse_out: Linear,
    pointer_k: Block,
}

#[derive(Debug, Clone)]
struct Net {
    depot_in: Linear,
    customer_in: Linear,
    blocks: [AttentionBlock; 4],
    mpl: Option<MessagePassing>,
    tel: Option<TourEncoding>,
    dec: DecoderWeights,
}

/// One sampled deconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub actions: Vec<usize>,
    pub step_logp: Vec<f64>,
    pub seed: Vec<bool>,
    pub total_logp: f64,
}

/// Action distribution of one decoding step for every rollout in a batch:
/// `probs` and `masked` are `k x (N+1)` row-major.
#[derive(Debug, Clone)]
pub struct StepDistribution {
    pub probs: Vec<f64>,
    pub masked: Vec<bool>,
    pub nodes: usize,
}

/// Route neighbourhood data the encoder needs from a solution.
struct Structure {
    prev: RowMap,
    next: RowMap,
    tour: RowMap,
}

impl Structure {
    fn of(n_nodes: usize, sol: &Solution) -> Structure {
        let mut prev = vec![0; n_nodes];
        let mut next = vec![0; n_nodes];
        let mut tour: RowMap = (0..n_nodes).map(|i| vec![(i, 1.0)]).collect();
        let routes = sol.routes();
        for route in routes {
            let w = 1.0 / route.len() as f64;
            let members: Vec<(usize, f64)> = route.iter().map(|&c| (c, w)).collect();
            for (p, &c) in route.iter().enumerate() {
                prev[c] = if p == 0 { 0 } else { route[p - 1] };
                next[c] = route.get(p + 1).copied().unwrap_or(0);
                tour[c] = members.clone();
            }
        }
        if !routes.is_empty() {
            let r = routes.len() as f64;
            tour[0] = routes
                .iter()
                .flat_map(|route| route.iter().map(move |&c| (c, 1.0 / (r * route.len() as f64))))
                .collect();
        }
        Structure {
            prev: prev.into_iter().map(|j| vec![(j, 1.0)]).collect(),
            next: next.into_iter().map(|j| vec![(j, 1.0)]).collect(),
            tour,
        }
    }
}

enum Mode<'a> {
    Sample { rng: &'a mut SearchRng, trace: Option<&'a mut Vec<StepDistribution>> },
    Forced(&'a [usize]),
}

struct Decoded {
    actions: Vec<Vec<usize>>,
    step_logp: Vec<Vec<f64>>,
    total: Option<Var>,
}

/// The deconstruction network: an attention encoder with optional
/// message-passing and tour-encoding layers, followed by a GRU-driven
/// pointer decoder conditioned on a binary seed vector.
#[derive(Debug, Clone)]
pub struct Model {
    cfg: ModelConfig,
    views: Vec<ParamView>,
    n_params: usize,
    net: Net,
}

impl Model {
    pub fn new(cfg: ModelConfig) -> Result<Model> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let ff = cfg.ff_dim;
        let fw = cfg.feature_width();
        let mut b = LayoutBuilder::default();
        let depot_in = b.linear("depot_in", fw, d);
        let customer_in = b.linear("customer_in", fw, d);
        let block = |b: &mut LayoutBuilder, i: usize| AttentionBlock {
            wq: b.weight(&format!("enc{i}.wq"), d, d),
            wk: b.weight(&format!("enc{i}.wk"), d, d),
            wv: b.weight(&format!("enc{i}.wv"), d, d),
            out: b.linear(&format!("enc{i}.out"), d, d),
            norm1: b.norm(&format!("enc{i}.norm1"), d),
            ff: b.feed_forward(&format!("enc{i}"), d, ff),
            norm2: b.norm(&format!("enc{i}.norm2"), d),
        };
        let b0 = block(&mut b, 0);
        let b1 = block(&mut b, 1);
        let mpl = cfg.use_mpl.then(|| MessagePassing {
            w_prev: b.weight("mpl.w1", d, d),
            w_next: b.weight("mpl.w2", d, d),
            mix: b.linear("mpl.w3", 2 * d, d),
            ff: b.feed_forward("mpl", d, ff),
            norm: b.norm("mpl.norm", d),
        });
        let tel = cfg.use_tel.then(|| TourEncoding {
            mix: b.linear("tel.w4", 2 * d, d),
            ff: b.feed_forward("tel", d, ff),
            norm: b.norm("tel.norm", d),
        });
        let b2 = block(&mut b, 2);
        let b3 = block(&mut b, 3);
        let gru_bound = 1.0 / (d as f64).sqrt();
        let dec = DecoderWeights {
            start: b.add("dec.start".into(), 1, d, Init::Uniform(gru_bound)),
            gru_input: Linear {
                w: b.add("dec.gru.input.w".into(), d, 3 * d, Init::Uniform(gru_bound)),
                b: Some(b.add("dec.gru.input.b".into(), 1, 3 * d, Init::Uniform(gru_bound))),
            },
            gru_hidden: Linear {
                w: b.add("dec.gru.hidden.w".into(), d, 3 * d, Init::Uniform(gru_bound)),
                b: Some(b.add("dec.gru.hidden.b".into(), 1, 3 * d, Init::Uniform(gru_bound))),
            },
            ctx_hidden: b.weight("dec.ctx.hidden", d, d),
            ctx_graph: b.linear("dec.ctx.graph", d, d),
            seed: b.weight("dec.seed", cfg.seed_dim.max(1), d),
            glimpse_q: b.weight("dec.glimpse.wq", d, d),
            glimpse_k: b.weight("dec.glimpse.wk", d, d),
            glimpse_v: b.weight("dec.glimpse.wv", d, d),
            glimpse_out: b.linear("dec.glimpse.out", d, d),
            pointer_k: b.weight("dec.pointer.wk", d, d),
        };
        let net = Net { depot_in, customer_in, blocks: [b0, b1, b2, b3], mpl, tel, dec };
        Ok(Model { cfg, views: b.views, n_params: b.total, net })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    pub fn views(&self) -> &[ParamView] {
        &self.views
    }

    pub fn view(&self, name: &str) -> Option<&ParamView> {
        self.views.iter().find(|v| v.name == name)
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    /// Fresh parameters: weights and biases uniform in `±1/sqrt(fan_in)`,
    /// normalization scales one and shifts zero.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = nds_core::stream_rng(seed, 0x1417);
        let mut p = vec![0.0; self.n_params];
        for v in &self.views {
            let slot = &mut p[v.offset..v.offset + v.len()];
            match v.init {
                Init::Uniform(b) => slot.iter_mut().for_each(|x| *x = rng.random_range(-b..=b)),
                Init::Const(c) => slot.fill(c),
            }
        }
        p
    }

    fn check_instance(&self, inst: &Instance) -> Result<()> {
        if inst.variant() != self.cfg.variant {
            return Err(PolicyError::Contract(format!(
                "model for {} cannot read a {} instance",
                self.cfg.variant,
                inst.variant()
            )));
        }
        Ok(())
    }

    /// Customers a rollout may pick: all visited ones, plus the unvisited
    /// ones for PCVRP.
    pub fn selectable(&self, inst: &Instance, sol: &Solution) -> usize {
        match inst.variant() {
            Variant::Pcvrp => inst.n_customers(),
            _ => sol.n_visited(),
        }
    }

    fn p(&self, t: &mut Tape, b: Block) -> Var {
        t.param(b.offset, b.rows, b.cols)
    }

    fn linear(&self, t: &mut Tape, x: Var, l: Linear) -> Var {
        let w = self.p(t, l.w);
        let y = t.matmul(x, w);
        match l.b {
            Some(b) => {
                let b = self.p(t, b);
                t.add_row(y, b)
            }
            None => y,
        }
    }

    fn feed_forward(&self, t: &mut Tape, x: Var, ff: FeedForward) -> Var {
        let u = self.linear(t, x, ff.up);
        let u = t.relu(u);
        self.linear(t, u, ff.down)
    }

    fn norm(&self, t: &mut Tape, x: Var, n: Norm) -> Var {
        let g = self.p(t, n.gamma);
        let b = self.p(t, n.beta);
        t.norm(x, g, b)
    }

    fn attention_block(&self, t: &mut Tape, h: Var, blk: AttentionBlock) -> Var {
        let wq = self.p(t, blk.wq);
        let wk = self.p(t, blk.wk);
        let wv = self.p(t, blk.wv);
        let q = t.matmul(h, wq);
        let k = t.matmul(h, wk);
        let v = t.matmul(h, wv);
        let a = t.attention(q, k, v, self.cfg.heads, None);
        let a = self.linear(t, a, blk.out);
        let h = t.add(h, a);
        let h = self.norm(t, h, blk.norm1);
        let f = self.feed_forward(t, h, blk.ff);
        let h = t.add(h, f);
        self.norm(t, h, blk.norm2)
    }

    fn message_passing(&self, t: &mut Tape, h: Var, mpl: MessagePassing, s: &Structure) -> Var {
        let hp = t.row_mix(h, s.prev.clone());
        let hn = t.row_mix(h, s.next.clone());
        let w1 = self.p(t, mpl.w_prev);
        let w2 = self.p(t, mpl.w_next);
        let mp = t.matmul(hp, w1);
        let mn = t.matmul(hn, w2);
        let msg = t.add(mp, mn);
        let cat = t.concat_cols(h, msg);
        let z = self.linear(t, cat, mpl.mix);
        let z = t.relu(z);
        let f = self.feed_forward(t, z, mpl.ff);
        let h = t.add(h, f);
        self.norm(t, h, mpl.norm)
    }

    fn tour_encoding(&self, t: &mut Tape, h: Var, tel: TourEncoding, s: &Structure) -> Var {
        let agg = t.row_mix(h, s.tour.clone());
        let cat = t.concat_cols(h, agg);
        let z = self.linear(t, cat, tel.mix);
        let z = t.relu(z);
        let f = self.feed_forward(t, z, tel.ff);
        let h = t.add(h, f);
        self.norm(t, h, tel.norm)
    }

    fn encode(&self, t: &mut Tape, inst: &Instance, sol: &Solution) -> Var {
        let feats = build_features(inst);
        let fw = feats.cols;
        let depot = t.leaf(Mat::from_vec(1, fw, feats.data[..fw].to_vec()));
        let customers = t.leaf(Mat::from_vec(feats.rows - 1, fw, feats.data[fw..].to_vec()));
        let hd = self.linear(t, depot, self.net.depot_in);
        let hc = self.linear(t, customers, self.net.customer_in);
        let mut h = t.concat_rows(hd, hc);
        let structure = Structure::of(inst.n_nodes(), sol);
        h = self.attention_block(t, h, self.net.blocks[0]);
        h = self.attention_block(t, h, self.net.blocks[1]);
        if let Some(mpl) = self.net.mpl {
            h = self.message_passing(t, h, mpl, &structure);
        }
        if let Some(tel) = self.net.tel {
            h = self.tour_encoding(t, h, tel, &structure);
        }
        h = self.attention_block(t, h, self.net.blocks[2]);
        self.attention_block(t, h, self.net.blocks[3])
    }

    /// Node embeddings for `(inst, sol)`, `(N+1) x d`.
    pub fn embeddings(&self, params: &[f64], inst: &Instance, sol: &Solution) -> Result<Mat> {
        self.check_instance(inst)?;
        let mut t = Tape::new(params);
        let h = self.encode(&mut t, inst, sol);
        Ok(t.value(h).clone())
    }

    fn base_mask(&self, inst: &Instance, sol: &Solution) -> Vec<bool> {
        let mut blocked = vec![false; inst.n_nodes()];
        blocked[0] = true;
        if inst.variant() != Variant::Pcvrp {
            for &c in sol.unvisited() {
                blocked[c] = true;
            }
        }
        blocked
    }

    fn decode(&self, t: &mut Tape, emb: Var, base: &[bool], seeds: &[Vec<bool>], m: usize, mut mode: Mode) -> Result<Decoded> {
        let k = seeds.len();
        let nodes = base.len();
        let d = self.cfg.embed_dim;
        let dw = self.net.dec;
        let dv = dw.seed.rows;

        let graph = t.row_mix(emb, vec![(0..nodes).map(|j| (j, 1.0 / nodes as f64)).collect()]);
        let ctx = self.linear(t, graph, dw.ctx_graph);
        let seed_bits: Vec<f64> = seeds
            .iter()
            .flat_map(|s| (0..dv).map(move |i| if s.get(i).copied().unwrap_or(false) { 1.0 } else { 0.0 }))
            .collect();
        let seed_leaf = t.leaf(Mat::from_vec(k, dv, seed_bits));
        let ws = self.p(t, dw.seed);
        let seed_term = t.matmul(seed_leaf, ws);
        let wgk = self.p(t, dw.glimpse_k);
        let wgv = self.p(t, dw.glimpse_v);
        let wpk = self.p(t, dw.pointer_k);
        let gk = t.matmul(emb, wgk);
        let gv = t.matmul(emb, wgv);
        let pk = t.matmul(emb, wpk);
        let start = self.p(t, dw.start);
        let mut x = t.row_mix(start, vec![vec![(0, 1.0)]; k]);
        let mut h = t.leaf(Mat::zeros(k, d));

        let mut mask: Vec<bool> = (0..k).flat_map(|_| base.iter().copied()).collect();
        let mut actions = vec![Vec::with_capacity(m); k];
        let mut step_logp = vec![Vec::with_capacity(m); k];
        let mut total: Option<Var> = None;
        let inv_sqrt_d = 1.0 / (d as f64).sqrt();

        for _ in 0..m {
            let gi = self.linear(t, x, dw.gru_input);
            let gh = self.linear(t, h, dw.gru_hidden);
            let (ir, iz, inn) = (t.slice_cols(gi, 0, d), t.slice_cols(gi, d, d), t.slice_cols(gi, 2 * d, d));
            let (hr, hz, hn) = (t.slice_cols(gh, 0, d), t.slice_cols(gh, d, d), t.slice_cols(gh, 2 * d, d));
            let r = t.add(ir, hr);
            let r = t.sigmoid(r);
            let z = t.add(iz, hz);
            let z = t.sigmoid(z);
            let rh = t.mul(r, hn);
            let nn = t.add(inn, rh);
            let nn = t.tanh(nn);
            let diff = t.sub(h, nn);
            let zd = t.mul(z, diff);
            h = t.add(nn, zd);

            let wch = self.p(t, dw.ctx_hidden);
            let q0 = t.matmul(h, wch);
            let q0 = t.add_row(q0, ctx);
            let q0 = t.add(q0, seed_term);
            let wgq = self.p(t, dw.glimpse_q);
            let gq = t.matmul(q0, wgq);
            let glimpse = t.attention(gq, gk, gv, self.cfg.heads, Some(&mask));
            let q1 = self.linear(t, glimpse, dw.glimpse_out);
            let logits = t.matmul_bt(q1, pk);
            let logits = t.scale(logits, inv_sqrt_d);
            let logits = t.tanh(logits);
            let logits = t.scale(logits, POINTER_CLIP);
            let logp = t.log_softmax(logits, mask.clone());

            let chosen: Vec<usize> = match &mut mode {
                Mode::Sample { rng, trace } => {
                    let lp = t.value(logp);
                    if let Some(tr) = trace {
                        tr.push(StepDistribution {
                            probs: lp.data.iter().map(|x| x.exp()).collect(),
                            masked: mask.clone(),
                            nodes,
                        });
                    }
                    (0..k).map(|r| sample_row(lp.row(r), &mask[r * nodes..(r + 1) * nodes], rng)).collect()
                }
                Mode::Forced(seq) => {
                    let a = seq[actions[0].len()];
                    if a >= nodes || mask[a] {
                        return Err(PolicyError::Contract(format!("action {a} is masked at this step")));
                    }
                    vec![a]
                }
            };
            let lp = t.value(logp);
            for (r, &a) in chosen.iter().enumerate() {
                step_logp[r].push(lp.at(r, a));
                actions[r].push(a);
                mask[r * nodes + a] = true;
            }
            if matches!(mode, Mode::Forced(_)) {
                let picked = t.pick_sum(logp, vec![(0, chosen[0])]);
                total = Some(match total {
                    Some(acc) => t.add(acc, picked),
                    None => picked,
                });
            }
            x = t.row_mix(emb, chosen.iter().map(|&a| vec![(a, 1.0)]).collect());
        }
        Ok(Decoded { actions, step_logp, total })
    }

    fn check_m(&self, inst: &Instance, sol: &Solution, m: usize) -> Result<()> {
        let avail = self.selectable(inst, sol);
        if m > avail {
            return Err(PolicyError::Contract(format!("cannot select {m} customers, only {avail} are selectable")));
        }
        Ok(())
    }

    /// Sample `k` rollouts of `m` removals each, with fresh Bernoulli(1/2)
    /// seed vectors. When `trace` is given, the per-step action
    /// distributions are appended to it.
    pub fn sample(
        &self,
        params: &[f64],
        inst: &Instance,
        sol: &Solution,
        m: usize,
        k: usize,
        rng: &mut SearchRng,
        trace: Option<&mut Vec<StepDistribution>>,
    ) -> Result<Vec<Rollout>> {
        self.check_instance(inst)?;
        self.check_m(inst, sol, m)?;
        if k == 0 {
            return Ok(Vec::new());
        }
        let seeds: Vec<Vec<bool>> = (0..k).map(|_| (0..self.cfg.seed_dim).map(|_| rng.random_bool(0.5)).collect()).collect();
        if m == 0 {
            return Ok(seeds
                .into_iter()
                .map(|seed| Rollout { actions: vec![], step_logp: vec![], seed, total_logp: 0.0 })
                .collect());
        }
        let mut t = Tape::new(params);
        let emb = self.encode(&mut t, inst, sol);
        let base = self.base_mask(inst, sol);
        let out = self.decode(&mut t, emb, &base, &seeds, m, Mode::Sample { rng, trace })?;
        Ok(out
            .actions
            .into_iter()
            .zip(out.step_logp)
            .zip(seeds)
            .map(|((actions, step_logp), seed)| {
                let total_logp = step_logp.iter().sum();
                Rollout { actions, step_logp, seed, total_logp }
            })
            .collect())
    }

    fn forced(&self, t: &mut Tape, inst: &Instance, sol: &Solution, rollout: &Rollout) -> Result<Option<Var>> {
        self.check_instance(inst)?;
        self.check_m(inst, sol, rollout.actions.len())?;
        if rollout.actions.is_empty() {
            return Ok(None);
        }
        let emb = self.encode(t, inst, sol);
        let base = self.base_mask(inst, sol);
        let out = self.decode(t, emb, &base, std::slice::from_ref(&rollout.seed), rollout.actions.len(), Mode::Forced(&rollout.actions))?;
        Ok(out.total)
    }

    /// Log-probability of `rollout` under `params`.
    pub fn rollout_logp(&self, params: &[f64], inst: &Instance, sol: &Solution, rollout: &Rollout) -> Result<f64> {
        let mut t = Tape::new(params);
        Ok(self.forced(&mut t, inst, sol, rollout)?.map_or(0.0, |v| t.value(v).data[0]))
    }

    /// Log-probability of `rollout` and `advantage` times its gradient with
    /// respect to every parameter.
    pub fn rollout_logp_and_grad(
        &self,
        params: &[f64],
        inst: &Instance,
        sol: &Solution,
        rollout: &Rollout,
        advantage: f64,
    ) -> Result<(f64, Vec<f64>)> {
        let mut t = Tape::new(params);
        match self.forced(&mut t, inst, sol, rollout)? {
            Some(total) => {
                let logp = t.value(total).data[0];
                Ok((logp, t.backward(total, advantage)))
            }
            None => Ok((0.0, vec![0.0; params.len()])),
        }
    }
}

fn sample_row(logp: &[f64], masked: &[bool], rng: &mut SearchRng) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = None;
    for (j, (&lp, &mk)) in logp.iter().zip(masked).enumerate() {
        if mk {
            continue;
        }
        cum += lp.exp();
        last = Some(j);
        if u < cum {
            return j;
        }
    }
    last.expect("at least one unmasked action")
}
