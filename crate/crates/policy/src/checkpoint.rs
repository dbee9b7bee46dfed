//! Binary checkpoints: little-endian, versioned, checksummed.
//!
//! Layout: magic, version, model config echo, the named parameter views
//! with shapes, the raw `f64` parameter payload, optimizer state, training
//! progress and a trailing FNV-1a checksum over everything before it.

use std::fs;
use std::path::Path;

use nds_core::Variant;

use crate::adam::Adam;
use crate::error::{PolicyError, Result};
use crate::model::{Model, ModelConfig};
use crate::policy::NeuralPolicy;

const MAGIC: &[u8; 8] = b"NDSCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Progress {
    pub instances_seen: u64,
    pub epochs_done: u64,
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub policy: NeuralPolicy,
    pub optimizer: Adam,
    pub progress: Progress,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, x: u8) {
        self.0.push(x);
    }
    fn u32(&mut self, x: usize) {
        self.0.extend_from_slice(&(x as u32).to_le_bytes());
    }
    fn u64(&mut self, x: u64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64(&mut self, x: f64) {
        self.0.extend_from_slice(&x.to_le_bytes());
    }
    fn f64s(&mut self, xs: &[f64]) {
        self.u64(xs.len() as u64);
        for &x in xs {
            self.f64(x);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(PolicyError::Corrupt(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64s(&mut self, expect: usize) -> Result<Vec<f64>> {
        let n = self.u64()? as usize;
        if n != expect {
            return Err(PolicyError::ShapeMismatch(format!("vector of {n} values where {expect} were expected")));
        }
        (0..n).map(|_| self.f64()).collect()
    }
}

pub fn checkpoint_to_bytes(policy: &NeuralPolicy, optimizer: &Adam, progress: Progress) -> Vec<u8> {
    let cfg = policy.config();
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(CHECKPOINT_VERSION as usize);
    w.u8(cfg.variant.code());
    w.u8(u8::from(cfg.use_mpl) | (u8::from(cfg.use_tel) << 1));
    w.u32(cfg.embed_dim);
    w.u32(cfg.heads);
    w.u32(cfg.ff_dim);
    w.u32(cfg.seed_dim);
    w.u32(cfg.removals);
    w.u32(cfg.feature_width());
    let views = policy.model().views();
    w.u32(views.len());
    for v in views {
        w.u32(v.name.len());
        w.0.extend_from_slice(v.name.as_bytes());
        w.u32(v.rows);
        w.u32(v.cols);
    }
    w.f64s(policy.params());
    w.f64(optimizer.lr);
    w.f64(optimizer.beta1);
    w.f64(optimizer.beta2);
    w.f64(optimizer.eps);
    w.u64(optimizer.step);
    w.f64s(&optimizer.m);
    w.f64s(&optimizer.v);
    w.u64(progress.instances_seen);
    w.u64(progress.epochs_done);
    let sum = fnv1a(&w.0);
    w.u64(sum);
    w.0
}

/// Parse a checkpoint. With `expected`, the stored parameter views must
/// match that configuration's layout exactly.
pub fn checkpoint_from_bytes(bytes: &[u8], expected: Option<&ModelConfig>) -> Result<Checkpoint> {
    if bytes.len() < MAGIC.len() + 12 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PolicyError::Corrupt("not a policy checkpoint".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if fnv1a(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
        return Err(PolicyError::Corrupt("checksum mismatch".into()));
    }
    let mut r = Reader { bytes: body, pos: MAGIC.len() };
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION as usize {
        return Err(PolicyError::Corrupt(format!("unsupported checkpoint version {version}")));
    }
    let code = r.u8()?;
    let variant = Variant::from_code(code).ok_or_else(|| PolicyError::Corrupt(format!("unknown variant code {code}")))?;
    let flags = r.u8()?;
    let cfg = ModelConfig {
        variant,
        use_mpl: flags & 1 != 0,
        use_tel: flags & 2 != 0,
        embed_dim: r.u32()?,
        heads: r.u32()?,
        ff_dim: r.u32()?,
        seed_dim: r.u32()?,
        removals: r.u32()?,
    };
    let width = r.u32()?;
    if width != cfg.feature_width() {
        return Err(PolicyError::Corrupt(format!("feature width {width} does not fit variant {variant}")));
    }
    let n_views = r.u32()?;
    let mut stored = Vec::with_capacity(n_views);
    for _ in 0..n_views {
        let len = r.u32()?;
        let name = String::from_utf8(r.take(len)?.to_vec()).map_err(|_| PolicyError::Corrupt("view name is not utf-8".into()))?;
        stored.push((name, r.u32()?, r.u32()?));
    }
    let manifest = |m: &Model| -> Vec<(String, usize, usize)> { m.views().iter().map(|v| (v.name.clone(), v.rows, v.cols)).collect() };
    let target = match expected {
        Some(e) => Model::new(e.clone())?,
        None => Model::new(cfg.clone())?,
    };
    let want = manifest(&target);
    if stored != want {
        let first = stored.iter().zip(&want).find(|(a, b)| a != b);
        let detail = match first {
            Some((a, b)) => format!("view {} is {}x{}, model expects {} {}x{}", a.0, a.1, a.2, b.0, b.1, b.2),
            None => format!("{} stored views, model has {}", stored.len(), want.len()),
        };
        return Err(PolicyError::ShapeMismatch(detail));
    }
    if let Some(e) = expected {
        if e.variant != cfg.variant {
            return Err(PolicyError::ShapeMismatch(format!("checkpoint is for {}, model is {}", cfg.variant, e.variant)));
        }
    }
    let n = target.n_params();
    let params = r.f64s(n)?;
    let mut optimizer = Adam::new(n, 0.0);
    optimizer.lr = r.f64()?;
    optimizer.beta1 = r.f64()?;
    optimizer.beta2 = r.f64()?;
    optimizer.eps = r.f64()?;
    optimizer.step = r.u64()?;
    optimizer.m = r.f64s(n)?;
    optimizer.v = r.f64s(n)?;
    let progress = Progress { instances_seen: r.u64()?, epochs_done: r.u64()? };
    if r.pos != body.len() {
        return Err(PolicyError::Corrupt(format!("{} trailing bytes", body.len() - r.pos)));
    }
    let model = Model::new(cfg)?;
    Ok(Checkpoint { policy: NeuralPolicy::from_parts(model, params), optimizer, progress })
}

pub fn save_checkpoint(path: impl AsRef<Path>, policy: &NeuralPolicy, optimizer: &Adam, progress: Progress) -> Result<()> {
    fs::write(path, checkpoint_to_bytes(policy, optimizer, progress))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>, expected: Option<&ModelConfig>) -> Result<Checkpoint> {
    checkpoint_from_bytes(&fs::read(path)?, expected)
}
