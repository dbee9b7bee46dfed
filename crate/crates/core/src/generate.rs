//! Seeded instance generators for the three variants.
//!
//! All coordinates live in the unit square. Every constant that shapes the
//! distributions is a field of [`GeneratorSpec`] so experiments stay
//! reproducible and tunable.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::instance::{Instance, InstanceParts, Variant};
use crate::{stream_rng, SearchRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationMode {
    Uniform,
    Clustered,
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapacityProfile {
    Low,
    Medium,
    High,
}

impl CapacityProfile {
    fn factor(self) -> f64 {
        match self {
            CapacityProfile::Low => 0.7,
            CapacityProfile::Medium => 1.0,
            CapacityProfile::High => 1.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterProfile {
    /// One cluster center per this many customers (rounded up).
    pub customers_per_center: usize,
    pub sigma: f64,
}

impl Default for ClusterProfile {
    fn default() -> Self {
        ClusterProfile { customers_per_center: 50, sigma: 0.04 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeWindowProfile {
    /// Depot horizon `H` in unit-square distance units.
    pub horizon: f64,
    /// Window width is drawn uniformly from `[width_min, width_max] * H`.
    pub width_min: f64,
    pub width_max: f64,
    /// Service time as a fraction of `H`.
    pub service: f64,
}

impl Default for TimeWindowProfile {
    fn default() -> Self {
        TimeWindowProfile { horizon: 10.0, width_min: 0.05, width_max: 0.2, service: 0.02 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrizeProfile {
    /// `prize_i = q_i / mean(q) * u_i` with `u_i ~ U[low, high]`.
    pub low: f64,
    pub high: f64,
}

impl Default for PrizeProfile {
    fn default() -> Self {
        PrizeProfile { low: 0.05, high: 0.35 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub variant: Variant,
    pub n: usize,
    pub location: LocationMode,
    pub capacity: CapacityProfile,
    pub seed: u64,
    #[serde(default)]
    pub cluster: ClusterProfile,
    #[serde(default)]
    pub time_windows: TimeWindowProfile,
    #[serde(default)]
    pub prizes: PrizeProfile,
}

impl GeneratorSpec {
    pub fn new(variant: Variant, n: usize, seed: u64) -> Self {
        GeneratorSpec {
            variant,
            n,
            location: LocationMode::Uniform,
            capacity: CapacityProfile::Medium,
            seed,
            cluster: ClusterProfile::default(),
            time_windows: TimeWindowProfile::default(),
            prizes: PrizeProfile::default(),
        }
    }

    pub fn with_location(mut self, location: LocationMode) -> Self {
        self.location = location;
        self
    }

    pub fn with_capacity(mut self, capacity: CapacityProfile) -> Self {
        self.capacity = capacity;
        self
    }

    /// Same generator settings with the seed replaced by an independent stream for item `index`.
    pub fn derived(&self, index: u64) -> Self {
        let mut s = self.clone();
        s.seed = crate::mix_seed(self.seed, index);
        s
    }

    pub fn generate(&self) -> Result<Instance> {
        match self.variant {
            Variant::Cvrp => gen_cvrp(self),
            Variant::Vrptw => gen_vrptw(self),
            Variant::Pcvrp => gen_pcvrp(self),
        }
    }
}

/// Medium vehicle capacity by problem size. Points up to N=100 follow the
/// usual uniform-instance convention; larger sizes are interpolated defaults.
const CAPACITY_POINTS: [(f64, f64); 7] = [
    (10.0, 20.0),
    (20.0, 30.0),
    (50.0, 40.0),
    (100.0, 50.0),
    (500.0, 125.0),
    (1000.0, 200.0),
    (2000.0, 300.0),
];

pub fn capacity_for(n: usize, profile: CapacityProfile) -> f64 {
    let x = n as f64;
    let base = if x <= CAPACITY_POINTS[0].0 {
        CAPACITY_POINTS[0].1
    } else if let Some(w) = CAPACITY_POINTS.windows(2).find(|w| x <= w[1].0) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    } else {
        let (x1, y1) = CAPACITY_POINTS[CAPACITY_POINTS.len() - 1];
        y1 + 0.1 * (x - x1)
    };
    (base * profile.factor()).round().max(MAX_DEMAND)
}

const MAX_DEMAND: f64 = 9.0;

struct Base {
    coords: Vec<[f64; 2]>,
    demand: Vec<f64>,
    capacity: f64,
    rng: SearchRng,
}

fn uniform_point(rng: &mut SearchRng) -> [f64; 2] {
    [rng.random::<f64>(), rng.random::<f64>()]
}

fn base(spec: &GeneratorSpec) -> Result<Base> {
    if spec.n == 0 {
        return Err(CoreError::Config("instance needs at least one customer".into()));
    }
    let mut rng = stream_rng(spec.seed, 0);
    let depot = uniform_point(&mut rng);
    let n_centers = spec.n.div_ceil(spec.cluster.customers_per_center.max(1));
    let centers: Vec<[f64; 2]> = match spec.location {
        LocationMode::Uniform => Vec::new(),
        _ => (0..n_centers).map(|_| uniform_point(&mut rng)).collect(),
    };
    let normal = Normal::new(0.0, spec.cluster.sigma)
        .map_err(|e| CoreError::Config(format!("cluster sigma: {e}")))?;
    let mut coords = Vec::with_capacity(spec.n + 1);
    coords.push(depot);
    for _ in 0..spec.n {
        let clustered = match spec.location {
            LocationMode::Uniform => false,
            LocationMode::Clustered => true,
            LocationMode::Mixed => rng.random_bool(0.5),
        };
        let p = if clustered {
            let c = centers[rng.random_range(0..centers.len())];
            [
                (c[0] + normal.sample(&mut rng)).clamp(0.0, 1.0),
                (c[1] + normal.sample(&mut rng)).clamp(0.0, 1.0),
            ]
        } else {
            uniform_point(&mut rng)
        };
        coords.push(p);
    }
    let demand = (0..spec.n).map(|_| rng.random_range(1..=9) as f64).collect();
    Ok(Base { coords, demand, capacity: capacity_for(spec.n, spec.capacity), rng })
}

fn instance_id(spec: &GeneratorSpec) -> String {
    format!(
        "{}-n{}-{}-{}-s{}",
        spec.variant,
        spec.n,
        serde_json::to_value(spec.location).unwrap().as_str().unwrap(),
        serde_json::to_value(spec.capacity).unwrap().as_str().unwrap(),
        spec.seed
    )
}

fn parts(spec: &GeneratorSpec, b: &Base) -> InstanceParts {
    InstanceParts {
        variant: spec.variant,
        id: instance_id(spec),
        coords: b.coords.clone(),
        demand: b.demand.clone(),
        capacity: b.capacity,
        tw_open: None,
        tw_close: None,
        service: None,
        prize: None,
    }
}

/// Uniform, clustered or mixed locations; integer demands in 1..=9.
pub fn gen_cvrp(spec: &GeneratorSpec) -> Result<Instance> {
    let mut spec = spec.clone();
    spec.variant = Variant::Cvrp;
    let b = base(&spec)?;
    Instance::new(parts(&spec, &b))
}

/// Locations and demands as for CVRP plus time windows centred on a random
/// time that keeps each out-and-back visit feasible.
pub fn gen_vrptw(spec: &GeneratorSpec) -> Result<Instance> {
    let mut spec = spec.clone();
    spec.variant = Variant::Vrptw;
    let mut b = base(&spec)?;
    let tw = spec.time_windows;
    let h = tw.horizon;
    let service = tw.service * h;
    let depot = b.coords[0];
    let mut open = vec![0.0; spec.n + 1];
    let mut close = vec![0.0; spec.n + 1];
    close[0] = h;
    for i in 1..=spec.n {
        let p = b.coords[i];
        let d = (p[0] - depot[0]).hypot(p[1] - depot[1]);
        let (lo, hi) = (d, h - d - service);
        if hi < lo {
            return Err(CoreError::Config(format!(
                "horizon {h} too short to serve customer {i} at distance {d}"
            )));
        }
        let center = if hi > lo { b.rng.random_range(lo..=hi) } else { lo };
        let width = b.rng.random_range(tw.width_min * h..=tw.width_max * h);
        open[i] = lo.max(center - width / 2.0);
        close[i] = hi.min(center + width / 2.0);
    }
    let mut parts = parts(&spec, &b);
    parts.tw_open = Some(open);
    parts.tw_close = Some(close);
    parts.service = Some(vec![service; spec.n]);
    Instance::new(parts)
}

/// Locations, demands and capacity as for CVRP; prizes grow with demand.
pub fn gen_pcvrp(spec: &GeneratorSpec) -> Result<Instance> {
    let mut spec = spec.clone();
    spec.variant = Variant::Pcvrp;
    let mut b = base(&spec)?;
    let mean_q = b.demand.iter().sum::<f64>() / spec.n as f64;
    let (lo, hi) = (spec.prizes.low, spec.prizes.high);
    if !(lo > 0.0 && hi >= lo) {
        return Err(CoreError::Config(format!("prize range [{lo}, {hi}] must be positive")));
    }
    let prize = b
        .demand
        .clone()
        .iter()
        .map(|q| q / mean_q * b.rng.random_range(lo..=hi))
        .collect();
    let mut parts = parts(&spec, &b);
    parts.prize = Some(prize);
    Instance::new(parts)
}
