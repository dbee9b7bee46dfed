use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Problem variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "CVRP")]
    Cvrp,
    #[serde(rename = "VRPTW")]
    Vrptw,
    #[serde(rename = "PCVRP")]
    Pcvrp,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cvrp => "cvrp",
            Variant::Vrptw => "vrptw",
            Variant::Pcvrp => "pcvrp",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Variant::Cvrp => 0,
            Variant::Vrptw => 1,
            Variant::Pcvrp => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Variant> {
        match code {
            0 => Some(Variant::Cvrp),
            1 => Some(Variant::Vrptw),
            2 => Some(Variant::Pcvrp),
            _ => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cvrp" => Ok(Variant::Cvrp),
            "vrptw" => Ok(Variant::Vrptw),
            "pcvrp" => Ok(Variant::Pcvrp),
            other => Err(CoreError::Config(format!("unknown variant '{other}'"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Raw instance data in the on-disk layout: per-customer arrays have `N`
/// entries, node arrays (`coords`, `tw_open`, `tw_close`) have `N + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceParts {
    pub variant: Variant,
    pub id: String,
    pub coords: Vec<[f64; 2]>,
    pub demand: Vec<f64>,
    pub capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw_open: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw_close: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub service: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prize: Option<Vec<f64>>,
}

/// Immutable problem description. Node 0 is the depot, nodes `1..=N` are
/// customers. Per-node vectors are stored padded to `N + 1` entries with a
/// zero depot slot.
#[derive(Debug, Clone)]
pub struct Instance {
    variant: Variant,
    id: String,
    coords: Vec<[f64; 2]>,
    demand: Vec<f64>,
    capacity: f64,
    tw_open: Vec<f64>,
    tw_close: Vec<f64>,
    service: Vec<f64>,
    prize: Vec<f64>,
    dist: Option<Vec<f64>>,
}

/// Instances up to this many customers get a precomputed distance matrix.
pub const MATRIX_MAX_CUSTOMERS: usize = 1000;

impl Instance {
    pub fn new(parts: InstanceParts) -> Result<Instance> {
        let n_nodes = parts.coords.len();
        let use_matrix = n_nodes.saturating_sub(1) <= MATRIX_MAX_CUSTOMERS;
        Self::with_matrix(parts, use_matrix)
    }

    /// Build an instance, choosing explicitly whether to precompute the
    /// full distance matrix.
    pub fn with_matrix(parts: InstanceParts, use_matrix: bool) -> Result<Instance> {
        let invalid = |m: String| Err(CoreError::InvalidInstance(m));
        let n_nodes = parts.coords.len();
        if n_nodes < 2 {
            return invalid("need a depot and at least one customer".into());
        }
        let n = n_nodes - 1;
        if parts.demand.len() != n {
            return invalid(format!("demand has {} entries, expected {n}", parts.demand.len()));
        }
        if !(parts.capacity.is_finite() && parts.capacity > 0.0) {
            return invalid(format!("capacity must be positive, got {}", parts.capacity));
        }
        for (i, c) in parts.coords.iter().enumerate() {
            if !(c[0].is_finite() && c[1].is_finite()) {
                return invalid(format!("node {i} has non-finite coordinates"));
            }
        }
        for (i, &q) in parts.demand.iter().enumerate() {
            if !(q > 0.0 && q <= parts.capacity) {
                return invalid(format!(
                    "customer {} demand {q} outside (0, {}]",
                    i + 1,
                    parts.capacity
                ));
            }
        }

        let has_tw = parts.tw_open.is_some() || parts.tw_close.is_some() || parts.service.is_some();
        let mut tw_open = vec![0.0; n_nodes];
        let mut tw_close = vec![f64::INFINITY; n_nodes];
        let mut service = vec![0.0; n_nodes];
        match (parts.variant, has_tw) {
            (Variant::Vrptw, true) => {
                let (Some(open), Some(close), Some(svc)) =
                    (&parts.tw_open, &parts.tw_close, &parts.service)
                else {
                    return invalid("VRPTW requires tw_open, tw_close and service".into());
                };
                if open.len() != n_nodes || close.len() != n_nodes {
                    return invalid(format!("time windows need {n_nodes} entries"));
                }
                if svc.len() != n {
                    return invalid(format!("service needs {n} entries"));
                }
                if open[0] != 0.0 {
                    return invalid("depot window must open at 0".into());
                }
                for i in 0..n_nodes {
                    if !(open[i].is_finite() && close[i].is_finite() && open[i] <= close[i]) {
                        return invalid(format!("node {i} has an invalid window"));
                    }
                }
                if svc.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                    return invalid("service times must be non-negative".into());
                }
                tw_open.copy_from_slice(open);
                tw_close.copy_from_slice(close);
                service[1..].copy_from_slice(svc);
            }
            (Variant::Vrptw, false) => return invalid("VRPTW requires time windows".into()),
            (_, true) => return invalid("time windows are only valid for VRPTW".into()),
            (_, false) => {}
        }

        let mut prize = vec![0.0; n_nodes];
        match (parts.variant, &parts.prize) {
            (Variant::Pcvrp, Some(p)) => {
                if p.len() != n {
                    return invalid(format!("prize needs {n} entries"));
                }
                if p.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return invalid("prizes must be positive".into());
                }
                prize[1..].copy_from_slice(p);
            }
            (Variant::Pcvrp, None) => return invalid("PCVRP requires prizes".into()),
            (_, Some(_)) => return invalid("prizes are only valid for PCVRP".into()),
            (_, None) => {}
        }

        let mut demand = Vec::with_capacity(n_nodes);
        demand.push(0.0);
        demand.extend_from_slice(&parts.demand);

        let mut inst = Instance {
            variant: parts.variant,
            id: parts.id,
            coords: parts.coords,
            demand,
            capacity: parts.capacity,
            tw_open,
            tw_close,
            service,
            prize,
            dist: None,
        };
        if use_matrix {
            let mut m = vec![0.0; n_nodes * n_nodes];
            for i in 0..n_nodes {
                for j in 0..n_nodes {
                    m[i * n_nodes + j] = inst.euclid(i, j);
                }
            }
            inst.dist = Some(m);
        }
        Ok(inst)
    }

    /// Export in the on-disk layout.
    pub fn to_parts(&self) -> InstanceParts {
        let tw = self.variant == Variant::Vrptw;
        InstanceParts {
            variant: self.variant,
            id: self.id.clone(),
            coords: self.coords.clone(),
            demand: self.demand[1..].to_vec(),
            capacity: self.capacity,
            tw_open: tw.then(|| self.tw_open.clone()),
            tw_close: tw.then(|| self.tw_close.clone()),
            service: tw.then(|| self.service[1..].to_vec()),
            prize: (self.variant == Variant::Pcvrp).then(|| self.prize[1..].to_vec()),
        }
    }

    /// Same instance with new coordinates (used for augmentation views).
    pub fn with_coords(&self, coords: Vec<[f64; 2]>) -> Instance {
        assert_eq!(coords.len(), self.coords.len(), "coordinate count mismatch");
        let mut parts = self.to_parts();
        parts.coords = coords;
        Instance::with_matrix(parts, self.dist.is_some()).expect("coordinates are finite")
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of customers `N`.
    pub fn n_customers(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[[f64; 2]] {
        &self.coords
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    /// Demand of node `i` (0 for the depot).
    #[inline]
    pub fn demand(&self, i: usize) -> f64 {
        self.demand[i]
    }

    #[inline]
    pub fn tw_open(&self, i: usize) -> f64 {
        self.tw_open[i]
    }

    #[inline]
    pub fn tw_close(&self, i: usize) -> f64 {
        self.tw_close[i]
    }

    #[inline]
    pub fn service(&self, i: usize) -> f64 {
        self.service[i]
    }

    /// Prize of node `i` (0 unless PCVRP).
    #[inline]
    pub fn prize(&self, i: usize) -> f64 {
        self.prize[i]
    }

    /// Depot horizon `b_0` for VRPTW; infinite otherwise.
    pub fn horizon(&self) -> f64 {
        self.tw_close[0]
    }

    pub fn has_distance_matrix(&self) -> bool {
        self.dist.is_some()
    }

    /// Euclidean distance between nodes `i` and `j`.
    ///
    /// Panics if either index exceeds `N`.
    #[inline]
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let n = self.coords.len();
        assert!(i < n && j < n, "node index out of range: ({i}, {j}) with {n} nodes");
        match &self.dist {
            Some(m) => m[i * n + j],
            None => self.euclid(i, j),
        }
    }

    #[inline]
    fn euclid(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        let (a, b) = (self.coords[i], self.coords[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    }
}
