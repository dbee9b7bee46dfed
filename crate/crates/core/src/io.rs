//! JSON instance and solution files (`format_version` 1).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::instance::{Instance, InstanceParts, Variant};
use crate::solution::Solution;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    format_version: u32,
    variant: Variant,
    id: String,
    coords: Vec<[f64; 2]>,
    demand: Vec<f64>,
    capacity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tw_open: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tw_close: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    service: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prize: Option<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolutionDoc {
    format_version: u32,
    instance_id: String,
    routes: Vec<Vec<usize>>,
    unvisited: Vec<usize>,
    cost: f64,
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    // reject unknown versions before the typed parse so newer files get a
    // version error rather than an unknown-field error
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| CoreError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == FORMAT_VERSION as u64 => {}
        Some(v) => {
            return Err(CoreError::FormatVersion { found: v as u32, expected: FORMAT_VERSION })
        }
        None => {
            return Err(CoreError::Parse {
                offset: 0,
                message: "missing integer field 'format_version'".into(),
            })
        }
    }
    serde_json::from_str(text).map_err(|e| CoreError::Parse {
        offset: byte_offset(text, e.line(), e.column()),
        message: e.to_string(),
    })
}

pub fn instance_to_json(inst: &Instance) -> String {
    let p = inst.to_parts();
    let doc = InstanceDoc {
        format_version: FORMAT_VERSION,
        variant: p.variant,
        id: p.id,
        coords: p.coords,
        demand: p.demand,
        capacity: p.capacity,
        tw_open: p.tw_open,
        tw_close: p.tw_close,
        service: p.service,
        prize: p.prize,
    };
    let mut s = serde_json::to_string(&doc).expect("instance serializes");
    s.push('\n');
    s
}

pub fn instance_from_json(text: &str) -> Result<Instance> {
    let d: InstanceDoc = parse(text)?;
    Instance::new(InstanceParts {
        variant: d.variant,
        id: d.id,
        coords: d.coords,
        demand: d.demand,
        capacity: d.capacity,
        tw_open: d.tw_open,
        tw_close: d.tw_close,
        service: d.service,
        prize: d.prize,
    })
}

pub fn save_instance(inst: &Instance, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, instance_to_json(inst))?;
    Ok(())
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<Instance> {
    instance_from_json(&fs::read_to_string(path)?)
}

pub fn solution_to_json(inst: &Instance, sol: &Solution) -> String {
    let doc = SolutionDoc {
        format_version: FORMAT_VERSION,
        instance_id: inst.id().to_string(),
        routes: sol.routes().to_vec(),
        unvisited: sol.unvisited().to_vec(),
        cost: sol.cost(),
    };
    let mut s = serde_json::to_string(&doc).expect("solution serializes");
    s.push('\n');
    s
}

/// Parse a solution and validate it against `inst`. The stored cost must
/// agree with the recomputed objective.
pub fn solution_from_json(text: &str, inst: &Instance) -> Result<Solution> {
    let d: SolutionDoc = parse(text)?;
    if d.instance_id != inst.id() {
        return Err(CoreError::InvalidSolution(format!(
            "solution is for instance '{}', not '{}'",
            d.instance_id,
            inst.id()
        )));
    }
    let sol = Solution::new(inst, d.routes, d.unvisited)?;
    if (sol.cost() - d.cost).abs() > 1e-6 * (1.0 + d.cost.abs()) {
        return Err(CoreError::InvalidSolution(format!(
            "stored cost {} disagrees with recomputed {}",
            d.cost,
            sol.cost()
        )));
    }
    Ok(sol)
}

pub fn save_solution(inst: &Instance, sol: &Solution, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, solution_to_json(inst, sol))?;
    Ok(())
}

pub fn load_solution(path: impl AsRef<Path>, inst: &Instance) -> Result<Solution> {
    solution_from_json(&fs::read_to_string(path)?, inst)
}
