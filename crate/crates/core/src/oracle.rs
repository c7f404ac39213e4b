//! Ground truth for small models: fixing every binary turns the MILP into an
//! LP, so enumerating all activation patterns gives the exact optimum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{BoundsTable, MilpModel};
use crate::error::{Error, Result};
use crate::fixtures::sample_input;
use crate::lp::{solve_lp, LinearProgram, LpStatus, Sense};
use crate::network::{forward_eval, Layer, Network};

pub const ORACLE_BINARY_CAP: usize = 20;
/// Excess over a bound that counts as a violation.
pub const SAMPLE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleOutcome {
    Optimal {
        objective: f64,
        assignment: Vec<f64>,
        /// ReLU `z` values (unit order) followed by the chosen member of each pool group.
        pattern: Vec<usize>,
    },
    Infeasible,
}

impl OracleOutcome {
    pub fn objective(&self) -> Option<f64> {
        match self {
            Self::Optimal { objective, .. } => Some(*objective),
            Self::Infeasible => None,
        }
    }
}

fn decode(mut index: u64, radices: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; radices.len()];
    for (d, &r) in digits.iter_mut().zip(radices).rev() {
        *d = (index % r as u64) as usize;
        index /= r as u64;
    }
    digits
}

/// The model's LP without big-M rows, with one pattern imposed directly.
fn pattern_lp(model: &MilpModel, plain: &LinearProgram, pattern: &[usize]) -> Option<LinearProgram> {
    let mut lp = plain.clone();
    let fix = |lp: &mut LinearProgram, j: usize, v: f64| {
        lp.vars[j].lower = lp.vars[j].lower.max(v);
        lp.vars[j].upper = lp.vars[j].upper.min(v);
    };
    let r = model.relu_units.len();
    for (u, &z) in model.relu_units.iter().zip(pattern) {
        fix(&mut lp, u.z, z as f64);
        let off = if z == 1 { u.x } else { u.s };
        lp.vars[off].upper = lp.vars[off].upper.min(0.0);
    }
    for (g, &pick) in model.pool_groups.iter().zip(&pattern[r..]) {
        for (i, &z) in g.selectors.iter().enumerate() {
            fix(&mut lp, z, if i == pick { 1.0 } else { 0.0 });
        }
        lp.add_row(format!("pick{}_{}", g.layer, g.unit), vec![(g.out, 1.0), (g.inputs[pick], -1.0)], f64::NEG_INFINITY, 0.0);
    }
    lp.vars.iter().all(|v| v.lower <= v.upper).then_some(lp)
}

/// Exact optimum by solving one LP per activation pattern.
pub fn brute_force_optimum(model: &MilpModel) -> Result<OracleOutcome> {
    if model.binaries.len() > ORACLE_BINARY_CAP {
        return Err(Error::OracleCap { binaries: model.binaries.len(), cap: ORACLE_BINARY_CAP });
    }
    let mut plain = model.base.clone();
    let mut drop = model.big_m_rows.clone();
    drop.sort_unstable();
    for &row in drop.iter().rev() {
        plain.rows.remove(row);
    }
    let radices: Vec<usize> = std::iter::repeat_n(2, model.relu_units.len())
        .chain(model.pool_groups.iter().map(|g| g.inputs.len()))
        .collect();
    let total: u64 = radices.iter().map(|&r| r as u64).product();
    let maximize = model.base.sense == Sense::Maximize;
    let solved: Vec<(u64, f64, Vec<f64>)> = (0..total)
        .into_par_iter()
        .map(|index| -> Result<Option<(u64, f64, Vec<f64>)>> {
            let pattern = decode(index, &radices);
            let Some(lp) = pattern_lp(model, &plain, &pattern) else { return Ok(None) };
            let sol = solve_lp(&lp, 100_000)?;
            Ok(match sol.status {
                LpStatus::Optimal => Some((index, sol.objective, sol.values)),
                LpStatus::Infeasible => None,
                other => {
                    return Err(Error::NodeLp { node: index, message: format!("pattern LP returned {other:?}") })
                }
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let better = |a: f64, b: f64| if maximize { a > b } else { a < b };
    let mut best: Option<(u64, f64, Vec<f64>)> = None;
    for cand in solved {
        if best.as_ref().is_none_or(|b| better(cand.1, b.1)) {
            best = Some(cand);
        }
    }
    Ok(match best {
        Some((index, objective, assignment)) => OracleOutcome::Optimal {
            objective,
            assignment,
            pattern: decode(index, &radices),
        },
        None => OracleOutcome::Infeasible,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    X,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub layer: usize,
    pub unit: usize,
    pub kind: BoundKind,
    pub value: f64,
    pub bound: f64,
    pub sample: usize,
}

/// Forward-evaluate seeded uniform inputs and report values above their bounds.
pub fn sample_check_bounds(net: &Network, bounds: &BoundsTable, n_samples: usize, seed: u64) -> Vec<Violation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = Vec::new();
    for sample in 0..n_samples.max(1) {
        let x = sample_input(net, &mut rng);
        let acts = forward_eval(net, &x).expect("sample matches input width");
        for k in 1..=net.depth() {
            let values = match net.layer(k) {
                Layer::Dense(_) => acts.pre_activations[k].as_ref().expect("dense layer"),
                _ => &acts.outputs[k],
            };
            for (j, &v) in values.iter().enumerate() {
                let Some(b) = bounds.get(k, j) else { continue };
                if v > b.ub_x + SAMPLE_TOL {
                    found.push(Violation { layer: k, unit: j, kind: BoundKind::X, value: v, bound: b.ub_x, sample });
                }
                if -v > b.ub_s + SAMPLE_TOL {
                    found.push(Violation { layer: k, unit: j, kind: BoundKind::S, value: -v, bound: b.ub_s, sample });
                }
            }
        }
    }
    found
}
