//! Layer-by-layer bound tightening.
//!
//! For unit `j` of layer `k` the network is truncated after layer `k`, keeping
//! only unit `j` there (as a linear unit, so its value is the pre-activation),
//! and its value is maximized and minimized with layers `< k` already tightened.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoder::{
    derive_interval_bounds, encode_network, interval_entry, interval_layer, BoundsTable, MilpModel,
    Objective, Provenance, UnitBounds,
};
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LpStatus, Sense};
use crate::network::{Activation, Dense, Layer, Network, Pool};
use crate::solver::{solve_milp, SolveStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightenConfig {
    /// Seconds per bound.
    pub per_bound_time_limit: f64,
    pub use_milp: bool,
    pub seed: u64,
    /// Tighten the units of one layer concurrently.
    pub parallel: bool,
}

impl Default for TightenConfig {
    fn default() -> Self {
        Self {
            per_bound_time_limit: 300.0,
            use_milp: true,
            seed: 0,
            parallel: true,
        }
    }
}

/// Network ending at layer `k` with only unit `j` kept there, made linear.
fn truncate(net: &Network, k: usize, j: usize) -> Network {
    let mut layers: Vec<Layer> = net.layers[..k - 1].to_vec();
    let last = match net.layer(k) {
        Layer::Dense(d) => Layer::Dense(Dense::new(
            vec![d.row(j).to_vec()],
            vec![d.bias[j]],
            Activation::Linear,
        )),
        Layer::MaxPool(p) => Layer::MaxPool(Pool { inputs: p.inputs, groups: vec![p.groups[j].clone()] }),
        Layer::AvgPool(p) => Layer::AvgPool(Pool { inputs: p.inputs, groups: vec![p.groups[j].clone()] }),
    };
    layers.push(last);
    Network::new(net.input_lower.clone(), net.input_upper.clone(), layers)
}

/// Upper bound on the value of the single output of `model`, plus its provenance.
fn maximize(model: &MilpModel, config: &TightenConfig) -> Result<Option<(f64, Provenance)>> {
    if !config.use_milp {
        let lin = model.clone().linearize_indicators()?;
        let sol = solve_lp(&lin.base, 200_000)?;
        return match sol.status {
            LpStatus::Optimal => Ok(Some((sol.objective, Provenance::LpTightened))),
            LpStatus::Infeasible => Ok(None),
            other => Err(Error::NodeLp { node: 0, message: format!("relaxation returned {other:?}") }),
        };
    }
    let cfg = SolverConfig {
        time_limit: config.per_bound_time_limit,
        rel_gap_target: 1e-9,
        seed: config.seed,
        ..SolverConfig::default()
    };
    let r = solve_milp(model, &cfg)?;
    Ok(match r.status {
        SolveStatus::ProvenOptimal => Some((r.dual_bound, Provenance::LpTightened)),
        SolveStatus::Infeasible => None,
        SolveStatus::Feasible(_) | SolveStatus::NoSolution(_) => {
            Some((r.dual_bound, Provenance::TimeLimitEstimate))
        }
    })
}

fn tighten_unit(
    net: &Network,
    table: &BoundsTable,
    k: usize,
    j: usize,
    clip: UnitBounds,
    config: &TightenConfig,
) -> Result<UnitBounds> {
    let sub = truncate(net, k, j);
    let mut sub_table = BoundsTable {
        input_lower: table.input_lower.clone(),
        input_upper: table.input_upper.clone(),
        layers: table.layers[..k - 1].to_vec(),
    };
    sub_table.layers.push(vec![clip]);
    let mut model = encode_network(&sub, &sub_table)?;
    let mut out = clip;
    for (coeff, is_x) in [(1.0, true), (-1.0, false)] {
        let limit = if is_x { clip.ub_x } else { clip.ub_s };
        if limit <= 0.0 {
            continue;
        }
        model.set_objective(&Objective::unit(k, 0, coeff), Sense::Maximize)?;
        // an empty feasible set leaves the entry at the clip value
        let Some((value, source)) = maximize(&model, config)? else { continue };
        let value = value.max(0.0);
        if value < limit {
            if is_x {
                out.ub_x = value;
                out.x_source = source;
            } else {
                out.ub_s = value;
                out.s_source = source;
            }
        }
    }
    Ok(out)
}

/// Tighten every entry of the interval table of `net`.
pub fn tighten_bounds(net: &Network, config: &TightenConfig) -> Result<BoundsTable> {
    tighten_bounds_from(net, config, None)
}

/// As [`tighten_bounds`], never exceeding the entries of `seed` when given.
pub fn tighten_bounds_from(
    net: &Network,
    config: &TightenConfig,
    seed: Option<&BoundsTable>,
) -> Result<BoundsTable> {
    let interval = derive_interval_bounds(net)?;
    if let Some(s) = seed {
        if s.shape() != interval.shape() {
            return Err(Error::Shape(format!("seed table {:?} vs network {:?}", s.shape(), interval.shape())));
        }
    }
    let mut table = BoundsTable {
        input_lower: interval.input_lower.clone(),
        input_upper: interval.input_upper.clone(),
        layers: Vec::with_capacity(net.depth()),
    };
    for k in 1..=net.depth() {
        let prev = table.output_ranges(net, k - 1);
        let clips: Vec<UnitBounds> = interval_layer(net.layer(k), &prev)
            .into_iter()
            .enumerate()
            .map(|(j, range)| {
                let mut c = interval_entry(range);
                let base = interval.layers[k - 1][j];
                c.ub_x = c.ub_x.min(base.ub_x);
                c.ub_s = c.ub_s.min(base.ub_s);
                if let Some(prior) = seed.and_then(|s| s.get(k, j)) {
                    if prior.ub_x < c.ub_x {
                        c.ub_x = prior.ub_x;
                        c.x_source = prior.x_source;
                    }
                    if prior.ub_s < c.ub_s {
                        c.ub_s = prior.ub_s;
                        c.s_source = prior.s_source;
                    }
                }
                c
            })
            .collect();
        let work = |(j, &clip): (usize, &UnitBounds)| tighten_unit(net, &table, k, j, clip, config);
        let results: Vec<Result<UnitBounds>> = if config.parallel {
            clips.par_iter().enumerate().map(work).collect()
        } else {
            clips.iter().enumerate().map(work).collect()
        };
        let mut layer = Vec::with_capacity(clips.len());
        for (j, r) in results.into_iter().enumerate() {
            match r {
                Ok(b) => layer.push(b),
                Err(source) => {
                    layer.extend_from_slice(&clips[j..]);
                    table.layers.push(layer);
                    return Err(Error::Tighten {
                        layer: k,
                        unit: j,
                        source: Box::new(source),
                        partial: Box::new(complete_with_intervals(net, table)),
                    });
                }
            }
        }
        log::info!("tightened layer {k} ({} units)", clips.len());
        table.layers.push(layer);
    }
    Ok(table)
}

fn complete_with_intervals(net: &Network, mut table: BoundsTable) -> BoundsTable {
    for k in table.layers.len() + 1..=net.depth() {
        let prev = table.output_ranges(net, k - 1);
        let entries = interval_layer(net.layer(k), &prev).into_iter().map(interval_entry).collect();
        table.layers.push(entries);
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryDelta {
    pub layer: usize,
    pub unit: usize,
    /// `a.ub_x - b.ub_x`.
    pub dx: f64,
    /// `a.ub_s - b.ub_s`.
    pub ds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominanceReport {
    pub deltas: Vec<EntryDelta>,
    /// Entries where `b` is looser than `a`.
    pub looser: Vec<(usize, usize)>,
}

impl DominanceReport {
    pub fn strictly_tighter(&self) -> usize {
        self.deltas.iter().filter(|d| d.dx > 0.0 || d.ds > 0.0).count()
    }

    pub fn b_dominates(&self) -> bool {
        self.looser.is_empty()
    }
}

/// Per-entry comparison of `b` against a baseline `a`.
pub fn compare_tables(a: &BoundsTable, b: &BoundsTable) -> Result<DominanceReport> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    let mut deltas = Vec::new();
    let mut looser = Vec::new();
    for ((layer, unit, ea), (_, _, eb)) in a.entries().zip(b.entries()) {
        let d = EntryDelta { layer, unit, dx: ea.ub_x - eb.ub_x, ds: ea.ub_s - eb.ub_s };
        if d.dx < 0.0 || d.ds < 0.0 {
            looser.push((layer, unit));
        }
        deltas.push(d);
    }
    Ok(DominanceReport { deltas, looser })
}
