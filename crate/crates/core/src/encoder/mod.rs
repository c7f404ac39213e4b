//! Translation of a network plus a bounds table into a 0-1 MILP.
//!
//! Every unit of every layer gets an output variable `x`. A ReLU unit with affine
//! input `w.y + b` additionally gets a slack `s` and a binary `z`:
//!
//! ```text
//! w.y + b = x - s,   0 <= x <= ub_x,   0 <= s <= ub_s
//! z = 1 -> x <= 0,   z = 0 -> s <= 0
//! ```
//!
//! Linear units are plain affine equalities, average pooling is a mean row, and
//! max pooling uses one selector binary per group member
//! (see [`encode_maxpool`]). Indicators stay symbolic until
//! [`MilpModel::linearize_indicators`] rewrites them as big-M rows.

mod bounds;
mod indicator;

use std::collections::BTreeMap;
use std::sync::Arc;

pub use bounds::{
    derive_interval_bounds, interval_entry, interval_layer, BoundsTable, Provenance, UnitBounds,
};
pub use indicator::{encode_maxpool, linearize_one, IndicatorConstraint, MaxPoolEncoding};

use crate::error::{Error, Result};
use crate::lp::{check_feasible, LinearProgram, Sense, FEASIBILITY_TOL};
use crate::network::{Activation, Layer, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    X,
    S,
    Z,
    /// Input distance variable of an adversarial model.
    D,
    /// Max-pool selector for the given group member.
    Select(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarKey {
    pub layer: usize,
    pub unit: usize,
    pub role: Role,
}

impl VarKey {
    pub fn new(layer: usize, unit: usize, role: Role) -> Self {
        Self { layer, unit, role }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReluUnit {
    pub layer: usize,
    pub unit: usize,
    pub x: usize,
    pub s: usize,
    pub z: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolGroup {
    pub layer: usize,
    pub unit: usize,
    pub out: usize,
    pub inputs: Vec<usize>,
    pub selectors: Vec<usize>,
}

/// `d >= |input - reference|`, as added by the adversarial builder.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceLink {
    pub input: usize,
    pub d: usize,
    pub reference: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryRole {
    /// Index into [`MilpModel::relu_units`].
    Relu(usize),
    /// Group index into [`MilpModel::pool_groups`] and member position.
    Selector { group: usize, member: usize },
}

#[derive(Debug, Clone)]
pub struct MilpModel {
    pub base: LinearProgram,
    /// Variables restricted to `{0, 1}`, in layer/unit order.
    pub binaries: Vec<usize>,
    pub indicators: Vec<IndicatorConstraint>,
    pub var_index: BTreeMap<VarKey, usize>,
    pub relu_units: Vec<ReluUnit>,
    pub pool_groups: Vec<PoolGroup>,
    pub distances: Vec<DistanceLink>,
    /// Rows produced by big-M linearization.
    pub big_m_rows: Vec<usize>,
    pub network: Arc<Network>,
}

/// Linear objective over unit outputs (`c`) and ReLU binaries (`gamma`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Objective {
    pub x_costs: BTreeMap<(usize, usize), f64>,
    pub z_costs: BTreeMap<(usize, usize), f64>,
}

impl Objective {
    pub fn unit(layer: usize, unit: usize, coeff: f64) -> Self {
        let mut o = Self::default();
        o.x_costs.insert((layer, unit), coeff);
        o
    }
}

pub fn encode_network(net: &Network, bounds: &BoundsTable) -> Result<MilpModel> {
    bounds.covers(net)?;
    let mut lp = LinearProgram::new(Sense::Minimize);
    let mut var_index = BTreeMap::new();
    let mut binaries = Vec::new();
    let mut indicators = Vec::new();
    let mut relu_units = Vec::new();
    let mut pool_groups = Vec::new();

    let mut prev: Vec<usize> = (0..net.input_dim)
        .map(|j| {
            let v = lp.add_var(format!("x0_{j}"), bounds.input_lower[j], bounds.input_upper[j]);
            var_index.insert(VarKey::new(0, j, Role::X), v);
            v
        })
        .collect();

    for k in 1..=net.depth() {
        let layer = net.layer(k);
        if layer.input_dim() != prev.len() {
            return Err(Error::Dimension(format!(
                "layer {k} expects {} inputs, layer {} has {}",
                layer.input_dim(),
                k - 1,
                prev.len()
            )));
        }
        let mut current = Vec::with_capacity(layer.output_dim());
        for u in 0..layer.output_dim() {
            let ub = bounds
                .get(k, u)
                .ok_or(Error::MissingBounds { layer: k, unit: u })?;
            let name = format!("{k}_{u}");
            match layer {
                Layer::Dense(d) => {
                    let mut coeffs: Vec<(usize, f64)> = d
                        .row(u)
                        .iter()
                        .zip(&prev)
                        .filter(|(w, _)| **w != 0.0)
                        .map(|(&w, &v)| (v, w))
                        .collect();
                    let rhs = -d.bias[u];
                    match d.activation {
                        Activation::Relu => {
                            let x = lp.add_var(format!("x{name}"), 0.0, ub.ub_x);
                            let s = lp.add_var(format!("s{name}"), 0.0, ub.ub_s);
                            // stable units: z fixed by the bounds
                            let (zl, zu) = if ub.ub_s <= 0.0 {
                                (0.0, 0.0)
                            } else if ub.ub_x <= 0.0 {
                                (1.0, 1.0)
                            } else {
                                (0.0, 1.0)
                            };
                            let z = lp.add_var(format!("z{name}"), zl, zu);
                            coeffs.push((x, -1.0));
                            coeffs.push((s, 1.0));
                            lp.add_row(format!("aff{name}"), coeffs, rhs, rhs);
                            indicators.push(IndicatorConstraint::upper_zero(z, true, x));
                            indicators.push(IndicatorConstraint::upper_zero(z, false, s));
                            binaries.push(z);
                            var_index.insert(VarKey::new(k, u, Role::X), x);
                            var_index.insert(VarKey::new(k, u, Role::S), s);
                            var_index.insert(VarKey::new(k, u, Role::Z), z);
                            relu_units.push(ReluUnit { layer: k, unit: u, x, s, z });
                            current.push(x);
                        }
                        Activation::Linear => {
                            let x = lp.add_var(format!("x{name}"), -ub.ub_s, ub.ub_x);
                            coeffs.push((x, -1.0));
                            lp.add_row(format!("aff{name}"), coeffs, rhs, rhs);
                            var_index.insert(VarKey::new(k, u, Role::X), x);
                            current.push(x);
                        }
                    }
                }
                Layer::AvgPool(p) => {
                    let x = lp.add_var(format!("x{name}"), -ub.ub_s, ub.ub_x);
                    let group = &p.groups[u];
                    let t = group.len() as f64;
                    let mut coeffs: Vec<(usize, f64)> =
                        group.iter().map(|&i| (prev[i], 1.0 / t)).collect();
                    coeffs.push((x, -1.0));
                    lp.add_row(format!("avg{name}"), coeffs, 0.0, 0.0);
                    var_index.insert(VarKey::new(k, u, Role::X), x);
                    current.push(x);
                }
                Layer::MaxPool(p) => {
                    let x = lp.add_var(format!("x{name}"), -ub.ub_s, ub.ub_x);
                    let inputs: Vec<usize> = p.groups[u].iter().map(|&i| prev[i]).collect();
                    let enc = encode_maxpool(&mut lp, &inputs, x, &name)?;
                    for (i, &z) in enc.binaries.iter().enumerate() {
                        var_index.insert(VarKey::new(k, u, Role::Select(i)), z);
                    }
                    binaries.extend(&enc.binaries);
                    indicators.extend(enc.indicators);
                    var_index.insert(VarKey::new(k, u, Role::X), x);
                    pool_groups.push(PoolGroup {
                        layer: k,
                        unit: u,
                        out: x,
                        inputs,
                        selectors: enc.binaries,
                    });
                    current.push(x);
                }
            }
        }
        prev = current;
    }

    Ok(MilpModel {
        base: lp,
        binaries,
        indicators,
        var_index,
        relu_units,
        pool_groups,
        distances: Vec::new(),
        big_m_rows: Vec::new(),
        network: Arc::new(net.clone()),
    })
}

/// Residuals of a full assignment against a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelResidual {
    pub max_bound_violation: f64,
    pub max_row_violation: f64,
    pub max_integrality_violation: f64,
    pub max_indicator_violation: f64,
}

impl ModelResidual {
    pub fn max(&self) -> f64 {
        self.max_bound_violation
            .max(self.max_row_violation)
            .max(self.max_integrality_violation)
            .max(self.max_indicator_violation)
    }

    pub fn feasible(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

impl MilpModel {
    pub fn var(&self, layer: usize, unit: usize, role: Role) -> Option<usize> {
        self.var_index.get(&VarKey::new(layer, unit, role)).copied()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.network.layer_sizes()
    }

    pub fn num_x_vars(&self) -> usize {
        self.var_index.keys().filter(|k| k.role == Role::X).count()
    }

    pub fn binary_roles(&self) -> BTreeMap<usize, BinaryRole> {
        let mut roles = BTreeMap::new();
        for (i, u) in self.relu_units.iter().enumerate() {
            roles.insert(u.z, BinaryRole::Relu(i));
        }
        for (g, group) in self.pool_groups.iter().enumerate() {
            for (member, &z) in group.selectors.iter().enumerate() {
                roles.insert(z, BinaryRole::Selector { group: g, member });
            }
        }
        roles
    }

    /// Input-layer variables, in unit order.
    pub fn input_vars(&self) -> Vec<usize> {
        (0..self.network.input_dim)
            .map(|j| self.var(0, j, Role::X).expect("input variable"))
            .collect()
    }

    /// Replaces the objective; units not mentioned get coefficient zero.
    pub fn set_objective(&mut self, objective: &Objective, sense: Sense) -> Result<()> {
        let mut coeffs = vec![0.0; self.base.num_vars()];
        for (&(layer, unit), &c) in &objective.x_costs {
            let v = self
                .var(layer, unit, Role::X)
                .ok_or(Error::UnknownUnit { layer, unit })?;
            coeffs[v] = c;
        }
        for (&(layer, unit), &c) in &objective.z_costs {
            let v = self
                .var(layer, unit, Role::Z)
                .ok_or(Error::UnknownUnit { layer, unit })?;
            coeffs[v] = c;
        }
        self.base.objective = coeffs;
        self.base.sense = sense;
        Ok(())
    }

    /// Replace every indicator with its big-M row. The indicators are dropped.
    pub fn linearize_indicators(mut self) -> Result<Self> {
        let indicators = std::mem::take(&mut self.indicators);
        for (i, ind) in indicators.iter().enumerate() {
            let row = linearize_one(&mut self.base, ind, format!("bigm{i}"))?;
            self.big_m_rows.push(row);
        }
        Ok(self)
    }

    pub fn is_linearized(&self) -> bool {
        self.indicators.is_empty()
    }

    /// Check a full assignment against rows, bounds, integrality and any
    /// remaining indicators.
    pub fn residual(&self, point: &[f64]) -> Result<ModelResidual> {
        let lp = check_feasible(&self.base, point)?;
        let max_integrality_violation = self
            .binaries
            .iter()
            .map(|&z| (point[z] - point[z].round()).abs())
            .fold(0.0, f64::max);
        let max_indicator_violation = self
            .indicators
            .iter()
            .filter(|ind| (point[ind.binary] >= 0.5) == ind.active_when)
            .map(|ind| (ind.lhs(point) - ind.rhs).max(0.0))
            .fold(0.0, f64::max);
        Ok(ModelResidual {
            max_bound_violation: lp.max_bound_violation,
            max_row_violation: lp.max_row_violation,
            max_integrality_violation,
            max_indicator_violation,
        })
    }

    pub fn is_feasible(&self, point: &[f64]) -> bool {
        self.residual(point)
            .map(|r| r.feasible(FEASIBILITY_TOL))
            .unwrap_or(false)
    }
}
