//! Forward completion: any input inside the box extends to a feasible point of
//! the encoded model by evaluating the network.

use crate::encoder::{MilpModel, Role};
use crate::lp::FEASIBILITY_TOL;
use crate::network::{forward_eval, Network};

/// Complete a full assignment from an input vector.
///
/// `bounds` are the node bounds; fixed binaries are honoured when the forward
/// pass agrees with them (a zero pre-activation agrees with either value).
/// Returns `None` when the forward pass contradicts a fixing or the completed
/// point violates a model row (e.g. an adversarial margin).
pub fn complete_from_input(
    model: &MilpModel,
    net: &Network,
    x0: &[f64],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    let acts = forward_eval(net, x0).ok()?;
    let mut point = vec![0.0; model.base.num_vars()];
    for (key, &v) in &model.var_index {
        if key.role == Role::X {
            point[v] = *acts.outputs.get(key.layer)?.get(key.unit)?;
        }
    }
    for u in &model.relu_units {
        let pre = acts.pre_activations[u.layer].as_ref()?[u.unit];
        point[u.s] = (-pre).max(0.0);
        let wanted = if pre < 0.0 { 1.0 } else { 0.0 };
        let (lo, hi) = bounds[u.z];
        let z = if lo == hi && lo != wanted {
            if pre.abs() > FEASIBILITY_TOL {
                return None;
            }
            lo
        } else {
            wanted
        };
        point[u.z] = z;
    }
    for group in &model.pool_groups {
        let values: Vec<f64> = group.inputs.iter().map(|&y| point[y]).collect();
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let is_max = |i: usize| values[i] >= best - FEASIBILITY_TOL;
        let forced = group.selectors.iter().position(|&z| bounds[z].0 >= 1.0);
        let pick = match forced {
            Some(i) if is_max(i) => i,
            Some(_) => return None,
            None => (0..values.len()).find(|&i| is_max(i) && bounds[group.selectors[i]].1 >= 1.0)?,
        };
        for (i, &z) in group.selectors.iter().enumerate() {
            point[z] = if i == pick { 1.0 } else { 0.0 };
        }
    }
    for link in &model.distances {
        point[link.d] = (point[link.input] - link.reference).abs();
    }
    model.is_feasible(&point).then_some(point)
}

/// Clamp the layer-0 values of `lp_point` into the node box and complete them.
pub fn primal_heuristic_forward(
    model: &MilpModel,
    net: &Network,
    lp_point: &[f64],
    bounds: &[(f64, f64)],
) -> Option<Vec<f64>> {
    let x0: Vec<f64> = model
        .input_vars()
        .into_iter()
        .map(|v| lp_point[v].clamp(bounds[v].0, bounds[v].1))
        .collect();
    complete_from_input(model, net, &x0, bounds)
}
