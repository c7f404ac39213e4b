use crate::encoder::{BinaryRole, MilpModel};
use crate::error::{Error, Result};

/// Integrality slack under which a binary counts as already integral.
pub const BRANCH_INTEGRALITY_TOL: f64 = 1e-6;

/// A subproblem: the root model with tightened variable bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchNode {
    pub id: u64,
    pub parent: Option<u64>,
    /// `(var, lower, upper)`; each override intersects the bounds before it.
    pub overrides: Vec<(usize, f64, f64)>,
    /// LP objective of the parent in minimization form (`-inf` at the root).
    pub bound: f64,
    pub depth: usize,
}

impl BranchNode {
    pub fn root() -> Self {
        Self {
            id: 0,
            parent: None,
            overrides: Vec::new(),
            bound: f64::NEG_INFINITY,
            depth: 0,
        }
    }

    /// Effective bounds of every variable at this node.
    pub fn bounds(&self, model: &MilpModel) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = model.base.vars.iter().map(|v| (v.lower, v.upper)).collect();
        for &(j, lo, hi) in &self.overrides {
            b[j].0 = b[j].0.max(lo);
            b[j].1 = b[j].1.min(hi);
        }
        b
    }

    pub fn bounds_of(&self, model: &MilpModel, var: usize) -> (f64, f64) {
        let v = &model.base.vars[var];
        self.overrides
            .iter()
            .filter(|o| o.0 == var)
            .fold((v.lower, v.upper), |(lo, hi), o| (lo.max(o.1), hi.min(o.2)))
    }

    fn child(&self, extra: Vec<(usize, f64, f64)>, bound: f64) -> Self {
        let mut overrides = self.overrides.clone();
        overrides.extend(extra);
        Self {
            id: 0,
            parent: Some(self.id),
            overrides,
            bound,
            depth: self.depth + 1,
        }
    }
}

/// Split `node` on binary `z` whose LP value is `z_value`.
///
/// The down child fixes `z = 0`; the up child fixes `z = 1`. For a ReLU binary the
/// implied bound is applied as well (`s <= 0` down, `x <= 0` up). For a max-pool
/// selector the up child also zeroes the other selectors of its group, which
/// activates `out <= y_i` through its big-M row. Children inherit `node_bound`.
pub fn branch(
    node: &BranchNode,
    model: &MilpModel,
    z: usize,
    z_value: f64,
    node_bound: f64,
) -> Result<(BranchNode, BranchNode)> {
    let role = model
        .binary_roles()
        .get(&z)
        .copied()
        .ok_or_else(|| Error::Branch { var: z, reason: "not a binary variable".into() })?;
    let (lo, hi) = node.bounds_of(model, z);
    if lo == hi {
        return Err(Error::Branch { var: z, reason: format!("already fixed to {lo}") });
    }
    if (z_value - z_value.round()).abs() <= BRANCH_INTEGRALITY_TOL {
        return Err(Error::Branch { var: z, reason: format!("value {z_value} is integral") });
    }
    let (down, up) = match role {
        BinaryRole::Relu(i) => {
            let u = model.relu_units[i];
            (
                vec![(z, 0.0, 0.0), (u.s, f64::NEG_INFINITY, 0.0)],
                vec![(z, 1.0, 1.0), (u.x, f64::NEG_INFINITY, 0.0)],
            )
        }
        BinaryRole::Selector { group, member } => {
            let mut up = vec![(z, 1.0, 1.0)];
            for (m, &other) in model.pool_groups[group].selectors.iter().enumerate() {
                if m != member {
                    up.push((other, 0.0, 0.0));
                }
            }
            (vec![(z, 0.0, 0.0)], up)
        }
    };
    Ok((node.child(down, node_bound), node.child(up, node_bound)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{derive_interval_bounds, encode_network};
    use crate::fixtures;

    fn model(net: &crate::network::Network) -> MilpModel {
        encode_network(net, &derive_interval_bounds(net).unwrap())
            .unwrap()
            .linearize_indicators()
            .unwrap()
    }

    #[test]
    fn relu_children_apply_implications() {
        let m = model(&fixtures::tiny_2_2_1());
        let u = m.relu_units[0];
        let root = BranchNode::root();
        let (down, up) = branch(&root, &m, u.z, 0.4, 1.5).unwrap();
        assert_eq!(down.bounds_of(&m, u.z), (0.0, 0.0));
        assert_eq!(down.bounds_of(&m, u.s), (0.0, 0.0));
        assert_eq!(up.bounds_of(&m, u.z), (1.0, 1.0));
        assert_eq!(up.bounds_of(&m, u.x), (0.0, 0.0));
        assert_eq!((down.depth, down.bound, down.parent), (1, 1.5, Some(0)));
    }

    #[test]
    fn selector_children() {
        let m = model(&fixtures::max_pool_net());
        let g = &m.pool_groups[0];
        let (down, up) = branch(&BranchNode::root(), &m, g.selectors[1], 0.5, 0.0).unwrap();
        assert_eq!(down.bounds_of(&m, g.selectors[1]), (0.0, 0.0));
        assert_eq!(up.bounds_of(&m, g.selectors[1]), (1.0, 1.0));
        assert_eq!(up.bounds_of(&m, g.selectors[0]), (0.0, 0.0));
    }

    #[test]
    fn refuses_fixed_or_integral_binaries() {
        let m = model(&fixtures::tiny_2_2_1());
        let z = m.relu_units[0].z;
        let (down, _) = branch(&BranchNode::root(), &m, z, 0.4, 0.0).unwrap();
        assert!(matches!(branch(&down, &m, z, 0.4, 0.0), Err(Error::Branch { .. })));
        assert!(matches!(branch(&BranchNode::root(), &m, z, 1.0, 0.0), Err(Error::Branch { .. })));
        let x = m.relu_units[0].x;
        assert!(branch(&BranchNode::root(), &m, x, 0.5, 0.0).is_err());
    }
}
