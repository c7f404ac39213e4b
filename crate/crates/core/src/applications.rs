//! Feature-visualization and minimal-L1 adversarial models.
//!
//! Labels are 0-based: class `d` is output unit `d` of the last layer.

use serde::{Deserialize, Serialize};

use crate::encoder::{encode_network, BoundsTable, DistanceLink, MilpModel, Objective, Role, VarKey};
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::network::{argmax, forward_eval, Network};

/// Tolerance of the margin check in [`verify_adversarial`].
pub const MARGIN_TOL: f64 = 1e-6;
/// Tolerance of the pixel-cap check in [`verify_adversarial`].
pub const CAP_TOL: f64 = 1e-9;

/// `(true + 5) mod 10` for ten classes, `(true + C/2) mod C` otherwise.
pub fn target_label(true_label: usize, num_classes: usize) -> Result<usize> {
    if true_label >= num_classes {
        return Err(Error::LabelRange { label: true_label, classes: num_classes });
    }
    let shift = if num_classes == 10 { 5 } else { num_classes / 2 };
    Ok((true_label + shift) % num_classes)
}

/// Maximize `x_unit^layer` over the input box.
pub fn build_featviz_model(net: &Network, bounds: &BoundsTable, layer: usize, unit: usize) -> Result<MilpModel> {
    if layer == 0 || layer > net.depth() || unit >= net.layer(layer).output_dim() {
        return Err(Error::UnknownUnit { layer, unit });
    }
    let mut model = encode_network(net, bounds)?;
    model.set_objective(&Objective::unit(layer, unit, 1.0), Sense::Maximize)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversarialSpec {
    pub reference: Vec<f64>,
    pub true_label: usize,
    pub target_label: usize,
    pub margin_factor: f64,
    pub pixel_cap: Option<f64>,
}

impl AdversarialSpec {
    /// Spec with the default target, margin `1.2` and no cap.
    pub fn new(net: &Network, reference: Vec<f64>, true_label: usize) -> Result<Self> {
        Ok(Self {
            reference,
            true_label,
            target_label: target_label(true_label, net.output_dim())?,
            margin_factor: 1.2,
            pixel_cap: None,
        })
    }

    pub fn validate(&self, net: &Network) -> Result<()> {
        let classes = net.output_dim();
        if self.reference.len() != net.input_dim {
            return Err(Error::Dimension(format!(
                "reference has {} entries, network expects {}",
                self.reference.len(),
                net.input_dim
            )));
        }
        for label in [self.true_label, self.target_label] {
            if label >= classes {
                return Err(Error::LabelRange { label, classes });
            }
        }
        if self.target_label == self.true_label {
            return Err(Error::InvalidSpec(format!("target equals true label {}", self.true_label)));
        }
        if !(self.margin_factor > 1.0) {
            return Err(Error::InvalidSpec(format!("margin factor {} must exceed 1", self.margin_factor)));
        }
        if let Some(cap) = self.pixel_cap {
            if !(cap > 0.0) {
                return Err(Error::InvalidSpec(format!("pixel cap {cap} must be positive")));
            }
        }
        let outside = self
            .reference
            .iter()
            .zip(net.input_lower.iter().zip(&net.input_upper))
            .position(|(&v, (&lo, &hi))| !(lo..=hi).contains(&v));
        if let Some(j) = outside {
            return Err(Error::InvalidSpec(format!("reference input {j} lies outside the box")));
        }
        Ok(())
    }
}

/// Minimize `sum d_j` subject to `-d_j <= x_j - ref_j <= d_j` and
/// `x_target >= margin * x_j` for every other output `j`.
pub fn build_adversarial_model(net: &Network, bounds: &BoundsTable, spec: &AdversarialSpec) -> Result<MilpModel> {
    spec.validate(net)?;
    build_adversarial_unchecked(net, bounds, spec)
}

/// As [`build_adversarial_model`] but only checks shapes, so that margins
/// such as `1.0` can be used for comparisons.
pub fn build_adversarial_unchecked(net: &Network, bounds: &BoundsTable, spec: &AdversarialSpec) -> Result<MilpModel> {
    let classes = net.output_dim();
    if spec.reference.len() != net.input_dim || spec.target_label >= classes || spec.true_label >= classes {
        return Err(Error::Dimension(format!(
            "spec for {} inputs / {} classes does not fit network {:?}",
            spec.reference.len(),
            classes,
            net.layer_sizes()
        )));
    }
    if spec.target_label == spec.true_label {
        return Err(Error::InvalidSpec(format!("target equals true label {}", spec.true_label)));
    }
    let mut model = encode_network(net, bounds)?;
    model.set_objective(&Objective::default(), Sense::Minimize)?;
    let cap = spec.pixel_cap.unwrap_or(f64::INFINITY);
    for (j, &r) in spec.reference.iter().enumerate() {
        let x = model.var(0, j, Role::X).expect("input variable");
        let d = model.base.add_var(format!("d{j}"), 0.0, cap);
        model.base.objective[d] = 1.0;
        model.base.add_row(format!("dpos{j}"), vec![(x, 1.0), (d, -1.0)], f64::NEG_INFINITY, r);
        model.base.add_row(format!("dneg{j}"), vec![(x, 1.0), (d, 1.0)], r, f64::INFINITY);
        model.var_index.insert(VarKey::new(0, j, Role::D), d);
        model.distances.push(DistanceLink { input: x, d, reference: r });
    }
    let depth = net.depth();
    let target = model.var(depth, spec.target_label, Role::X).expect("output variable");
    for j in (0..classes).filter(|&j| j != spec.target_label) {
        let other = model.var(depth, j, Role::X).expect("output variable");
        model.base.add_row(
            format!("margin{j}"),
            vec![(target, 1.0), (other, -spec.margin_factor)],
            0.0,
            f64::INFINITY,
        );
    }
    Ok(model)
}

/// Input-layer values of a full assignment.
pub fn input_of(model: &MilpModel, values: &[f64]) -> Vec<f64> {
    model.input_vars().into_iter().map(|v| values[v]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub label: usize,
    pub scores: Vec<f64>,
    pub margin_ok: bool,
    /// Largest `margin * x_j - x_target` over `j != target`.
    pub worst_margin: f64,
    pub in_box: bool,
    pub l1: f64,
    pub linf: f64,
    /// `None` without a cap.
    pub cap_ok: Option<bool>,
}

impl VerificationReport {
    pub fn passes(&self) -> bool {
        self.margin_ok && self.in_box && self.cap_ok.unwrap_or(true)
    }
}

pub fn verify_adversarial(net: &Network, x0: &[f64], spec: &AdversarialSpec) -> Result<VerificationReport> {
    let acts = forward_eval(net, x0)?;
    let scores = acts.output().to_vec();
    let t = scores[spec.target_label];
    let worst_margin = scores
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != spec.target_label)
        .map(|(_, &v)| spec.margin_factor * v - t)
        .fold(f64::NEG_INFINITY, f64::max);
    let diffs: Vec<f64> = x0.iter().zip(&spec.reference).map(|(a, b)| (a - b).abs()).collect();
    let linf = diffs.iter().copied().fold(0.0, f64::max);
    let in_box = x0
        .iter()
        .zip(net.input_lower.iter().zip(&net.input_upper))
        .all(|(&v, (&lo, &hi))| v >= lo - CAP_TOL && v <= hi + CAP_TOL);
    Ok(VerificationReport {
        label: argmax(&scores),
        margin_ok: worst_margin <= MARGIN_TOL,
        worst_margin,
        in_box,
        l1: diffs.iter().sum(),
        linf,
        cap_ok: spec.pixel_cap.map(|c| linf <= c + CAP_TOL),
        scores,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub difference: Vec<f64>,
    /// `1 - |difference|`: white where nothing changed.
    pub rendering: Vec<f64>,
}

pub fn render_perturbation(x0: &[f64], reference: &[f64]) -> Result<Perturbation> {
    if x0.len() != reference.len() {
        return Err(Error::Dimension(format!("{} vs {} entries", x0.len(), reference.len())));
    }
    let difference: Vec<f64> = x0.iter().zip(reference).map(|(a, b)| (a - b).abs()).collect();
    let rendering = difference.iter().map(|d| 1.0 - d).collect();
    Ok(Perturbation { difference, rendering })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{derive_interval_bounds, UnitBounds};
    use crate::fixtures;
    use crate::network::{Activation, Dense, Layer};
    use crate::solver::{solve_milp, SolveStatus, SolverConfig};

    fn solve(model: &MilpModel) -> crate::solver::MilpResult {
        solve_milp(model, &SolverConfig { rel_gap_target: 1e-9, ..Default::default() }).unwrap()
    }

    #[test]
    fn target_labels() {
        assert_eq!(target_label(0, 10).unwrap(), 5);
        assert_eq!(target_label(6, 10).unwrap(), 1);
        assert_eq!(target_label(9, 10).unwrap(), 4);
        assert_eq!(target_label(1, 4).unwrap(), 3);
        assert!(matches!(target_label(10, 10), Err(Error::LabelRange { .. })));
    }

    #[test]
    fn featviz_single_relu() {
        let net = Network::new(
            vec![0.0],
            vec![1.0],
            vec![Layer::Dense(Dense::new(vec![vec![1.0]], vec![0.0], Activation::Relu))],
        );
        let m = build_featviz_model(&net, &derive_interval_bounds(&net).unwrap(), 1, 0).unwrap();
        let r = solve(&m);
        let inc = r.incumbent.unwrap();
        assert!((inc.objective - 1.0).abs() < 1e-9 && (inc.values[0] - 1.0).abs() < 1e-9);
        assert!(build_featviz_model(&net, &derive_interval_bounds(&net).unwrap(), 2, 0).is_err());
        assert!(build_featviz_model(&net, &derive_interval_bounds(&net).unwrap(), 0, 0).is_err());
    }

    #[test]
    fn featviz_stable_inactive_unit() {
        let net = fixtures::tiny_2_2_1();
        let mut table = derive_interval_bounds(&net).unwrap();
        table.layers[0][0] = UnitBounds::interval(0.0, 1.0);
        let r = solve(&build_featviz_model(&net, &table, 1, 0).unwrap());
        assert_eq!(r.status, SolveStatus::ProvenOptimal);
        assert_eq!(r.objective().unwrap(), 0.0);
        assert_eq!(r.stats.nodes, 1);
    }

    #[test]
    fn adversarial_counts() {
        let net = fixtures::random_network(&[784, 8, 10], 2);
        let spec = AdversarialSpec::new(&net, vec![0.5; 784], 3).unwrap();
        let base = encode_network(&net, &derive_interval_bounds(&net).unwrap()).unwrap();
        let m = build_adversarial_model(&net, &derive_interval_bounds(&net).unwrap(), &spec).unwrap();
        let count = |p: &str| m.base.rows.iter().filter(|r| r.name.starts_with(p)).count();
        assert_eq!(count("margin"), 9);
        assert_eq!(count("dpos") + count("dneg"), 1568);
        assert_eq!(m.distances.len(), 784);
        assert_eq!(m.base.num_vars() - base.base.num_vars(), 784);
        assert_eq!(m.base.sense, Sense::Minimize);
    }

    #[test]
    fn spec_validation() {
        let net = fixtures::tiny_2_2_identity();
        let mut spec = AdversarialSpec::new(&net, vec![0.6, 0.4], 0).unwrap();
        assert_eq!(spec.target_label, 1);
        assert!(spec.validate(&net).is_ok());
        spec.target_label = 0;
        assert!(spec.validate(&net).is_err());
        spec.target_label = 1;
        spec.margin_factor = 1.0;
        assert!(spec.validate(&net).is_err());
        spec.margin_factor = 1.2;
        spec.pixel_cap = Some(0.0);
        assert!(spec.validate(&net).is_err());
        spec.pixel_cap = None;
        spec.reference = vec![1.5, 0.0];
        assert!(spec.validate(&net).is_err());
        let wide = fixtures::random_network(&[2, 3, 3], 0);
        let spec = AdversarialSpec::new(&net, vec![0.6, 0.4], 0).unwrap();
        assert!(build_adversarial_model(&wide, &derive_interval_bounds(&wide).unwrap(), &spec).is_ok());
        let spec = AdversarialSpec { target_label: 4, ..spec };
        assert!(build_adversarial_model(&wide, &derive_interval_bounds(&wide).unwrap(), &spec).is_err());
    }

    #[test]
    fn minimal_perturbation_on_identity_fixture() {
        // outputs relu(x1 - x2) and relu(x2 - x1); from (0.6, 0.4) class 1 needs x2 >= x1
        let net = fixtures::tiny_2_2_identity();
        let spec = AdversarialSpec::new(&net, vec![0.6, 0.4], 0).unwrap();
        let m = build_adversarial_model(&net, &derive_interval_bounds(&net).unwrap(), &spec).unwrap();
        let r = solve(&m);
        assert_eq!(r.status, SolveStatus::ProvenOptimal);
        let inc = r.incumbent.unwrap();
        assert!((inc.objective - 0.2).abs() < 1e-6);
        let report = verify_adversarial(&net, &input_of(&m, &inc.values), &spec).unwrap();
        assert!(report.passes());
        assert!((report.l1 - 0.2).abs() < 1e-6);
    }

    #[test]
    fn zero_perturbation_when_reference_already_satisfies_margin() {
        let net = fixtures::tiny_2_2_identity();
        let spec = AdversarialSpec::new(&net, vec![0.3, 0.7], 0).unwrap();
        let m = build_adversarial_model(&net, &derive_interval_bounds(&net).unwrap(), &spec).unwrap();
        let r = solve(&m);
        assert!(r.objective().unwrap().abs() < 1e-9);
    }

    #[test]
    fn cap_can_make_the_model_infeasible() {
        let net = fixtures::tiny_2_2_identity();
        let mut spec = AdversarialSpec::new(&net, vec![0.9, 0.1], 0).unwrap();
        spec.pixel_cap = Some(0.2);
        let m = build_adversarial_model(&net, &derive_interval_bounds(&net).unwrap(), &spec).unwrap();
        assert_eq!(solve(&m).status, SolveStatus::Infeasible);
        spec.pixel_cap = Some(0.45);
        let m = build_adversarial_model(&net, &derive_interval_bounds(&net).unwrap(), &spec).unwrap();
        let r = solve(&m);
        let inc = r.incumbent.unwrap();
        for link in &m.distances {
            assert!(inc.values[link.d] <= 0.45 + 1e-9);
        }
        let report = verify_adversarial(&net, &input_of(&m, &inc.values), &spec).unwrap();
        assert_eq!(report.cap_ok, Some(true));
    }

    #[test]
    fn larger_margin_never_cheaper() {
        let net = fixtures::random_network(&[3, 6, 3], 7);
        let reference = vec![0.2, 0.5, 0.8];
        let (label, _) = crate::network::classify(&net, &reference).unwrap();
        let table = derive_interval_bounds(&net).unwrap();
        let spec = AdversarialSpec::new(&net, reference, label).unwrap();
        let strict = solve(&build_adversarial_model(&net, &table, &spec).unwrap());
        let loose = solve(&build_adversarial_unchecked(&net, &table, &AdversarialSpec { margin_factor: 1.0, ..spec }).unwrap());
        match (strict.objective(), loose.objective()) {
            (Some(a), Some(b)) => assert!(a >= b - 1e-6),
            (None, _) => {}
            (Some(_), None) => panic!("margin 1.0 infeasible while 1.2 is feasible"),
        }
    }

    #[test]
    fn verification_reports() {
        let net = fixtures::tiny_2_2_identity();
        let mut spec = AdversarialSpec::new(&net, vec![0.6, 0.4], 0).unwrap();
        let same = verify_adversarial(&net, &[0.6, 0.4], &spec).unwrap();
        assert_eq!(same.label, 0);
        assert!(!same.margin_ok);
        spec.pixel_cap = Some(0.2);
        let r = verify_adversarial(&net, &[0.35, 0.4], &spec).unwrap();
        assert_eq!(r.cap_ok, Some(false));
        assert!((r.linf - 0.25).abs() < 1e-12 && (r.l1 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn perturbation_rendering() {
        let p = render_perturbation(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(p.difference, vec![0.0, 0.0]);
        assert_eq!(p.rendering, vec![1.0, 1.0]);
        let p = render_perturbation(&[0.5, 0.7], &[0.5, 0.5]).unwrap();
        assert!((p.difference[1] - 0.2).abs() < 1e-12 && (p.rendering[1] - 0.8).abs() < 1e-12);
        assert!(render_perturbation(&[0.0], &[0.0, 1.0]).is_err());
    }
}
