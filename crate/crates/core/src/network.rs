//! Feed-forward ReLU networks and their exact forward semantics.
//!
//! Layers are numbered from 1; layer 0 is the input vector. `Network::layers[k - 1]`
//! maps `x^(k-1)` to `x^k`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected affine map followed by an activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Self {
        let outputs = weights.len();
        let inputs = weights.first().map_or(0, Vec::len);
        Self {
            inputs,
            outputs,
            weights: weights.into_iter().flatten().collect(),
            bias,
            activation,
        }
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.inputs..(unit + 1) * self.inputs]
    }

    pub fn pre_activation(&self, unit: usize, input: &[f64]) -> f64 {
        self.row(unit)
            .iter()
            .zip(input)
            .fold(self.bias[unit], |acc, (w, y)| acc + w * y)
    }
}

/// Pooling over explicit groups of input indices, one group per output unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pool {
    pub inputs: usize,
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    AvgPool(Pool),
    MaxPool(Pool),
}

impl Layer {
    pub fn input_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.inputs,
            Layer::AvgPool(p) | Layer::MaxPool(p) => p.inputs,
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            Layer::Dense(d) => d.outputs,
            Layer::AvgPool(p) | Layer::MaxPool(p) => p.groups.len(),
        }
    }

    pub fn is_relu(&self) -> bool {
        matches!(self, Layer::Dense(Dense { activation: Activation::Relu, .. }))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::AvgPool(_) => "avg_pool",
            Layer::MaxPool(_) => "max_pool",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub input_dim: usize,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    pub layers: Vec<Layer>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FindingKind {
    NoLayers,
    DimensionMismatch,
    BoundOrder,
    NonFinite,
    OutputNotLinear,
    EmptyGroup,
    GroupIndex,
    OverlappingGroups,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    /// 1-based layer number, `None` for network-level findings.
    pub layer: Option<usize>,
    pub kind: FindingKind,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }

    fn push(&mut self, layer: Option<usize>, kind: FindingKind, message: String) {
        self.findings.push(Finding { layer, kind, message });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidNetwork(
                self.findings.into_iter().map(|f| f.message).collect(),
            ))
        }
    }
}

/// Outputs of every layer for one input, plus the affine values of dense units.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerActivations {
    /// `outputs[k]` is `x^k`; `outputs[0]` is the input.
    pub outputs: Vec<Vec<f64>>,
    /// `pre_activations[k]` holds `W x^(k-1) + b` when layer `k` is dense.
    pub pre_activations: Vec<Option<Vec<f64>>>,
}

impl LayerActivations {
    pub fn output(&self) -> &[f64] {
        self.outputs.last().expect("at least the input layer")
    }
}

impl Network {
    pub fn new(input_lower: Vec<f64>, input_upper: Vec<f64>, layers: Vec<Layer>) -> Self {
        Self {
            input_dim: input_lower.len(),
            input_lower,
            input_upper,
            layers,
        }
    }

    /// Number of non-input layers (K).
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// `[n_0, n_1, ..., n_K]`.
    pub fn layer_sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::output_dim))
            .collect()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::output_dim)
    }

    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.is_relu())
            .map(Layer::output_dim)
            .sum()
    }

    /// Layer `k` (1-based).
    pub fn layer(&self, k: usize) -> &Layer {
        &self.layers[k - 1]
    }

    pub fn validate(&self) -> ValidationReport {
        validate_network(self)
    }
}

pub fn validate_network(net: &Network) -> ValidationReport {
    let mut report = ValidationReport::default();

    if net.input_lower.len() != net.input_dim || net.input_upper.len() != net.input_dim {
        report.push(
            None,
            FindingKind::DimensionMismatch,
            format!(
                "input box has {}/{} entries, input_dim is {}",
                net.input_lower.len(),
                net.input_upper.len(),
                net.input_dim
            ),
        );
    }
    for (j, (lo, hi)) in net.input_lower.iter().zip(&net.input_upper).enumerate() {
        if !lo.is_finite() || !hi.is_finite() {
            report.push(
                None,
                FindingKind::NonFinite,
                format!("input {j} has non-finite bounds [{lo}, {hi}]"),
            );
        } else if lo > hi {
            report.push(
                None,
                FindingKind::BoundOrder,
                format!("input {j} has lower bound {lo} above upper bound {hi}"),
            );
        }
    }

    if net.layers.is_empty() {
        report.push(None, FindingKind::NoLayers, "network has no layers".into());
        return report;
    }

    let mut width = net.input_dim;
    for (idx, layer) in net.layers.iter().enumerate() {
        let k = idx + 1;
        if layer.input_dim() != width {
            report.push(
                Some(k),
                FindingKind::DimensionMismatch,
                format!(
                    "layer {k} expects {} inputs but layer {} produces {width}",
                    layer.input_dim(),
                    k - 1
                ),
            );
        }
        match layer {
            Layer::Dense(d) => {
                if d.weights.len() != d.inputs * d.outputs || d.bias.len() != d.outputs {
                    report.push(
                        Some(k),
                        FindingKind::DimensionMismatch,
                        format!(
                            "layer {k}: {} weights and {} biases for a {}x{} matrix",
                            d.weights.len(),
                            d.bias.len(),
                            d.outputs,
                            d.inputs
                        ),
                    );
                }
                if d.weights.iter().chain(&d.bias).any(|v| !v.is_finite()) {
                    report.push(
                        Some(k),
                        FindingKind::NonFinite,
                        format!("layer {k} has non-finite parameters"),
                    );
                }
            }
            Layer::AvgPool(p) | Layer::MaxPool(p) => {
                let mut seen = vec![false; p.inputs];
                for (g, group) in p.groups.iter().enumerate() {
                    if group.is_empty() {
                        report.push(
                            Some(k),
                            FindingKind::EmptyGroup,
                            format!("layer {k} group {g} is empty"),
                        );
                    }
                    for &i in group {
                        if i >= p.inputs {
                            report.push(
                                Some(k),
                                FindingKind::GroupIndex,
                                format!("layer {k} group {g} references input {i} of {}", p.inputs),
                            );
                        } else if std::mem::replace(&mut seen[i], true) {
                            report.push(
                                Some(k),
                                FindingKind::OverlappingGroups,
                                format!("layer {k}: input {i} appears in more than one group"),
                            );
                        }
                    }
                }
            }
        }
        width = layer.output_dim();
    }

    match net.layers.last() {
        Some(Layer::Dense(d)) if d.activation == Activation::Linear => {}
        _ => report.push(
            Some(net.layers.len()),
            FindingKind::OutputNotLinear,
            "the output layer must be dense with linear activation".into(),
        ),
    }
    report
}

/// Apply one layer to its input vector. Returns the output and, for dense
/// layers, the affine pre-activation.
pub fn apply_layer(layer: &Layer, input: &[f64]) -> (Vec<f64>, Option<Vec<f64>>) {
    match layer {
        Layer::Dense(d) => {
            let pre: Vec<f64> = (0..d.outputs).map(|u| d.pre_activation(u, input)).collect();
            let out = match d.activation {
                Activation::Relu => pre.iter().map(|&v| v.max(0.0)).collect(),
                Activation::Linear => pre.clone(),
            };
            (out, Some(pre))
        }
        Layer::AvgPool(p) => {
            let out = p
                .groups
                .iter()
                .map(|g| g.iter().map(|&i| input[i]).sum::<f64>() / g.len() as f64)
                .collect();
            (out, None)
        }
        Layer::MaxPool(p) => {
            let out = p
                .groups
                .iter()
                .map(|g| g.iter().map(|&i| input[i]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            (out, None)
        }
    }
}

pub fn forward_eval(net: &Network, x0: &[f64]) -> Result<LayerActivations> {
    if x0.len() != net.input_dim {
        return Err(Error::Dimension(format!(
            "input has {} entries, network expects {}",
            x0.len(),
            net.input_dim
        )));
    }
    let mut outputs = Vec::with_capacity(net.layers.len() + 1);
    let mut pre_activations = Vec::with_capacity(net.layers.len() + 1);
    outputs.push(x0.to_vec());
    pre_activations.push(None);
    for (idx, layer) in net.layers.iter().enumerate() {
        let input = &outputs[idx];
        if layer.input_dim() != input.len() {
            return Err(Error::Dimension(format!(
                "layer {} expects {} inputs, got {}",
                idx + 1,
                layer.input_dim(),
                input.len()
            )));
        }
        let (out, pre) = apply_layer(layer, input);
        outputs.push(out);
        pre_activations.push(pre);
    }
    Ok(LayerActivations {
        outputs,
        pre_activations,
    })
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in scores.iter().enumerate().skip(1) {
        if v > scores[best] {
            best = i;
        }
    }
    best
}

pub fn classify(net: &Network, x0: &[f64]) -> Result<(usize, Vec<f64>)> {
    if net.output_dim() < 2 {
        return Err(Error::Dimension(format!(
            "classification needs at least 2 outputs, network has {}",
            net.output_dim()
        )));
    }
    let acts = forward_eval(net, x0)?;
    let scores = acts.output().to_vec();
    Ok((argmax(&scores), scores))
}
