use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Layer, Network};

/// Where a bound came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Interval,
    LpTightened,
    /// Dual bound of a solve stopped by its time limit.
    TimeLimitEstimate,
}

/// Upper bounds on the positive part `x` and the negative part `s` of one unit.
///
/// For ReLU units `x` lives in `[0, ub_x]` and the slack `s` in `[0, ub_s]`.
/// For linear and pooling units there is no slack variable; the unit output
/// itself lives in `[-ub_s, ub_x]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitBounds {
    pub ub_x: f64,
    pub ub_s: f64,
    pub x_source: Provenance,
    pub s_source: Provenance,
}

impl UnitBounds {
    pub fn interval(ub_x: f64, ub_s: f64) -> Self {
        Self {
            ub_x,
            ub_s,
            x_source: Provenance::Interval,
            s_source: Provenance::Interval,
        }
    }

    /// Range of the unit's output value.
    pub fn output_range(&self, relu: bool) -> (f64, f64) {
        if relu {
            (0.0, self.ub_x)
        } else {
            (-self.ub_s, self.ub_x)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsTable {
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    /// `layers[k - 1][j]` bounds unit `j` of layer `k`.
    pub layers: Vec<Vec<UnitBounds>>,
}

impl BoundsTable {
    pub fn get(&self, layer: usize, unit: usize) -> Option<&UnitBounds> {
        layer
            .checked_sub(1)
            .and_then(|k| self.layers.get(k))
            .and_then(|l| l.get(unit))
    }

    pub fn get_mut(&mut self, layer: usize, unit: usize) -> Option<&mut UnitBounds> {
        layer
            .checked_sub(1)
            .and_then(|k| self.layers.get_mut(k))
            .and_then(|l| l.get_mut(unit))
    }

    /// `[n_0, n_1, ..., n_K]` as covered by this table.
    pub fn shape(&self) -> Vec<usize> {
        std::iter::once(self.input_lower.len())
            .chain(self.layers.iter().map(Vec::len))
            .collect()
    }

    /// Output ranges of every unit of layer `k` (`k = 0` is the input box).
    pub fn output_ranges(&self, net: &Network, k: usize) -> Vec<(f64, f64)> {
        if k == 0 {
            return self
                .input_lower
                .iter()
                .copied()
                .zip(self.input_upper.iter().copied())
                .collect();
        }
        let relu = net.layer(k).is_relu();
        self.layers[k - 1]
            .iter()
            .map(|b| b.output_range(relu))
            .collect()
    }

    pub fn covers(&self, net: &Network) -> Result<()> {
        let sizes = net.layer_sizes();
        if self.input_lower.len() != sizes[0] || self.input_upper.len() != sizes[0] {
            return Err(Error::MissingBounds { layer: 0, unit: self.input_lower.len().min(sizes[0]) });
        }
        for (k, &n) in sizes.iter().enumerate().skip(1) {
            let have = self.layers.get(k - 1).map_or(0, Vec::len);
            if have < n {
                return Err(Error::MissingBounds { layer: k, unit: have });
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &UnitBounds)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(k, l)| l.iter().enumerate().map(move |(j, b)| (k + 1, j, b)))
    }
}

fn check_box(lower: &[f64], upper: &[f64]) -> Result<()> {
    if let Some(j) = lower
        .iter()
        .zip(upper)
        .position(|(l, u)| !l.is_finite() || !u.is_finite())
    {
        return Err(Error::UnboundedBox(format!(
            "input {j} has bounds [{}, {}]",
            lower[j], upper[j]
        )));
    }
    Ok(())
}

/// Interval image of one layer given the output ranges of the previous one.
/// Returns `(lower, upper)` of each unit's affine value (dense) or output (pooling).
pub fn interval_layer(layer: &Layer, prev: &[(f64, f64)]) -> Vec<(f64, f64)> {
    match layer {
        Layer::Dense(d) => (0..d.outputs)
            .map(|u| {
                let (mut lo, mut hi) = (d.bias[u], d.bias[u]);
                for (&w, &(l, h)) in d.row(u).iter().zip(prev) {
                    let (a, b) = (w * l, w * h);
                    lo += a.min(b);
                    hi += a.max(b);
                }
                (lo, hi)
            })
            .collect(),
        Layer::MaxPool(p) => p
            .groups
            .iter()
            .map(|g| {
                g.iter().fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.max(prev[i].0), hi.max(prev[i].1))
                })
            })
            .collect(),
        Layer::AvgPool(p) => p
            .groups
            .iter()
            .map(|g| {
                let t = g.len() as f64;
                let (lo, hi) = g
                    .iter()
                    .fold((0.0, 0.0), |(lo, hi), &i| (lo + prev[i].0, hi + prev[i].1));
                (lo / t, hi / t)
            })
            .collect(),
    }
}

/// Convert an interval of pre-activation (or pooled) values to table entries.
pub fn interval_entry((lo, hi): (f64, f64)) -> UnitBounds {
    UnitBounds::interval(hi.max(0.0), (-lo).max(0.0))
}

/// Propagate the input box through the network with interval arithmetic.
pub fn derive_interval_bounds(net: &Network) -> Result<BoundsTable> {
    check_box(&net.input_lower, &net.input_upper)?;
    let mut table = BoundsTable {
        input_lower: net.input_lower.clone(),
        input_upper: net.input_upper.clone(),
        layers: Vec::with_capacity(net.depth()),
    };
    for k in 1..=net.depth() {
        let prev = table.output_ranges(net, k - 1);
        let entries = interval_layer(net.layer(k), &prev)
            .into_iter()
            .map(interval_entry)
            .collect();
        table.layers.push(entries);
    }
    Ok(table)
}
