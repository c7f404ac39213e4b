use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{validate_network, Activation, Dense, Layer, Network, Pool};

pub const NETWORK_FORMAT: &str = "relu-milp-network";
pub const NETWORK_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkRecord {
    format: String,
    version: u32,
    input_dim: usize,
    input_lower: Vec<f64>,
    input_upper: Vec<f64>,
    layers: Vec<LayerRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerRecord {
    Dense {
        inputs: usize,
        outputs: usize,
        activation: Activation,
        /// Row-major, `outputs * inputs` entries.
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    AvgPool { inputs: usize, groups: Vec<Vec<usize>> },
    MaxPool { inputs: usize, groups: Vec<Vec<usize>> },
}

fn to_record(net: &Network) -> NetworkRecord {
    NetworkRecord {
        format: NETWORK_FORMAT.into(),
        version: NETWORK_VERSION,
        input_dim: net.input_dim,
        input_lower: net.input_lower.clone(),
        input_upper: net.input_upper.clone(),
        layers: net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerRecord::Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    activation: d.activation,
                    weights: d.weights.clone(),
                    bias: d.bias.clone(),
                },
                Layer::AvgPool(p) => LayerRecord::AvgPool { inputs: p.inputs, groups: p.groups.clone() },
                Layer::MaxPool(p) => LayerRecord::MaxPool { inputs: p.inputs, groups: p.groups.clone() },
            })
            .collect(),
    }
}

fn from_record(rec: NetworkRecord) -> Result<Network> {
    if rec.input_lower.len() != rec.input_dim || rec.input_upper.len() != rec.input_dim {
        return Err(Error::LayerFormat {
            layer: "input".into(),
            message: format!(
                "input_dim {} but box has {} lower / {} upper entries",
                rec.input_dim,
                rec.input_lower.len(),
                rec.input_upper.len()
            ),
        });
    }
    let mut layers = Vec::with_capacity(rec.layers.len());
    for (i, l) in rec.layers.into_iter().enumerate() {
        let k = i + 1;
        layers.push(match l {
            LayerRecord::Dense { inputs, outputs, activation, weights, bias } => {
                if weights.len() != inputs * outputs {
                    return Err(Error::LayerFormat {
                        layer: format!("layer {k} (dense)"),
                        message: format!(
                            "weights has {} entries, expected {outputs} x {inputs} = {}",
                            weights.len(),
                            inputs * outputs
                        ),
                    });
                }
                if bias.len() != outputs {
                    return Err(Error::LayerFormat {
                        layer: format!("layer {k} (dense)"),
                        message: format!("bias has {} entries, expected {outputs}", bias.len()),
                    });
                }
                Layer::Dense(Dense { inputs, outputs, weights, bias, activation })
            }
            LayerRecord::AvgPool { inputs, groups } => Layer::AvgPool(Pool { inputs, groups }),
            LayerRecord::MaxPool { inputs, groups } => Layer::MaxPool(Pool { inputs, groups }),
        });
    }
    let net = Network::new(rec.input_lower, rec.input_upper, layers);
    validate_network(&net).into_result()?;
    Ok(net)
}

pub fn network_to_string(net: &Network) -> String {
    serde_json::to_string_pretty(&to_record(net)).expect("network records serialize")
}

/// Parse a network document; `origin` names the source in errors.
pub fn parse_network(text: &str, origin: &Path) -> Result<Network> {
    let parse_err = |e: serde_json::Error| Error::Parse { path: origin.to_path_buf(), message: e.to_string() };
    let header: Header = serde_json::from_str(text).map_err(parse_err)?;
    if header.format != NETWORK_FORMAT {
        return Err(Error::Parse {
            path: origin.to_path_buf(),
            message: format!("format tag {:?}, expected {NETWORK_FORMAT:?}", header.format),
        });
    }
    if header.version != NETWORK_VERSION {
        return Err(Error::Version { what: "network file", found: header.version });
    }
    from_record(serde_json::from_str(text).map_err(parse_err)?)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    parse_network(&std::fs::read_to_string(path)?, path)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_string(net) + "\n")?;
    Ok(())
}
