use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::BoundsTable;
use crate::error::{Error, Result};
use crate::network::{Layer, Network};

pub const BOUNDS_FORMAT: &str = "relu-milp-bounds";
pub const BOUNDS_VERSION: u32 = 1;

/// Identifies the network a bounds file was computed for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    /// `[n_0, ..., n_K]`.
    pub shape: Vec<usize>,
    /// Layer kinds, e.g. `dense_relu`, `max_pool`.
    pub kinds: Vec<String>,
    /// SHA-256 over box, weights and pooling groups, hex encoded.
    pub digest: String,
}

impl std::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let shape: Vec<String> = self.shape.iter().map(usize::to_string).collect();
        write!(f, "{} [{}] {}", shape.join("-"), self.kinds.join(","), &self.digest[..12])
    }
}

pub fn fingerprint(net: &Network) -> Fingerprint {
    let mut h = Sha256::new();
    let mut put = |v: f64| h.update(v.to_le_bytes());
    net.input_lower.iter().chain(&net.input_upper).for_each(|&v| put(v));
    let mut kinds = Vec::new();
    for layer in &net.layers {
        match layer {
            Layer::Dense(d) => {
                kinds.push(format!("dense_{}", if layer.is_relu() { "relu" } else { "linear" }));
                d.weights.iter().chain(&d.bias).for_each(|&v| put(v));
            }
            Layer::AvgPool(p) | Layer::MaxPool(p) => {
                kinds.push(layer.kind_name().to_string());
                for g in &p.groups {
                    g.iter().for_each(|&i| put(i as f64));
                    put(-1.0);
                }
            }
        }
    }
    let digest = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Fingerprint { shape: net.layer_sizes(), kinds, digest }
}

#[derive(Debug, Serialize, Deserialize)]
struct BoundsRecord {
    format: String,
    version: u32,
    network: Fingerprint,
    table: BoundsTable,
}

pub fn save_bounds(table: &BoundsTable, net: &Network, path: impl AsRef<Path>) -> Result<()> {
    if table.shape() != net.layer_sizes() {
        return Err(Error::Shape(format!("table {:?} vs network {:?}", table.shape(), net.layer_sizes())));
    }
    let rec = BoundsRecord {
        format: BOUNDS_FORMAT.into(),
        version: BOUNDS_VERSION,
        network: fingerprint(net),
        table: table.clone(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&rec)? + "\n")?;
    Ok(())
}

/// Load a table and check that it was written for `net`.
pub fn load_bounds(path: impl AsRef<Path>, net: &Network) -> Result<BoundsTable> {
    let (found, table) = load_bounds_unchecked(path)?;
    let expected = fingerprint(net);
    if found != expected {
        return Err(Error::Fingerprint { expected: found.to_string(), found: expected.to_string() });
    }
    Ok(table)
}

/// Load a table together with the fingerprint it records.
pub fn load_bounds_unchecked(path: impl AsRef<Path>) -> Result<(Fingerprint, BoundsTable)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let parse_err = |e: serde_json::Error| Error::Parse { path: path.to_path_buf(), message: e.to_string() };
    let rec: BoundsRecord = serde_json::from_str(&text).map_err(parse_err)?;
    if rec.format != BOUNDS_FORMAT {
        return Err(Error::Parse { path: path.to_path_buf(), message: format!("format tag {:?}", rec.format) });
    }
    if rec.version != BOUNDS_VERSION {
        return Err(Error::Version { what: "bounds file", found: rec.version });
    }
    Ok((rec.network, rec.table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{derive_interval_bounds, Provenance};
    use crate::fixtures;

    #[test]
    fn round_trip_keeps_provenance() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        for net in [fixtures::tiny_2_2_1(), fixtures::max_pool_net(), fixtures::random_network(&[4, 5, 3], 2)] {
            let mut t = derive_interval_bounds(&net).unwrap();
            t.layers[0][0].x_source = Provenance::TimeLimitEstimate;
            t.layers[0][0].ub_x *= 0.1 + 1e-17;
            save_bounds(&t, &net, &path).unwrap();
            assert_eq!(load_bounds(&path, &net).unwrap(), t);
        }
    }

    #[test]
    fn foreign_network_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.json");
        let net = fixtures::tiny_2_2_1();
        save_bounds(&derive_interval_bounds(&net).unwrap(), &net, &path).unwrap();
        let other = fixtures::random_network(&[2, 3, 1], 0);
        assert!(matches!(load_bounds(&path, &other), Err(Error::Fingerprint { .. })));
        // same shape, different weights
        let mut same_shape = net.clone();
        if let Layer::Dense(d) = &mut same_shape.layers[1] {
            d.weights[0] = 2.0;
        }
        assert!(matches!(load_bounds(&path, &same_shape), Err(Error::Fingerprint { .. })));
    }
}
