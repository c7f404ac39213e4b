//! Exact 0-1 MILP models of trained feed-forward ReLU networks.
//!
//! A [`Network`](network::Network) is encoded with [`encoder::encode_network`] into a
//! [`MilpModel`](encoder::MilpModel): one continuous output variable per unit, and for
//! every ReLU unit a negative-part slack `s` plus a binary `z` with the implications
//! `z = 1 -> x <= 0` and `z = 0 -> s <= 0`. Models are solved by the branch-and-bound
//! solver in [`solver`] on top of the simplex in [`lp`]. [`tighten`] computes tight
//! per-unit bounds layer by layer, and [`applications`] builds feature-visualization
//! and minimal-L1 adversarial models.

pub mod applications;
pub mod bench;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod encoder;
pub mod lp;
pub mod network;
pub mod oracle;
pub mod solver;
pub mod tighten;

pub use error::{Error, Result};
