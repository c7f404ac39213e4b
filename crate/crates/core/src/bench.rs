//! Basic versus improved model comparison on seeded adversarial instances.
//!
//! The basic model uses interval bounds, the improved one tightened bounds.
//! Each instance is a seeded box input labelled by the network itself.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::applications::{build_adversarial_model, input_of, verify_adversarial, AdversarialSpec};
use crate::encoder::{derive_interval_bounds, BoundsTable};
use crate::error::Result;
use crate::fixtures::sample_input;
use crate::io::{aggregate, format_table, Aggregate, Application, InstanceReport};
use crate::network::{classify, Network};
use crate::solver::{solve_milp, SolverConfig};
use crate::tighten::{tighten_bounds, TightenConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub instances: usize,
    pub seed: u64,
    /// Seconds per solve.
    pub time_limit: f64,
    pub margin_factor: f64,
    pub pixel_cap: Option<f64>,
    pub tighten: TightenConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            instances: 20,
            seed: 0,
            time_limit: 300.0,
            margin_factor: 1.2,
            pixel_cap: None,
            tighten: TightenConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub basic: Vec<InstanceReport>,
    pub improved: Vec<InstanceReport>,
    pub rows: Vec<Aggregate>,
    pub tighten_seconds: f64,
    pub tightened: BoundsTable,
}

impl BenchOutcome {
    pub fn table(&self) -> String {
        format_table(&self.rows)
    }
}

/// Seeded references with the network's own labels.
pub fn bench_instances(net: &Network, config: &BenchConfig) -> Result<Vec<AdversarialSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    (0..config.instances)
        .map(|_| {
            let x = sample_input(net, &mut rng);
            let (label, _) = classify(net, &x)?;
            let mut spec = AdversarialSpec::new(net, x, label)?;
            spec.margin_factor = config.margin_factor;
            spec.pixel_cap = config.pixel_cap;
            Ok(spec)
        })
        .collect()
}

fn run_variant(net: &Network, table: &BoundsTable, name: &str, specs: &[AdversarialSpec], config: &BenchConfig) -> Result<Vec<InstanceReport>> {
    let solver = SolverConfig {
        time_limit: config.time_limit,
        seed: config.seed,
        ..SolverConfig::default()
    };
    specs
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let model = build_adversarial_model(net, table, spec)?;
            let result = solve_milp(&model, &solver)?;
            let verification = match &result.incumbent {
                Some(inc) => Some(verify_adversarial(net, &input_of(&model, &inc.values), spec)?),
                None => None,
            };
            log::info!("{name} instance {i}: {} in {} nodes", result.status, result.stats.nodes);
            Ok(InstanceReport::new(
                format!("instance{i}"),
                name,
                &result,
                &solver,
                Application::Adversarial {
                    true_label: spec.true_label,
                    target_label: spec.target_label,
                    margin_factor: spec.margin_factor,
                    pixel_cap: spec.pixel_cap,
                    verification,
                },
            ))
        })
        .collect()
}

/// Run every instance on both models. `tightened` skips the tightening step.
pub fn run_bench(net: &Network, config: &BenchConfig, tightened: Option<BoundsTable>) -> Result<BenchOutcome> {
    let interval = derive_interval_bounds(net)?;
    let start = Instant::now();
    let tightened = match tightened {
        Some(t) => t,
        None => tighten_bounds(net, &config.tighten)?,
    };
    let tighten_seconds = start.elapsed().as_secs_f64();
    let specs = bench_instances(net, config)?;
    let basic = run_variant(net, &interval, "basic", &specs, config)?;
    let improved = run_variant(net, &tightened, "improved", &specs, config)?;
    let rows = vec![
        aggregate("basic", &basic, config.time_limit),
        aggregate("improved", &improved, config.time_limit),
    ];
    Ok(BenchOutcome { basic, improved, rows, tighten_seconds, tightened })
}
