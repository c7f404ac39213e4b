use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use relu_milp::applications::{
    build_adversarial_model, build_featviz_model, input_of, render_perturbation, verify_adversarial, AdversarialSpec,
};
use relu_milp::bench::{run_bench, BenchConfig};
use relu_milp::encoder::{derive_interval_bounds, encode_network, BoundsTable, Objective};
use relu_milp::fixtures;
use relu_milp::io::{self, Application, InstanceReport};
use relu_milp::lp::Sense;
use relu_milp::network::{argmax, forward_eval, Network};
use relu_milp::oracle::{brute_force_optimum, OracleOutcome};
use relu_milp::solver::{solve_milp, MilpResult, SolveStatus, SolverConfig};
use relu_milp::tighten::{tighten_bounds, TightenConfig};

/// Exact MILP models of ReLU networks: feature visualization, minimal
/// adversarial examples and bound tightening.
#[derive(Parser)]
#[command(name = "relu-milp", version)]
struct Cli {
    /// More log output (repeat for more).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolveArgs {
    /// Seconds per solve.
    #[arg(long, default_value_t = 300.0)]
    time_limit: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    node_limit: Option<u64>,
}

impl SolveArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            time_limit: self.time_limit,
            seed: self.seed,
            node_limit: self.node_limit,
            ..SolverConfig::default()
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print every layer's activations and the predicted label.
    Forward { net: PathBuf, input: PathBuf },
    /// Tighten the bounds of every unit and save them.
    Tighten {
        net: PathBuf,
        /// Seconds per bound.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Solve LP relaxations only.
        #[arg(long)]
        lp_only: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Find an input that maximizes one unit.
    Featviz {
        net: PathBuf,
        /// Layer and unit, `k,j` (layer 1 is the first hidden layer).
        #[arg(long, value_parser = parse_unit)]
        unit: (usize, usize),
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
        /// Image path; the report is written next to it.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Minimal-L1 adversarial example for one input.
    Adversarial {
        net: PathBuf,
        /// Graymap or text vector.
        #[arg(long)]
        input: PathBuf,
        /// 0-based true label.
        #[arg(long)]
        true_label: usize,
        /// Overrides the default target label.
        #[arg(long)]
        target_label: Option<usize>,
        #[arg(long, default_value_t = 1.2)]
        margin: f64,
        /// Largest allowed change per input.
        #[arg(long)]
        cap: Option<f64>,
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[command(flatten)]
        solve: SolveArgs,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Basic (interval) versus improved (tightened) models on seeded instances.
    Bench {
        net: PathBuf,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Seconds per solve.
        #[arg(long, default_value_t = 300.0)]
        time_limit: f64,
        /// Seconds per bound while tightening.
        #[arg(long, default_value_t = 300.0)]
        tighten_time_limit: f64,
        /// Precomputed tightened bounds.
        #[arg(long)]
        bounds: Option<PathBuf>,
        #[arg(long)]
        cap: Option<f64>,
        /// Directory for per-instance reports.
        #[arg(long)]
        reports: Option<PathBuf>,
    },
    /// Exact optimum by activation-pattern enumeration.
    Oracle {
        net: PathBuf,
        /// `max:k,j` or `min:k,j`.
        #[arg(long, value_parser = parse_objective)]
        objective: (Sense, usize, usize),
        #[arg(long)]
        bounds: Option<PathBuf>,
    },
    /// Write a seeded random dense network.
    RandomNet {
        /// Layer sizes, e.g. `64,8,8,8,10`.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn parse_unit(s: &str) -> Result<(usize, usize), String> {
    let (k, j) = s.split_once(',').ok_or("expected k,j")?;
    Ok((k.trim().parse().map_err(|e| format!("{e}"))?, j.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_objective(s: &str) -> Result<(Sense, usize, usize), String> {
    let (sense, unit) = s.split_once(':').ok_or("expected max:k,j or min:k,j")?;
    let sense = match sense {
        "max" => Sense::Maximize,
        "min" => Sense::Minimize,
        other => return Err(format!("unknown sense {other:?}")),
    };
    let (k, j) = parse_unit(unit)?;
    Ok((sense, k, j))
}

/// Bounds from a file (checked against `net`) or by interval propagation.
fn bounds_for(net: &Network, path: Option<&Path>) -> anyhow::Result<(BoundsTable, &'static str)> {
    Ok(match path {
        Some(p) => (io::load_bounds(p, net).with_context(|| format!("loading {}", p.display()))?, "tightened"),
        None => (derive_interval_bounds(net)?, "interval"),
    })
}

fn print_result(result: &MilpResult) {
    println!("status: {}", result.status);
    if let Some(obj) = result.objective() {
        println!("objective: {obj}");
    }
    println!("dual bound: {}", result.dual_bound);
    println!("gap: {:.4}%", result.stats.pct_gap);
    println!("nodes: {}", result.stats.nodes);
    println!("time: {:.3}s", result.stats.wall_seconds);
}

fn status_code(status: SolveStatus) -> ExitCode {
    match status {
        SolveStatus::ProvenOptimal | SolveStatus::Feasible(_) => ExitCode::SUCCESS,
        SolveStatus::Infeasible | SolveStatus::NoSolution(_) => ExitCode::from(1),
    }
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Forward { net, input } => {
            let net = io::load_network(&net)?;
            let x = io::read_input(&input)?;
            let acts = forward_eval(&net, &x)?;
            for (k, out) in acts.outputs.iter().enumerate() {
                println!("layer {k}: {}", fmt_vec(out));
            }
            println!("output: {}", fmt_vec(acts.output()));
            if net.output_dim() >= 2 {
                println!("label: {}", argmax(acts.output()));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Tighten { net, time_limit, lp_only, seed, output } => {
            let network = io::load_network(&net)?;
            let cfg = TightenConfig { per_bound_time_limit: time_limit, use_milp: !lp_only, seed, parallel: true };
            let table = tighten_bounds(&network, &cfg)?;
            let interval = derive_interval_bounds(&network)?;
            let report = relu_milp::tighten::compare_tables(&interval, &table)?;
            io::save_bounds(&table, &network, &output)?;
            println!("{} of {} entries tightened; written to {}", report.strictly_tighter(), report.deltas.len(), output.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Featviz { net, unit: (k, j), bounds, solve, output } => {
            let network = io::load_network(&net)?;
            let (table, kind) = bounds_for(&network, bounds.as_deref())?;
            let model = build_featviz_model(&network, &table, k, j)?;
            let config = solve.config();
            let result = solve_milp(&model, &config)?;
            print_result(&result);
            if let Some(inc) = &result.incumbent {
                let x = input_of(&model, &inc.values);
                let (w, h) = io::image_dims(x.len());
                io::write_image(&x, w, h, &output)?;
                println!("input: {}", fmt_vec(&x));
            }
            let report = InstanceReport::new(format!("featviz {k},{j}"), kind, &result, &config, Application::Featviz { layer: k, unit: j });
            io::write_report(&report, output.with_extension("json"))?;
            Ok(status_code(result.status))
        }
        Command::Adversarial { net, input, true_label, target_label, margin, cap, bounds, solve, output } => {
            let network = io::load_network(&net)?;
            let (table, kind) = bounds_for(&network, bounds.as_deref())?;
            let reference = io::read_input(&input)?;
            let mut spec = AdversarialSpec::new(&network, reference, true_label)?;
            if let Some(t) = target_label {
                spec.target_label = t;
            }
            spec.margin_factor = margin;
            spec.pixel_cap = cap;
            let model = build_adversarial_model(&network, &table, &spec)?;
            let config = solve.config();
            let result = solve_milp(&model, &config)?;
            println!("true label: {}  target label: {}", spec.true_label, spec.target_label);
            print_result(&result);
            std::fs::create_dir_all(&output)?;
            let (w, h) = io::image_dims(spec.reference.len());
            let mut verification = None;
            if let Some(inc) = &result.incumbent {
                let x = input_of(&model, &inc.values);
                let v = verify_adversarial(&network, &x, &spec)?;
                println!(
                    "verified: {}  label {}  L1 {}  Linf {}",
                    if v.passes() { "yes" } else { "no" },
                    v.label,
                    v.l1,
                    v.linf
                );
                io::write_image(&x, w, h, output.join("adversarial.pgm"))?;
                let p = render_perturbation(&x, &spec.reference)?;
                io::write_image(&p.rendering, w, h, output.join("perturbation.pgm"))?;
                verification = Some(v);
            }
            let app = Application::Adversarial {
                true_label: spec.true_label,
                target_label: spec.target_label,
                margin_factor: spec.margin_factor,
                pixel_cap: spec.pixel_cap,
                verification,
            };
            io::write_report(&InstanceReport::new("adversarial", kind, &result, &config, app), output.join("report.json"))?;
            Ok(status_code(result.status))
        }
        Command::Bench { net, instances, seed, time_limit, tighten_time_limit, bounds, cap, reports } => {
            let network = io::load_network(&net)?;
            let tightened = bounds.map(|p| io::load_bounds(&p, &network)).transpose()?;
            let config = BenchConfig {
                instances,
                seed,
                time_limit,
                margin_factor: 1.2,
                pixel_cap: cap,
                tighten: TightenConfig { per_bound_time_limit: tighten_time_limit, seed, ..TightenConfig::default() },
            };
            let out = run_bench(&network, &config, tightened)?;
            print!("{}", out.table());
            println!("tightening: {:.3}s", out.tighten_seconds);
            if let Some(dir) = reports {
                std::fs::create_dir_all(&dir)?;
                for r in out.basic.iter().chain(&out.improved) {
                    io::write_report(r, dir.join(format!("{}_{}.json", r.bounds, r.name)))?;
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { net, objective: (sense, k, j), bounds } => {
            let network = io::load_network(&net)?;
            let (table, _) = bounds_for(&network, bounds.as_deref())?;
            let mut model = encode_network(&network, &table)?;
            model.set_objective(&Objective::unit(k, j, 1.0), sense)?;
            match brute_force_optimum(&model)? {
                OracleOutcome::Optimal { objective, assignment, pattern } => {
                    println!("objective: {objective}");
                    println!("input: {}", fmt_vec(&input_of(&model, &assignment)));
                    let p: Vec<String> = pattern.iter().map(usize::to_string).collect();
                    println!("pattern: {}", p.join(" "));
                    Ok(ExitCode::SUCCESS)
                }
                OracleOutcome::Infeasible => {
                    println!("status: Infeasible");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::RandomNet { sizes, seed, output } => {
            if sizes.len() < 2 || sizes.contains(&0) {
                bail!("need at least two positive layer sizes");
            }
            io::save_network(&fixtures::random_network(&sizes, seed), &output)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
