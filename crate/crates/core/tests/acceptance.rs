//! Acceptance gate. Prints one PASS/FAIL line per criterion and fails if any
//! criterion fails. Run with `cargo test --release --test acceptance -- --nocapture`.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relu_milp::applications::{
    build_adversarial_model, build_featviz_model, input_of, target_label, verify_adversarial, AdversarialSpec,
};
use relu_milp::bench::{run_bench, BenchConfig};
use relu_milp::encoder::{derive_interval_bounds, encode_network, Role};
use relu_milp::fixtures;
use relu_milp::io::{Application, InstanceReport};
use relu_milp::network::{classify, forward_eval, Network};
use relu_milp::oracle::{brute_force_optimum, sample_check_bounds, OracleOutcome};
use relu_milp::solver::{complete_from_input, solve_milp, SolveStatus, SolverConfig};
use relu_milp::tighten::{compare_tables, tighten_bounds, TightenConfig};

const ORACLE_TOL: f64 = 1e-6;
const RESIDUAL_TOL: f64 = 1e-7;
const TRAJECTORY_TOL: f64 = 1e-6;
const CAP_TOL: f64 = 1e-9;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
}

fn exact() -> SolverConfig {
    SolverConfig { rel_gap_target: 1e-9, ..SolverConfig::default() }
}

fn fixture_nets() -> Vec<(&'static str, Network)> {
    vec![
        ("tiny_2_2_1", fixtures::tiny_2_2_1()),
        ("tiny_2_2_identity", fixtures::tiny_2_2_identity()),
        ("chain", fixtures::chain(-1.0, 1.0)),
        ("max_pool", fixtures::max_pool_net()),
        ("avg_pool", fixtures::avg_pool_net()),
        ("bench_64", fixtures::bench_network(2024)),
    ]
}

/// Random dense net with at most 6 inputs, 12 ReLUs and 3 layers.
fn small_random_net(rng: &mut ChaCha8Rng, seed: u64) -> Network {
    let n0 = rng.random_range(2..=6);
    let hidden = rng.random_range(1..=2);
    let mut sizes = vec![n0];
    let mut left = 12;
    for h in 0..hidden {
        let max = if h + 1 == hidden { left } else { left - 1 };
        let width = rng.random_range(1..=max.min(6));
        left -= width;
        sizes.push(width);
    }
    sizes.push(rng.random_range(2..=4));
    fixtures::random_network(&sizes, seed)
}

fn criterion_1() -> Line {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut matched, mut worst) = (0, 0.0f64);
    let mut failures = Vec::new();
    for i in 0..50u64 {
        let net = small_random_net(&mut rng, 100 + i);
        assert!(net.relu_count() <= 12 && net.input_dim <= 6 && net.depth() <= 3);
        let table = derive_interval_bounds(&net).unwrap();
        let model = if i % 2 == 0 {
            let k = rng.random_range(1..=net.depth());
            let j = rng.random_range(0..net.layer(k).output_dim());
            build_featviz_model(&net, &table, k, j).unwrap()
        } else {
            let x = fixtures::sample_input(&net, &mut rng);
            let (label, _) = classify(&net, &x).unwrap();
            let mut spec = AdversarialSpec::new(&net, x, label).unwrap();
            if i % 4 == 3 {
                spec.pixel_cap = Some(0.3);
            }
            build_adversarial_model(&net, &table, &spec).unwrap()
        };
        let oracle = brute_force_optimum(&model).unwrap();
        let result = solve_milp(&model, &exact()).unwrap();
        let ok = match (&oracle, result.status, result.objective()) {
            (OracleOutcome::Optimal { objective, .. }, SolveStatus::ProvenOptimal, Some(found)) => {
                worst = worst.max((objective - found).abs());
                (objective - found).abs() <= ORACLE_TOL
            }
            (OracleOutcome::Infeasible, SolveStatus::Infeasible, None) => true,
            _ => false,
        };
        if ok {
            matched += 1;
        } else {
            failures.push(format!("instance {i}: oracle {:?} solver {} {:?}", oracle.objective(), result.status, result.objective()));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Line {
        id: 1,
        name: "oracle equivalence",
        pass: matched == 50 && secs < 60.0,
        detail: format!("{matched}/50 matched, max |diff| {worst:.2e}, {secs:.1}s {}", failures.join("; ")),
    }
}

fn criterion_2() -> Line {
    let mut failures = 0;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (i, (_, net)) in fixture_nets().into_iter().enumerate() {
        let model = encode_network(&net, &derive_interval_bounds(&net).unwrap())
            .unwrap()
            .linearize_indicators()
            .unwrap();
        let bounds: Vec<(f64, f64)> = model.base.vars.iter().map(|v| (v.lower, v.upper)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        for _ in 0..1000 {
            let x = fixtures::sample_input(&net, &mut rng);
            checked += 1;
            match complete_from_input(&model, &net, &x, &bounds) {
                Some(p) => {
                    let r = model.residual(&p).unwrap().max();
                    worst = worst.max(r);
                    if r > RESIDUAL_TOL {
                        failures += 1;
                    }
                }
                None => failures += 1,
            }
        }
    }
    Line {
        id: 2,
        name: "completion feasibility",
        pass: failures == 0,
        detail: format!("{checked} completions, {failures} failures, max residual {worst:.2e}"),
    }
}

fn criterion_3() -> Line {
    let nets = [fixtures::bench_network(2024), fixtures::max_pool_net(), fixtures::tiny_2_2_1()];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut bad = 0;
    let cfg = SolverConfig { heuristic: false, random_starts: 0, ..exact() };
    for i in 0..100 {
        let net = &nets[i % nets.len()];
        let x = fixtures::sample_input(net, &mut rng);
        let mut fixed = net.clone();
        fixed.input_lower = x.clone();
        fixed.input_upper = x.clone();
        let k = net.depth();
        let j = rng.random_range(0..net.output_dim());
        let model = build_featviz_model(&fixed, &derive_interval_bounds(&fixed).unwrap(), k, j).unwrap();
        let r = solve_milp(&model, &cfg).unwrap();
        let Some(inc) = r.incumbent.filter(|_| r.status == SolveStatus::ProvenOptimal) else {
            bad += 1;
            continue;
        };
        let acts = forward_eval(net, &x).unwrap();
        for (k, out) in acts.outputs.iter().enumerate() {
            for (j, &v) in out.iter().enumerate() {
                let d = (inc.values[model.var(k, j, Role::X).unwrap()] - v).abs();
                worst = worst.max(d);
                if d > TRAJECTORY_TOL {
                    bad += 1;
                }
            }
        }
    }
    Line {
        id: 3,
        name: "forward uniqueness",
        pass: bad == 0,
        detail: format!("100 fixed inputs, {bad} mismatches, max |x - forward| {worst:.2e}"),
    }
}

fn criterion_4() -> (Line, Vec<(String, relu_milp::encoder::BoundsTable)>) {
    let mut violations = 0;
    let mut looser = 0;
    let mut strict_on_cancellation = 0;
    let mut tables = Vec::new();
    let cfg = TightenConfig { per_bound_time_limit: 300.0, ..TightenConfig::default() };
    for (i, (name, net)) in fixture_nets().into_iter().enumerate() {
        let interval = derive_interval_bounds(&net).unwrap();
        let tight = tighten_bounds(&net, &cfg).unwrap();
        violations += sample_check_bounds(&net, &tight, 10_000, 400 + i as u64).len();
        let report = compare_tables(&interval, &tight).unwrap();
        looser += report.looser.len();
        if name == "tiny_2_2_1" {
            strict_on_cancellation = report.strictly_tighter();
        }
        tables.push((name.to_string(), tight));
    }
    let line = Line {
        id: 4,
        name: "bound soundness and dominance",
        pass: violations == 0 && looser == 0 && strict_on_cancellation >= 1,
        detail: format!(
            "{violations} sample violations, {looser} entries looser than interval, {strict_on_cancellation} strictly tighter on cancellation fixture"
        ),
    };
    (line, tables)
}

fn adversarial_checks(reports: &[InstanceReport], cap: Option<f64>) -> (usize, usize, usize) {
    let (mut sat, mut ok, mut bad_target) = (0, 0, 0);
    for r in reports {
        let Application::Adversarial { true_label, target_label: t, verification, pixel_cap, .. } = &r.application else {
            continue;
        };
        if target_label(*true_label, 10).unwrap() != *t || *pixel_cap != cap {
            bad_target += 1;
        }
        if let Some(v) = verification {
            sat += 1;
            if v.passes() && (cap.is_none() || v.cap_ok == Some(true)) {
                ok += 1;
            }
        }
    }
    (sat, ok, bad_target)
}

fn criterion_5_and_6(tight: &relu_milp::encoder::BoundsTable) -> (Line, Line) {
    let net = fixtures::bench_network(2024);
    let config = BenchConfig { instances: 20, seed: 5, time_limit: 300.0, ..BenchConfig::default() };
    let start = Instant::now();
    let out = run_bench(&net, &config, Some(tight.clone())).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let (b, i) = (&out.rows[0], &out.rows[1]);
    let table = out.table();
    println!("{table}");
    let line5 = Line {
        id: 5,
        name: "basic vs improved trend",
        pass: i.mean_nodes < b.mean_nodes && i.pct_solved >= b.pct_solved && i.mean_time <= b.mean_time && secs < 1800.0,
        detail: format!(
            "nodes {:.1} -> {:.1}, solved {:.0}% -> {:.0}%, time {:.3}s -> {:.3}s, total {secs:.0}s",
            b.mean_nodes, i.mean_nodes, b.pct_solved, i.pct_solved, b.mean_time, i.mean_time
        ),
    };

    let capped = BenchConfig { pixel_cap: Some(0.2), ..config };
    let cap_out = run_bench(&net, &capped, Some(tight.clone())).unwrap();
    let mut d_violations = 0;
    let mut d_checked = 0;
    let specs = relu_milp::bench::bench_instances(&net, &capped).unwrap();
    for spec in &specs {
        let model = build_adversarial_model(&net, tight, spec).unwrap();
        let r = solve_milp(&model, &SolverConfig::default()).unwrap();
        if let Some(inc) = &r.incumbent {
            for link in &model.distances {
                d_checked += 1;
                if inc.values[link.d] > 0.2 + CAP_TOL {
                    d_violations += 1;
                }
            }
            if !verify_adversarial(&net, &input_of(&model, &inc.values), spec).unwrap().passes() {
                d_violations += 1;
            }
        }
    }
    let mut all = out.basic.clone();
    all.extend(out.improved.iter().cloned());
    let (sat, ok, bad_target) = adversarial_checks(&all, None);
    let (csat, cok, cbad) = adversarial_checks(&cap_out.improved, Some(0.2));
    let line6 = Line {
        id: 6,
        name: "adversarial verification",
        pass: sat == ok && csat == cok && bad_target + cbad == 0 && d_violations == 0 && sat > 0,
        detail: format!(
            "{ok}/{sat} uncapped SAT runs verified, {cok}/{csat} capped verified, {d_checked} d_j checked with {d_violations} over 0.2"
        ),
    };
    (line5, line6)
}

fn criterion_7() -> Line {
    let mut worse = 0;
    let mut units = 0;
    let mut strict_on_cancellation = 0;
    for (i, (name, net)) in fixture_nets().into_iter().enumerate() {
        let table = derive_interval_bounds(&net).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(700 + i as u64);
        let samples: Vec<_> = (0..1000)
            .map(|_| forward_eval(&net, &fixtures::sample_input(&net, &mut rng)).unwrap())
            .collect();
        for k in 1..=net.depth() {
            for j in 0..net.layer(k).output_dim() {
                units += 1;
                let best_sample = samples.iter().map(|a| a.outputs[k][j]).fold(f64::NEG_INFINITY, f64::max);
                let model = build_featviz_model(&net, &table, k, j).unwrap();
                let r = solve_milp(&model, &exact()).unwrap();
                let opt = r.objective().unwrap_or(f64::NEG_INFINITY);
                if r.status != SolveStatus::ProvenOptimal || opt < best_sample - 1e-9 {
                    worse += 1;
                }
                if name == "tiny_2_2_1" && opt > best_sample {
                    strict_on_cancellation += 1;
                }
            }
        }
    }
    Line {
        id: 7,
        name: "feature-viz dominance",
        pass: worse == 0 && strict_on_cancellation >= 1,
        detail: format!("{units} units, {worse} below sampling, {strict_on_cancellation} strict improvements on cancellation fixture"),
    }
}

fn criterion_8() -> Line {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let documented = readme.contains("Not reproduced");
    Line {
        id: 8,
        name: "non-reproducible items documented",
        pass: documented,
        detail: "MNIST training, its test accuracy and absolute CPLEX timings/node counts are out of scope; covered by criteria 1-7".into(),
    }
}

#[test]
fn acceptance() {
    let mut lines = vec![criterion_1(), criterion_2(), criterion_3()];
    let (l4, tables) = criterion_4();
    lines.push(l4);
    let bench_table = &tables.iter().find(|(n, _)| n == "bench_64").unwrap().1;
    let (l5, l6) = criterion_5_and_6(bench_table);
    lines.push(l5);
    lines.push(l6);
    lines.push(criterion_7());
    lines.push(criterion_8());
    for l in &lines {
        println!(
            "criterion {} {:<36} {}  {}",
            l.id,
            l.name,
            if l.pass { "PASS" } else { "FAIL" },
            l.detail
        );
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.pass).map(|l| l.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
