use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "fixtures", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relu-milp")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Value after `key: ` on the first matching line.
fn field(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}: ")))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn forward_prints_output() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    std::fs::write(&input, "3 1\n").unwrap();
    let o = run(&["forward", &fixture("tiny_2_2_1.json"), input.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert_eq!(field(&out, "output"), 2.0);
    assert!(!out.contains("label:"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["bogus"]).status.code(), Some(2));
    assert_eq!(run(&["featviz", &fixture("tiny_2_2_1.json")]).status.code(), Some(2));
    let o = run(&["oracle", "/nonexistent.json", "--objective", "max:2,0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_and_featviz_agree() {
    let dir = tempfile::tempdir().unwrap();
    let net = fixture("tiny_2_2_1.json");
    let o = run(&["oracle", &net, "--objective", "max:2,0"]);
    assert!(o.status.success());
    let oracle = field(&stdout(&o), "objective");
    assert!((oracle - 1.0).abs() < 1e-9);

    let bounds = dir.path().join("b.json");
    let o = run(&["tighten", &net, "-o", bounds.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(bounds.exists());

    let img = dir.path().join("f.pgm");
    let o = run(&["featviz", &net, "--unit", "2,0", "--bounds", bounds.to_str().unwrap(), "-o", img.to_str().unwrap()]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("status: ProvenOptimal"));
    assert!((field(&out, "objective") - oracle).abs() < 1e-6);
    assert!(std::fs::read_to_string(&img).unwrap().starts_with("P2"));
    let report = std::fs::read_to_string(img.with_extension("json")).unwrap();
    assert!(report.contains("\"featviz\""));
}

#[test]
fn adversarial_already_satisfied_is_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    std::fs::write(&input, "0.3 0.7\n").unwrap();
    let out_dir = dir.path().join("adv");
    let o = run(&[
        "adversarial",
        &fixture("tiny_2_2_identity.json"),
        "--input",
        input.to_str().unwrap(),
        "--true-label",
        "0",
        "-o",
        out_dir.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(field(&out, "objective").abs() < 1e-9);
    assert!(out.contains("verified: yes"));
    let reference = std::fs::read_to_string(&input).unwrap();
    let x: Vec<f64> = reference.split_whitespace().map(|t| t.parse().unwrap()).collect();
    let img = std::fs::read_to_string(out_dir.join("adversarial.pgm")).unwrap();
    let pixels: Vec<f64> = img.split_whitespace().skip(4).map(|t| t.parse::<f64>().unwrap() / 255.0).collect();
    assert_eq!(pixels.len(), 2);
    for (p, r) in pixels.iter().zip(&x) {
        assert!((p - r).abs() <= 1.0 / 255.0);
    }
    assert!(out_dir.join("perturbation.pgm").exists());
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn tight_cap_is_infeasible_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("x.txt");
    std::fs::write(&input, "0.9 0.1\n").unwrap();
    let o = run(&[
        "adversarial",
        &fixture("tiny_2_2_identity.json"),
        "--input",
        input.to_str().unwrap(),
        "--true-label",
        "0",
        "--cap",
        "0.2",
        "-o",
        dir.path().join("adv").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("status: Infeasible"));
}

#[test]
fn random_net_then_bench() {
    let dir = tempfile::tempdir().unwrap();
    let net = dir.path().join("n.json");
    let o = run(&["random-net", "--sizes", "5,4,4,3", "--seed", "2", "-o", net.to_str().unwrap()]);
    assert!(o.status.success());
    let reports = dir.path().join("reports");
    let o = run(&[
        "bench",
        net.to_str().unwrap(),
        "--instances",
        "3",
        "--time-limit",
        "20",
        "--reports",
        reports.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let header: Vec<&str> = out.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["model", "%solved", "%gap", "nodes", "time(s)"]);
    assert!(out.lines().any(|l| l.starts_with("basic")));
    assert!(out.lines().any(|l| l.starts_with("improved")));
    assert_eq!(std::fs::read_dir(&reports).unwrap().count(), 6);
}
