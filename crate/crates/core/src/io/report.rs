use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::applications::VerificationReport;
use crate::error::Result;
use crate::solver::{LogRecord, MilpResult, SolveStatus, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Application {
    Featviz {
        layer: usize,
        unit: usize,
    },
    Adversarial {
        true_label: usize,
        target_label: usize,
        margin_factor: f64,
        pixel_cap: Option<f64>,
        /// Absent when no incumbent exists.
        verification: Option<VerificationReport>,
    },
    Oracle,
}

/// One solve, as written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceReport {
    pub name: String,
    /// `interval` or `tightened`.
    pub bounds: String,
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// `None` when the bound is infinite.
    pub dual_bound: Option<f64>,
    pub pct_gap: f64,
    pub nodes: u64,
    pub wall_seconds: f64,
    pub config: SolverConfig,
    pub application: Application,
    #[serde(default)]
    pub log: Vec<LogRecord>,
}

impl InstanceReport {
    pub fn new(name: impl Into<String>, bounds: impl Into<String>, result: &MilpResult, config: &SolverConfig, application: Application) -> Self {
        Self {
            name: name.into(),
            bounds: bounds.into(),
            status: result.status,
            objective: result.objective(),
            dual_bound: result.dual_bound.is_finite().then_some(result.dual_bound),
            pct_gap: result.stats.pct_gap,
            nodes: result.stats.nodes,
            wall_seconds: result.stats.wall_seconds,
            config: config.clone(),
            application,
            log: result.log.clone(),
        }
    }

    /// Solved means the search finished: optimal or proven infeasible.
    pub fn solved(&self) -> bool {
        matches!(self.status, SolveStatus::ProvenOptimal | SolveStatus::Infeasible)
    }
}

pub fn write_report(report: &InstanceReport, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

pub fn read_report(path: impl AsRef<Path>) -> Result<InstanceReport> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One row of the basic-versus-improved comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub model: String,
    pub instances: usize,
    pub pct_solved: f64,
    pub mean_gap: f64,
    pub mean_nodes: f64,
    pub mean_time: f64,
}

/// Averages over all records; runs stopped by a limit count as `time_limit` seconds.
pub fn aggregate(model: impl Into<String>, records: &[InstanceReport], time_limit: f64) -> Aggregate {
    let n = records.len().max(1) as f64;
    let mean = |f: &dyn Fn(&InstanceReport) -> f64| records.iter().map(f).sum::<f64>() / n;
    Aggregate {
        model: model.into(),
        instances: records.len(),
        pct_solved: 100.0 * records.iter().filter(|r| r.solved()).count() as f64 / n,
        mean_gap: mean(&|r| r.pct_gap),
        mean_nodes: mean(&|r| r.nodes as f64),
        mean_time: mean(&|r| if r.status.has_limit() { time_limit } else { r.wall_seconds }),
    }
}

pub fn format_table(rows: &[Aggregate]) -> String {
    let mut out = format!("{:<10} {:>9} {:>9} {:>12} {:>10}\n", "model", "%solved", "%gap", "nodes", "time(s)");
    for r in rows {
        writeln!(
            out,
            "{:<10} {:>9.1} {:>9.2} {:>12.1} {:>10.3}",
            r.model, r.pct_solved, r.mean_gap, r.mean_nodes, r.mean_time
        )
        .expect("writing to a string");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::Limit;

    fn record(status: SolveStatus, gap: f64, nodes: u64, time: f64) -> InstanceReport {
        InstanceReport {
            name: "i".into(),
            bounds: "interval".into(),
            status,
            objective: Some(1.0),
            dual_bound: Some(1.0),
            pct_gap: gap,
            nodes,
            wall_seconds: time,
            config: SolverConfig::default(),
            application: Application::Oracle,
            log: Vec::new(),
        }
    }

    #[test]
    fn aggregation_counts_limits_at_full_time() {
        let mut recs: Vec<InstanceReport> = (0..99).map(|i| record(SolveStatus::ProvenOptimal, 0.0, i, 1.0)).collect();
        recs.push(record(SolveStatus::Feasible(Limit::TimeLimit), 25.0, 1000, 301.7));
        let a = aggregate("basic", &recs, 300.0);
        assert_eq!(a.instances, 100);
        assert!((a.pct_solved - 99.0).abs() < 1e-12);
        assert!((a.mean_gap - 0.25).abs() < 1e-12);
        assert!((a.mean_nodes - (4851.0 + 1000.0) / 100.0).abs() < 1e-12);
        assert!((a.mean_time - (99.0 + 300.0) / 100.0).abs() < 1e-12);
        let table = format_table(&[a]);
        assert!(table.lines().next().unwrap().split_whitespace().eq(["model", "%solved", "%gap", "nodes", "time(s)"]));
    }

    #[test]
    fn report_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let mut r = record(SolveStatus::Feasible(Limit::TimeLimit), 3.5, 10, 2.0);
        r.application = Application::Adversarial {
            true_label: 0,
            target_label: 5,
            margin_factor: 1.2,
            pixel_cap: Some(0.2),
            verification: None,
        };
        write_report(&r, &p).unwrap();
        assert_eq!(read_report(&p).unwrap(), r);
    }
}
