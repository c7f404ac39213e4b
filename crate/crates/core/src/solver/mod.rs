//! Best-bound branch and bound over the binaries of a [`MilpModel`].
//!
//! Node relaxations share one warm-started [`SimplexSolver`]; only the bounds
//! that differ from the previous node are changed. Internally everything is a
//! minimization; results are reported in the model's own sense.

mod heuristic;
mod node;

use std::borrow::Cow;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use heuristic::{complete_from_input, primal_heuristic_forward};
pub use node::{branch, BranchNode, BRANCH_INTEGRALITY_TOL};

use crate::encoder::MilpModel;
use crate::error::{Error, Result};
use crate::lp::{LpStatus, Sense, SimplexSolver};

/// Absolute slack used when comparing node bounds against the incumbent.
const ABS_PRUNE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    /// Most fractional binary; ties go to the lowest layer, then unit.
    MostFractional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Seconds.
    pub time_limit: f64,
    pub rel_gap_target: f64,
    pub integrality_tolerance: f64,
    pub node_limit: Option<u64>,
    pub branching: BranchingRule,
    pub seed: u64,
    /// Random box inputs completed into incumbents before the root LP.
    pub random_starts: usize,
    /// Run [`primal_heuristic_forward`] at every node.
    pub heuristic: bool,
    /// Keep a [`NodeRecord`] per processed node.
    pub record_tree: bool,
    pub lp_iteration_limit: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            time_limit: 300.0,
            rel_gap_target: 1e-6,
            integrality_tolerance: 1e-6,
            node_limit: None,
            branching: BranchingRule::MostFractional,
            seed: 0,
            random_starts: 8,
            heuristic: true,
            record_tree: false,
            lp_iteration_limit: 200_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.time_limit > 0.0
            && self.rel_gap_target > 0.0
            && self.integrality_tolerance > 0.0
            && self.integrality_tolerance < 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("solver config out of range: {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Limit {
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    ProvenOptimal,
    Feasible(Limit),
    Infeasible,
    /// Stopped by a limit before any feasible point was found.
    NoSolution(Limit),
}

impl SolveStatus {
    pub fn has_limit(&self) -> bool {
        matches!(self, Self::Feasible(_) | Self::NoSolution(_))
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ProvenOptimal => write!(f, "ProvenOptimal"),
            Self::Feasible(l) => write!(f, "Feasible({l:?})"),
            Self::Infeasible => write!(f, "Infeasible"),
            Self::NoSolution(l) => write!(f, "NoSolution({l:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub values: Vec<f64>,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub nodes: u64,
    pub wall_seconds: f64,
    /// 100 when no incumbent exists.
    pub pct_gap: f64,
    pub lp_iterations: u64,
}

/// One line of the solve log, written at each incumbent improvement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: f64,
    pub nodes: u64,
    pub objective: f64,
    /// `None` while no finite bound is known.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub id: u64,
    pub parent: Option<u64>,
    pub depth: usize,
    /// Node LP objective in the model's sense; `None` if the LP was infeasible.
    pub lp_objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpResult {
    pub status: SolveStatus,
    pub incumbent: Option<Incumbent>,
    pub dual_bound: f64,
    pub sense: Sense,
    pub stats: SolveStats,
    pub log: Vec<LogRecord>,
    pub tree: Vec<NodeRecord>,
}

impl MilpResult {
    pub fn objective(&self) -> Option<f64> {
        self.incumbent.as_ref().map(|i| i.objective)
    }
}

/// `100 |incumbent - bound| / max(|incumbent|, 1e-10)`.
pub fn compute_gap(incumbent_obj: f64, dual_bound: f64, _sense: Sense) -> f64 {
    if incumbent_obj == dual_bound {
        return 0.0;
    }
    100.0 * (incumbent_obj - dual_bound).abs() / incumbent_obj.abs().max(1e-10)
}

struct Queued {
    bound: f64,
    seq: u64,
    node: BranchNode,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // max-heap: smallest bound first, then oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    config: &'a SolverConfig,
    sign: f64,
    lp: SimplexSolver,
    current: Vec<(f64, f64)>,
    /// Minimization-form objective of the incumbent.
    best: Option<(Vec<f64>, f64)>,
    open: BinaryHeap<Queued>,
    /// Smallest bound among nodes closed without proving infeasibility.
    closed_bound: f64,
    seq: u64,
    nodes: u64,
    lp_iterations: u64,
    start: Instant,
    log: Vec<LogRecord>,
    tree: Vec<NodeRecord>,
}

enum NodeOutcome {
    /// Children to process, preferred one first.
    Branched(BranchNode, BranchNode),
    Closed,
}

impl<'a> Search<'a> {
    fn prune_level(&self) -> f64 {
        match &self.best {
            Some((_, inc)) => inc - (self.config.rel_gap_target * inc.abs()).max(ABS_PRUNE_TOL),
            None => f64::INFINITY,
        }
    }

    fn global_bound(&self, extra: f64) -> f64 {
        let open = self.open.peek().map_or(f64::INFINITY, |q| q.bound);
        let b = open.min(extra).min(self.closed_bound);
        match &self.best {
            Some((_, inc)) => b.min(*inc),
            None => b,
        }
    }

    fn offer(&mut self, point: Vec<f64>, node_bound: f64) -> bool {
        let obj = self.sign * self.model.base.objective_value(&point);
        if self.best.as_ref().is_some_and(|(_, inc)| obj >= *inc - 1e-12) {
            return false;
        }
        self.best = Some((point, obj));
        let bound = self.global_bound(node_bound);
        self.log.push(LogRecord {
            time: self.start.elapsed().as_secs_f64(),
            nodes: self.nodes,
            objective: self.sign * obj,
            bound: bound.is_finite().then_some(self.sign * bound),
        });
        log::debug!("incumbent {:.9} at node {}", self.sign * obj, self.nodes);
        true
    }

    fn apply_bounds(&mut self, target: &[(f64, f64)]) {
        for (j, &(lo, hi)) in target.iter().enumerate() {
            if self.current[j] != (lo, hi) {
                self.lp.set_bounds(j, lo, hi);
                self.current[j] = (lo, hi);
            }
        }
    }

    /// Most fractional binary, with its value.
    fn pick_fractional(&self, values: &[f64]) -> Option<(usize, f64)> {
        let tol = self.config.integrality_tolerance;
        let mut pick: Option<(usize, f64, f64)> = None;
        for &z in &self.model.binaries {
            let v = values[z];
            let frac = (v - v.round()).abs();
            if frac > tol && pick.is_none_or(|(_, _, f)| frac > f) {
                pick = Some((z, v, frac));
            }
        }
        pick.map(|(z, v, _)| (z, v))
    }

    fn random_starts(&mut self) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let bounds = self.current.clone();
        let inputs = self.model.input_vars();
        for _ in 0..self.config.random_starts {
            let x0: Vec<f64> = inputs
                .iter()
                .map(|&v| {
                    let (lo, hi) = bounds[v];
                    if hi > lo { rng.random_range(lo..=hi) } else { lo }
                })
                .collect();
            if let Some(p) = complete_from_input(self.model, &self.model.network, &x0, &bounds) {
                self.offer(p, f64::NEG_INFINITY);
            }
        }
    }

    fn process(&mut self, node: &BranchNode) -> Result<(NodeOutcome, bool)> {
        let bounds = node.bounds(self.model);
        let mut improved = false;
        if bounds.iter().any(|&(lo, hi)| lo > hi) {
            self.record(node, None);
            return Ok((NodeOutcome::Closed, false));
        }
        self.apply_bounds(&bounds);
        let sol = self.lp.solve(self.config.lp_iteration_limit);
        self.lp_iterations += sol.iterations as u64;
        match sol.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => {
                self.record(node, None);
                return Ok((NodeOutcome::Closed, false));
            }
            other => {
                return Err(Error::NodeLp {
                    node: node.id,
                    message: format!("relaxation returned {other:?} at depth {}", node.depth),
                })
            }
        }
        self.record(node, Some(sol.objective));
        let node_bound = (self.sign * sol.objective).max(node.bound);
        if node_bound >= self.prune_level() {
            self.close(node_bound);
            return Ok((NodeOutcome::Closed, false));
        }
        if self.config.heuristic {
            if let Some(p) = primal_heuristic_forward(self.model, &self.model.network, &sol.values, &bounds) {
                improved |= self.offer(p, node_bound);
            }
        }
        let Some((z, v)) = self.pick_fractional(&sol.values) else {
            improved |= self.polish(&bounds, sol.values, node_bound)?;
            self.close(node_bound);
            return Ok((NodeOutcome::Closed, improved));
        };
        if node_bound >= self.prune_level() {
            self.close(node_bound);
            return Ok((NodeOutcome::Closed, improved));
        }
        let (down, up) = branch(node, self.model, z, v, node_bound)?;
        let outcome = if v >= 0.5 {
            NodeOutcome::Branched(up, down)
        } else {
            NodeOutcome::Branched(down, up)
        };
        Ok((outcome, improved))
    }

    /// All binaries integral at this node: round them, re-solve if rounding moved
    /// anything, and offer the best completion found.
    fn polish(&mut self, bounds: &[(f64, f64)], mut values: Vec<f64>, node_bound: f64) -> Result<bool> {
        let moved = self.model.binaries.iter().any(|&z| values[z] != values[z].round());
        if moved {
            let mut fixed = bounds.to_vec();
            for &z in &self.model.binaries {
                let r = values[z].round();
                fixed[z] = (r, r);
            }
            self.apply_bounds(&fixed);
            let sol = self.lp.solve(self.config.lp_iteration_limit);
            self.lp_iterations += sol.iterations as u64;
            if sol.status != LpStatus::Optimal {
                return Ok(false);
            }
            values = sol.values;
            for &z in &self.model.binaries {
                values[z] = values[z].round();
            }
        }
        let mut improved = false;
        if self.config.heuristic {
            if let Some(p) = primal_heuristic_forward(self.model, &self.model.network, &values, bounds) {
                improved |= self.offer(p, node_bound);
            }
        }
        if self.model.is_feasible(&values) {
            improved |= self.offer(values, node_bound);
        }
        Ok(improved)
    }

    fn close(&mut self, node_bound: f64) {
        self.closed_bound = self.closed_bound.min(node_bound);
    }

    fn record(&mut self, node: &BranchNode, lp_objective: Option<f64>) {
        if self.config.record_tree {
            self.tree.push(NodeRecord {
                id: node.id,
                parent: node.parent,
                depth: node.depth,
                lp_objective,
            });
        }
    }

    fn push(&mut self, mut node: BranchNode) {
        self.seq += 1;
        node.id = self.seq;
        self.open.push(Queued { bound: node.bound, seq: self.seq, node });
    }

    fn limit_hit(&self) -> Option<Limit> {
        if self.config.node_limit.is_some_and(|n| self.nodes >= n) {
            return Some(Limit::NodeLimit);
        }
        if self.start.elapsed() >= Duration::from_secs_f64(self.config.time_limit) {
            return Some(Limit::TimeLimit);
        }
        None
    }
}

/// Solve `model` to proven optimality or until a limit.
///
/// Models that still carry symbolic indicators are linearized first.
pub fn solve_milp(model: &MilpModel, config: &SolverConfig) -> Result<MilpResult> {
    config.validate()?;
    let start = Instant::now();
    let model: Cow<'_, MilpModel> = if model.is_linearized() {
        Cow::Borrowed(model)
    } else {
        Cow::Owned(model.clone().linearize_indicators()?)
    };
    let model = model.as_ref();
    let sense = model.base.sense;
    let lp = SimplexSolver::new(&model.base)?;
    let current = model.base.vars.iter().map(|v| (v.lower, v.upper)).collect();
    let mut search = Search {
        model,
        config,
        sign: sense.sign(),
        lp,
        current,
        best: None,
        open: BinaryHeap::new(),
        closed_bound: f64::INFINITY,
        seq: 0,
        nodes: 0,
        lp_iterations: 0,
        start,
        log: Vec::new(),
        tree: Vec::new(),
    };
    search.random_starts();

    let mut plunge: Option<BranchNode> = Some(BranchNode::root());
    let mut plunging = false;
    let mut stopped = None;
    loop {
        let node = match plunge.take() {
            Some(n) => n,
            None => match search.open.pop() {
                Some(q) => q.node,
                None => break,
            },
        };
        if node.bound >= search.prune_level() {
            search.close(node.bound);
            plunging = false;
            continue;
        }
        if let Some(limit) = search.limit_hit() {
            search.open.push(Queued { bound: node.bound, seq: node.id, node });
            stopped = Some(limit);
            break;
        }
        search.nodes += 1;
        let (outcome, improved) = search.process(&node)?;
        plunging |= improved;
        match outcome {
            NodeOutcome::Branched(first, second) => {
                search.push(second);
                if plunging {
                    search.seq += 1;
                    let mut first = first;
                    first.id = search.seq;
                    plunge = Some(first);
                } else {
                    search.push(first);
                }
            }
            NodeOutcome::Closed => plunging = false,
        }
    }

    let wall_seconds = start.elapsed().as_secs_f64();
    let sign = search.sign;
    let (status, dual_min) = match (stopped, &search.best) {
        (None, Some(_)) => (SolveStatus::ProvenOptimal, search.global_bound(f64::INFINITY)),
        (None, None) => (SolveStatus::Infeasible, f64::INFINITY),
        (Some(l), Some(_)) => (SolveStatus::Feasible(l), search.global_bound(f64::INFINITY)),
        (Some(l), None) => (SolveStatus::NoSolution(l), search.global_bound(f64::INFINITY)),
    };
    let incumbent = search.best.take().map(|(values, obj)| Incumbent {
        values,
        objective: sign * obj,
    });
    let dual_bound = sign * dual_min;
    let pct_gap = match (&incumbent, status) {
        (_, SolveStatus::Infeasible) => 0.0,
        (Some(inc), _) => compute_gap(inc.objective, dual_bound, sense),
        (None, _) => 100.0,
    };
    Ok(MilpResult {
        status,
        incumbent,
        dual_bound,
        sense,
        stats: SolveStats {
            nodes: search.nodes,
            wall_seconds,
            pct_gap,
            lp_iterations: search.lp_iterations,
        },
        log: search.log,
        tree: search.tree,
    })
}
