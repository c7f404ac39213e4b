//! Dense-tableau bounded-variable simplex.
//!
//! Every row `i` gets a logical column `r_i = a_i . x` with bounds `[row_lo, row_hi]`,
//! so the constraint system is `[A | -I] y = 0` with only box constraints on `y`.
//! The tableau stores `B^-1 [A | -I]` for the current basis `B`; basic values are
//! always recomputed from the nonbasic ones, which keeps them exact with respect
//! to the stored tableau.
//!
//! `solve_primal` runs the two-phase primal method (phase 1 minimizes the sum of
//! bound infeasibilities of the basic variables). `solve` is the warm-start path
//! used between bound changes: if the current basis is dual feasible it runs the
//! dual simplex, otherwise it falls back to the primal method.

use super::{LinearProgram, LpSolution, LpStatus, FEASIBILITY_TOL, OPTIMALITY_TOL};
use crate::error::Result;

const PRIMAL_TOL: f64 = 1e-9;
const DUAL_TOL: f64 = OPTIMALITY_TOL;
const PIVOT_TOL: f64 = 1e-9;
const DEGENERATE_STEP: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to Bland's rule.
const BLAND_AFTER: usize = 50;
const REFACTOR_EVERY: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic,
    Lower,
    Upper,
    /// Nonbasic free variable held at zero.
    Zero,
}

enum PrimalStep {
    Flip(f64),
    Pivot { row: usize, to_upper: bool, step: f64 },
    Unbounded,
}

enum DualOutcome {
    Optimal,
    Infeasible,
    NotDualFeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SimplexSolver {
    n: usize,
    m: usize,
    nc: usize,
    orig: Vec<f64>,
    tab: Vec<f64>,
    cost: Vec<f64>,
    sign: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
    basis: Vec<usize>,
    state: Vec<State>,
    /// A row without coefficients whose bounds exclude zero.
    trivially_infeasible: bool,
    since_refactor: usize,
    degenerate_run: usize,
    row_buf: Vec<(usize, f64)>,
}

impl SimplexSolver {
    pub fn new(lp: &LinearProgram) -> Result<Self> {
        lp.validate()?;
        let n = lp.num_vars();
        let mut trivially_infeasible = false;
        let kept: Vec<usize> = (0..lp.num_rows())
            .filter(|&i| {
                let row = &lp.rows[i];
                let empty = row.coeffs.iter().all(|&(_, a)| a == 0.0);
                if empty && (row.lower > FEASIBILITY_TOL || row.upper < -FEASIBILITY_TOL) {
                    trivially_infeasible = true;
                }
                !empty
            })
            .collect();
        let m = kept.len();
        let nc = n + m;
        let mut orig = vec![0.0; m * nc];
        let mut lo = Vec::with_capacity(nc);
        let mut hi = Vec::with_capacity(nc);
        for v in &lp.vars {
            lo.push(v.lower);
            hi.push(v.upper);
        }
        for (r, &i) in kept.iter().enumerate() {
            let row = &lp.rows[i];
            for &(j, a) in &row.coeffs {
                orig[r * nc + j] += a;
            }
            orig[r * nc + n + r] = -1.0;
            lo.push(row.lower);
            hi.push(row.upper);
        }
        let sign = lp.sense.sign();
        let mut cost = vec![0.0; nc];
        for (j, &c) in lp.objective.iter().enumerate() {
            cost[j] = sign * c;
        }
        let mut solver = Self {
            n,
            m,
            nc,
            orig,
            tab: Vec::new(),
            cost,
            sign,
            lo,
            hi,
            x: vec![0.0; nc],
            basis: (n..nc).collect(),
            state: vec![State::Lower; nc],
            trivially_infeasible,
            since_refactor: 0,
            degenerate_run: 0,
            row_buf: Vec::new(),
        };
        solver.reset_to_slack_basis();
        Ok(solver)
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    /// Change the bounds of structural variable `j`. The basis is kept, so a
    /// following [`solve`](Self::solve) warm-starts from it.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        debug_assert!(j < self.n);
        self.lo[j] = lower;
        self.hi[j] = upper;
        if self.state[j] != State::Basic {
            self.place_nonbasic(j, self.state[j]);
        }
    }

    fn reset_to_slack_basis(&mut self) {
        let (m, nc, n) = (self.m, self.nc, self.n);
        self.tab = self.orig.iter().map(|v| -v).collect();
        for r in 0..m {
            self.tab[r * nc + n + r] = 1.0;
        }
        self.basis = (n..nc).collect();
        for j in 0..n {
            let c = self.cost[j];
            let preferred = if c < 0.0 { State::Upper } else { State::Lower };
            self.place_nonbasic(j, preferred);
        }
        for j in n..nc {
            self.state[j] = State::Basic;
        }
        self.since_refactor = 0;
        self.degenerate_run = 0;
        self.recompute_basics();
    }

    /// Put nonbasic `j` at the preferred side if that bound is finite, the
    /// other side otherwise, or at zero when free.
    fn place_nonbasic(&mut self, j: usize, preferred: State) {
        let (lo, hi) = (self.lo[j], self.hi[j]);
        let state = match preferred {
            State::Upper if hi.is_finite() => State::Upper,
            _ if lo.is_finite() => State::Lower,
            _ if hi.is_finite() => State::Upper,
            _ => State::Zero,
        };
        self.state[j] = state;
        self.x[j] = match state {
            State::Lower => lo,
            State::Upper => hi,
            _ => 0.0,
        };
    }

    fn recompute_basics(&mut self) {
        let nc = self.nc;
        let nz: Vec<(usize, f64)> = (0..nc)
            .filter(|&j| self.state[j] != State::Basic && self.x[j] != 0.0)
            .map(|j| (j, self.x[j]))
            .collect();
        for r in 0..self.m {
            let row = &self.tab[r * nc..(r + 1) * nc];
            let v: f64 = nz.iter().map(|&(j, xj)| -row[j] * xj).sum();
            self.x[self.basis[r]] = v;
        }
    }

    fn reduced_costs(&self, costs: &[f64]) -> Vec<f64> {
        let nc = self.nc;
        let mut d = costs.to_vec();
        for r in 0..self.m {
            let cb = costs[self.basis[r]];
            if cb == 0.0 {
                continue;
            }
            let row = &self.tab[r * nc..(r + 1) * nc];
            for (dj, &t) in d.iter_mut().zip(row) {
                *dj -= cb * t;
            }
        }
        for &b in &self.basis {
            d[b] = 0.0;
        }
        d
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let nc = self.nc;
        let p = self.tab[r * nc + q];
        let inv = 1.0 / p;
        self.row_buf.clear();
        for j in 0..nc {
            let v = self.tab[r * nc + j];
            if v != 0.0 {
                let scaled = if j == q { 1.0 } else { v * inv };
                self.tab[r * nc + j] = scaled;
                self.row_buf.push((j, scaled));
            }
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.tab[i * nc + q];
            if f == 0.0 {
                continue;
            }
            let row = &mut self.tab[i * nc..(i + 1) * nc];
            for &(j, v) in &self.row_buf {
                row[j] -= f * v;
            }
            row[q] = 0.0;
        }
        let leaving = self.basis[r];
        self.basis[r] = q;
        self.state[q] = State::Basic;
        self.state[leaving] = State::Lower;
        self.since_refactor += 1;
    }

    /// Rebuild the tableau from the original matrix for the current basis.
    /// Columns that turn out numerically dependent are made nonbasic.
    fn refactor(&mut self) {
        let (m, nc, n) = (self.m, self.nc, self.n);
        let target = self.basis.clone();
        let saved_state = self.state.clone();
        let mut in_target = vec![false; nc];
        for &b in &target {
            in_target[b] = true;
        }
        self.tab = self.orig.iter().map(|v| -v).collect();
        for r in 0..m {
            self.tab[r * nc + n + r] = 1.0;
        }
        self.basis = (n..nc).collect();
        for &c in target.iter().filter(|&&c| c < n) {
            let mut best: Option<(usize, f64)> = None;
            for r in 0..m {
                let b = self.basis[r];
                if b < n || in_target[b] {
                    continue;
                }
                let v = self.tab[r * nc + c].abs();
                if v > best.map_or(1e-9, |(_, bv)| bv) {
                    best = Some((r, v));
                }
            }
            if let Some((r, _)) = best {
                self.pivot(r, c);
            } else {
                log::debug!("refactor dropped dependent column {c}");
            }
        }
        let mut is_basic = vec![false; nc];
        for &b in &self.basis {
            is_basic[b] = true;
        }
        for j in 0..nc {
            if is_basic[j] {
                self.state[j] = State::Basic;
            } else if saved_state[j] != State::Basic {
                self.place_nonbasic(j, saved_state[j]);
            } else {
                let xj = self.x[j];
                let preferred = if (xj - self.lo[j]).abs() <= (self.hi[j] - xj).abs() {
                    State::Lower
                } else {
                    State::Upper
                };
                self.place_nonbasic(j, preferred);
            }
        }
        self.since_refactor = 0;
        self.recompute_basics();
    }

    fn infeasibility(&self, b: usize) -> f64 {
        (self.lo[b] - self.x[b]).max(self.x[b] - self.hi[b]).max(0.0)
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&b| self.infeasibility(b))
            .fold(0.0, f64::max)
    }

    fn is_dual_feasible(&self, d: &[f64]) -> bool {
        (0..self.nc).all(|j| {
            if self.lo[j] == self.hi[j] {
                return true;
            }
            match self.state[j] {
                State::Basic => true,
                State::Lower => d[j] >= -DUAL_TOL,
                State::Upper => d[j] <= DUAL_TOL,
                State::Zero => d[j].abs() <= DUAL_TOL,
            }
        })
    }

    fn note_step(&mut self, step: f64) {
        if step <= DEGENERATE_STEP {
            self.degenerate_run += 1;
        } else {
            self.degenerate_run = 0;
        }
    }

    fn bland(&self) -> bool {
        self.degenerate_run >= BLAND_AFTER
    }

    fn choose_entering(&self, d: &[f64]) -> Option<(usize, f64)> {
        let bland = self.bland();
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.nc {
            if self.lo[j] == self.hi[j] {
                continue;
            }
            let dir = match self.state[j] {
                State::Basic => continue,
                State::Lower if d[j] < -DUAL_TOL => 1.0,
                State::Upper if d[j] > DUAL_TOL => -1.0,
                State::Zero if d[j].abs() > DUAL_TOL => -d[j].signum(),
                _ => continue,
            };
            if bland {
                return Some((j, dir));
            }
            let score = d[j].abs();
            if best.is_none_or(|(_, _, s)| score > s) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn primal_ratio(&self, q: usize, dir: f64) -> PrimalStep {
        let nc = self.nc;
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        let mut tmax = f64::INFINITY;
        for i in 0..self.m {
            let a = -self.tab[i * nc + q] * dir;
            if a.abs() <= PIVOT_TOL {
                continue;
            }
            let b = self.basis[i];
            let (xv, lo, hi) = (self.x[b], self.lo[b], self.hi[b]);
            let bound = if a > 0.0 {
                if xv < lo - PRIMAL_TOL {
                    Some((lo, false))
                } else if xv <= hi + PRIMAL_TOL && hi.is_finite() {
                    Some((hi, true))
                } else {
                    None
                }
            } else if xv > hi + PRIMAL_TOL {
                Some((hi, true))
            } else if xv >= lo - PRIMAL_TOL && lo.is_finite() {
                Some((lo, false))
            } else {
                None
            };
            let Some((bound, to_upper)) = bound else { continue };
            let exact = ((bound - xv) / a).max(0.0);
            let relaxed = (bound - xv) / a + PRIMAL_TOL / a.abs();
            tmax = tmax.min(relaxed);
            cands.push((i, a.abs(), exact, to_upper));
        }
        let range = self.hi[q] - self.lo[q];
        if range.is_finite() && range <= tmax {
            return PrimalStep::Flip(range);
        }
        if cands.is_empty() {
            return PrimalStep::Unbounded;
        }
        let chosen = if self.bland() {
            let tmin = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
            cands
                .iter()
                .filter(|c| c.2 <= tmin + DEGENERATE_STEP)
                .min_by_key(|c| self.basis[c.0])
                .copied()
        } else {
            cands
                .iter()
                .filter(|c| c.2 <= tmax)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .copied()
        };
        match chosen {
            Some((row, _, step, to_upper)) => PrimalStep::Pivot { row, to_upper, step },
            None => PrimalStep::Unbounded,
        }
    }

    fn primal(&mut self, limit: usize, iters: &mut usize) -> LpStatus {
        loop {
            if *iters >= limit {
                return LpStatus::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let mut phase_one = false;
            let mut pcost = vec![0.0; self.nc];
            for &b in &self.basis {
                if self.x[b] < self.lo[b] - PRIMAL_TOL {
                    pcost[b] = -1.0;
                    phase_one = true;
                } else if self.x[b] > self.hi[b] + PRIMAL_TOL {
                    pcost[b] = 1.0;
                    phase_one = true;
                }
            }
            let d = if phase_one {
                self.reduced_costs(&pcost)
            } else {
                self.reduced_costs(&self.cost)
            };
            let Some((q, dir)) = self.choose_entering(&d) else {
                return if phase_one {
                    LpStatus::Infeasible
                } else {
                    LpStatus::Optimal
                };
            };
            *iters += 1;
            match self.primal_ratio(q, dir) {
                PrimalStep::Flip(step) => {
                    let to = if dir > 0.0 { State::Upper } else { State::Lower };
                    self.state[q] = to;
                    self.x[q] = if dir > 0.0 { self.hi[q] } else { self.lo[q] };
                    self.note_step(step);
                }
                PrimalStep::Pivot { row, to_upper, step } => {
                    let leaving = self.basis[row];
                    self.pivot(row, q);
                    if to_upper {
                        self.state[leaving] = State::Upper;
                        self.x[leaving] = self.hi[leaving];
                    } else {
                        self.state[leaving] = State::Lower;
                        self.x[leaving] = self.lo[leaving];
                    }
                    self.note_step(step);
                }
                PrimalStep::Unbounded => {
                    if phase_one {
                        log::warn!("phase 1 ray without a blocking row; treating as infeasible");
                        return LpStatus::Infeasible;
                    }
                    return LpStatus::Unbounded;
                }
            }
            self.recompute_basics();
        }
    }

    fn dual(&mut self, limit: usize, iters: &mut usize) -> DualOutcome {
        let nc = self.nc;
        loop {
            if *iters >= limit {
                return DualOutcome::IterationLimit;
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor();
            }
            let d = self.reduced_costs(&self.cost);
            let bland = self.bland();
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let inf = self.infeasibility(self.basis[r]);
                if inf <= PRIMAL_TOL {
                    continue;
                }
                let better = match leave {
                    None => true,
                    Some((lr, li)) => {
                        if bland {
                            self.basis[r] < self.basis[lr]
                        } else {
                            inf > li
                        }
                    }
                };
                if better {
                    leave = Some((r, inf));
                }
            }
            let Some((r, _)) = leave else {
                return if self.is_dual_feasible(&d) {
                    DualOutcome::Optimal
                } else {
                    DualOutcome::NotDualFeasible
                };
            };
            let b = self.basis[r];
            let increase = self.x[b] < self.lo[b];
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut tmax = f64::INFINITY;
            for j in 0..nc {
                if self.lo[j] == self.hi[j] {
                    continue;
                }
                let a = self.tab[r * nc + j];
                if a.abs() <= PIVOT_TOL {
                    continue;
                }
                let dj = match (self.state[j], increase) {
                    (State::Basic, _) => continue,
                    (State::Lower, true) if a < 0.0 => d[j].max(0.0),
                    (State::Lower, false) if a > 0.0 => d[j].max(0.0),
                    (State::Upper, true) if a > 0.0 => d[j].min(0.0),
                    (State::Upper, false) if a < 0.0 => d[j].min(0.0),
                    (State::Zero, _) => d[j],
                    _ => continue,
                };
                let exact = dj.abs() / a.abs();
                tmax = tmax.min((dj.abs() + DUAL_TOL) / a.abs());
                cands.push((j, a.abs(), exact));
            }
            if cands.is_empty() {
                return DualOutcome::Infeasible;
            }
            let (q, _, step) = if bland {
                let tmin = cands.iter().map(|c| c.2).fold(f64::INFINITY, f64::min);
                *cands
                    .iter()
                    .filter(|c| c.2 <= tmin + DEGENERATE_STEP)
                    .min_by_key(|c| c.0)
                    .expect("nonempty")
            } else {
                *cands
                    .iter()
                    .filter(|c| c.2 <= tmax)
                    .max_by(|a, b| a.1.total_cmp(&b.1))
                    .expect("min ratio candidate passes its own relaxed bound")
            };
            *iters += 1;
            self.pivot(r, q);
            if increase {
                self.state[b] = State::Lower;
                self.x[b] = self.lo[b];
            } else {
                self.state[b] = State::Upper;
                self.x[b] = self.hi[b];
            }
            self.note_step(step);
            self.recompute_basics();
        }
    }

    fn max_residual(&self) -> f64 {
        let (n, nc) = (self.n, self.nc);
        let mut worst: f64 = 0.0;
        for j in 0..n {
            worst = worst.max(self.lo[j] - self.x[j]).max(self.x[j] - self.hi[j]);
        }
        for r in 0..self.m {
            let row = &self.orig[r * nc..r * nc + n];
            let act: f64 = row.iter().zip(&self.x[..n]).map(|(a, x)| a * x).sum();
            let (lo, hi) = (self.lo[n + r], self.hi[n + r]);
            worst = worst.max(lo - act).max(act - hi);
        }
        worst
    }

    fn finish(&self, status: LpStatus, iterations: usize) -> LpSolution {
        let values = self.x[..self.n].to_vec();
        let objective = self.sign
            * self.cost[..self.n]
                .iter()
                .zip(&values)
                .map(|(c, x)| c * x)
                .sum::<f64>();
        let primal_feasible =
            status != LpStatus::Infeasible && self.max_primal_infeasibility() <= FEASIBILITY_TOL;
        LpSolution {
            status,
            values,
            objective,
            primal_feasible,
            iterations,
        }
    }

    fn verified(&mut self, mut status: LpStatus, limit: usize, iters: &mut usize) -> LpStatus {
        if status == LpStatus::Optimal && self.max_residual() > FEASIBILITY_TOL {
            log::debug!("residual {:.3e} after solve; refactoring", self.max_residual());
            self.refactor();
            status = self.primal(limit, iters);
            if status == LpStatus::Optimal && self.max_residual() > FEASIBILITY_TOL {
                self.reset_to_slack_basis();
                status = self.primal(limit, iters);
            }
        }
        status
    }

    /// Two-phase primal simplex from the current basis.
    pub fn solve_primal(&mut self, iteration_limit: usize) -> LpSolution {
        if self.trivially_infeasible {
            return self.finish(LpStatus::Infeasible, 0);
        }
        self.recompute_basics();
        let mut iters = 0;
        let status = self.primal(iteration_limit, &mut iters);
        let status = self.verified(status, iteration_limit, &mut iters);
        self.finish(status, iters)
    }

    /// Reoptimize after bound changes: dual simplex when the basis is dual
    /// feasible, primal otherwise.
    pub fn solve(&mut self, iteration_limit: usize) -> LpSolution {
        if self.trivially_infeasible {
            return self.finish(LpStatus::Infeasible, 0);
        }
        if self.since_refactor >= REFACTOR_EVERY / 2 {
            self.refactor();
        } else {
            self.recompute_basics();
        }
        self.degenerate_run = 0;
        let mut iters = 0;
        let d = self.reduced_costs(&self.cost);
        let status = if self.is_dual_feasible(&d) {
            match self.dual(iteration_limit, &mut iters) {
                DualOutcome::Optimal => LpStatus::Optimal,
                DualOutcome::IterationLimit => LpStatus::IterationLimit,
                // infeasibility claims are confirmed by phase 1
                DualOutcome::Infeasible | DualOutcome::NotDualFeasible => {
                    self.primal(iteration_limit, &mut iters)
                }
            }
        } else {
            self.primal(iteration_limit, &mut iters)
        };
        let status = self.verified(status, iteration_limit, &mut iters);
        self.finish(status, iters)
    }
}
