//! Bounded-variable linear programs and a dense simplex solver for them.

mod simplex;
mod text;

pub use simplex::SimplexSolver;

use crate::error::{Error, Result};

/// Absolute tolerance on bound and row residuals.
pub const FEASIBILITY_TOL: f64 = 1e-7;
/// Tolerance on reduced costs.
pub const OPTIMALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Minimize,
    Maximize,
}

impl Sense {
    pub fn flipped(self) -> Self {
        match self {
            Sense::Minimize => Sense::Maximize,
            Sense::Maximize => Sense::Minimize,
        }
    }

    /// `+1` for minimization, `-1` for maximization.
    pub fn sign(self) -> f64 {
        match self {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

/// `lower <= sum(coeffs) <= upper`; an equality when both sides match.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub lower: f64,
    pub upper: f64,
}

impl Row {
    pub fn activity(&self, point: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * point[j]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    /// Dense objective, one coefficient per variable.
    pub objective: Vec<f64>,
    pub sense: Sense,
}

impl Default for LinearProgram {
    fn default() -> Self {
        Self::new(Sense::Minimize)
    }
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            vars: Vec::new(),
            rows: Vec::new(),
            objective: Vec::new(),
            sense,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
        });
        self.objective.push(0.0);
        self.vars.len() - 1
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: Vec<(usize, f64)>,
        lower: f64,
        upper: f64,
    ) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            lower,
            upper,
        });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, point: &[f64]) -> f64 {
        self.objective.iter().zip(point).map(|(c, x)| c * x).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.vars.len() {
            return Err(Error::MalformedLp(format!(
                "objective has {} coefficients for {} variables",
                self.objective.len(),
                self.vars.len()
            )));
        }
        if let Some(c) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::MalformedLp(format!("objective coefficient {c} is not finite")));
        }
        for v in &self.vars {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(Error::MalformedLp(format!(
                    "variable {} has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if v.lower == f64::INFINITY || v.upper == f64::NEG_INFINITY {
                return Err(Error::MalformedLp(format!("variable {} has an empty domain", v.name)));
            }
        }
        for r in &self.rows {
            if r.lower.is_nan() || r.upper.is_nan() || r.lower > r.upper {
                return Err(Error::MalformedLp(format!(
                    "row {} has bounds [{}, {}]",
                    r.name, r.lower, r.upper
                )));
            }
            for &(j, a) in &r.coeffs {
                if j >= self.vars.len() {
                    return Err(Error::MalformedLp(format!(
                        "row {} references undeclared variable {j}",
                        r.name
                    )));
                }
                if !a.is_finite() {
                    return Err(Error::MalformedLp(format!(
                        "row {} has a non-finite coefficient on {}",
                        r.name, self.vars[j].name
                    )));
                }
            }
        }
        Ok(())
    }

    /// Human-readable dump, one row per line. See [`text`] for the layout.
    pub fn to_text(&self) -> String {
        text::render(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural variable values. For `IterationLimit` this is the last
    /// iterate, primal feasible iff `primal_feasible`.
    pub values: Vec<f64>,
    pub objective: f64,
    pub primal_feasible: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    pub max_bound_violation: f64,
    pub max_row_violation: f64,
    pub feasible: bool,
}

pub fn check_feasible(lp: &LinearProgram, point: &[f64]) -> Result<FeasibilityReport> {
    if point.len() != lp.num_vars() {
        return Err(Error::Dimension(format!(
            "point has {} entries, LP has {} variables",
            point.len(),
            lp.num_vars()
        )));
    }
    let max_bound_violation = lp
        .vars
        .iter()
        .zip(point)
        .map(|(v, &x)| (v.lower - x).max(x - v.upper).max(0.0))
        .fold(0.0, f64::max);
    let max_row_violation = lp
        .rows
        .iter()
        .map(|r| {
            let a = r.activity(point);
            (r.lower - a).max(a - r.upper).max(0.0)
        })
        .fold(0.0, f64::max);
    Ok(FeasibilityReport {
        max_bound_violation,
        max_row_violation,
        feasible: max_bound_violation <= FEASIBILITY_TOL && max_row_violation <= FEASIBILITY_TOL,
    })
}

/// Solve from scratch with the two-phase bounded primal simplex.
pub fn solve_lp(lp: &LinearProgram, iteration_limit: usize) -> Result<LpSolution> {
    let mut solver = SimplexSolver::new(lp)?;
    Ok(solver.solve_primal(iteration_limit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lp_max(obj: &[f64], rows: &[(&[f64], f64)], ub: f64) -> LinearProgram {
        let mut lp = LinearProgram::new(Sense::Maximize);
        for (j, &c) in obj.iter().enumerate() {
            lp.add_var(format!("v{j}"), 0.0, ub);
            lp.objective[j] = c;
        }
        for (i, (coeffs, rhs)) in rows.iter().enumerate() {
            let coeffs = coeffs.iter().copied().enumerate().collect();
            lp.add_row(format!("r{i}"), coeffs, f64::NEG_INFINITY, *rhs);
        }
        lp
    }

    /// Enumerate every intersection of two tight constraints among rows and
    /// nonnegativity, keep the feasible ones, and take the best.
    fn vertex_enumeration_2d(obj: [f64; 2], rows: &[([f64; 2], f64)]) -> (f64, [f64; 2]) {
        let mut lines: Vec<([f64; 2], f64)> = rows.to_vec();
        lines.push(([1.0, 0.0], 0.0));
        lines.push(([0.0, 1.0], 0.0));
        let mut best = (f64::NEG_INFINITY, [0.0; 2]);
        for i in 0..lines.len() {
            for k in i + 1..lines.len() {
                let ([a, b], e) = lines[i];
                let ([c, d], f) = lines[k];
                let det = a * d - b * c;
                if det.abs() < 1e-12 {
                    continue;
                }
                let p = [(e * d - b * f) / det, (a * f - e * c) / det];
                let ok = p[0] >= -1e-12
                    && p[1] >= -1e-12
                    && rows.iter().all(|(w, r)| w[0] * p[0] + w[1] * p[1] <= r + 1e-12);
                let val = obj[0] * p[0] + obj[1] * p[1];
                if ok && val > best.0 {
                    best = (val, p);
                }
            }
        }
        best
    }

    #[test]
    fn bound_attained_optimum() {
        let lp = lp_max(&[1.0], &[], 3.0);
        let sol = solve_lp(&lp, 100).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 3.0).abs() < 1e-12);
        assert!((sol.objective - 3.0).abs() < 1e-12);
    }

    #[test]
    fn single_binding_row() {
        let lp = lp_max(&[1.0, 1.0], &[(&[1.0, 1.0], 1.0)], f64::INFINITY);
        let sol = solve_lp(&lp, 100).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_variable_polytope_matches_vertex_enumeration() {
        let rows = [([1.0, 1.0], 4.0), ([1.0, 3.0], 6.0)];
        let (oracle, at) = vertex_enumeration_2d([3.0, 2.0], &rows);
        assert!((oracle - 12.0).abs() < 1e-12);
        assert!((at[0] - 4.0).abs() < 1e-12 && at[1].abs() < 1e-12);

        let lp = lp_max(&[3.0, 2.0], &[(&[1.0, 1.0], 4.0), (&[1.0, 3.0], 6.0)], f64::INFINITY);
        let sol = solve_lp(&lp, 100).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 12.0).abs() < 1e-9);
        assert!((sol.values[0] - 4.0).abs() < 1e-9);
        assert!(sol.values[1].abs() < 1e-9);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 0.0, 1.0);
        let y = lp.add_var("y", 0.0, 1.0);
        lp.add_row("r", vec![(x, 1.0), (y, 1.0)], 3.0, f64::INFINITY);
        assert_eq!(solve_lp(&lp, 100).unwrap().status, LpStatus::Infeasible);

        let mut lp = LinearProgram::new(Sense::Maximize);
        let x = lp.add_var("x", 0.0, f64::INFINITY);
        let y = lp.add_var("y", 0.0, f64::INFINITY);
        lp.objective[x] = 1.0;
        lp.add_row("r", vec![(x, 1.0), (y, -1.0)], f64::NEG_INFINITY, 1.0);
        assert_eq!(solve_lp(&lp, 100).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn equality_rows_and_free_variables() {
        // min x + 2y  s.t. x - y = 1, x + y >= 3, y free
        let mut lp = LinearProgram::new(Sense::Minimize);
        let x = lp.add_var("x", 0.0, 10.0);
        let y = lp.add_var("y", f64::NEG_INFINITY, f64::INFINITY);
        lp.objective = vec![1.0, 2.0];
        lp.add_row("eq", vec![(x, 1.0), (y, -1.0)], 1.0, 1.0);
        lp.add_row("ge", vec![(x, 1.0), (y, 1.0)], 3.0, f64::INFINITY);
        let sol = solve_lp(&lp, 100).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.values[0] - 2.0).abs() < 1e-9);
        assert!((sol.values[1] - 1.0).abs() < 1e-9);
        assert!((sol.objective - 4.0).abs() < 1e-9);
    }

    #[test]
    fn empty_rows_are_checked() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_var("x", 0.0, 1.0);
        lp.add_row("empty", vec![], 1.0, 2.0);
        assert_eq!(solve_lp(&lp, 10).unwrap().status, LpStatus::Infeasible);
        lp.rows[0].lower = -1.0;
        assert_eq!(solve_lp(&lp, 10).unwrap().status, LpStatus::Optimal);
    }

    #[test]
    fn malformed_lp_is_rejected() {
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_var("x", 2.0, 1.0);
        assert!(matches!(solve_lp(&lp, 10), Err(Error::MalformedLp(_))));
        let mut lp = LinearProgram::new(Sense::Minimize);
        lp.add_var("x", 0.0, 1.0);
        lp.add_row("bad", vec![(3, 1.0)], 0.0, 1.0);
        assert!(matches!(solve_lp(&lp, 10), Err(Error::MalformedLp(_))));
    }

    #[test]
    fn check_feasible_residuals() {
        let lp = lp_max(&[1.0], &[], 3.0);
        let ok = check_feasible(&lp, &[2.0]).unwrap();
        assert!(ok.feasible);
        assert_eq!(ok.max_bound_violation, 0.0);
        let bad = check_feasible(&lp, &[4.0]).unwrap();
        assert!(!bad.feasible);
        assert!((bad.max_bound_violation - 1.0).abs() < 1e-12);

        let lp = lp_max(&[1.0, 1.0], &[(&[1.0, 1.0], 1.0)], f64::INFINITY);
        let bad = check_feasible(&lp, &[0.6, 0.6]).unwrap();
        assert!(!bad.feasible);
        assert!((bad.max_row_violation - 0.2).abs() < 1e-12);
        assert!(check_feasible(&lp, &[0.6]).is_err());
    }

    #[test]
    fn warm_resolve_after_bound_change() {
        let mut lp = lp_max(&[3.0, 2.0], &[(&[1.0, 1.0], 4.0), (&[1.0, 3.0], 6.0)], f64::INFINITY);
        lp.vars[0].upper = 10.0;
        lp.vars[1].upper = 10.0;
        let mut solver = SimplexSolver::new(&lp).unwrap();
        let first = solver.solve(1000);
        assert!((first.objective - 12.0).abs() < 1e-9);
        solver.set_bounds(0, 0.0, 3.0);
        let second = solver.solve(1000);
        assert_eq!(second.status, LpStatus::Optimal);
        // x = 3, y = 1 (row 1 binding)
        assert!((second.objective - 11.0).abs() < 1e-9, "{}", second.objective);
        solver.set_bounds(1, 2.0, 10.0);
        solver.set_bounds(0, 3.0, 3.0);
        assert_eq!(solver.solve(1000).status, LpStatus::Infeasible);
        solver.set_bounds(0, 0.0, 10.0);
        solver.set_bounds(1, 0.0, 10.0);
        assert!((solver.solve(1000).objective - 12.0).abs() < 1e-9);
    }
}
