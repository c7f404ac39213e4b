use crate::error::{Error, Result};
use crate::lp::LinearProgram;

/// `binary = active_when -> sum(terms) <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorConstraint {
    pub binary: usize,
    pub active_when: bool,
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl IndicatorConstraint {
    /// `binary = active_when -> var <= 0`.
    pub fn upper_zero(binary: usize, active_when: bool, var: usize) -> Self {
        Self {
            binary,
            active_when,
            terms: vec![(var, 1.0)],
            rhs: 0.0,
        }
    }

    pub fn lhs(&self, point: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * point[j]).sum()
    }

    /// Whether `point` satisfies the implication, with binaries rounded.
    pub fn holds(&self, point: &[f64], tol: f64) -> bool {
        let on = point[self.binary] >= 0.5;
        on != self.active_when || self.lhs(point) <= self.rhs + tol
    }

    /// Largest value of `lhs - rhs` over the variable bounds of `lp`.
    pub fn big_m(&self, lp: &LinearProgram) -> Result<f64> {
        let mut m = -self.rhs;
        for &(j, a) in &self.terms {
            let v = &lp.vars[j];
            let end = if a > 0.0 { v.upper } else { v.lower };
            if !end.is_finite() {
                return Err(Error::InfiniteBound(v.name.clone()));
            }
            m += a * end;
        }
        Ok(m.max(0.0))
    }

    /// If the implied inequality is a single positively scaled variable, the
    /// implied upper bound on it.
    pub fn implied_upper_bound(&self) -> Option<(usize, f64)> {
        match self.terms.as_slice() {
            [(j, a)] if *a > 0.0 => Some((*j, self.rhs / a)),
            _ => None,
        }
    }
}

/// Rows, selector binaries and indicators that model `out = max(group)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolEncoding {
    pub rows: Vec<usize>,
    pub binaries: Vec<usize>,
    pub indicators: Vec<IndicatorConstraint>,
}

/// Add `sum z_i = 1`, `out >= y_i`, and `z_i = 1 -> out <= y_i` for each member.
pub fn encode_maxpool(
    lp: &mut LinearProgram,
    group: &[usize],
    out: usize,
    name: &str,
) -> Result<MaxPoolEncoding> {
    if group.is_empty() {
        return Err(Error::EmptyGroup);
    }
    let binaries: Vec<usize> = (0..group.len())
        .map(|i| lp.add_var(format!("sel{name}_{i}"), 0.0, 1.0))
        .collect();
    let mut rows = vec![lp.add_row(
        format!("onehot{name}"),
        binaries.iter().map(|&z| (z, 1.0)).collect(),
        1.0,
        1.0,
    )];
    for (i, &y) in group.iter().enumerate() {
        rows.push(lp.add_row(
            format!("maxge{name}_{i}"),
            vec![(out, 1.0), (y, -1.0)],
            0.0,
            f64::INFINITY,
        ));
    }
    let indicators = group
        .iter()
        .zip(&binaries)
        .map(|(&y, &z)| IndicatorConstraint {
            binary: z,
            active_when: true,
            terms: vec![(out, 1.0), (y, -1.0)],
            rhs: 0.0,
        })
        .collect();
    Ok(MaxPoolEncoding {
        rows,
        binaries,
        indicators,
    })
}

/// Add the big-M row for one indicator and return its index.
///
/// `active_when = 1`: `lhs - rhs <= M (1 - z)`; `active_when = 0`: `lhs - rhs <= M z`.
pub fn linearize_one(lp: &mut LinearProgram, ind: &IndicatorConstraint, name: String) -> Result<usize> {
    let m = ind.big_m(lp)?;
    let mut coeffs = ind.terms.clone();
    let rhs = if ind.active_when {
        coeffs.push((ind.binary, m));
        ind.rhs + m
    } else {
        coeffs.push((ind.binary, -m));
        ind.rhs
    };
    Ok(lp.add_row(name, coeffs, f64::NEG_INFINITY, rhs))
}
