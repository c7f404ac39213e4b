//! Debug dump of a [`LinearProgram`].
//!
//! ```text
//! maximize
//!   obj: 3 x + 2 y
//! subject to
//!   c0: x + y <= 4
//!   c1: 1 <= x - y <= 2
//!   c2: x + 3 y = 6
//! bounds
//!   0 <= x <= inf
//! ```
//!
//! Zero objective coefficients are omitted; infinite bounds print as `inf`.

use std::fmt::Write;

use super::{LinearProgram, Sense};

fn fmt_num(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

fn fmt_expr(lp: &LinearProgram, terms: impl Iterator<Item = (usize, f64)>) -> String {
    let mut out = String::new();
    for (j, a) in terms {
        let name = &lp.vars[j].name;
        let (sign, mag) = if a < 0.0 { ("-", -a) } else { ("+", a) };
        if out.is_empty() {
            if sign == "-" {
                out.push('-');
            }
        } else {
            let _ = write!(out, " {sign} ");
        }
        if mag == 1.0 {
            out.push_str(name);
        } else {
            let _ = write!(out, "{} {name}", fmt_num(mag));
        }
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

pub(super) fn render(lp: &LinearProgram) -> String {
    let mut out = String::new();
    out.push_str(match lp.sense {
        Sense::Minimize => "minimize\n",
        Sense::Maximize => "maximize\n",
    });
    let obj = lp
        .objective
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, &c)| (j, c));
    let _ = writeln!(out, "  obj: {}", fmt_expr(lp, obj));
    out.push_str("subject to\n");
    for row in &lp.rows {
        let expr = fmt_expr(lp, row.coeffs.iter().copied());
        let _ = if row.lower == row.upper {
            writeln!(out, "  {}: {expr} = {}", row.name, fmt_num(row.upper))
        } else if row.lower == f64::NEG_INFINITY {
            writeln!(out, "  {}: {expr} <= {}", row.name, fmt_num(row.upper))
        } else if row.upper == f64::INFINITY {
            writeln!(out, "  {}: {expr} >= {}", row.name, fmt_num(row.lower))
        } else {
            writeln!(
                out,
                "  {}: {} <= {expr} <= {}",
                row.name,
                fmt_num(row.lower),
                fmt_num(row.upper)
            )
        };
    }
    out.push_str("bounds\n");
    for v in &lp.vars {
        let _ = writeln!(out, "  {} <= {} <= {}", fmt_num(v.lower), v.name, fmt_num(v.upper));
    }
    out
}
