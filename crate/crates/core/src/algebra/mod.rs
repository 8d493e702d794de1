//! Exact symbolic arithmetic and asymptotic comparison.

mod exppoly;
mod interval;
mod poly;
mod sym;

pub use exppoly::{dominates, eventual_sign, solve_first_order, ExpPoly, ExpTerm, Extended};
pub use interval::{poly_eval_bounds, Interval};
pub use poly::{int, parse_rational, pow_rational, rational, Coeff, Monomial, Poly};
pub use sym::{poly_sign, Sign, SymExpr, SymPoly, Trilean};

pub(crate) use sym::fmt_factor;

use thiserror::Error;

/// Polynomial over program variables with symbolic coefficients.
pub type Polynomial = Poly<SymExpr>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AlgebraError {
    #[error("division by {0}, which may be zero for some positive symbol values")]
    PossiblyZeroDivisor(String),
    #[error("recurrence resonance undecided: {0}")]
    Resonance(String),
}

/// Formats a program polynomial in input syntax.
pub fn fmt_polynomial(p: &Polynomial) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut terms: Vec<(&Monomial, &SymExpr)> = p.terms().collect();
    terms.sort_by(|a, b| b.0.cmp_graded(a.0));
    let mut out = String::new();
    for (i, (m, c)) in terms.into_iter().enumerate() {
        let neg = match c.as_rational() {
            Some(q) => q < num_traits::Zero::zero(),
            None => c.to_string().starts_with('-') && !c.neg().to_string().starts_with('-'),
        };
        let mag = if neg { c.neg() } else { c.clone() };
        let body = if m.is_one() {
            fmt_factor(&mag)
        } else if mag.is_one() {
            m.to_string()
        } else {
            format!("{}*{}", fmt_factor(&mag), m)
        };
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        out.push_str(&body);
    }
    out
}
