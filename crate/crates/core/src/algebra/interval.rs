//! Interval extension of program polynomials over asymptotic endpoints.

use std::collections::HashMap;

use super::exppoly::Extended;
use super::sym::{Sign, SymExpr};
use super::Polynomial;

/// A closed interval with eventual (large `n`) endpoint semantics.
#[derive(Clone, Debug, PartialEq)]
pub struct Interval {
    pub lo: Extended,
    pub hi: Extended,
}

impl Interval {
    pub fn new(lo: Extended, hi: Extended) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: Extended) -> Self {
        Interval {
            lo: v.clone(),
            hi: v,
        }
    }

    pub fn constant(c: SymExpr) -> Self {
        Self::point(Extended::constant(c))
    }

    pub fn unbounded() -> Self {
        Interval {
            lo: Extended::NegInf,
            hi: Extended::PosInf,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn add(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.add(&other.lo).unwrap_or(Extended::NegInf),
            hi: self.hi.add(&other.hi).unwrap_or(Extended::PosInf),
        }
    }

    pub fn neg(&self) -> Interval {
        Interval {
            lo: self.hi.neg(),
            hi: self.lo.neg(),
        }
    }

    /// Sign-aware product; endpoint products of undecided sign widen to
    /// the full line.
    pub fn mul(&self, other: &Interval) -> Interval {
        let mut products = Vec::with_capacity(4);
        for a in [&self.lo, &self.hi] {
            for b in [&other.lo, &other.hi] {
                match a.mul(b) {
                    Some(p) => products.push(p),
                    None => return Interval::unbounded(),
                }
            }
        }
        hull(&products)
    }

    pub fn scale(&self, k: &SymExpr) -> Interval {
        match k.sign() {
            Sign::Zero => Interval::constant(SymExpr::zero()),
            Sign::Positive => Interval {
                lo: self.lo.scale(k).unwrap_or(Extended::NegInf),
                hi: self.hi.scale(k).unwrap_or(Extended::PosInf),
            },
            Sign::Negative => Interval {
                lo: self.hi.scale(k).unwrap_or(Extended::NegInf),
                hi: self.lo.scale(k).unwrap_or(Extended::PosInf),
            },
            Sign::Unknown => match (self.lo.scale(k), self.hi.scale(k)) {
                (Some(a), Some(b)) => hull(&[a, b]),
                _ => Interval::unbounded(),
            },
        }
    }

    pub fn pow(&self, k: u32) -> Interval {
        if k == 0 {
            return Interval::constant(SymExpr::one());
        }
        if k == 1 {
            return self.clone();
        }
        let lo_k = self.lo.pow(k);
        let hi_k = self.hi.pow(k);
        if k % 2 == 1 {
            return Interval::new(lo_k, hi_k);
        }
        if self.lo.eventual_sign().is_nonneg() {
            Interval::new(lo_k, hi_k)
        } else if self.hi.eventual_sign().is_nonpos() {
            Interval::new(hi_k, lo_k)
        } else {
            Interval::new(Extended::zero(), lo_k.max(&hi_k))
        }
    }

    /// Intersection by eventual comparison; keeps the original endpoint
    /// when the comparison is undecided.
    pub fn intersect(&self, other: &Interval) -> Interval {
        let lo = match self.lo.max(&other.lo) {
            Extended::PosInf if !matches!(other.lo, Extended::PosInf) => self.lo.clone(),
            v => v,
        };
        let hi = match self.hi.min(&other.hi) {
            Extended::NegInf if !matches!(other.hi, Extended::NegInf) => self.hi.clone(),
            v => v,
        };
        Interval { lo, hi }
    }
}

fn hull(values: &[Extended]) -> Interval {
    let mut lo = values[0].clone();
    let mut hi = values[0].clone();
    for v in &values[1..] {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Interval { lo, hi }
}

/// Sound interval enclosure of `p` when each variable ranges over its
/// interval in `env`. Variables missing from `env` are unbounded.
pub fn poly_eval_bounds(p: &Polynomial, env: &HashMap<String, Interval>) -> Interval {
    let mut acc = Interval::constant(SymExpr::zero());
    for (m, c) in p.terms() {
        let mut term = Interval::constant(SymExpr::one());
        for (v, e) in m.factors() {
            let iv = env.get(v).cloned().unwrap_or_else(Interval::unbounded);
            term = term.mul(&iv.pow(*e));
        }
        acc = acc.add(&term.scale(c));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::ExpPoly;

    fn fin(p: ExpPoly) -> Extended {
        Extended::Finite(p)
    }

    #[test]
    fn identity_enclosure() {
        let x0 = ExpPoly::constant(SymExpr::symbol("x0"));
        let cn = ExpPoly::n().scale(&SymExpr::symbol("c"));
        let env = HashMap::from([(
            "x".to_string(),
            Interval::new(fin(x0.sub(&cn)), fin(x0.add(&cn))),
        )]);
        let r = poly_eval_bounds(&Polynomial::var("x"), &env);
        assert_eq!(r.lo, fin(x0.sub(&cn)));
        assert_eq!(r.hi, fin(x0.add(&cn)));
    }

    #[test]
    fn negated_square() {
        let n = ExpPoly::n();
        let env = HashMap::from([(
            "x".to_string(),
            Interval::new(fin(n.clone()), fin(n.scale(&SymExpr::from_int(2)))),
        )]);
        let p = Polynomial::var("x").pow(2).neg();
        let r = poly_eval_bounds(&p, &env);
        let n2 = n.mul(&n);
        assert_eq!(r.lo, fin(n2.scale(&SymExpr::from_int(-4))));
        assert_eq!(r.hi, fin(n2.neg()));
    }

    #[test]
    fn sign_propagation() {
        let env = HashMap::from([
            ("x".to_string(), Interval::new(Extended::NegInf, Extended::zero())),
            (
                "y".to_string(),
                Interval::new(
                    Extended::constant(SymExpr::one()),
                    Extended::constant(SymExpr::from_int(2)),
                ),
            ),
        ]);
        let p = Polynomial::var("x").mul(&Polynomial::var("y"));
        let r = poly_eval_bounds(&p, &env);
        assert_eq!(r.lo, Extended::NegInf);
        assert_eq!(r.hi, Extended::zero());
    }

    #[test]
    fn straddling_square_is_nonnegative() {
        let env = HashMap::from([(
            "x".to_string(),
            Interval::new(
                Extended::constant(SymExpr::from_int(-1)),
                Extended::constant(SymExpr::from_int(3)),
            ),
        )]);
        let r = poly_eval_bounds(&Polynomial::var("x").pow(2), &env);
        assert_eq!(r.lo, Extended::zero());
        assert_eq!(r.hi, Extended::constant(SymExpr::from_int(9)));
    }
}
