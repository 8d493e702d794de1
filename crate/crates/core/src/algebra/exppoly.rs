//! Exponential polynomials in the loop counter `n`.
//!
//! An [`ExpPoly`] is `sum_i c_i * n^k_i * b_i^n` plus finitely many point
//! corrections `d_j * [n == j]`. The corrections keep closed forms exact for
//! small `n` (they arise when a variable does not depend on itself) and are
//! invisible to every asymptotic query.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use super::sym::{fmt_factor, Sign, SymExpr, Trilean};
use super::AlgebraError;

#[derive(Clone, Debug, PartialEq)]
pub struct ExpTerm {
    pub coeff: SymExpr,
    pub degree: u32,
    /// Never zero; its sign is always known.
    pub base: SymExpr,
}

#[derive(Clone, Debug, Default)]
pub struct ExpPoly {
    terms: Vec<ExpTerm>,
    deltas: BTreeMap<u32, SymExpr>,
}

// terms are merged by (degree, base), so equality is a set comparison
impl PartialEq for ExpPoly {
    fn eq(&self, other: &Self) -> bool {
        self.deltas == other.deltas
            && self.terms.len() == other.terms.len()
            && self.terms.iter().all(|t| other.terms.contains(t))
    }
}

fn binom(n: u32, k: u32) -> BigRational {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(acc)
}

impl ExpPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: SymExpr) -> Self {
        Self::term(c, 0, SymExpr::one())
    }

    /// `c * n^k * base^n`; a zero base collapses to point corrections.
    pub fn term(coeff: SymExpr, degree: u32, base: SymExpr) -> Self {
        let mut p = Self::zero();
        p.push_term(coeff, degree, base);
        p
    }

    pub fn n() -> Self {
        Self::term(SymExpr::one(), 1, SymExpr::one())
    }

    pub fn delta(at: u32, coeff: SymExpr) -> Self {
        let mut p = Self::zero();
        p.push_delta(at, coeff);
        p
    }

    fn push_term(&mut self, coeff: SymExpr, degree: u32, base: SymExpr) {
        if coeff.is_zero() {
            return;
        }
        if base.is_zero() {
            // n^k * 0^n is 1 at n = 0 only when k = 0.
            if degree == 0 {
                self.push_delta(0, coeff);
            }
            return;
        }
        if let Some(i) = self
            .terms
            .iter()
            .position(|t| t.degree == degree && t.base == base)
        {
            let sum = self.terms[i].coeff.add(&coeff);
            if sum.is_zero() {
                self.terms.remove(i);
            } else {
                self.terms[i].coeff = sum;
            }
        } else {
            self.terms.push(ExpTerm {
                coeff,
                degree,
                base,
            });
        }
    }

    fn push_delta(&mut self, at: u32, coeff: SymExpr) {
        if coeff.is_zero() {
            return;
        }
        let entry = self.deltas.entry(at).or_insert_with(SymExpr::zero);
        *entry = entry.add(&coeff);
        if entry.is_zero() {
            self.deltas.remove(&at);
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    pub fn deltas(&self) -> &BTreeMap<u32, SymExpr> {
        &self.deltas
    }

    /// Identically zero, including the point corrections.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.deltas.is_empty()
    }

    /// Zero for all sufficiently large `n`.
    pub fn is_eventually_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The constant value if `self` is `c * 1^n` with no other parts.
    pub fn as_constant(&self) -> Option<SymExpr> {
        if !self.deltas.is_empty() {
            return None;
        }
        match self.terms.as_slice() {
            [] => Some(SymExpr::zero()),
            [t] if t.degree == 0 && t.base.is_one() => Some(t.coeff.clone()),
            _ => None,
        }
    }

    pub fn without_deltas(&self) -> ExpPoly {
        ExpPoly {
            terms: self.terms.clone(),
            deltas: BTreeMap::new(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for t in &other.terms {
            out.push_term(t.coeff.clone(), t.degree, t.base.clone());
        }
        for (j, c) in &other.deltas {
            out.push_delta(*j, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        self.scale(&SymExpr::from_int(-1))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, k: &SymExpr) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            out.push_term(t.coeff.mul(k), t.degree, t.base.clone());
        }
        for (j, c) in &self.deltas {
            out.push_delta(*j, c.mul(k));
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for a in &self.terms {
            for b in &other.terms {
                out.push_term(a.coeff.mul(&b.coeff), a.degree + b.degree, a.base.mul(&b.base));
            }
        }
        // Point corrections multiply pointwise with the full other factor.
        for (j, c) in &self.deltas {
            out.push_delta(*j, c.mul(&other.eval_at(*j)));
        }
        for (j, c) in &other.deltas {
            out.push_delta(*j, c.mul(&self.eval_terms_at(*j)));
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::constant(SymExpr::one());
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    fn eval_terms_at(&self, n: u32) -> SymExpr {
        let mut acc = SymExpr::zero();
        for t in &self.terms {
            let nk = if t.degree == 0 {
                BigRational::one()
            } else {
                num_traits::pow(BigRational::from_integer(BigInt::from(n)), t.degree as usize)
            };
            acc = acc.add(&t.coeff.mul(&t.base.pow(n)).scale_rational(&nk));
        }
        acc
    }

    /// Exact value at a concrete iteration count.
    pub fn eval_at(&self, n: u32) -> SymExpr {
        let mut v = self.eval_terms_at(n);
        if let Some(c) = self.deltas.get(&n) {
            v = v.add(c);
        }
        v
    }

    pub fn eval_f64(&self, n: f64, env: &HashMap<String, f64>) -> Option<f64> {
        let mut acc = 0.0;
        for t in &self.terms {
            let c = t.coeff.eval_f64(env)?;
            let b = t.base.eval_f64(env)?;
            acc += c * n.powi(t.degree as i32) * b.powf(n);
        }
        if n >= 0.0 && n.fract() == 0.0 {
            if let Some(c) = self.deltas.get(&(n as u32)) {
                acc += c.eval_f64(env)?;
            }
        }
        Some(acc)
    }

    pub fn eval_rational(&self, n: u32, env: &HashMap<String, BigRational>) -> Option<BigRational> {
        self.eval_at(n).eval(env)
    }

    /// `n -> f(n + 1)`.
    pub fn shift_forward(&self) -> Self {
        let mut out = Self::zero();
        for t in &self.terms {
            // c (n+1)^k b^(n+1) = c b sum_i C(k,i) n^i b^n
            let cb = t.coeff.mul(&t.base);
            for i in 0..=t.degree {
                out.push_term(cb.scale_rational(&binom(t.degree, i)), i, t.base.clone());
            }
        }
        for (j, c) in &self.deltas {
            if *j > 0 {
                out.push_delta(j - 1, c.clone());
            }
        }
        out
    }

    /// `n -> f(n - 1)` for `n >= 1`; the value at `n = 0` is unspecified.
    fn shift_back(&self) -> Result<Self, AlgebraError> {
        let mut out = Self::zero();
        for t in &self.terms {
            let cb = t.coeff.checked_div(&t.base)?;
            for i in 0..=t.degree {
                let sign = if (t.degree - i) % 2 == 0 { 1 } else { -1 };
                let k = binom(t.degree, i) * BigRational::from_integer(BigInt::from(sign));
                out.push_term(cb.scale_rational(&k), i, t.base.clone());
            }
        }
        for (j, c) in &self.deltas {
            out.push_delta(j + 1, c.clone());
        }
        Ok(out)
    }

    /// Sign of the value for all sufficiently large `n`.
    pub fn eventual_sign(&self) -> Sign {
        match leading(&self.terms) {
            Leading::None => Sign::Zero,
            Leading::Unique(t) => match t.base.sign() {
                Sign::Positive => t.coeff.sign(),
                _ => Sign::Unknown,
            },
            Leading::Tied | Leading::Unresolved => Sign::Unknown,
        }
    }

    /// The dominating term, when the growth order singles one out.
    pub fn leading_term(&self) -> Option<&ExpTerm> {
        match leading(&self.terms) {
            Leading::Unique(t) => Some(t),
            _ => None,
        }
    }

    /// Whether `self` is eventually bounded by a constant in absolute value.
    pub fn is_bounded(&self) -> Trilean {
        dominates(&ExpPoly::constant(SymExpr::one()), self)
    }
}

/// Compares `(|b|, k)` growth classes of two terms.
fn cmp_growth(a: &ExpTerm, b: &ExpTerm) -> Option<Ordering> {
    let abs_a = a.base.abs_if_known()?;
    let abs_b = b.base.abs_if_known()?;
    let base_order = match abs_a.sub(&abs_b).sign() {
        Sign::Positive => Ordering::Greater,
        Sign::Negative => Ordering::Less,
        Sign::Zero => Ordering::Equal,
        Sign::Unknown => return None,
    };
    Some(base_order.then(a.degree.cmp(&b.degree)))
}

enum Leading<'a> {
    None,
    Unique(&'a ExpTerm),
    /// Several terms share the top growth class (bases b and -b).
    Tied,
    Unresolved,
}

fn leading(terms: &[ExpTerm]) -> Leading<'_> {
    let Some(first) = terms.first() else {
        return Leading::None;
    };
    let mut best = first;
    for t in &terms[1..] {
        match cmp_growth(t, best) {
            Some(Ordering::Greater) => best = t,
            Some(_) => {}
            None => return Leading::Unresolved,
        }
    }
    let mut tied = false;
    for t in terms {
        if std::ptr::eq(t, best) {
            continue;
        }
        match cmp_growth(best, t) {
            Some(Ordering::Greater) => {}
            Some(Ordering::Equal) => tied = true,
            Some(Ordering::Less) | None => return Leading::Unresolved,
        }
    }
    if tied {
        Leading::Tied
    } else {
        Leading::Unique(best)
    }
}

/// Growth class of the largest terms, if all comparisons resolve.
fn top_class(p: &ExpPoly) -> Result<Option<&ExpTerm>, ()> {
    match leading(&p.terms) {
        Leading::None => Ok(None),
        Leading::Unique(t) => Ok(Some(t)),
        Leading::Tied => {
            // All tied terms share the class; any representative works.
            let mut best = &p.terms[0];
            for t in &p.terms[1..] {
                if cmp_growth(t, best) == Some(Ordering::Greater) {
                    best = t;
                }
            }
            Ok(Some(best))
        }
        Leading::Unresolved => Err(()),
    }
}

/// Does `f` grow at least as fast as `g` (is `|g| / |f|` eventually bounded)?
pub fn dominates(f: &ExpPoly, g: &ExpPoly) -> Trilean {
    let (Ok(tf), Ok(tg)) = (top_class(f), top_class(g)) else {
        return Trilean::Unknown;
    };
    match (tf, tg) {
        (_, None) => Trilean::True,
        (None, Some(_)) => Trilean::False,
        (Some(a), Some(b)) => match cmp_growth(a, b) {
            Some(Ordering::Less) => Trilean::False,
            Some(_) => Trilean::True,
            None => Trilean::Unknown,
        },
    }
}

/// Free-standing form of [`ExpPoly::eventual_sign`].
pub fn eventual_sign(f: &ExpPoly) -> Sign {
    f.eventual_sign()
}

/// Solves `f(n+1) = a f(n) + g(n)` with `f(0) = init`.
///
/// Fails when the solution would need to divide by an expression whose
/// zeroness is not decided (a possible resonance between `a` and a base of
/// `g`), or when `a` has unknown sign.
pub fn solve_first_order(a: &SymExpr, g: &ExpPoly, init: &SymExpr) -> Result<ExpPoly, AlgebraError> {
    if a.is_zero() {
        let shifted = g.shift_back()?;
        let fix = init.sub(&shifted.eval_at(0));
        return Ok(shifted.add(&ExpPoly::delta(0, fix)));
    }
    if !a.sign().is_nonzero() {
        return Err(AlgebraError::Resonance(format!("sign of {a} undecided")));
    }
    let mut particular = ExpPoly::zero();
    for t in &g.terms {
        particular = particular.add(&particular_for_term(a, t)?);
    }
    for (j, c) in &g.deltas {
        // c a^(n-j-1) for n > j
        let lead = c.mul(&a.powi(-(*j as i64) - 1)?);
        particular = particular.add(&ExpPoly::term(lead, 0, a.clone()));
        for i in 0..=*j {
            let v = c.mul(&a.powi(i as i64 - *j as i64 - 1)?);
            particular = particular.add(&ExpPoly::delta(i, v.neg()));
        }
    }
    let homogeneous = init.sub(&particular.eval_at(0));
    Ok(particular.add(&ExpPoly::term(homogeneous, 0, a.clone())))
}

fn particular_for_term(a: &SymExpr, t: &ExpTerm) -> Result<ExpPoly, AlgebraError> {
    let rho = &t.base;
    let k = t.degree as usize;
    if rho == a {
        // rho (P(n+1) - P(n)) = c n^k with deg P = k + 1, P(0) = 0
        let mut p = vec![SymExpr::zero(); k + 2];
        for j in (0..=k).rev() {
            let mut rhs = if j == k { t.coeff.clone() } else { SymExpr::zero() };
            for (i, pi) in p.iter().enumerate().skip(j + 2) {
                let term = rho.mul(pi).scale_rational(&binom(i as u32, j as u32));
                rhs = rhs.sub(&term);
            }
            let denom = rho.scale_rational(&binom(j as u32 + 1, j as u32));
            p[j + 1] = rhs.checked_div(&denom)?;
        }
        let mut out = ExpPoly::zero();
        for (i, c) in p.into_iter().enumerate() {
            out.push_term(c, i as u32, rho.clone());
        }
        return Ok(out);
    }
    let gap = rho.sub(a);
    if !gap.sign().is_nonzero() {
        return Err(AlgebraError::Resonance(format!(
            "cannot decide whether {rho} equals {a}"
        )));
    }
    // (rho - a) p_j + rho sum_{i>j} C(i,j) p_i = [j == k] c
    let mut p = vec![SymExpr::zero(); k + 1];
    for j in (0..=k).rev() {
        let mut rhs = if j == k { t.coeff.clone() } else { SymExpr::zero() };
        for (i, pi) in p.iter().enumerate().skip(j + 1) {
            rhs = rhs.sub(&rho.mul(pi).scale_rational(&binom(i as u32, j as u32)));
        }
        p[j] = rhs.checked_div(&gap)?;
    }
    let mut out = ExpPoly::zero();
    for (i, c) in p.into_iter().enumerate() {
        out.push_term(c, i as u32, rho.clone());
    }
    Ok(out)
}

impl fmt::Display for ExpPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut terms: Vec<&ExpTerm> = self.terms.iter().collect();
        terms.sort_by(|a, b| cmp_growth(b, a).unwrap_or(Ordering::Equal));
        let mut parts: Vec<String> = Vec::new();
        for t in terms {
            let mut factors: Vec<String> = Vec::new();
            match t.degree {
                0 => {}
                1 => factors.push("n".into()),
                k => factors.push(format!("n**{k}")),
            }
            if !t.base.is_one() {
                factors.push(format!("{}**n", fmt_factor(&t.base)));
            }
            let coeff = if factors.is_empty() {
                t.coeff.to_string()
            } else if t.coeff.is_one() {
                factors.join("*")
            } else if t.coeff == SymExpr::from_int(-1) {
                format!("-{}", factors.join("*"))
            } else {
                format!("{}*{}", fmt_factor(&t.coeff), factors.join("*"))
            };
            parts.push(coeff);
        }
        for (j, c) in &self.deltas {
            parts.push(format!("{}*[n=={j}]", fmt_factor(c)));
        }
        let mut out = String::new();
        for (i, p) in parts.into_iter().enumerate() {
            if i == 0 {
                out.push_str(&p);
            } else if let Some(rest) = p.strip_prefix('-') {
                out.push_str(" - ");
                out.push_str(rest);
            } else {
                out.push_str(" + ");
                out.push_str(&p);
            }
        }
        f.write_str(&out)
    }
}

/// An exponential polynomial or one of the two infinities.
#[derive(Clone, Debug, PartialEq)]
pub enum Extended {
    NegInf,
    Finite(ExpPoly),
    PosInf,
}

impl Extended {
    pub fn constant(c: SymExpr) -> Self {
        Extended::Finite(ExpPoly::constant(c))
    }

    pub fn zero() -> Self {
        Extended::Finite(ExpPoly::zero())
    }

    pub fn finite(&self) -> Option<&ExpPoly> {
        match self {
            Extended::Finite(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn eventual_sign(&self) -> Sign {
        match self {
            Extended::NegInf => Sign::Negative,
            Extended::PosInf => Sign::Positive,
            Extended::Finite(p) => p.eventual_sign(),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Extended::NegInf => Extended::PosInf,
            Extended::PosInf => Extended::NegInf,
            Extended::Finite(p) => Extended::Finite(p.neg()),
        }
    }

    /// Sum; `None` for the undefined `+inf + -inf`.
    pub fn add(&self, other: &Self) -> Option<Self> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a.add(b))),
            (NegInf, PosInf) | (PosInf, NegInf) => None,
            (NegInf, _) | (_, NegInf) => Some(NegInf),
            (PosInf, _) | (_, PosInf) => Some(PosInf),
        }
    }

    /// Product; `None` when the sign of an infinite product is undecided.
    pub fn mul(&self, other: &Self) -> Option<Self> {
        use Extended::*;
        match (self, other) {
            (Finite(a), Finite(b)) => Some(Finite(a.mul(b))),
            (Finite(a), inf) | (inf, Finite(a)) => match a.eventual_sign() {
                Sign::Positive => Some(inf.clone()),
                Sign::Negative => Some(inf.neg()),
                Sign::Zero => Some(Extended::zero()),
                Sign::Unknown => None,
            },
            (PosInf, PosInf) | (NegInf, NegInf) => Some(PosInf),
            _ => Some(NegInf),
        }
    }

    pub fn scale(&self, k: &SymExpr) -> Option<Self> {
        self.mul(&Extended::constant(k.clone()))
    }

    pub fn pow(&self, k: u32) -> Self {
        match self {
            Extended::Finite(p) => Extended::Finite(p.pow(k)),
            _ if k == 0 => Extended::constant(SymExpr::one()),
            Extended::PosInf => Extended::PosInf,
            Extended::NegInf if k % 2 == 0 => Extended::PosInf,
            Extended::NegInf => Extended::NegInf,
        }
    }

    /// Eventual maximum; `+inf` when the comparison is undecided.
    pub fn max(&self, other: &Self) -> Self {
        use Extended::*;
        match (self, other) {
            (PosInf, _) | (_, PosInf) => PosInf,
            (NegInf, x) | (x, NegInf) => x.clone(),
            (Finite(a), Finite(b)) => match a.sub(b).eventual_sign() {
                Sign::Positive | Sign::Zero => self.clone(),
                Sign::Negative => other.clone(),
                Sign::Unknown => PosInf,
            },
        }
    }

    /// Eventual minimum; `-inf` when the comparison is undecided.
    pub fn min(&self, other: &Self) -> Self {
        self.neg().max(&other.neg()).neg()
    }

    pub fn eval_f64(&self, n: f64, env: &HashMap<String, f64>) -> Option<f64> {
        match self {
            Extended::NegInf => Some(f64::NEG_INFINITY),
            Extended::PosInf => Some(f64::INFINITY),
            Extended::Finite(p) => p.eval_f64(n, env),
        }
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::NegInf => f.write_str("-oo"),
            Extended::PosInf => f.write_str("oo"),
            Extended::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl From<ExpPoly> for Extended {
    fn from(p: ExpPoly) -> Self {
        Extended::Finite(p)
    }
}
