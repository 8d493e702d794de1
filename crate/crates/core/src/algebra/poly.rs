//! Sparse multivariate polynomials over an arbitrary coefficient ring.
//!
//! The same container backs both the symbol polynomials inside [`SymExpr`]
//! (rational coefficients) and program polynomials (symbolic coefficients).
//!
//! [`SymExpr`]: super::SymExpr

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Coefficient ring operations needed by [`Poly`].
pub trait Coeff: Clone + PartialEq + Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;

    fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }
}

impl Coeff for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// A power product `v1^e1 * ... * vk^ek` with every exponent positive,
/// stored sorted by name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<(String, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(name: &str) -> Self {
        Monomial(vec![(name.to_string(), 1)])
    }

    pub fn power(name: &str, exp: u32) -> Self {
        if exp == 0 {
            Self::one()
        } else {
            Monomial(vec![(name.to_string(), exp)])
        }
    }

    /// Builds a monomial from arbitrary `(name, exp)` pairs, merging repeats.
    pub fn from_factors<I, S>(factors: I) -> Self
    where
        I: IntoIterator<Item = (S, u32)>,
        S: Into<String>,
    {
        let mut map: BTreeMap<String, u32> = BTreeMap::new();
        for (name, e) in factors {
            if e > 0 {
                *map.entry(name.into()).or_insert(0) += e;
            }
        }
        Monomial(map.into_iter().collect())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn factors(&self) -> &[(String, u32)] {
        &self.0
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.0
            .iter()
            .find(|(v, _)| v == name)
            .map(|(_, e)| *e)
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn vars(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(v, _)| v.as_str())
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].0.cmp(&other.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + other.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Monomial(out)
    }

    pub fn pow(&self, k: u32) -> Monomial {
        if k == 0 {
            return Monomial::one();
        }
        Monomial(self.0.iter().map(|(v, e)| (v.clone(), e * k)).collect())
    }

    /// `self / other` if `other` divides `self`.
    pub fn divide(&self, other: &Monomial) -> Option<Monomial> {
        let mut out = Vec::new();
        let mut j = 0;
        for (v, e) in &self.0 {
            let d = if j < other.0.len() && &other.0[j].0 == v {
                j += 1;
                other.0[j - 1].1
            } else {
                0
            };
            if d > *e {
                return None;
            }
            if e - d > 0 {
                out.push((v.clone(), e - d));
            }
        }
        if j < other.0.len() {
            // `other` mentions a variable absent from `self`.
            return None;
        }
        Some(Monomial(out))
    }

    pub fn gcd(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .filter_map(|(v, e)| {
                    let d = other.degree_in(v);
                    (d > 0).then(|| (v.clone(), (*e).min(d)))
                })
                .collect(),
        )
    }

    /// Removes all powers of `name`, returning the remaining monomial and the
    /// removed exponent.
    pub fn split_off(&self, name: &str) -> (Monomial, u32) {
        let e = self.degree_in(name);
        let rest = self.0.iter().filter(|(v, _)| v != name).cloned().collect();
        (Monomial(rest), e)
    }

    /// Splits into the factors whose names satisfy `pred` and the rest.
    pub fn partition(&self, pred: impl Fn(&str) -> bool) -> (Monomial, Monomial) {
        let (a, b): (Vec<_>, Vec<_>) = self.0.iter().cloned().partition(|(v, _)| pred(v));
        (Monomial(a), Monomial(b))
    }

    /// Graded order: total degree first, then exponents variable by variable.
    pub fn cmp_graded(&self, other: &Monomial) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| {
                let (mut i, mut j) = (0, 0);
                loop {
                    match (self.0.get(i), other.0.get(j)) {
                        (None, None) => return Ordering::Equal,
                        (Some(_), None) => return Ordering::Greater,
                        (None, Some(_)) => return Ordering::Less,
                        (Some((va, ea)), Some((vb, eb))) => match va.cmp(vb) {
                            // smaller name carries more weight
                            Ordering::Less => return Ordering::Greater,
                            Ordering::Greater => return Ordering::Less,
                            Ordering::Equal => {
                                if ea != eb {
                                    return ea.cmp(eb);
                                }
                                i += 1;
                                j += 1;
                            }
                        },
                    }
                }
            })
    }
}

impl std::fmt::Display for Monomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, "*")?;
            }
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}**{e}")?;
            }
        }
        Ok(())
    }
}

/// Sparse polynomial: no zero coefficients are ever stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<C: Coeff> {
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Default for Poly<C> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<C: Coeff> Poly<C> {
    pub fn zero() -> Self {
        Poly {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        Self::constant(C::one())
    }

    pub fn constant(c: C) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(name: &str) -> Self {
        Self::term(Monomial::var(name), C::one())
    }

    pub fn term(m: Monomial, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: C) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.add(&c);
                if sum.is_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn into_terms(self) -> impl Iterator<Item = (Monomial, C)> {
        self.terms.into_iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn constant_term(&self) -> C {
        self.coeff(&Monomial::one())
    }

    pub fn vars(&self) -> BTreeSet<String> {
        self.terms
            .keys()
            .flat_map(|m| m.vars().map(str::to_string))
            .collect()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.terms.keys().any(|m| m.degree_in(name) > 0)
    }

    pub fn degree_in(&self, name: &str) -> u32 {
        self.terms.keys().map(|m| m.degree_in(name)).max().unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    /// Leading term under the graded order.
    pub fn leading(&self) -> Option<(&Monomial, &C)> {
        self.terms.iter().max_by(|a, b| a.0.cmp_graded(b.0))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.neg());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), c.neg())).collect(),
        }
    }

    pub fn scale(&self, k: &C) -> Self {
        if k.is_zero() {
            return Self::zero();
        }
        Self::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), c.mul(k))))
    }

    pub fn mul_monomial(&self, mono: &Monomial) -> Self {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.mul(mono), c.clone())).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(ma.mul(mb), ca.mul(cb));
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(&base);
            }
            k >>= 1;
            if k > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Replaces every occurrence of `name` by `value`.
    pub fn substitute(&self, name: &str, value: &Self) -> Self {
        if !self.mentions(name) {
            return self.clone();
        }
        let mut powers: Vec<Self> = vec![Self::one()];
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let (rest, e) = m.split_off(name);
            while powers.len() <= e as usize {
                let next = powers.last().expect("nonempty").mul(value);
                powers.push(next);
            }
            let piece = powers[e as usize].mul_monomial(&rest).scale(c);
            out = out.add(&piece);
        }
        out
    }

    /// Coefficient polynomial of `name^k` (with `name` removed).
    pub fn coeff_of_power(&self, name: &str, k: u32) -> Self {
        Self::from_terms(self.terms.iter().filter_map(|(m, c)| {
            let (rest, e) = m.split_off(name);
            (e == k).then(|| (rest, c.clone()))
        }))
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        Poly::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    /// Applies `f` to every term and sums the resulting polynomials.
    pub fn flat_map_terms<E>(
        &self,
        mut f: impl FnMut(&Monomial, &C) -> Result<Self, E>,
    ) -> Result<Self, E> {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            out = out.add(&f(m, c)?);
        }
        Ok(out)
    }
}

impl Poly<BigRational> {
    /// Exact quotient `self / divisor` when the division leaves no remainder.
    pub fn div_exact(&self, divisor: &Self) -> Option<Self> {
        let (lm_d, lc_d) = divisor.leading()?;
        let (lm_d, lc_d) = (lm_d.clone(), lc_d.clone());
        let mut rem = self.clone();
        let mut quot = Self::zero();
        while let Some((lm, lc)) = rem.leading() {
            let m = lm.divide(&lm_d)?;
            let c = lc / &lc_d;
            let t = Self::term(m, c);
            rem = rem.sub(&t.mul(divisor));
            quot = quot.add(&t);
        }
        Some(quot)
    }

    /// Greatest common monomial dividing every term.
    pub fn monomial_content(&self) -> Monomial {
        let mut it = self.terms.keys();
        let Some(first) = it.next() else {
            return Monomial::one();
        };
        it.fold(first.clone(), |g, m| g.gcd(m))
    }

    pub fn divide_monomial(&self, m: &Monomial) -> Self {
        Poly {
            terms: self
                .terms
                .iter()
                .map(|(k, c)| (k.divide(m).expect("monomial content divides"), c.clone()))
                .collect(),
        }
    }

    pub fn eval(&self, env: &impl Fn(&str) -> Option<BigRational>) -> Option<BigRational> {
        let mut acc = <BigRational as Zero>::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m.factors() {
                t *= pow_rational(&env(v)?, *e);
            }
            acc += t;
        }
        Some(acc)
    }
}

pub fn pow_rational(x: &BigRational, e: u32) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

pub fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

/// Parses `3`, `-0.25` or `2/3` exactly.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        return (!d.is_zero()).then(|| BigRational::new(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int_part, frac) = body.split_once('.').unwrap_or((body, ""));
    if int_part.is_empty() && frac.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("0{int_part}{frac}").parse().ok()?;
    let q = BigRational::new(digits, num_traits::pow(BigInt::from(10), frac.len()));
    Some(if neg { -q } else { q })
}

#[cfg(test)]
mod tests {
    use super::*;

    type Q = Poly<BigRational>;

    fn x() -> Q {
        Q::var("x")
    }
    fn y() -> Q {
        Q::var("y")
    }

    #[test]
    fn monomial_mul_merges_sorted() {
        let a = Monomial::from_factors([("y", 1), ("x", 2)]);
        let b = Monomial::from_factors([("z", 1), ("x", 1)]);
        assert_eq!(a.mul(&b).to_string(), "x**3*y*z");
        assert_eq!(a.mul(&b).divide(&b), Some(a.clone()));
        assert_eq!(b.divide(&a), None);
    }

    #[test]
    fn substitute_expands() {
        let p = x().mul(&x()).add(&y());
        let q = p.substitute("x", &y().add(&Q::one()));
        // (y+1)^2 + y
        let expect = y().pow(2).add(&y().scale(&int(3))).add(&Q::one());
        assert_eq!(q, expect);
    }

    #[test]
    fn exact_division() {
        let a = x().sub(&y());
        let b = x().pow(3).sub(&y().pow(3));
        let q = b.div_exact(&a).unwrap();
        assert_eq!(q, x().pow(2).add(&x().mul(&y())).add(&y().pow(2)));
        assert!(x().add(&Q::one()).div_exact(&y()).is_none());
    }

    #[test]
    fn zero_coefficients_vanish() {
        let p = x().sub(&x());
        assert!(p.is_zero());
        assert_eq!(p.len(), 0);
    }
}
