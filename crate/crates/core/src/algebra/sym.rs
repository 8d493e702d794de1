//! Exact constants over rationals and positive symbols.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::poly::{Coeff, Monomial, Poly};
use super::AlgebraError;

/// Polynomial in the symbolic constants with rational coefficients.
pub type SymPoly = Poly<BigRational>;

/// Three-valued truth used wherever a sound prover may give up.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trilean {
    #[serde(rename = "Yes")]
    True,
    #[serde(rename = "No")]
    False,
    #[serde(rename = "Maybe")]
    Unknown,
}

impl Trilean {
    pub fn is_true(self) -> bool {
        self == Trilean::True
    }

    pub fn and(self, other: Trilean) -> Trilean {
        use Trilean::*;
        match (self, other) {
            (False, _) | (_, False) => False,
            (True, True) => True,
            _ => Unknown,
        }
    }

    pub fn answer(self) -> &'static str {
        match self {
            Trilean::True => "Yes",
            Trilean::False => "No",
            Trilean::Unknown => "Maybe",
        }
    }
}

impl From<bool> for Trilean {
    fn from(b: bool) -> Self {
        if b {
            Trilean::True
        } else {
            Trilean::False
        }
    }
}

impl fmt::Display for Trilean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.answer())
    }
}

/// Sign of a value valid for every positive assignment of the symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
    Zero,
    Unknown,
}

impl Sign {
    pub fn mul(self, other: Sign) -> Sign {
        use Sign::*;
        match (self, other) {
            (Zero, _) | (_, Zero) => Zero,
            (Unknown, _) | (_, Unknown) => Unknown,
            (Positive, s) => s,
            (Negative, Positive) => Negative,
            (Negative, Negative) => Positive,
        }
    }

    pub fn neg(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
            s => s,
        }
    }

    pub fn is_nonzero(self) -> bool {
        matches!(self, Sign::Positive | Sign::Negative)
    }

    /// Nonnegative (positive or identically zero).
    pub fn is_nonneg(self) -> bool {
        matches!(self, Sign::Positive | Sign::Zero)
    }

    pub fn is_nonpos(self) -> bool {
        matches!(self, Sign::Negative | Sign::Zero)
    }
}

/// Sign of a polynomial in positive symbols by coefficient certificate:
/// all coefficients of one sign decide it, mixed signs give up.
pub fn poly_sign(p: &SymPoly) -> Sign {
    if p.is_zero() {
        return Sign::Zero;
    }
    let mut pos = false;
    let mut neg = false;
    for (_, c) in p.terms() {
        if c.is_positive() {
            pos = true;
        } else {
            neg = true;
        }
    }
    match (pos, neg) {
        (true, false) => Sign::Positive,
        (false, true) => Sign::Negative,
        _ => Sign::Unknown,
    }
}

/// A ratio of symbol polynomials, kept in a normalized form.
///
/// Denominators are always of known sign, so evaluating under any positive
/// assignment of the symbols is defined.
#[derive(Clone, Debug)]
pub struct SymExpr {
    num: SymPoly,
    den: SymPoly,
}

impl SymExpr {
    pub fn zero() -> Self {
        SymExpr {
            num: SymPoly::zero(),
            den: SymPoly::one(),
        }
    }

    pub fn one() -> Self {
        Self::from_rational(<BigRational as One>::one())
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_ratio(n: i64, d: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        SymExpr {
            num: SymPoly::constant(q),
            den: SymPoly::one(),
        }
    }

    pub fn symbol(name: &str) -> Self {
        SymExpr {
            num: SymPoly::var(name),
            den: SymPoly::one(),
        }
    }

    pub fn from_poly(p: SymPoly) -> Self {
        SymExpr {
            num: p,
            den: SymPoly::one(),
        }
    }

    pub fn numerator(&self) -> &SymPoly {
        &self.num
    }

    pub fn denominator(&self) -> &SymPoly {
        &self.den
    }

    fn normalized(num: SymPoly, den: SymPoly) -> Self {
        debug_assert!(!den.is_zero());
        if num.is_zero() {
            return Self::zero();
        }
        let g = num.monomial_content().gcd(&den.monomial_content());
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (num.divide_monomial(&g), den.divide_monomial(&g))
        };
        let lc = den.leading().map(|(_, c)| c.clone()).expect("nonzero");
        if !lc.is_one() {
            let inv = lc.recip();
            num = num.scale(&inv);
            den = den.scale(&inv);
        }
        if den.is_constant() {
            return SymExpr { num, den };
        }
        if let Some(q) = num.div_exact(&den) {
            return SymExpr {
                num: q,
                den: SymPoly::one(),
            };
        }
        if num.is_constant() {
            return SymExpr { num, den };
        }
        if let Some(q) = den.div_exact(&num) {
            // num / (num * q) = 1 / q, renormalise the leading coefficient
            return Self::normalized(SymPoly::one(), q);
        }
        SymExpr { num, den }
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.den.is_constant() && self.num == self.den
    }

    /// The rational value when no symbols occur.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.num.is_constant() && self.den.is_constant() {
            Some(self.num.constant_term() / self.den.constant_term())
        } else {
            None
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    pub fn symbols(&self) -> BTreeSet<String> {
        let mut s = self.num.vars();
        s.extend(self.den.vars());
        s
    }

    pub fn add(&self, other: &Self) -> Self {
        if self.den == other.den {
            return Self::normalized(self.num.add(&other.num), self.den.clone());
        }
        Self::normalized(
            self.num.mul(&other.den).add(&other.num.mul(&self.den)),
            self.den.mul(&other.den),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        SymExpr {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self::normalized(self.num.mul(&other.num), self.den.mul(&other.den))
    }

    pub fn scale_rational(&self, q: &BigRational) -> Self {
        Self::normalized(self.num.scale(q), self.den.clone())
    }

    /// Division, refused unless the divisor has a known nonzero sign.
    pub fn checked_div(&self, other: &Self) -> Result<Self, AlgebraError> {
        if !other.sign().is_nonzero() {
            return Err(AlgebraError::PossiblyZeroDivisor(other.to_string()));
        }
        Ok(Self::normalized(
            self.num.mul(&other.den),
            self.den.mul(&other.num),
        ))
    }

    pub fn recip(&self) -> Result<Self, AlgebraError> {
        Self::one().checked_div(self)
    }

    pub fn pow(&self, k: u32) -> Self {
        if k == 0 {
            return Self::one();
        }
        SymExpr {
            num: self.num.pow(k),
            den: self.den.pow(k),
        }
    }

    pub fn powi(&self, k: i64) -> Result<Self, AlgebraError> {
        if k >= 0 {
            Ok(self.pow(k as u32))
        } else {
            self.recip().map(|r| r.pow(k.unsigned_abs() as u32))
        }
    }

    /// Sound, incomplete sign under the positivity assumption on symbols.
    pub fn sign(&self) -> Sign {
        poly_sign(&self.num).mul(poly_sign(&self.den))
    }

    /// Is the value provably positive for all positive symbol assignments?
    pub fn sym_sign(&self) -> Trilean {
        match self.sign() {
            Sign::Positive => Trilean::True,
            Sign::Negative | Sign::Zero => Trilean::False,
            Sign::Unknown => Trilean::Unknown,
        }
    }

    pub fn abs_if_known(&self) -> Option<Self> {
        match self.sign() {
            Sign::Positive | Sign::Zero => Some(self.clone()),
            Sign::Negative => Some(self.neg()),
            Sign::Unknown => None,
        }
    }

    pub fn eval(&self, env: &HashMap<String, BigRational>) -> Option<BigRational> {
        let lookup = |v: &str| env.get(v).cloned();
        let d = self.den.eval(&lookup)?;
        if Zero::is_zero(&d) {
            return None;
        }
        Some(self.num.eval(&lookup)? / d)
    }

    pub fn eval_f64(&self, env: &HashMap<String, f64>) -> Option<f64> {
        let eval = |p: &SymPoly| -> Option<f64> {
            let mut acc = 0.0;
            for (m, c) in p.terms() {
                let mut t = c.to_f64()?;
                for (v, e) in m.factors() {
                    t *= env.get(v)?.powi(*e as i32);
                }
                acc += t;
            }
            Some(acc)
        };
        Some(eval(&self.num)? / eval(&self.den)?)
    }

    /// Substitutes symbols by other constants.
    pub fn subst(&self, name: &str, value: &SymExpr) -> Result<SymExpr, AlgebraError> {
        let lift = |p: &SymPoly| -> SymExpr {
            let mut acc = SymExpr::zero();
            for (m, c) in p.terms() {
                let (rest, e) = m.split_off(name);
                let t = SymExpr::from_poly(SymPoly::term(rest, c.clone())).mul(&value.pow(e));
                acc = acc.add(&t);
            }
            acc
        };
        lift(&self.num).checked_div(&lift(&self.den))
    }

    /// Whether printing needs parentheses when used as a factor.
    fn is_atomic(&self) -> bool {
        if !self.den.is_constant() {
            return false;
        }
        if self.num.len() != 1 {
            return false;
        }
        let (m, c) = self.num.terms().next().expect("one term");
        let c = c / self.den.constant_term();
        if m.is_one() {
            c.is_integer()
        } else {
            true
        }
    }
}

impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        if self.den == other.den {
            return self.num == other.num;
        }
        self.num.mul(&other.den) == other.num.mul(&self.den)
    }
}

impl Coeff for SymExpr {
    fn zero() -> Self {
        SymExpr::zero()
    }
    fn one() -> Self {
        SymExpr::one()
    }
    fn is_zero(&self) -> bool {
        SymExpr::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        SymExpr::add(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        SymExpr::mul(self, other)
    }
    fn neg(&self) -> Self {
        SymExpr::neg(self)
    }
}

impl From<BigRational> for SymExpr {
    fn from(q: BigRational) -> Self {
        SymExpr::from_rational(q)
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.is_integer() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Writes a symbol polynomial in the input language's syntax.
pub(crate) fn fmt_sym_poly(p: &SymPoly) -> String {
    if p.is_zero() {
        return "0".into();
    }
    let mut terms: Vec<(&Monomial, &BigRational)> = p.terms().collect();
    terms.sort_by(|a, b| b.0.cmp_graded(a.0));
    let mut out = String::new();
    for (i, (m, c)) in terms.into_iter().enumerate() {
        let neg = c.is_negative();
        let mag = c.abs();
        if i == 0 {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        if m.is_one() {
            out.push_str(&fmt_rational(&mag));
        } else if mag.is_one() {
            out.push_str(&m.to_string());
        } else {
            out.push_str(&format!("{}*{}", fmt_rational(&mag), m));
        }
    }
    out
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() {
            let d = self.den.constant_term();
            let scaled = self.num.scale(&d.recip());
            return f.write_str(&fmt_sym_poly(&scaled));
        }
        let n = fmt_sym_poly(&self.num);
        let d = fmt_sym_poly(&self.den);
        let wrap = |s: String, single: bool| if single { s } else { format!("({s})") };
        write!(
            f,
            "{}/{}",
            wrap(n, self.num.len() == 1 && !self.num.terms().next().unwrap().1.is_negative()),
            wrap(d, self.den.len() == 1)
        )
    }
}

/// Formats a constant as a factor, parenthesised unless atomic.
pub(crate) fn fmt_factor(e: &SymExpr) -> String {
    if e.is_atomic() {
        e.to_string()
    } else {
        format!("({e})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(name: &str) -> SymExpr {
        SymExpr::symbol(name)
    }
    fn q(n: i64, d: i64) -> SymExpr {
        SymExpr::from_ratio(n, d)
    }

    #[test]
    fn sign_examples() {
        let e = s("e");
        let c = s("c");
        assert_eq!(SymExpr::from_int(2).mul(&e).mul(&c).sym_sign(), Trilean::True);
        assert_eq!(q(1, 2).sub(&e).sym_sign(), Trilean::Unknown);
        assert_eq!(q(-3, 4).sym_sign(), Trilean::False);
        assert_eq!(SymExpr::zero().sym_sign(), Trilean::False);
    }

    #[test]
    fn canonical_cancellation() {
        let a = s("a").add(&q(1, 3));
        let b = s("b").mul(&s("c")).add(&SymExpr::one());
        assert!(a.sub(&a).is_zero());
        let back = a.checked_div(&b).unwrap().mul(&b);
        assert_eq!(back, a);
        assert!(back.denominator().is_constant());
    }

    #[test]
    fn division_guarded() {
        let e = s("e");
        assert!(SymExpr::one().checked_div(&q(1, 2).sub(&e)).is_err());
        assert!(SymExpr::one().checked_div(&SymExpr::zero()).is_err());
        let r = SymExpr::one().checked_div(&e.add(&SymExpr::one())).unwrap();
        assert_eq!(r.sign(), Sign::Positive);
    }

    #[test]
    fn quotient_of_differences_reduces() {
        let (a, b) = (s("a"), s("b"));
        let num = b.pow(3).sub(&a.pow(3));
        let den = b.sub(&a);
        // b - a has unknown sign; build the ratio through the normaliser directly
        let r = SymExpr::normalized(num.numerator().clone(), den.numerator().clone());
        assert!(r.denominator().is_constant());
        assert_eq!(r, a.pow(2).add(&a.mul(&b)).add(&b.pow(2)));
    }

    #[test]
    fn display_forms() {
        assert_eq!(q(1, 2).sub(&s("e")).to_string(), "-e + 1/2");
        assert_eq!(SymExpr::from_int(2).mul(&s("e")).mul(&s("c")).to_string(), "2*c*e");
        let r = SymExpr::one().checked_div(&s("l").pow(2)).unwrap();
        assert_eq!(r.to_string(), "1/l**2");
    }
}
