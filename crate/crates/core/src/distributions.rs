//! Raw moments and supports of the supported distributions.
//!
//! Parameter conventions:
//!
//! | name           | parameters                       |
//! |----------------|----------------------------------|
//! | uniform        | `a, b` (endpoints)               |
//! | gauss          | `mu, var` (variance, not stddev) |
//! | laplace        | `mu, b` (scale)                  |
//! | bernoulli      | `p`                              |
//! | binomial       | `n, p`                           |
//! | geometric      | `p`, failures before the first success |
//! | hypergeometric | `N, K, n` (population, successes, draws) |
//! | exponential    | `lambda` (rate)                  |
//! | beta           | `alpha, beta`                    |
//! | chi-squared    | `k`                              |
//! | rayleigh       | `sigma`                          |

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{Sign, SymExpr};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistKind {
    Uniform,
    Gauss,
    Laplace,
    Bernoulli,
    Binomial,
    Geometric,
    Hypergeometric,
    Exponential,
    Beta,
    ChiSquared,
    Rayleigh,
}

impl DistKind {
    pub const ALL: [DistKind; 11] = [
        DistKind::Uniform,
        DistKind::Gauss,
        DistKind::Laplace,
        DistKind::Bernoulli,
        DistKind::Binomial,
        DistKind::Geometric,
        DistKind::Hypergeometric,
        DistKind::Exponential,
        DistKind::Beta,
        DistKind::ChiSquared,
        DistKind::Rayleigh,
    ];

    pub fn from_name(name: &str) -> Option<DistKind> {
        Some(match name {
            "uniform" => DistKind::Uniform,
            "gauss" => DistKind::Gauss,
            "laplace" => DistKind::Laplace,
            "bernoulli" => DistKind::Bernoulli,
            "binomial" => DistKind::Binomial,
            "geometric" => DistKind::Geometric,
            "hypergeometric" => DistKind::Hypergeometric,
            "exponential" => DistKind::Exponential,
            "beta" => DistKind::Beta,
            "chi-squared" | "chi_squared" => DistKind::ChiSquared,
            "rayleigh" => DistKind::Rayleigh,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            DistKind::Uniform => "uniform",
            DistKind::Gauss => "gauss",
            DistKind::Laplace => "laplace",
            DistKind::Bernoulli => "bernoulli",
            DistKind::Binomial => "binomial",
            DistKind::Geometric => "geometric",
            DistKind::Hypergeometric => "hypergeometric",
            DistKind::Exponential => "exponential",
            DistKind::Beta => "beta",
            DistKind::ChiSquared => "chi-squared",
            DistKind::Rayleigh => "rayleigh",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            DistKind::Bernoulli
            | DistKind::Geometric
            | DistKind::Exponential
            | DistKind::ChiSquared
            | DistKind::Rayleigh => 1,
            DistKind::Hypergeometric => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for DistKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DistSpec {
    pub kind: DistKind,
    pub params: Vec<SymExpr>,
}

/// Support endpoint: a constant or an infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum Endpoint {
    NegInf,
    At(SymExpr),
    PosInf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SupportInterval {
    pub lo: Endpoint,
    pub hi: Endpoint,
}

/// Default cap on the moment order any analysis will request.
pub const DEFAULT_MAX_MOMENT: u32 = 8;

fn q(n: i64) -> SymExpr {
    SymExpr::from_int(n)
}

fn binom(n: u32, k: u32) -> BigRational {
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    BigRational::from_integer(acc)
}

fn factorial(n: u32) -> BigRational {
    BigRational::from_integer((1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i)))
}

/// Stirling numbers of the second kind, `S(k, j)`.
fn stirling2(k: u32, j: u32) -> BigRational {
    let mut row = vec![BigInt::zero(); j as usize + 1];
    row[0] = BigInt::one();
    for n in 1..=k {
        for m in (1..=j as usize).rev() {
            row[m] = &row[m - 1] + BigInt::from(m) * &row[m];
        }
        row[0] = BigInt::zero();
        let _ = n;
    }
    BigRational::from_integer(row[j as usize].clone())
}

fn falling(x: &SymExpr, j: u32) -> SymExpr {
    (0..j).fold(SymExpr::one(), |acc, i| acc.mul(&x.sub(&q(i as i64))))
}

impl DistSpec {
    pub fn new(kind: DistKind, params: Vec<SymExpr>) -> Self {
        DistSpec { kind, params }
    }

    fn p(&self, i: usize) -> &SymExpr {
        &self.params[i]
    }

    /// Exact `E[X^k]`, or `None` when no exact closed form is available
    /// (order above `max_order`, irrational values, or a parameter-dependent
    /// denominator of undecided sign).
    pub fn raw_moment(&self, k: u32, max_order: u32) -> Option<SymExpr> {
        if k == 0 {
            return Some(SymExpr::one());
        }
        if k > max_order {
            return None;
        }
        match self.kind {
            DistKind::Uniform => {
                // (b^{k+1} - a^{k+1}) / ((k+1)(b-a)) = sum a^i b^{k-i} / (k+1)
                let (a, b) = (self.p(0), self.p(1));
                let mut acc = SymExpr::zero();
                for i in 0..=k {
                    acc = acc.add(&a.pow(i).mul(&b.pow(k - i)));
                }
                Some(acc.scale_rational(&BigRational::new(1.into(), (k + 1).into())))
            }
            DistKind::Gauss => {
                // central moments var^{j/2} (j-1)!! for even j
                let (mu, var) = (self.p(0), self.p(1));
                let mut acc = SymExpr::zero();
                for j in (0..=k).step_by(2) {
                    let dfact = double_factorial_odd(j);
                    let t = mu
                        .pow(k - j)
                        .mul(&var.pow(j / 2))
                        .scale_rational(&(binom(k, j) * dfact));
                    acc = acc.add(&t);
                }
                Some(acc)
            }
            DistKind::Laplace => {
                let (mu, b) = (self.p(0), self.p(1));
                let mut acc = SymExpr::zero();
                for j in (0..=k).step_by(2) {
                    let t = mu
                        .pow(k - j)
                        .mul(&b.pow(j))
                        .scale_rational(&(binom(k, j) * factorial(j)));
                    acc = acc.add(&t);
                }
                Some(acc)
            }
            DistKind::Bernoulli => Some(self.p(0).clone()),
            DistKind::Binomial => {
                let (n, p) = (self.p(0), self.p(1));
                let mut acc = SymExpr::zero();
                for j in 0..=k {
                    let t = falling(n, j).mul(&p.pow(j)).scale_rational(&stirling2(k, j));
                    acc = acc.add(&t);
                }
                Some(acc)
            }
            DistKind::Geometric => {
                // factorial moments j! ((1-p)/p)^j
                let p = self.p(0);
                let ratio = SymExpr::one().sub(p).checked_div(p).ok()?;
                let mut acc = SymExpr::zero();
                for j in 0..=k {
                    let t = ratio.pow(j).scale_rational(&(stirling2(k, j) * factorial(j)));
                    acc = acc.add(&t);
                }
                Some(acc)
            }
            DistKind::Hypergeometric => {
                // factorial moments n^(j) K^(j) / N^(j)
                let (big_n, big_k, n) = (self.p(0), self.p(1), self.p(2));
                let mut acc = SymExpr::zero();
                for j in 0..=k {
                    let s = stirling2(k, j);
                    if s.is_zero() {
                        continue;
                    }
                    let num = falling(n, j).mul(&falling(big_k, j));
                    let t = num.checked_div(&falling(big_n, j)).ok()?;
                    acc = acc.add(&t.scale_rational(&s));
                }
                Some(acc)
            }
            DistKind::Exponential => {
                let l = self.p(0);
                SymExpr::from_rational(factorial(k)).checked_div(&l.pow(k)).ok()
            }
            DistKind::Beta => {
                let (a, b) = (self.p(0), self.p(1));
                let mut acc = SymExpr::one();
                for r in 0..k {
                    let rr = q(r as i64);
                    let f = a.add(&rr).checked_div(&a.add(b).add(&rr)).ok()?;
                    acc = acc.mul(&f);
                }
                Some(acc)
            }
            DistKind::ChiSquared => {
                let dof = self.p(0);
                Some((0..k).fold(SymExpr::one(), |acc, i| acc.mul(&dof.add(&q(2 * i as i64)))))
            }
            DistKind::Rayleigh => {
                // sigma^k 2^{k/2} Gamma(1 + k/2): odd orders involve sqrt(pi)
                if k % 2 == 1 {
                    return None;
                }
                let m = k / 2;
                let c = factorial(m) * num_traits::pow(BigRational::from_integer(2.into()), m as usize);
                Some(self.p(0).pow(k).scale_rational(&c))
            }
        }
    }

    pub fn support(&self) -> SupportInterval {
        let at = |e: SymExpr| Endpoint::At(e);
        let (lo, hi) = match self.kind {
            DistKind::Uniform => (at(self.p(0).clone()), at(self.p(1).clone())),
            DistKind::Bernoulli | DistKind::Beta => (at(q(0)), at(q(1))),
            DistKind::Binomial => (at(q(0)), at(self.p(0).clone())),
            DistKind::Gauss | DistKind::Laplace => (Endpoint::NegInf, Endpoint::PosInf),
            DistKind::Exponential
            | DistKind::ChiSquared
            | DistKind::Rayleigh
            | DistKind::Geometric => (at(q(0)), Endpoint::PosInf),
            DistKind::Hypergeometric => {
                let (big_n, big_k, n) = (self.p(0), self.p(1), self.p(2));
                let lower = n.add(big_k).sub(big_n);
                let lo = match lower.sign() {
                    Sign::Positive => lower,
                    Sign::Negative | Sign::Zero => q(0),
                    // max(0, .) is not a SymExpr; fall back to the
                    // always-valid lower end
                    Sign::Unknown => q(0),
                };
                let hi = match n.sub(big_k).sign() {
                    Sign::Negative | Sign::Zero => n.clone(),
                    Sign::Positive => big_k.clone(),
                    Sign::Unknown => n.clone(),
                };
                (at(lo), at(hi))
            }
        };
        SupportInterval { lo, hi }
    }

    /// Sanity checks on concrete parameters; symbolic ones pass.
    pub fn check_params(&self) -> Result<(), String> {
        let vals: Vec<Option<BigRational>> = self.params.iter().map(SymExpr::as_rational).collect();
        let zero = BigRational::zero();
        let one = BigRational::one();
        let pos = |i: usize, what: &str| -> Result<(), String> {
            match &vals[i] {
                Some(v) if !v.is_positive() => Err(format!("{what} must be positive, got {v}")),
                _ => Ok(()),
            }
        };
        let prob = |i: usize| -> Result<(), String> {
            match &vals[i] {
                Some(v) if v < &zero || v > &one => Err(format!("probability {v} outside [0, 1]")),
                _ => Ok(()),
            }
        };
        let nat = |i: usize, what: &str| -> Result<(), String> {
            match &vals[i] {
                Some(v) if !v.is_integer() || v.is_negative() => {
                    Err(format!("{what} must be a nonnegative integer, got {v}"))
                }
                _ => Ok(()),
            }
        };
        match self.kind {
            DistKind::Uniform => {
                if let (Some(a), Some(b)) = (&vals[0], &vals[1]) {
                    if a > b {
                        return Err(format!("uniform endpoints out of order: {a} > {b}"));
                    }
                }
                Ok(())
            }
            DistKind::Gauss => pos(1, "variance"),
            DistKind::Laplace => pos(1, "scale"),
            DistKind::Bernoulli => prob(0),
            DistKind::Binomial => {
                nat(0, "trial count")?;
                prob(1)
            }
            DistKind::Geometric => {
                prob(0)?;
                pos(0, "success probability")
            }
            DistKind::Hypergeometric => {
                nat(0, "population")?;
                nat(1, "success count")?;
                nat(2, "draw count")?;
                if let (Some(n), Some(k), Some(d)) = (&vals[0], &vals[1], &vals[2]) {
                    if k > n || d > n {
                        return Err("hypergeometric counts exceed the population".into());
                    }
                }
                Ok(())
            }
            DistKind::Exponential => pos(0, "rate"),
            DistKind::Beta => {
                pos(0, "alpha")?;
                pos(1, "beta")
            }
            DistKind::ChiSquared => pos(0, "degrees of freedom"),
            DistKind::Rayleigh => pos(0, "scale"),
        }
    }
}

fn double_factorial_odd(j: u32) -> BigRational {
    // (j-1)!! for even j
    let mut acc = BigInt::one();
    let mut i = j as i64 - 1;
    while i > 1 {
        acc *= BigInt::from(i);
        i -= 2;
    }
    BigRational::from_integer(acc)
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RV({}", self.kind)?;
        for p in &self.params {
            write!(f, ", {p}")?;
        }
        write!(f, ")")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(kind: DistKind, params: &[(i64, i64)]) -> DistSpec {
        DistSpec::new(
            kind,
            params.iter().map(|&(n, m)| SymExpr::from_ratio(n, m)).collect(),
        )
    }

    fn m(spec: &DistSpec, k: u32) -> SymExpr {
        spec.raw_moment(k, DEFAULT_MAX_MOMENT).unwrap()
    }

    #[test]
    fn zeroth_moment_is_one() {
        for kind in DistKind::ALL {
            let params = vec![SymExpr::symbol("a"); kind.arity()];
            let spec = DistSpec::new(kind, params);
            assert_eq!(spec.raw_moment(0, 8), Some(SymExpr::one()), "{kind}");
        }
    }

    #[test]
    fn uniform_second_moment() {
        assert_eq!(m(&d(DistKind::Uniform, &[(1, 1), (2, 1)]), 2), SymExpr::from_ratio(7, 3));
    }

    #[test]
    fn gauss_fourth_moment() {
        assert_eq!(m(&d(DistKind::Gauss, &[(0, 1), (1, 1)]), 4), SymExpr::from_int(3));
        // quadrature cross-check of E[X^4] for N(1/2, 2)
        let spec = d(DistKind::Gauss, &[(1, 2), (2, 1)]);
        let exact = m(&spec, 4).as_rational().unwrap();
        let (mu, var) = (0.5f64, 2.0f64);
        let h = 1e-3;
        let mut acc = 0.0;
        let mut x = -40.0;
        while x < 40.0 {
            let f = |x: f64| x.powi(4) * (-(x - mu).powi(2) / (2.0 * var)).exp();
            acc += (f(x) + 4.0 * f(x + h / 2.0) + f(x + h)) * h / 6.0;
            x += h;
        }
        acc /= (2.0 * std::f64::consts::PI * var).sqrt();
        let exact: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
        assert!((acc - exact).abs() < 1e-6 * exact, "{acc} vs {exact}");
    }

    #[test]
    fn bernoulli_moments_collapse() {
        let p = DistSpec::new(DistKind::Bernoulli, vec![SymExpr::symbol("p")]);
        assert_eq!(m(&p, 7), SymExpr::symbol("p"));
    }

    #[test]
    fn closed_forms_small_cases() {
        // Binomial(n, p): E[X^2] = np(1-p) + (np)^2
        let b = DistSpec::new(DistKind::Binomial, vec![SymExpr::symbol("n"), SymExpr::symbol("p")]);
        let (n, p) = (SymExpr::symbol("n"), SymExpr::symbol("p"));
        let np = n.mul(&p);
        let expect = np.mul(&SymExpr::one().sub(&p)).add(&np.pow(2));
        assert_eq!(m(&b, 2), expect);
        // Geometric(1/2) failures: mean 1, E[X^2] = 3
        let g = d(DistKind::Geometric, &[(1, 2)]);
        assert_eq!(m(&g, 1), SymExpr::one());
        assert_eq!(m(&g, 2), SymExpr::from_int(3));
        // Exponential(2): E[X^3] = 6/8
        assert_eq!(m(&d(DistKind::Exponential, &[(2, 1)]), 3), SymExpr::from_ratio(3, 4));
        // Chi-squared(3): E[X^2] = 3 * 5
        assert_eq!(m(&d(DistKind::ChiSquared, &[(3, 1)]), 2), SymExpr::from_int(15));
        // Beta(2, 3): mean 2/5
        assert_eq!(m(&d(DistKind::Beta, &[(2, 1), (3, 1)]), 1), SymExpr::from_ratio(2, 5));
        // Hypergeometric(10, 4, 3): mean 6/5
        assert_eq!(
            m(&d(DistKind::Hypergeometric, &[(10, 1), (4, 1), (3, 1)]), 1),
            SymExpr::from_ratio(6, 5)
        );
        // Laplace(0, b): E[X^2] = 2 b^2
        assert_eq!(m(&d(DistKind::Laplace, &[(0, 1), (3, 1)]), 2), SymExpr::from_int(18));
        // Rayleigh(1): E[X^2] = 2, odd orders unavailable
        let r = d(DistKind::Rayleigh, &[(1, 1)]);
        assert_eq!(m(&r, 2), SymExpr::from_int(2));
        assert_eq!(r.raw_moment(1, 8), None);
    }

    #[test]
    fn order_cap() {
        let u = d(DistKind::Uniform, &[(0, 1), (1, 1)]);
        assert!(u.raw_moment(9, DEFAULT_MAX_MOMENT).is_none());
        assert!(u.raw_moment(9, 10).is_some());
    }

    #[test]
    fn supports() {
        let u = d(DistKind::Uniform, &[(1, 1), (2, 1)]);
        assert_eq!(
            u.support(),
            SupportInterval {
                lo: Endpoint::At(SymExpr::one()),
                hi: Endpoint::At(SymExpr::from_int(2))
            }
        );
        let g = d(DistKind::Gauss, &[(0, 1), (1, 1)]);
        assert_eq!(g.support().lo, Endpoint::NegInf);
        assert_eq!(g.support().hi, Endpoint::PosInf);
        let b = DistSpec::new(DistKind::Binomial, vec![SymExpr::symbol("m"), SymExpr::symbol("p")]);
        assert_eq!(b.support().hi, Endpoint::At(SymExpr::symbol("m")));
        let h = d(DistKind::Hypergeometric, &[(10, 1), (8, 1), (5, 1)]);
        assert_eq!(h.support().lo, Endpoint::At(SymExpr::from_int(3)));
        assert_eq!(h.support().hi, Endpoint::At(SymExpr::from_int(5)));
    }

    #[test]
    fn cauchy_schwarz_on_concrete_parameters() {
        let cases = [
            d(DistKind::Uniform, &[(-1, 1), (3, 1)]),
            d(DistKind::Gauss, &[(2, 1), (3, 1)]),
            d(DistKind::Laplace, &[(1, 1), (2, 1)]),
            d(DistKind::Bernoulli, &[(1, 3)]),
            d(DistKind::Binomial, &[(7, 1), (1, 4)]),
            d(DistKind::Geometric, &[(1, 3)]),
            d(DistKind::Hypergeometric, &[(20, 1), (7, 1), (5, 1)]),
            d(DistKind::Exponential, &[(3, 2)]),
            d(DistKind::Beta, &[(2, 1), (5, 1)]),
            d(DistKind::ChiSquared, &[(4, 1)]),
        ];
        for spec in cases {
            let m1 = m(&spec, 1).as_rational().unwrap();
            let m2 = m(&spec, 2).as_rational().unwrap();
            assert!(m2 >= &m1 * &m1, "{spec}");
        }
    }
}
