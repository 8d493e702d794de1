//! Random finite-support programs and an exact brute-force interpreter.
//!
//! Programs are generated as plain data, rendered to source text for the
//! analyzer, and executed here by enumerating every outcome with exact
//! rational probabilities.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.to_integer().to_string()
    } else {
        format!("({}/{})", x.numer(), x.denom())
    }
}

/// A term `coeff * prod(var^exp)`.
#[derive(Clone, Debug)]
pub struct Term {
    pub coeff: Q,
    pub factors: Vec<(String, u32)>,
}

#[derive(Clone, Debug)]
pub struct Expr(pub Vec<Term>);

impl Expr {
    pub fn eval(&self, env: &BTreeMap<String, Q>) -> Q {
        let mut total = Q::zero();
        for t in &self.0 {
            let mut v = t.coeff.clone();
            for (name, e) in &t.factors {
                let x = env.get(name).cloned().unwrap_or_else(Q::zero);
                for _ in 0..*e {
                    v *= &x;
                }
            }
            total += v;
        }
        total
    }

    pub fn render(&self) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .map(|t| {
                let mut s = fmt_q(&t.coeff);
                for (name, e) in &t.factors {
                    if *e == 1 {
                        s.push_str(&format!("*{name}"));
                    } else {
                        s.push_str(&format!("*{name}**{e}"));
                    }
                }
                s
            })
            .collect();
        parts.join(" + ")
    }
}

#[derive(Clone, Debug)]
pub enum Dist {
    Bernoulli(Q),
    Binomial(u32, Q),
}

impl Dist {
    /// Exact outcomes with probabilities.
    pub fn outcomes(&self) -> Vec<(Q, Q)> {
        match self {
            Dist::Bernoulli(p) => vec![(Q::zero(), Q::one() - p), (Q::one(), p.clone())],
            Dist::Binomial(n, p) => {
                let mut out = Vec::new();
                for k in 0..=*n {
                    let mut c = Q::one();
                    for i in 0..k {
                        c = c * q((*n - i) as i64, (i + 1) as i64);
                    }
                    let mut pr = c;
                    for _ in 0..k {
                        pr *= p;
                    }
                    for _ in 0..(*n - k) {
                        pr *= Q::one() - p;
                    }
                    out.push((q(k as i64, 1), pr));
                }
                out
            }
        }
    }

    fn render(&self) -> String {
        match self {
            Dist::Bernoulli(p) => format!("RV(bernoulli, {}/{})", p.numer(), p.denom()),
            Dist::Binomial(n, p) => format!("RV(binomial, {n}, {}/{})", p.numer(), p.denom()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomProgram {
    pub init: Vec<(String, Q)>,
    pub rvs: Vec<(String, Dist)>,
    /// Each update has branches `(probability, expression)`.
    pub updates: Vec<(String, Vec<(Q, Expr)>)>,
}

pub type State = BTreeMap<String, Q>;

impl RandomProgram {
    pub fn state_vars(&self) -> Vec<String> {
        self.updates.iter().map(|(v, _)| v.clone()).collect()
    }

    /// Source text. The guard never matters for moments, so it is trivial.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for (v, c) in &self.init {
            s.push_str(&format!("{v} = {}\n", fmt_q(c)));
        }
        let g = &self.init[0].0;
        s.push_str(&format!("while {g} > 0:\n"));
        for (u, d) in &self.rvs {
            s.push_str(&format!("    {u} = {}\n", d.render()));
        }
        for (v, branches) in &self.updates {
            let parts: Vec<String> = branches
                .iter()
                .enumerate()
                .map(|(i, (p, e))| {
                    if i + 1 == branches.len() {
                        e.render()
                    } else {
                        format!("{} @ {}/{}", e.render(), p.numer(), p.denom())
                    }
                })
                .collect();
            s.push_str(&format!("    {v} = {}\n", parts.join("; ")));
        }
        s
    }

    fn slots(&self) -> Vec<String> {
        let mut slots = self.state_vars();
        slots.extend(self.rvs.iter().map(|(u, _)| u.clone()));
        slots
    }

    /// Exact state distributions after 0..=`n` loop bodies (guard ignored).
    /// States are vectors ordered like [`RandomProgram::state_vars`].
    pub fn distributions(&self, n: u32) -> Vec<Vec<(Vec<Q>, Q)>> {
        let slots = self.slots();
        let idx = |name: &str| slots.iter().position(|s| s == name).expect("known name");
        let nvars = self.updates.len();
        let outcomes: Vec<Vec<(Q, Q)>> = self.rvs.iter().map(|(_, d)| d.outcomes()).collect();
        let compiled: Vec<Vec<(Q, Vec<(Q, Vec<(usize, u32)>)>)>> = self
            .updates
            .iter()
            .map(|(_, branches)| {
                branches
                    .iter()
                    .filter(|(p, _)| !p.is_zero())
                    .map(|(p, e)| {
                        let terms = e
                            .0
                            .iter()
                            .map(|t| (t.coeff.clone(), t.factors.iter().map(|(v, k)| (idx(v), *k)).collect()))
                            .collect();
                        (p.clone(), terms)
                    })
                    .collect()
            })
            .collect();
        let eval = |terms: &[(Q, Vec<(usize, u32)>)], s: &[Q]| -> Q {
            let mut total = Q::zero();
            for (c, fs) in terms {
                let mut v = c.clone();
                for (i, k) in fs {
                    for _ in 0..*k {
                        v *= &s[*i];
                    }
                }
                total += v;
            }
            total
        };

        let init: State = self.init.iter().cloned().collect();
        let mut start = vec![Q::zero(); slots.len()];
        for (i, v) in self.state_vars().iter().enumerate() {
            start[i] = init.get(v).cloned().unwrap_or_else(Q::zero);
        }
        let mut dist: HashMap<Vec<Q>, Q> = HashMap::new();
        dist.insert(start, Q::one());
        let mut out = Vec::new();
        for round in 0..=n {
            out.push(dist.iter().map(|(k, p)| (k[..nvars].to_vec(), p.clone())).collect());
            if round == n {
                break;
            }
            let mut next: HashMap<Vec<Q>, Q> = HashMap::new();
            for (k, p) in &dist {
                let mut worlds = vec![(k.clone(), p.clone())];
                for (j, outs) in outcomes.iter().enumerate() {
                    let mut w2 = Vec::with_capacity(worlds.len() * outs.len());
                    for (s, pr) in &worlds {
                        for (val, q) in outs {
                            let mut s2 = s.clone();
                            s2[nvars + j] = val.clone();
                            w2.push((s2, pr * q));
                        }
                    }
                    worlds = w2;
                }
                for (i, branches) in compiled.iter().enumerate() {
                    let mut w2 = Vec::with_capacity(worlds.len() * branches.len());
                    for (s, pr) in &worlds {
                        for (q, terms) in branches {
                            let mut s2 = s.clone();
                            s2[i] = eval(terms, s);
                            w2.push((s2, pr * q));
                        }
                    }
                    worlds = w2;
                }
                for (mut s, pr) in worlds {
                    for x in s[nvars..].iter_mut() {
                        *x = Q::zero();
                    }
                    *next.entry(s).or_insert_with(Q::zero) += pr;
                }
            }
            dist = next;
        }
        out
    }
}

/// Exact expectations of several monomials under one state distribution.
/// Monomials name variables by their position in the state vector.
///
/// Values and probabilities are scaled to integers over common denominators
/// so the inner loop avoids rational normalization.
pub fn expectations(dist: &[(Vec<Q>, Q)], monos: &[Vec<(usize, u32)>]) -> Vec<Q> {
    use num_integer::Integer;
    let maxdeg = monos.iter().flat_map(|m| m.iter().map(|(_, e)| *e)).max().unwrap_or(0) as usize;
    let mut lv = BigInt::one();
    let mut lp = BigInt::one();
    for (s, p) in dist {
        for x in s {
            lv = lv.lcm(x.denom());
        }
        lp = lp.lcm(p.denom());
    }
    let to_int = |x: &Q, l: &BigInt| x.numer() * (l / x.denom());
    let mut sums = vec![BigInt::zero(); monos.len()];
    for (s, p) in dist {
        let pi = to_int(p, &lp);
        let powers: Vec<Vec<BigInt>> = s
            .iter()
            .map(|x| {
                let xi = to_int(x, &lv);
                let mut pw = vec![BigInt::one()];
                for i in 0..maxdeg {
                    let next = &pw[i] * &xi;
                    pw.push(next);
                }
                pw
            })
            .collect();
        for (m, acc) in monos.iter().zip(sums.iter_mut()) {
            let mut t = pi.clone();
            for (v, e) in m {
                t *= &powers[*v][*e as usize];
            }
            *acc += t;
        }
    }
    monos
        .iter()
        .zip(sums)
        .map(|(m, total)| {
            let deg: u32 = m.iter().map(|(_, e)| *e).sum();
            BigRational::new(total, &lp * num_traits::pow(lv.clone(), deg as usize))
        })
        .collect()
}

fn pick<'a, T, R: Rng>(rng: &mut R, xs: &'a [T]) -> &'a T {
    &xs[rng.random_range(0..xs.len())]
}

/// Generates a program with 2 or 3 state variables and at most 4 outcomes
/// per iteration.
pub fn random_program(seed: u64) -> RandomProgram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = ["x", "y", "z"];
    let nvars = rng.random_range(2..=3);
    let probs = [q(1, 2), q(1, 3), q(2, 3), q(1, 4), q(3, 4)];
    let small = [q(1, 1), q(2, 1), q(-1, 1), q(1, 2), q(-1, 2), q(3, 1), q(1, 3)];
    let selfc = [q(1, 1), q(1, 2), q(2, 1), q(-1, 1), q(0, 1), q(3, 2), q(1, 3)];

    let mut rvs = Vec::new();
    let mut outcome_budget = 4u32;
    if rng.random_bool(0.6) {
        let p = pick(&mut rng, &probs).clone();
        rvs.push(("u".to_string(), Dist::Bernoulli(p)));
        outcome_budget /= 2;
    }
    if outcome_budget >= 2 && rng.random_bool(0.3) {
        let p = pick(&mut rng, &probs).clone();
        rvs.push(("w".to_string(), Dist::Binomial(2, p)));
        outcome_budget = 1;
    }

    let init: Vec<(String, Q)> = names[..nvars]
        .iter()
        .map(|v| (v.to_string(), q(rng.random_range(-3..=5), rng.random_range(1..=2))))
        .collect();

    let mut updates = Vec::new();
    for i in 0..nvars {
        let v = names[i];
        let nbranches = if outcome_budget >= 2 && rng.random_bool(0.5) {
            outcome_budget /= 2;
            2
        } else {
            1
        };
        let mut branches = Vec::new();
        let p = pick(&mut rng, &probs).clone();
        for b in 0..nbranches {
            let mut terms = Vec::new();
            let mut self_factors = vec![(v.to_string(), 1)];
            if !rvs.is_empty() && rng.random_bool(0.2) {
                self_factors.push((rvs[0].0.clone(), 1));
            }
            terms.push(Term {
                coeff: pick(&mut rng, &selfc).clone(),
                factors: self_factors,
            });
            let mut readable: Vec<String> = names[..i].iter().map(|s| s.to_string()).collect();
            readable.extend(rvs.iter().map(|(u, _)| u.clone()));
            for _ in 0..rng.random_range(0..=2) {
                let mut factors = Vec::new();
                let mut deg = 0;
                if !readable.is_empty() {
                    for _ in 0..rng.random_range(1..=2) {
                        let name = pick(&mut rng, &readable).clone();
                        match factors.iter_mut().find(|(n, _)| *n == name) {
                            Some((_, e)) => *e += 1,
                            None => factors.push((name, 1)),
                        }
                        deg += 1;
                    }
                }
                let _ = deg;
                terms.push(Term {
                    coeff: pick(&mut rng, &small).clone(),
                    factors,
                });
            }
            let prob = if nbranches == 1 {
                Q::one()
            } else if b == 0 {
                p.clone()
            } else {
                Q::one() - &p
            };
            branches.push((prob, Expr(terms)));
        }
        updates.push((v.to_string(), branches));
    }
    RandomProgram { init, rvs, updates }
}

/// Every monomial over variables `0..nvars` of total degree 1..=`max_degree`.
pub fn monomials(nvars: usize, max_degree: u32) -> Vec<Vec<(usize, u32)>> {
    fn go(vars: &[usize], left: u32, acc: &mut Vec<(usize, u32)>, out: &mut Vec<Vec<(usize, u32)>>) {
        if vars.is_empty() {
            if !acc.is_empty() {
                out.push(acc.clone());
            }
            return;
        }
        for e in 0..=left {
            if e > 0 {
                acc.push((vars[0], e));
            }
            go(&vars[1..], left - e, acc, out);
            if e > 0 {
                acc.pop();
            }
        }
    }
    let mut out = Vec::new();
    let vars: Vec<usize> = (0..nvars).collect();
    go(&vars, max_degree, &mut Vec::new(), &mut out);
    out
}
