//! Asymptotic bounding functions for program variables.
//!
//! A bound `[lo(n), hi(n)]` for `v` means: on almost every run there are
//! constants `k > 0` and `n0` such that `v` after `n >= n0` iterations lies in
//! `[k lo(n) - k, k hi(n) + k]` (roughly; the constant absorbs start-up
//! effects). An unbounded initial draw is represented by the fresh positive
//! symbol `init[v]`, standing for that run's `|v|` at `n = 0`.

use std::collections::{BTreeMap, HashMap};

use crate::algebra::{poly_eval_bounds, solve_first_order, ExpPoly, Extended, Interval, Polynomial, Sign, SymExpr};
use crate::distributions::{DistSpec, Endpoint};
use crate::frontend::{InitValue, ProgramSpec};

/// Lower and upper bounding functions of one variable.
pub type BoundPair = Interval;

/// Name of the symbol standing for a run's initial magnitude of `v`.
pub fn init_symbol(v: &str) -> String {
    format!("init[{v}]")
}

/// Bounds for every state variable and loop-body random variable.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundStore {
    bounds: BTreeMap<String, BoundPair>,
    /// Variables whose initial bound uses [`init_symbol`].
    pub init_symbols: Vec<String>,
}

impl BoundStore {
    pub fn get(&self, v: &str) -> Option<&BoundPair> {
        self.bounds.get(v)
    }

    pub fn insert(&mut self, v: &str, b: BoundPair) {
        self.bounds.insert(v.to_string(), b);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &BoundPair)> {
        self.bounds.iter()
    }

    pub fn env(&self) -> HashMap<String, Interval> {
        self.bounds.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
    }
}

fn endpoint(e: &Endpoint) -> Extended {
    match e {
        Endpoint::NegInf => Extended::NegInf,
        Endpoint::PosInf => Extended::PosInf,
        Endpoint::At(c) => Extended::constant(c.clone()),
    }
}

/// Support of a distribution as a constant interval.
pub fn support_interval(d: &DistSpec) -> Interval {
    let s = d.support();
    Interval::new(endpoint(&s.lo), endpoint(&s.hi))
}

/// Bounds of `v` before the first iteration.
pub fn init_bounds(prog: &ProgramSpec, v: &str) -> (BoundPair, bool) {
    match prog.init_value(v) {
        Some(InitValue::Const(c)) => (Interval::constant(c.clone()), false),
        Some(InitValue::Draw(d)) => {
            let s = support_interval(d);
            let sym = Extended::constant(SymExpr::symbol(&init_symbol(v)));
            let uses_symbol = !s.lo.is_finite() || !s.hi.is_finite();
            let lo = if s.lo.is_finite() { s.lo } else { sym.neg() };
            let hi = if s.hi.is_finite() { s.hi } else { sym };
            (Interval::new(lo, hi), uses_symbol)
        }
        None => (Interval::constant(SymExpr::zero()), false),
    }
}

fn shift(e: &Extended) -> Extended {
    match e {
        Extended::Finite(p) => Extended::Finite(p.shift_forward()),
        other => other.clone(),
    }
}

fn shift_interval(iv: &Interval) -> Interval {
    Interval::new(shift(&iv.lo), shift(&iv.hi))
}

fn abs_ext(e: &Extended) -> Option<ExpPoly> {
    let p = e.finite()?;
    match p.eventual_sign() {
        Sign::Positive | Sign::Zero => Some(p.clone()),
        Sign::Negative => Some(p.neg()),
        Sign::Unknown => None,
    }
}

fn const_of(e: &Extended) -> Option<SymExpr> {
    e.finite()?.as_constant()
}

/// `Some(true)` when `a >= b` for every positive symbol assignment.
fn ge(a: &SymExpr, b: &SymExpr) -> Option<bool> {
    match a.sub(b).sign() {
        Sign::Positive | Sign::Zero => Some(true),
        Sign::Negative => Some(false),
        Sign::Unknown => None,
    }
}

fn max_const(values: &[SymExpr]) -> Option<SymExpr> {
    let mut best = values.first()?.clone();
    for v in &values[1..] {
        if !ge(&best, v)? {
            best = v.clone();
        }
    }
    Some(best)
}

fn min_const(values: &[SymExpr]) -> Option<SymExpr> {
    let neg: Vec<SymExpr> = values.iter().map(SymExpr::neg).collect();
    max_const(&neg).map(|m| m.neg())
}

fn solve(a: &SymExpr, g: &ExpPoly, init: &SymExpr) -> Option<ExpPoly> {
    solve_first_order(a, g, init).ok().map(|f| f.without_deltas())
}

struct BranchShape {
    a: Interval,
    r: Interval,
}

/// Bounds of a single updated variable, given bounds of everything it reads.
pub fn var_bounds(prog: &ProgramSpec, v: &str, store: &BoundStore) -> BoundPair {
    let Some(upd) = prog.update(v) else {
        return store.get(v).cloned().unwrap_or_else(|| init_bounds(prog, v).0);
    };
    let idx = prog.update_index(v).expect("updated");
    let mut env: HashMap<String, Interval> = HashMap::new();
    for (u, d) in &prog.body_rv {
        env.insert(u.clone(), support_interval(d));
    }
    for (u, _) in &prog.init {
        if prog.update(u).is_none() {
            env.insert(u.clone(), init_bounds(prog, u).0);
        }
    }
    for (u, _) in &prog.body_updates[..idx] {
        if let Some(b) = store.get(u) {
            // the update reads the value already assigned in this iteration
            env.insert(u.clone(), shift_interval(b));
        }
    }

    let mut shapes = Vec::new();
    for (poly, prob) in &upd.branches {
        if prob.is_zero() {
            continue;
        }
        let a_poly: Polynomial = poly.coeff_of_power(v, 1);
        let r_poly: Polynomial = poly.coeff_of_power(v, 0);
        shapes.push(BranchShape {
            a: poly_eval_bounds(&a_poly, &env),
            r: poly_eval_bounds(&r_poly, &env),
        });
    }
    let (init, _) = init_bounds(prog, v);
    let (Some(lo0), Some(hi0)) = (const_of(&init.lo), const_of(&init.hi)) else {
        return Interval::unbounded();
    };

    let mut r_hi = Extended::NegInf;
    let mut r_lo = Extended::PosInf;
    for s in &shapes {
        r_hi = r_hi.max(&s.r.hi);
        r_lo = r_lo.min(&s.r.lo);
    }

    let a_bounds: Option<Vec<(SymExpr, SymExpr)>> = shapes
        .iter()
        .map(|s| Some((const_of(&s.a.lo)?, const_of(&s.a.hi)?)))
        .collect();
    let Some(a_bounds) = a_bounds else {
        return Interval::unbounded();
    };
    let monotone = a_bounds
        .iter()
        .all(|(lo, _)| matches!(lo.sign(), Sign::Positive | Sign::Zero));

    if monotone {
        let los: Vec<SymExpr> = a_bounds.iter().map(|(l, _)| l.clone()).collect();
        let his: Vec<SymExpr> = a_bounds.iter().map(|(_, h)| h.clone()).collect();
        let (Some(amin), Some(amax)) = (min_const(&los), max_const(&his)) else {
            return Interval::unbounded();
        };
        let exact = amin == amax;
        let hi = match r_hi.finite() {
            None => Extended::PosInf,
            Some(g) => pick(&amax, &amin, g, &hi0, exact, true),
        };
        let lo = match r_lo.finite() {
            None => Extended::NegInf,
            Some(g) => pick(&amax, &amin, g, &lo0, exact, false),
        };
        if lo.is_finite() && hi.is_finite() {
            return Interval::new(lo, hi);
        }
        // a side whose coefficient choice is undecided falls back to magnitudes
        let fallback = magnitude_bounds(&shapes, &a_bounds, &lo0, &hi0);
        return Interval::new(
            if lo.is_finite() { lo } else { fallback.lo },
            if hi.is_finite() { hi } else { fallback.hi },
        );
    }
    magnitude_bounds(&shapes, &a_bounds, &lo0, &hi0)
}

/// `|v'| <= max|a| |v| + max|r|`, valid whatever the signs of the coefficients.
fn magnitude_bounds(shapes: &[BranchShape], a_bounds: &[(SymExpr, SymExpr)], lo0: &SymExpr, hi0: &SymExpr) -> Interval {
    let mut a_abs = Vec::new();
    for (lo, hi) in a_bounds {
        match (lo.abs_if_known(), hi.abs_if_known()) {
            (Some(l), Some(h)) => {
                a_abs.push(l);
                a_abs.push(h);
            }
            _ => return Interval::unbounded(),
        }
    }
    let (Some(amax), Some(b0)) = (
        max_const(&a_abs),
        lo0.abs_if_known()
            .zip(hi0.abs_if_known())
            .and_then(|(l, h)| max_const(&[l, h])),
    ) else {
        return Interval::unbounded();
    };
    let mut r_abs = Extended::NegInf;
    for s in shapes {
        for e in [&s.r.lo, &s.r.hi] {
            match abs_ext(e) {
                Some(p) => r_abs = r_abs.max(&Extended::Finite(p)),
                None => return Interval::unbounded(),
            }
        }
    }
    let Some(r_abs) = r_abs.finite() else {
        return Interval::unbounded();
    };
    match solve(&amax, r_abs, &b0) {
        Some(b) => Interval::new(Extended::Finite(b.neg()), Extended::Finite(b)),
        None => Interval::unbounded(),
    }
}

/// Solves `b(n+1) = a b(n) + g(n)` for the side `upper`, choosing the
/// coefficient that keeps the recurrence an over-approximation.
fn pick(amax: &SymExpr, amin: &SymExpr, g: &ExpPoly, init: &SymExpr, exact: bool, upper: bool) -> Extended {
    let infinite = if upper { Extended::PosInf } else { Extended::NegInf };
    let Some(first) = solve(amax, g, init) else {
        return infinite;
    };
    if exact {
        return Extended::Finite(first);
    }
    // amax is the right choice while the bound stays on the far side of 0
    let s = first.eventual_sign();
    let ok = if upper { s.is_nonneg() } else { s.is_nonpos() };
    if ok && s != Sign::Unknown {
        return Extended::Finite(first);
    }
    let Some(second) = solve(amin, g, init) else {
        return infinite;
    };
    let s = second.eventual_sign();
    let ok = if upper { s.is_nonpos() } else { s.is_nonneg() };
    if ok && s != Sign::Unknown {
        Extended::Finite(second)
    } else {
        infinite
    }
}

/// Bounds of all variables, without using the guard.
pub fn compute_bounds(prog: &ProgramSpec) -> BoundStore {
    let mut store = BoundStore::default();
    for (v, _) in &prog.init {
        let (b, uses_symbol) = init_bounds(prog, v);
        if uses_symbol {
            store.init_symbols.push(v.clone());
        }
        if prog.update(v).is_none() {
            store.insert(v, b);
        }
    }
    for (u, d) in &prog.body_rv {
        store.insert(u, support_interval(d));
    }
    for (v, _) in &prog.body_updates {
        let b = var_bounds(prog, v, &store);
        store.insert(v, b);
    }
    store
}

/// Intersects a variable's bounds with the half-line implied by a guard that
/// is linear in a single variable.
pub fn guard_refined_bounds(prog: &ProgramSpec, raw: &BoundStore) -> BoundStore {
    let g = &prog.guard.poly;
    let vars = g.vars();
    if vars.len() != 1 || g.total_degree() != 1 {
        return raw.clone();
    }
    let w = vars.into_iter().next().expect("one variable");
    let alpha = g.coeff_of_power(&w, 1).constant_term();
    let beta = g.constant_term();
    let Ok(threshold) = beta.neg().checked_div(&alpha) else {
        return raw.clone();
    };
    let Some(current) = raw.get(&w) else {
        return raw.clone();
    };
    let half = match alpha.sign() {
        Sign::Positive => Interval::new(Extended::constant(threshold), Extended::PosInf),
        Sign::Negative => Interval::new(Extended::NegInf, Extended::constant(threshold)),
        _ => return raw.clone(),
    };
    let mut out = raw.clone();
    out.insert(&w, current.intersect(&half));
    out
}
