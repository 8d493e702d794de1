//! Parsing and structural validation of loop programs.

mod syntax;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::algebra::{fmt_factor, fmt_polynomial, Polynomial, Sign, SymExpr};
use crate::distributions::DistSpec;

pub use syntax::{parse, Assign, BinOp, Branch, Cop, DistCall, Expr, GuardSyntax, Pos, Rhs, SyntaxTree};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrontendError {
    #[error("syntax error at {pos}: {message}")]
    Syntax { pos: Pos, message: String },
    #[error("unknown distribution `{name}` at {pos}")]
    UnknownDistribution { pos: Pos, name: String },
    #[error("invalid program at {pos}: `{var}`: {reason}")]
    Structure { pos: Pos, var: String, reason: String },
}

impl FrontendError {
    /// The variable a structure error is about.
    pub fn variable(&self) -> Option<&str> {
        match self {
            FrontendError::Structure { var, .. } => Some(var),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitValue {
    Const(SymExpr),
    Draw(DistSpec),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Guard {
    pub lhs: Polynomial,
    pub cop: Cop,
    pub rhs: Polynomial,
    /// Normalized so that the loop runs while `poly > 0`.
    pub poly: Polynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchUpdate {
    pub branches: Vec<(Polynomial, SymExpr)>,
}

impl BranchUpdate {
    pub fn is_deterministic(&self) -> bool {
        self.branches.len() == 1
    }
}

/// A validated program.
#[derive(Clone, Debug, PartialEq)]
pub struct ProgramSpec {
    pub init: Vec<(String, InitValue)>,
    pub guard: Guard,
    pub body_rv: Vec<(String, DistSpec)>,
    pub body_updates: Vec<(String, BranchUpdate)>,
    pub symbols: BTreeSet<String>,
    /// Constraints on the symbols that could not be proved, each read as `e > 0`.
    pub assumptions: Vec<SymExpr>,
}

impl ProgramSpec {
    pub fn is_rv(&self, name: &str) -> bool {
        self.body_rv.iter().any(|(v, _)| v == name)
    }

    pub fn rv_dist(&self, name: &str) -> Option<&DistSpec> {
        self.body_rv.iter().find(|(v, _)| v == name).map(|(_, d)| d)
    }

    pub fn init_value(&self, name: &str) -> Option<&InitValue> {
        self.init.iter().find(|(v, _)| v == name).map(|(_, i)| i)
    }

    pub fn update(&self, name: &str) -> Option<&BranchUpdate> {
        self.body_updates.iter().find(|(v, _)| v == name).map(|(_, u)| u)
    }

    pub fn update_index(&self, name: &str) -> Option<usize> {
        self.body_updates.iter().position(|(v, _)| v == name)
    }

    /// State variables: initialized ones first, then body-only ones.
    pub fn state_vars(&self) -> Vec<String> {
        let mut out: Vec<String> = self.init.iter().map(|(v, _)| v.clone()).collect();
        for (v, _) in &self.body_updates {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
        out
    }

    /// Parses and validates in one step.
    pub fn from_source(text: &str) -> Result<ProgramSpec, FrontendError> {
        validate(&parse(text)?)
    }

    /// Prints the program in the input language; reparsing gives an equal spec.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        for (v, init) in &self.init {
            match init {
                InitValue::Const(c) => writeln!(out, "{v} = {c}"),
                InitValue::Draw(d) => writeln!(out, "{v} = {d}"),
            }
            .expect("string write");
        }
        writeln!(
            out,
            "while {} {} {}:",
            fmt_polynomial(&self.guard.lhs),
            self.guard.cop,
            fmt_polynomial(&self.guard.rhs)
        )
        .expect("string write");
        for (v, d) in &self.body_rv {
            writeln!(out, "    {v} = {d}").expect("string write");
        }
        for (v, u) in &self.body_updates {
            let n = u.branches.len();
            let parts: Vec<String> = u
                .branches
                .iter()
                .enumerate()
                .map(|(i, (p, q))| {
                    if i + 1 == n {
                        fmt_polynomial(p)
                    } else {
                        format!("{} @{}", fmt_polynomial(p), fmt_factor(q))
                    }
                })
                .collect();
            writeln!(out, "    {v} = {}", parts.join("; ")).expect("string write");
        }
        out
    }
}

struct Names {
    vars: HashSet<String>,
}

fn structure(pos: Pos, var: &str, reason: impl Into<String>) -> FrontendError {
    FrontendError::Structure {
        pos,
        var: var.to_string(),
        reason: reason.into(),
    }
}

impl Names {
    fn to_poly(&self, e: &Expr, owner: &str, at: Pos) -> Result<Polynomial, FrontendError> {
        Ok(match e {
            Expr::Num(q) => Polynomial::constant(SymExpr::from_rational(q.clone())),
            Expr::Name(n, _) => {
                if self.vars.contains(n) {
                    Polynomial::var(n)
                } else {
                    Polynomial::constant(SymExpr::symbol(n))
                }
            }
            Expr::Neg(a) => self.to_poly(a, owner, at)?.neg(),
            Expr::Bin(op, a, b) => {
                let pa = self.to_poly(a, owner, at)?;
                match op {
                    BinOp::Add => pa.add(&self.to_poly(b, owner, at)?),
                    BinOp::Sub => pa.sub(&self.to_poly(b, owner, at)?),
                    BinOp::Mul => pa.mul(&self.to_poly(b, owner, at)?),
                    BinOp::Div => {
                        let pb = self.to_poly(b, owner, at)?;
                        if !pb.is_constant() {
                            return Err(structure(at, owner, "division by a program variable"));
                        }
                        let d = pb.constant_term();
                        let inv = d.recip().map_err(|_| {
                            structure(at, owner, format!("division by `{d}`, which may be zero"))
                        })?;
                        pa.scale(&inv)
                    }
                    BinOp::Pow => {
                        let k = syntax::rational_value(b)
                            .filter(|q| q.is_integer() && !q.is_negative())
                            .and_then(|q| q.to_integer().to_u32())
                            .filter(|&k| k <= 64)
                            .ok_or_else(|| {
                                structure(at, owner, "exponents must be small nonnegative integers")
                            })?;
                        pa.pow(k)
                    }
                }
            }
        })
    }

    fn to_const(&self, e: &Expr, owner: &str, at: Pos, what: &str) -> Result<SymExpr, FrontendError> {
        let p = self.to_poly(e, owner, at)?;
        if !p.is_constant() {
            return Err(structure(at, owner, format!("{what} must not mention program variables")));
        }
        Ok(p.constant_term())
    }

    fn dist(&self, call: &DistCall, owner: &str) -> Result<DistSpec, FrontendError> {
        if call.params.len() != call.kind.arity() {
            return Err(structure(
                call.pos,
                owner,
                format!(
                    "{} expects {} parameter(s), got {}",
                    call.kind,
                    call.kind.arity(),
                    call.params.len()
                ),
            ));
        }
        let mut params = Vec::new();
        for p in &call.params {
            let p = self
                .to_poly(p, owner, call.pos)
                .and_then(|q| {
                    if q.is_constant() {
                        Ok(q.constant_term())
                    } else {
                        Err(structure(
                            call.pos,
                            owner,
                            "distribution parameters depending on program variables are not supported",
                        ))
                    }
                })?;
            params.push(p);
        }
        let spec = DistSpec::new(call.kind, params);
        spec.check_params().map_err(|m| structure(call.pos, owner, m))?;
        Ok(spec)
    }
}

fn push_assumption(out: &mut Vec<SymExpr>, e: SymExpr) {
    if !out.contains(&e) {
        out.push(e);
    }
}

/// Records `0 <= p <= 1`; unprovable sides become strict assumptions.
fn check_probability(
    p: &SymExpr,
    at: Pos,
    owner: &str,
    assumptions: &mut Vec<SymExpr>,
) -> Result<(), FrontendError> {
    if let Some(q) = p.as_rational() {
        if q.is_negative() || q > BigRational::one() {
            return Err(structure(at, owner, format!("branch probability {q} outside [0, 1]")));
        }
        return Ok(());
    }
    let rest = SymExpr::one().sub(p);
    for side in [p.clone(), rest] {
        match side.sign() {
            Sign::Positive | Sign::Zero => {}
            Sign::Negative => {
                return Err(structure(at, owner, format!("branch probability {p} outside [0, 1]")))
            }
            Sign::Unknown => push_assumption(assumptions, side),
        }
    }
    Ok(())
}

/// Enforces the structural restrictions and builds a [`ProgramSpec`].
pub fn validate(tree: &SyntaxTree) -> Result<ProgramSpec, FrontendError> {
    let mut vars: HashSet<String> = HashSet::new();
    for a in tree.init.iter().chain(&tree.body) {
        vars.insert(a.target.clone());
    }
    let names = Names { vars };

    let mut symbols = BTreeSet::new();
    let mut collect = |e: &Expr| {
        let mut out = Vec::new();
        e.names(&mut out);
        for (n, _) in out {
            if !names.vars.contains(&n) {
                symbols.insert(n);
            }
        }
    };
    for a in tree.init.iter().chain(&tree.body) {
        match &a.rhs {
            Rhs::Draw(d) => d.params.iter().for_each(&mut collect),
            Rhs::Branches(bs) => {
                for b in bs {
                    collect(&b.expr);
                    if let Some(p) = &b.prob {
                        collect(p);
                    }
                }
            }
        }
    }
    collect(&tree.guard.lhs);
    collect(&tree.guard.rhs);

    let mut init = Vec::new();
    let mut initialized: HashSet<String> = HashSet::new();
    for a in &tree.init {
        if !initialized.insert(a.target.clone()) {
            return Err(structure(a.pos, &a.target, "initialized twice"));
        }
        let value = match &a.rhs {
            Rhs::Draw(call) => InitValue::Draw(names.dist(call, &a.target)?),
            Rhs::Branches(bs) => {
                if bs.len() != 1 || bs[0].prob.is_some() {
                    return Err(structure(a.pos, &a.target, "initial values cannot be probabilistic"));
                }
                InitValue::Const(names.to_const(&bs[0].expr, &a.target, a.pos, "an initial value")?)
            }
        };
        init.push((a.target.clone(), value));
    }

    let rv_names: HashSet<&str> = tree
        .body
        .iter()
        .filter(|a| matches!(a.rhs, Rhs::Draw(_)))
        .map(|a| a.target.as_str())
        .collect();
    let update_order: Vec<&str> = tree
        .body
        .iter()
        .filter(|a| matches!(a.rhs, Rhs::Branches(_)))
        .map(|a| a.target.as_str())
        .collect();

    let mut body_rv = Vec::new();
    let mut body_updates: Vec<(String, BranchUpdate)> = Vec::new();
    let mut drawn: HashSet<&str> = HashSet::new();
    let mut updated: HashSet<&str> = HashSet::new();
    let mut assumptions = Vec::new();

    for a in &tree.body {
        let v = a.target.as_str();
        match &a.rhs {
            Rhs::Draw(call) => {
                if initialized.contains(v) {
                    return Err(structure(a.pos, v, "drawn inside the loop but also initialized before it"));
                }
                if update_order.contains(&v) {
                    return Err(structure(a.pos, v, "drawn inside the loop and also updated"));
                }
                if !drawn.insert(v) {
                    return Err(structure(a.pos, v, "drawn twice in the loop body"));
                }
                body_rv.push((v.to_string(), names.dist(call, v)?));
            }
            Rhs::Branches(bs) => {
                if updated.contains(v) {
                    return Err(structure(a.pos, v, "updated twice in the loop body"));
                }
                let mut branches = Vec::new();
                let mut total = SymExpr::zero();
                for (i, b) in bs.iter().enumerate() {
                    let poly = names.to_poly(&b.expr, v, a.pos)?;
                    let last = i + 1 == bs.len();
                    let prob = match &b.prob {
                        Some(p) => names.to_const(p, v, a.pos, "a branch probability")?,
                        None if last => SymExpr::one().sub(&total),
                        None => unreachable!("the parser requires `@` on all but the last branch"),
                    };
                    check_probability(&prob, a.pos, v, &mut assumptions)?;
                    total = total.add(&prob);
                    branches.push((poly, prob));
                }
                if !total.is_one() {
                    return Err(structure(
                        a.pos,
                        v,
                        format!("branch probabilities sum to {total}, not 1"),
                    ));
                }
                for (poly, _) in &branches {
                    for u in poly.vars() {
                        let u = u.as_str();
                        if u == v {
                            continue;
                        }
                        if rv_names.contains(u) {
                            if !drawn.contains(u) {
                                return Err(structure(
                                    a.pos,
                                    v,
                                    format!("reads random variable `{u}` before it is drawn"),
                                ));
                            }
                        } else if update_order.contains(&u) && !updated.contains(u) {
                            return Err(structure(
                                a.pos,
                                v,
                                format!("reads `{u}` before its assignment in the loop body"),
                            ));
                        }
                    }
                    let deg = poly.degree_in(v);
                    if deg > 1 {
                        return Err(structure(
                            a.pos,
                            v,
                            format!("depends on itself with degree {deg}; at most linear is supported"),
                        ));
                    }
                    if deg == 1 {
                        if !initialized.contains(v) {
                            return Err(structure(a.pos, v, "reads itself but has no initial value"));
                        }
                        let coeff = poly.coeff_of_power(v, 1);
                        if let Some(w) = coeff.vars().into_iter().find(|w| !rv_names.contains(w.as_str())) {
                            return Err(structure(
                                a.pos,
                                v,
                                format!("the coefficient of `{v}` in its own update mentions `{w}`"),
                            ));
                        }
                    }
                }
                updated.insert(v);
                body_updates.push((v.to_string(), BranchUpdate { branches }));
            }
        }
    }

    let g = &tree.guard;
    let lhs = names.to_poly(&g.lhs, "guard", g.pos)?;
    let rhs = names.to_poly(&g.rhs, "guard", g.pos)?;
    let poly = match g.cop {
        Cop::Gt => lhs.sub(&rhs),
        Cop::Lt => rhs.sub(&lhs),
    };
    for u in poly.vars().into_iter().chain(lhs.vars()).chain(rhs.vars()) {
        if rv_names.contains(u.as_str()) {
            return Err(structure(g.pos, &u, "random variables drawn in the loop cannot appear in the guard"));
        }
        if !initialized.contains(&u) {
            return Err(structure(g.pos, &u, "read by the guard but never initialized"));
        }
    }

    Ok(ProgramSpec {
        init,
        guard: Guard { lhs, cop: g.cop, rhs, poly },
        body_rv,
        body_updates,
        symbols,
        assumptions,
    })
}

/// Concrete symbol values used to instantiate a program.
pub type Bindings = HashMap<String, BigRational>;

/// Returns the first symbol of `prog` missing from `bindings`.
pub fn unbound_symbol<'a>(prog: &'a ProgramSpec, bindings: &Bindings) -> Option<&'a str> {
    prog.symbols
        .iter()
        .find(|s| !bindings.contains_key(s.as_str()))
        .map(String::as_str)
}

/// True when every value in `bindings` is strictly positive.
pub fn bindings_positive(bindings: &Bindings) -> bool {
    bindings.values().all(|v| v > &BigRational::zero())
}
