//! Closed forms for the expected values of monomials over program variables,
//! as functions of the loop counter `n`.
//!
//! Expectations are taken over the loop body read as an unconditioned
//! stochastic recurrence: the guard is ignored.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::algebra::{solve_first_order, AlgebraError, ExpPoly, Monomial, Polynomial, SymExpr};
use crate::distributions::DEFAULT_MAX_MOMENT;
use crate::frontend::{InitValue, ProgramSpec};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MomentError {
    #[error("moment of order {order} of `{var}` ~ {dist} is unavailable")]
    MomentUnavailable { var: String, dist: String, order: u32 },
    #[error("monomial basis exceeds {0} elements")]
    BasisExplosion(usize),
    #[error("cyclic moment dependency through `{0}`")]
    Cycle(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
}

#[derive(Clone, Copy, Debug)]
pub struct MomentConfig {
    pub max_moment: u32,
    pub basis_cap: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        MomentConfig {
            max_moment: DEFAULT_MAX_MOMENT,
            basis_cap: 1000,
        }
    }
}

/// Dependency-closed monomials. Each one's one-step expectation mentions only
/// itself and monomials listed after it.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialBasis {
    pub order: Vec<Monomial>,
}

impl MonomialBasis {
    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn contains(&self, m: &Monomial) -> bool {
        self.order.contains(m)
    }
}

#[derive(Clone, Debug, Default)]
pub struct ClosedFormTable {
    forms: HashMap<Monomial, ExpPoly>,
    initial: HashMap<Monomial, SymExpr>,
}

impl ClosedFormTable {
    pub fn get(&self, m: &Monomial) -> Option<&ExpPoly> {
        self.forms.get(m)
    }

    pub fn initial(&self, m: &Monomial) -> Option<&SymExpr> {
        self.initial.get(m)
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Monomial, &ExpPoly)> {
        self.forms.iter()
    }

    /// Closed form of `E[p]` for a polynomial over basis monomials.
    pub fn expectation(&self, p: &Polynomial) -> Option<ExpPoly> {
        let mut acc = ExpPoly::zero();
        for (m, c) in p.terms() {
            acc = acc.add(&self.forms.get(m)?.scale(c));
        }
        Some(acc)
    }
}

/// One analysis session over a program; memoizes one-step expectations and
/// solved closed forms.
pub struct MomentSession<'a> {
    prog: &'a ProgramSpec,
    config: MomentConfig,
    updates: HashMap<Monomial, Polynomial>,
    table: ClosedFormTable,
}

impl<'a> MomentSession<'a> {
    pub fn new(prog: &'a ProgramSpec) -> Self {
        Self::with_config(prog, MomentConfig::default())
    }

    pub fn with_config(prog: &'a ProgramSpec, config: MomentConfig) -> Self {
        MomentSession {
            prog,
            config,
            updates: HashMap::new(),
            table: ClosedFormTable::default(),
        }
    }

    pub fn program(&self) -> &ProgramSpec {
        self.prog
    }

    /// Substitutes the body into `p` in reverse order, averaging over branch
    /// choices. Random variables stay symbolic.
    pub fn next_state_mixture(&self, p: &Polynomial) -> Polynomial {
        let mut acc = p.clone();
        for (v, upd) in self.prog.body_updates.iter().rev() {
            if !acc.mentions(v) {
                continue;
            }
            let mut mixed = Polynomial::zero();
            for (branch, prob) in &upd.branches {
                if prob.is_zero() {
                    continue;
                }
                mixed = mixed.add(&acc.substitute(v, branch).scale(prob));
            }
            acc = mixed;
        }
        acc
    }

    /// Replaces every power product of loop-body random variables by its
    /// expectation; the draws are independent of the state and each other.
    pub fn average_rvs(&self, p: &Polynomial) -> Result<Polynomial, MomentError> {
        let max = self.config.max_moment;
        p.flat_map_terms(|m, c| {
            let (rv, rest) = m.partition(|name| self.prog.is_rv(name));
            let mut coeff = c.clone();
            for (name, e) in rv.factors() {
                let dist = self.prog.rv_dist(name).expect("rv variable");
                let mom = dist.raw_moment(*e, max).ok_or_else(|| MomentError::MomentUnavailable {
                    var: name.clone(),
                    dist: dist.to_string(),
                    order: *e,
                })?;
                coeff = coeff.mul(&mom);
            }
            Ok(Polynomial::term(rest, coeff))
        })
    }

    /// `E[m(next state) | current state]`.
    pub fn expected_update(&mut self, m: &Monomial) -> Result<Polynomial, MomentError> {
        if let Some(p) = self.updates.get(m) {
            return Ok(p.clone());
        }
        let mixed = self.next_state_mixture(&Polynomial::term(m.clone(), SymExpr::one()));
        let p = self.average_rvs(&mixed)?;
        self.updates.insert(m.clone(), p.clone());
        Ok(p)
    }

    /// `E[p(next state) | current state]` for any polynomial over state variables.
    pub fn expected_next(&mut self, p: &Polynomial) -> Result<Polynomial, MomentError> {
        let mut acc = Polynomial::zero();
        for (m, c) in p.terms() {
            acc = acc.add(&self.expected_update(m)?.scale(c));
        }
        Ok(acc)
    }

    /// Closes `seeds` under [`Self::expected_update`].
    pub fn build_basis(&mut self, seeds: &[Monomial]) -> Result<MonomialBasis, MomentError> {
        let mut post: Vec<Monomial> = Vec::new();
        let mut done: HashSet<Monomial> = HashSet::new();
        let mut on_stack: HashSet<Monomial> = HashSet::new();
        // iterative DFS: (monomial, children, next child index)
        for seed in seeds {
            if done.contains(seed) {
                continue;
            }
            let mut stack: Vec<(Monomial, Vec<Monomial>, usize)> = Vec::new();
            let children = self.children(seed)?;
            on_stack.insert(seed.clone());
            stack.push((seed.clone(), children, 0));
            while let Some(top) = stack.last_mut() {
                if top.2 < top.1.len() {
                    let child = top.1[top.2].clone();
                    top.2 += 1;
                    if done.contains(&child) {
                        continue;
                    }
                    if on_stack.contains(&child) {
                        return Err(MomentError::Cycle(child.to_string()));
                    }
                    if done.len() + stack.len() >= self.config.basis_cap {
                        return Err(MomentError::BasisExplosion(self.config.basis_cap));
                    }
                    let grand = self.children(&child)?;
                    on_stack.insert(child.clone());
                    stack.push((child, grand, 0));
                } else {
                    let (m, _, _) = stack.pop().expect("nonempty");
                    on_stack.remove(&m);
                    done.insert(m.clone());
                    post.push(m);
                }
            }
        }
        post.reverse();
        Ok(MonomialBasis { order: post })
    }

    fn children(&mut self, m: &Monomial) -> Result<Vec<Monomial>, MomentError> {
        let p = self.expected_update(m)?;
        let mut out: Vec<Monomial> = p
            .terms()
            .map(|(k, _)| k.clone())
            .filter(|k| k != m && !k.is_one())
            .collect();
        out.sort_by(|a, b| b.cmp_graded(a));
        Ok(out)
    }

    /// `E[m]` before the first iteration.
    pub fn initial_moment(&self, m: &Monomial) -> Result<SymExpr, MomentError> {
        let mut acc = SymExpr::one();
        for (v, e) in m.factors() {
            let f = match self.prog.init_value(v) {
                Some(InitValue::Const(c)) => c.pow(*e),
                Some(InitValue::Draw(d)) => {
                    d.raw_moment(*e, self.config.max_moment)
                        .ok_or_else(|| MomentError::MomentUnavailable {
                            var: v.clone(),
                            dist: d.to_string(),
                            order: *e,
                        })?
                }
                // body-only variables never have their initial value read
                None => SymExpr::zero(),
            };
            acc = acc.mul(&f);
        }
        Ok(acc)
    }

    /// Solves the recurrences of every basis monomial, last-listed first.
    pub fn closed_forms(&mut self, basis: &MonomialBasis) -> Result<ClosedFormTable, MomentError> {
        self.table.forms.insert(Monomial::one(), ExpPoly::constant(SymExpr::one()));
        self.table.initial.insert(Monomial::one(), SymExpr::one());
        for m in basis.order.iter().rev() {
            if self.table.forms.contains_key(m) {
                continue;
            }
            let upd = self.expected_update(m)?;
            let a = upd.coeff(m);
            let mut g = ExpPoly::zero();
            for (k, c) in upd.terms() {
                if k == m {
                    continue;
                }
                let f = self
                    .table
                    .forms
                    .get(k)
                    .ok_or_else(|| MomentError::Cycle(k.to_string()))?;
                g = g.add(&f.scale(c));
            }
            let init = self.initial_moment(m)?;
            let form = solve_first_order(&a, &g, &init)?;
            self.table.forms.insert(m.clone(), form);
            self.table.initial.insert(m.clone(), init);
        }
        Ok(self.table.clone())
    }

    /// Closed form of a single monomial, building whatever basis it needs.
    pub fn closed_form(&mut self, m: &Monomial) -> Result<ExpPoly, MomentError> {
        if let Some(f) = self.table.forms.get(m) {
            return Ok(f.clone());
        }
        let basis = self.build_basis(std::slice::from_ref(m))?;
        let table = self.closed_forms(&basis)?;
        Ok(table.get(m).expect("solved").clone())
    }

    /// Closed form of `E[p]` after `n` iterations.
    pub fn closed_form_of(&mut self, p: &Polynomial) -> Result<ExpPoly, MomentError> {
        let seeds: Vec<Monomial> = p.terms().map(|(m, _)| m.clone()).filter(|m| !m.is_one()).collect();
        let basis = self.build_basis(&seeds)?;
        let table = self.closed_forms(&basis)?;
        Ok(table.expectation(p).expect("basis covers every monomial"))
    }

    pub fn table(&self) -> &ClosedFormTable {
        &self.table
    }
}
