//! Martingale expression of the guard, the four proof rules, and the verdict.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{fmt_polynomial, poly_eval_bounds, ExpPoly, Extended, Interval, Polynomial, Sign, SymExpr, Trilean};
use crate::bounds::{compute_bounds, guard_refined_bounds, init_bounds, BoundStore};
use crate::frontend::{InitValue, ProgramSpec};
use crate::moments::{MomentConfig, MomentError, MomentSession};

/// One joint choice of alternatives across all probabilistic assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct PureBranch {
    /// Index of the chosen alternative for each body update.
    pub choices: Vec<usize>,
    pub prob: SymExpr,
    /// `G(next) - G` with loop-body random variables left symbolic.
    pub delta: Polynomial,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleExpression {
    pub guard: Polynomial,
    pub mexp: Polynomial,
    pub branches: Vec<PureBranch>,
    /// Set when there were too many pure branches to enumerate.
    pub truncated: bool,
}

pub const DEFAULT_BRANCH_CAP: usize = 4096;

/// Substitutes one pure branch into `p`, last update first.
fn substitute_branch(prog: &ProgramSpec, p: &Polynomial, choices: &[usize]) -> Polynomial {
    let mut acc = p.clone();
    for (i, (v, upd)) in prog.body_updates.iter().enumerate().rev() {
        acc = acc.substitute(v, &upd.branches[choices[i]].0);
    }
    acc
}

/// `E[G(next) - G | current state]` and the per-branch changes of `G`.
pub fn martingale_expression(
    session: &mut MomentSession<'_>,
    branch_cap: usize,
) -> Result<MartingaleExpression, MomentError> {
    let prog = session.program().clone();
    let g = prog.guard.poly.clone();
    let mexp = session.expected_next(&g)?.sub(&g);

    let sizes: Vec<usize> = prog.body_updates.iter().map(|(_, u)| u.branches.len()).collect();
    let total = sizes.iter().try_fold(1usize, |acc, &s| acc.checked_mul(s));
    let mut branches = Vec::new();
    let truncated = !matches!(total, Some(t) if t <= branch_cap);
    if !truncated {
        let mut choices = vec![0usize; sizes.len()];
        loop {
            let mut prob = SymExpr::one();
            for (i, (_, upd)) in prog.body_updates.iter().enumerate() {
                prob = prob.mul(&upd.branches[choices[i]].1);
            }
            if !prob.is_zero() {
                let delta = substitute_branch(&prog, &g, &choices).sub(&g);
                branches.push(PureBranch {
                    choices: choices.clone(),
                    prob,
                    delta,
                });
            }
            // odometer increment
            let mut k = 0;
            while k < sizes.len() {
                choices[k] += 1;
                if choices[k] < sizes[k] {
                    break;
                }
                choices[k] = 0;
                k += 1;
            }
            if k == sizes.len() {
                break;
            }
        }
    }
    Ok(MartingaleExpression {
        guard: g,
        mexp,
        branches,
        truncated,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    /// Ranking supermartingale: PAST.
    RankingSupermartingale,
    /// Supermartingale with a decreasing branch: AST.
    Supermartingale,
    /// Repulsing supermartingale: not AST.
    Repulsing,
    /// Bounded-difference submartingale: not PAST.
    NonPast,
}

impl RuleKind {
    pub fn name(self) -> &'static str {
        match self {
            RuleKind::RankingSupermartingale => "ranking-supermartingale",
            RuleKind::Supermartingale => "supermartingale",
            RuleKind::Repulsing => "repulsing-supermartingale",
            RuleKind::NonPast => "non-past",
        }
    }

    pub fn proves(self) -> &'static str {
        match self {
            RuleKind::RankingSupermartingale => "PAST",
            RuleKind::Supermartingale => "AST",
            RuleKind::Repulsing => "not AST",
            RuleKind::NonPast => "not PAST",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub guard: String,
    pub mexp: String,
    /// The eventual bound the rule's sign check was made on.
    pub bound: String,
    pub constants: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleResult {
    pub rule: RuleKind,
    pub applicable: Trilean,
    pub certified: Trilean,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl RuleResult {
    fn unknown(rule: RuleKind, reason: impl Into<String>) -> Self {
        RuleResult {
            rule,
            applicable: Trilean::Unknown,
            certified: Trilean::Unknown,
            witness: None,
            reason: Some(reason.into()),
        }
    }

    fn failed(rule: RuleKind, reason: impl Into<String>) -> Self {
        RuleResult {
            rule,
            applicable: Trilean::True,
            certified: Trilean::False,
            witness: None,
            reason: Some(reason.into()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub past: Trilean,
    pub ast: Trilean,
    pub witnesses: Vec<RuleResult>,
    /// Constraints on the symbols the verdict relies on, as `e > 0` strings.
    pub assumptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum AnalysisError {
    #[error("internal soundness error: {0}")]
    InternalSoundness(String),
}

/// Everything the rules look at.
pub struct RuleContext<'a> {
    pub prog: &'a ProgramSpec,
    pub mexp: &'a MartingaleExpression,
    /// Guard-refined bounds of state variables plus random-variable supports.
    pub env: HashMap<String, Interval>,
}

impl<'a> RuleContext<'a> {
    pub fn new(prog: &'a ProgramSpec, mexp: &'a MartingaleExpression, bounds: &BoundStore) -> Self {
        RuleContext {
            prog,
            mexp,
            env: bounds.env(),
        }
    }

    fn bounds_of(&self, p: &Polynomial) -> Interval {
        poly_eval_bounds(p, &self.env)
    }

    fn witness(&self, bound: &Extended, constants: &[(&str, String)], branch: Option<String>) -> Witness {
        Witness {
            guard: fmt_polynomial(&self.mexp.guard),
            mexp: fmt_polynomial(&self.mexp.mexp),
            bound: bound.to_string(),
            constants: constants.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            branch,
        }
    }

    fn is_assumed_positive(&self, e: &SymExpr) -> bool {
        e.sign() == Sign::Positive || self.prog.assumptions.contains(e)
    }

    fn branch_positive(&self, b: &PureBranch) -> bool {
        self.prog
            .body_updates
            .iter()
            .zip(&b.choices)
            .all(|((_, u), &c)| self.is_assumed_positive(&u.branches[c].1))
    }

    fn describe(&self, b: &PureBranch) -> String {
        let parts: Vec<String> = self
            .prog
            .body_updates
            .iter()
            .zip(&b.choices)
            .filter(|((_, u), _)| u.branches.len() > 1)
            .map(|((v, u), &c)| format!("{v} = {}", fmt_polynomial(&u.branches[c].0)))
            .collect();
        if parts.is_empty() {
            "the loop body".into()
        } else {
            parts.join("; ")
        }
    }
}

/// Coefficient of the leading term when it is a plain constant.
fn leading_constant(f: &ExpPoly) -> Option<SymExpr> {
    let t = f.leading_term()?;
    (t.degree == 0 && t.base.is_one()).then(|| t.coeff.clone())
}

/// Does `f` stay away from 0 (leading base of magnitude at least 1)?
fn non_decaying(f: &ExpPoly) -> Trilean {
    let Some(t) = f.leading_term() else {
        return Trilean::Unknown;
    };
    match t.base.abs_if_known().map(|b| b.sub(&SymExpr::one()).sign()) {
        Some(Sign::Positive | Sign::Zero) => Trilean::True,
        Some(Sign::Negative) => Trilean::False,
        _ => Trilean::Unknown,
    }
}

/// A positive constant the magnitude of `f` eventually stays above.
fn eventual_margin(f: &ExpPoly) -> SymExpr {
    match leading_constant(f) {
        Some(c) if f.as_constant().is_some() => c.abs_if_known().unwrap_or(c),
        Some(c) => c.abs_if_known().unwrap_or(c).scale_rational(&crate::algebra::rational(1, 2)),
        None => SymExpr::one(),
    }
}

/// Certifies PAST when `MEXP <= -eps` eventually on iterating states.
pub fn rsm_rule(ctx: &RuleContext<'_>) -> RuleResult {
    let rule = RuleKind::RankingSupermartingale;
    let hi = ctx.bounds_of(&ctx.mexp.mexp).hi;
    let Some(f) = hi.finite() else {
        return RuleResult::unknown(rule, "no finite upper bound for the martingale expression");
    };
    match f.eventual_sign() {
        Sign::Negative => match non_decaying(f) {
            Trilean::True => RuleResult {
                rule,
                applicable: Trilean::True,
                certified: Trilean::True,
                witness: Some(ctx.witness(&hi, &[("epsilon", eventual_margin(f).to_string())], None)),
                reason: None,
            },
            Trilean::False => RuleResult::failed(rule, "the expected decrease vanishes asymptotically"),
            Trilean::Unknown => RuleResult::unknown(rule, "growth of the expected decrease undecided"),
        },
        Sign::Positive | Sign::Zero => {
            RuleResult::failed(rule, format!("upper bound {hi} of the martingale expression is not negative"))
        }
        Sign::Unknown => RuleResult::unknown(rule, format!("eventual sign of {hi} undecided")),
    }
}

/// Certifies AST when `MEXP <= 0` eventually and some branch of positive
/// probability decreases `G` by at least a positive constant.
pub fn sm_rule(ctx: &RuleContext<'_>) -> RuleResult {
    let rule = RuleKind::Supermartingale;
    let hi = ctx.bounds_of(&ctx.mexp.mexp).hi;
    let Some(f) = hi.finite() else {
        return RuleResult::unknown(rule, "no finite upper bound for the martingale expression");
    };
    match f.eventual_sign() {
        Sign::Negative | Sign::Zero => {}
        Sign::Positive => {
            return RuleResult::failed(rule, format!("upper bound {hi} of the martingale expression is positive"))
        }
        Sign::Unknown => return RuleResult::unknown(rule, format!("eventual sign of {hi} undecided")),
    }
    if ctx.mexp.truncated {
        return RuleResult::unknown(rule, "too many pure branches");
    }
    let mut all_fail = true;
    for b in &ctx.mexp.branches {
        if !ctx.branch_positive(b) {
            all_fail = false;
            continue;
        }
        let bh = ctx.bounds_of(&b.delta).hi;
        let Some(d) = bh.finite() else {
            all_fail = false;
            continue;
        };
        match (d.eventual_sign(), non_decaying(d)) {
            (Sign::Negative, Trilean::True) => {
                let constants = [
                    ("p", b.prob.to_string()),
                    ("d", eventual_margin(d).to_string()),
                ];
                return RuleResult {
                    rule,
                    applicable: Trilean::True,
                    certified: Trilean::True,
                    witness: Some(ctx.witness(&hi, &constants, Some(ctx.describe(b)))),
                    reason: None,
                };
            }
            (Sign::Positive | Sign::Zero, _) | (Sign::Negative, Trilean::False) => {}
            _ => all_fail = false,
        }
    }
    if all_fail {
        RuleResult::failed(rule, "no branch decreases the guard by a positive constant")
    } else {
        RuleResult::unknown(rule, "could not find a branch with a constant decrease")
    }
}

/// `Some(kappa)` when every branch changes `G` by a bounded amount.
fn bounded_differences(ctx: &RuleContext<'_>) -> Result<SymExpr, (Trilean, String)> {
    if ctx.mexp.truncated {
        return Err((Trilean::Unknown, "too many pure branches".into()));
    }
    let mut kappa: Option<SymExpr> = None;
    for b in &ctx.mexp.branches {
        let iv = ctx.bounds_of(&b.delta);
        let (Some(lo), Some(hi)) = (iv.lo.finite(), iv.hi.finite()) else {
            return Err((
                Trilean::Unknown,
                format!("change {} of the guard has no finite bounds", fmt_polynomial(&b.delta)),
            ));
        };
        for side in [lo, hi] {
            match side.is_bounded() {
                Trilean::True => {}
                Trilean::False => {
                    return Err((
                        Trilean::False,
                        format!("change {} of the guard is unbounded", fmt_polynomial(&b.delta)),
                    ))
                }
                Trilean::Unknown => {
                    return Err((Trilean::Unknown, "boundedness of the guard change undecided".into()))
                }
            }
            let mag = match leading_constant(side).or_else(|| side.as_constant()) {
                Some(c) if side.as_constant().is_some() => c.abs_if_known(),
                _ => None,
            };
            kappa = match (kappa, mag) {
                (Some(k), Some(m)) => match k.sub(&m).sign() {
                    Sign::Positive | Sign::Zero => Some(k),
                    Sign::Negative => Some(m),
                    Sign::Unknown => Some(k.add(&m)),
                },
                (None, Some(m)) => Some(m),
                (k, None) => k.or(Some(SymExpr::zero())),
            };
        }
    }
    Ok(kappa.unwrap_or_else(SymExpr::zero))
}

/// Can `G > 0` hold before the first iteration with positive probability?
pub fn initial_guard_possible(prog: &ProgramSpec) -> Trilean {
    let g = &prog.guard.poly;
    let mut env = HashMap::new();
    for (v, init) in &prog.init {
        if let InitValue::Draw(_) = init {
            // interval evaluation is attainable only without repeated draws
            let uses = g.terms().filter(|(m, _)| m.degree_in(v) > 0).count();
            if uses > 1 {
                return Trilean::Unknown;
            }
        }
        env.insert(v.clone(), init_bounds(prog, v).0);
    }
    let hi = poly_eval_bounds(g, &env).hi;
    match hi.eventual_sign() {
        Sign::Positive => Trilean::True,
        Sign::Negative | Sign::Zero => Trilean::False,
        Sign::Unknown => Trilean::Unknown,
    }
}

fn margin_rule(ctx: &RuleContext<'_>, rule: RuleKind) -> RuleResult {
    let lo = ctx.bounds_of(&ctx.mexp.mexp).lo;
    let Some(f) = lo.finite() else {
        return RuleResult::unknown(rule, "no finite lower bound for the martingale expression");
    };
    let strict = rule == RuleKind::Repulsing;
    let mut constants = Vec::new();
    match f.eventual_sign() {
        Sign::Positive => match non_decaying(f) {
            Trilean::True => constants.push(("epsilon", eventual_margin(f).to_string())),
            Trilean::False if strict => {
                return RuleResult::failed(rule, "the expected increase vanishes asymptotically")
            }
            Trilean::False => {}
            Trilean::Unknown if strict => {
                return RuleResult::unknown(rule, "growth of the expected increase undecided")
            }
            Trilean::Unknown => {}
        },
        Sign::Zero if !strict => {}
        Sign::Zero | Sign::Negative => {
            return RuleResult::failed(rule, format!("lower bound {lo} of the martingale expression is not positive"))
        }
        Sign::Unknown => return RuleResult::unknown(rule, format!("eventual sign of {lo} undecided")),
    }
    let kappa = match bounded_differences(ctx) {
        Ok(k) => k,
        Err((Trilean::False, why)) => return RuleResult::failed(rule, why),
        Err((_, why)) => return RuleResult::unknown(rule, why),
    };
    match initial_guard_possible(ctx.prog) {
        Trilean::True => {}
        Trilean::False => return RuleResult::failed(rule, "the loop is never entered"),
        Trilean::Unknown => return RuleResult::unknown(rule, "cannot tell whether the loop is entered"),
    }
    constants.push(("kappa", kappa.to_string()));
    RuleResult {
        rule,
        applicable: Trilean::True,
        certified: Trilean::True,
        witness: Some(ctx.witness(&lo, &constants, None)),
        reason: None,
    }
}

/// Certifies non-AST: `MEXP >= eps` eventually with bounded differences.
pub fn rast_rule(ctx: &RuleContext<'_>) -> RuleResult {
    margin_rule(ctx, RuleKind::Repulsing)
}

/// Certifies non-PAST: `MEXP >= 0` eventually with bounded differences.
pub fn rpast_rule(ctx: &RuleContext<'_>) -> RuleResult {
    margin_rule(ctx, RuleKind::NonPast)
}

#[derive(Clone, Copy, Debug)]
pub struct AnalysisConfig {
    pub moments: MomentConfig,
    pub branch_cap: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            moments: MomentConfig::default(),
            branch_cap: DEFAULT_BRANCH_CAP,
        }
    }
}

/// Wall-clock milliseconds per analysis phase.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub parse_ms: f64,
    pub moments_ms: f64,
    pub bounds_ms: f64,
    pub rules_ms: f64,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub verdict: Verdict,
    pub phases: PhaseTimes,
    pub mexp: Option<MartingaleExpression>,
    pub bounds: BoundStore,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Runs the whole pipeline on a validated program.
pub fn analyze(prog: &ProgramSpec, config: &AnalysisConfig) -> Result<Analysis, AnalysisError> {
    let mut phases = PhaseTimes::default();
    let mut notes = Vec::new();
    let assumptions: Vec<String> = prog.assumptions.iter().map(|a| format!("{a} > 0")).collect();

    let t = Instant::now();
    let mut session = MomentSession::with_config(prog, config.moments);
    let mexp = martingale_expression(&mut session, config.branch_cap);
    match session.closed_form_of(&prog.guard.poly) {
        Ok(f) => notes.push(format!("E[G] after n iterations: {f}")),
        Err(e) => notes.push(format!("no closed form for E[G]: {e}")),
    }
    phases.moments_ms = ms(t);

    let t = Instant::now();
    let raw = compute_bounds(prog);
    let bounds = guard_refined_bounds(prog, &raw);
    phases.bounds_ms = ms(t);

    let t = Instant::now();
    let mexp = match mexp {
        Ok(m) => m,
        Err(e) => {
            notes.push(format!("martingale expression unavailable: {e}"));
            phases.rules_ms = ms(t);
            let witnesses = [
                RuleKind::RankingSupermartingale,
                RuleKind::Supermartingale,
                RuleKind::Repulsing,
                RuleKind::NonPast,
            ]
            .into_iter()
            .map(|k| RuleResult::unknown(k, e.to_string()))
            .collect();
            return Ok(Analysis {
                verdict: Verdict {
                    past: Trilean::Unknown,
                    ast: Trilean::Unknown,
                    witnesses,
                    assumptions,
                    notes,
                },
                phases,
                mexp: None,
                bounds,
            });
        }
    };
    let ctx = RuleContext::new(prog, &mexp, &bounds);
    let rsm = rsm_rule(&ctx);
    let sm = sm_rule(&ctx);
    let rast = rast_rule(&ctx);
    let rpast = rpast_rule(&ctx);
    phases.rules_ms = ms(t);

    let verdict = combine(vec![rsm, sm, rast, rpast], assumptions, notes)?;
    Ok(Analysis {
        verdict,
        phases,
        mexp: Some(mexp),
        bounds,
    })
}

/// Combines the four rule results with logical closure.
pub fn combine(witnesses: Vec<RuleResult>, assumptions: Vec<String>, notes: Vec<String>) -> Result<Verdict, AnalysisError> {
    let certified = |k: RuleKind| witnesses.iter().any(|w| w.rule == k && w.certified.is_true());
    let (rsm, sm, rast, rpast) = (
        certified(RuleKind::RankingSupermartingale),
        certified(RuleKind::Supermartingale),
        certified(RuleKind::Repulsing),
        certified(RuleKind::NonPast),
    );
    if rsm && rpast {
        return Err(AnalysisError::InternalSoundness("both PAST and non-PAST certified".into()));
    }
    if sm && rast {
        return Err(AnalysisError::InternalSoundness("both AST and non-AST certified".into()));
    }
    let mut past = if rsm {
        Trilean::True
    } else if rpast {
        Trilean::False
    } else {
        Trilean::Unknown
    };
    let mut ast = if sm {
        Trilean::True
    } else if rast {
        Trilean::False
    } else {
        Trilean::Unknown
    };
    if past == Trilean::True {
        if ast == Trilean::False {
            return Err(AnalysisError::InternalSoundness("PAST certified but AST refuted".into()));
        }
        ast = Trilean::True;
    }
    if ast == Trilean::False {
        past = Trilean::False;
    }
    Ok(Verdict {
        past,
        ast,
        witnesses,
        assumptions,
        notes,
    })
}

/// The verdict for a validated program under the default configuration.
pub fn decide(prog: &ProgramSpec) -> Result<Verdict, AnalysisError> {
    analyze(prog, &AnalysisConfig::default()).map(|a| a.verdict)
}
