//! Monte Carlo execution of programs with concrete constants.

use std::collections::HashMap;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use rand::distr::{Bernoulli, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, ChiSquared, Distribution, Exp, Geometric, Hypergeometric, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{Polynomial, SymExpr};
use crate::distributions::{DistKind, DistSpec};
use crate::frontend::{InitValue, ProgramSpec};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SimError {
    #[error("symbol `{0}` has no value; pass --bind {0}=<value>")]
    UnboundSymbol(String),
    #[error("symbol `{0}` must be bound to a positive value")]
    NonPositiveBinding(String),
    #[error("invalid simulation settings: {0}")]
    InvalidConfig(String),
    #[error("cannot sample {dist}: {reason}")]
    BadDistribution { dist: String, reason: String },
}

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub bindings: HashMap<String, BigRational>,
    pub runs: u64,
    pub max_steps: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistBucket {
    /// Inclusive step range.
    pub from: u64,
    pub to: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: u64,
    pub terminated: u64,
    /// Runs stopped at the step cap.
    pub censored: u64,
    /// Censored runs whose state stopped being a finite number.
    pub overflowed: u64,
    pub termination_rate: f64,
    pub rate_stderr: f64,
    pub mean_steps_terminated: Option<f64>,
    pub histogram: Vec<HistBucket>,
}

/// A polynomial with numeric coefficients over slot indices.
#[derive(Clone, Debug)]
struct NumPoly {
    terms: Vec<(f64, Vec<(usize, i32)>)>,
}

impl NumPoly {
    fn eval(&self, state: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(c, fs)| fs.iter().fold(*c, |acc, &(i, e)| acc * state[i].powi(e)))
            .sum()
    }
}

/// Sampler for one distribution with concrete parameters.
#[derive(Clone, Debug)]
pub enum Sampler {
    Point(f64),
    Uniform(Uniform<f64>),
    Normal(Normal<f64>),
    Laplace { mu: f64, b: f64 },
    Bernoulli(Bernoulli),
    Binomial(Binomial),
    Geometric(Geometric),
    Hypergeometric(Hypergeometric),
    Exp(Exp<f64>),
    Beta(Beta<f64>),
    ChiSquared(ChiSquared<f64>),
    Rayleigh(f64),
}

fn to_f64(e: &SymExpr, env: &HashMap<String, f64>) -> f64 {
    e.eval_f64(env).unwrap_or(f64::NAN)
}

fn as_count(x: f64) -> Option<u64> {
    (x >= 0.0 && x.fract() == 0.0 && x < 1e18).then_some(x as u64)
}

impl Sampler {
    pub fn new(d: &DistSpec, env: &HashMap<String, f64>) -> Result<Sampler, SimError> {
        let p: Vec<f64> = d.params.iter().map(|e| to_f64(e, env)).collect();
        let bad = |reason: String| SimError::BadDistribution {
            dist: d.to_string(),
            reason,
        };
        Ok(match d.kind {
            DistKind::Uniform if p[0] == p[1] => Sampler::Point(p[0]),
            DistKind::Uniform => Sampler::Uniform(Uniform::new_inclusive(p[0], p[1]).map_err(|e| bad(e.to_string()))?),
            DistKind::Gauss => {
                Sampler::Normal(Normal::new(p[0], p[1].max(0.0).sqrt()).map_err(|e| bad(e.to_string()))?)
            }
            DistKind::Laplace => Sampler::Laplace { mu: p[0], b: p[1] },
            DistKind::Bernoulli => Sampler::Bernoulli(Bernoulli::new(p[0]).map_err(|e| bad(e.to_string()))?),
            DistKind::Binomial => {
                let n = as_count(p[0]).ok_or_else(|| bad("trial count must be a nonnegative integer".into()))?;
                Sampler::Binomial(Binomial::new(n, p[1]).map_err(|e| bad(e.to_string()))?)
            }
            DistKind::Geometric => Sampler::Geometric(Geometric::new(p[0]).map_err(|e| bad(e.to_string()))?),
            DistKind::Hypergeometric => {
                let c: Option<Vec<u64>> = p.iter().map(|&x| as_count(x)).collect();
                let c = c.ok_or_else(|| bad("parameters must be nonnegative integers".into()))?;
                Sampler::Hypergeometric(Hypergeometric::new(c[0], c[1], c[2]).map_err(|e| bad(e.to_string()))?)
            }
            DistKind::Exponential => Sampler::Exp(Exp::new(p[0]).map_err(|e| bad(e.to_string()))?),
            DistKind::Beta => Sampler::Beta(Beta::new(p[0], p[1]).map_err(|e| bad(e.to_string()))?),
            DistKind::ChiSquared => Sampler::ChiSquared(ChiSquared::new(p[0]).map_err(|e| bad(e.to_string()))?),
            DistKind::Rayleigh => Sampler::Rayleigh(p[0]),
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Point(x) => *x,
            Sampler::Uniform(u) => u.sample(rng),
            Sampler::Normal(n) => n.sample(rng),
            Sampler::Laplace { mu, b } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                mu - b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
            }
            Sampler::Bernoulli(d) => f64::from(u8::from(d.sample(rng))),
            Sampler::Binomial(d) => d.sample(rng) as f64,
            Sampler::Geometric(d) => d.sample(rng) as f64,
            Sampler::Hypergeometric(d) => d.sample(rng) as f64,
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Beta(d) => d.sample(rng),
            Sampler::ChiSquared(d) => d.sample(rng),
            Sampler::Rayleigh(sigma) => {
                let u: f64 = rng.random();
                sigma * (-2.0 * (1.0 - u).ln()).sqrt()
            }
        }
    }
}

enum Init {
    Value(f64),
    Draw(Sampler),
}

struct Update {
    slot: usize,
    /// (cumulative probability, polynomial)
    branches: Vec<(f64, NumPoly)>,
}

/// A program compiled to floating point.
pub struct Simulator {
    slots: Vec<String>,
    init: Vec<(usize, Init)>,
    rvs: Vec<(usize, Sampler)>,
    updates: Vec<Update>,
    guard: NumPoly,
}

/// Checks that `bindings` cover the program's symbols with positive values.
pub fn check_bindings(prog: &ProgramSpec, bindings: &HashMap<String, BigRational>) -> Result<HashMap<String, f64>, SimError> {
    let mut env = HashMap::new();
    for s in &prog.symbols {
        let v = bindings.get(s).ok_or_else(|| SimError::UnboundSymbol(s.clone()))?;
        if !v.is_positive() {
            return Err(SimError::NonPositiveBinding(s.clone()));
        }
        env.insert(s.clone(), v.to_f64().unwrap_or(f64::NAN));
    }
    Ok(env)
}

impl Simulator {
    pub fn new(prog: &ProgramSpec, bindings: &HashMap<String, BigRational>) -> Result<Simulator, SimError> {
        let env = check_bindings(prog, bindings)?;
        Self::with_env(prog, &env)
    }

    /// Compiles with float symbol values; symbols missing from `env` are an error.
    pub fn with_env(prog: &ProgramSpec, env: &HashMap<String, f64>) -> Result<Simulator, SimError> {
        if let Some(s) = prog.symbols.iter().find(|s| !env.contains_key(*s)) {
            return Err(SimError::UnboundSymbol(s.clone()));
        }
        let mut slots = prog.state_vars();
        for (v, _) in &prog.body_rv {
            slots.push(v.clone());
        }
        let index: HashMap<&str, usize> = slots.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let compile = |p: &Polynomial| NumPoly {
            terms: p
                .terms()
                .map(|(m, c)| {
                    let fs = m.factors().iter().map(|(v, e)| (index[v.as_str()], *e as i32)).collect();
                    (to_f64(c, env), fs)
                })
                .collect(),
        };
        let mut init = Vec::new();
        for (v, val) in &prog.init {
            let i = match val {
                InitValue::Const(c) => Init::Value(to_f64(c, env)),
                InitValue::Draw(d) => Init::Draw(Sampler::new(d, env)?),
            };
            init.push((index[v.as_str()], i));
        }
        let mut rvs = Vec::new();
        for (v, d) in &prog.body_rv {
            rvs.push((index[v.as_str()], Sampler::new(d, env)?));
        }
        let mut updates = Vec::new();
        for (v, u) in &prog.body_updates {
            let mut acc = 0.0;
            let branches = u
                .branches
                .iter()
                .map(|(p, q)| {
                    acc += to_f64(q, env);
                    (acc, compile(p))
                })
                .collect();
            updates.push(Update {
                slot: index[v.as_str()],
                branches,
            });
        }
        Ok(Simulator {
            guard: compile(&prog.guard.poly),
            slots,
            init,
            rvs,
            updates,
        })
    }

    pub fn slot(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s == name)
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn init_state<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut state = vec![0.0; self.slots.len()];
        for (i, init) in &self.init {
            state[*i] = match init {
                Init::Value(x) => *x,
                Init::Draw(s) => s.sample(rng),
            };
        }
        state
    }

    pub fn guard_holds(&self, state: &[f64]) -> bool {
        self.guard.eval(state) > 0.0
    }

    /// Runs the loop body once, ignoring the guard.
    pub fn step<R: Rng + ?Sized>(&self, state: &mut [f64], rng: &mut R) {
        for (i, s) in &self.rvs {
            state[*i] = s.sample(rng);
        }
        for u in &self.updates {
            let pick = if u.branches.len() == 1 {
                0
            } else {
                let r: f64 = rng.random();
                u.branches.iter().position(|(c, _)| r < *c).unwrap_or(u.branches.len() - 1)
            };
            state[u.slot] = u.branches[pick].1.eval(state);
        }
    }

    /// The deterministic generator of trial `trial`.
    pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        rng
    }

    fn run_trial(&self, seed: u64, trial: u64, max_steps: u64) -> Outcome {
        let mut rng = Self::trial_rng(seed, trial);
        let mut state = self.init_state(&mut rng);
        let mut steps = 0u64;
        loop {
            if state.iter().any(|x| !x.is_finite()) {
                return Outcome::Overflow;
            }
            if !self.guard_holds(&state) {
                return Outcome::Terminated(steps);
            }
            if steps == max_steps {
                return Outcome::Censored;
            }
            self.step(&mut state, &mut rng);
            steps += 1;
        }
    }

    pub fn simulate(&self, runs: u64, max_steps: u64, seed: u64) -> SimReport {
        let outcomes: Vec<Outcome> = (0..runs)
            .into_par_iter()
            .map(|t| self.run_trial(seed, t, max_steps))
            .collect();
        aggregate(runs, &outcomes)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Outcome {
    Terminated(u64),
    Censored,
    Overflow,
}

fn bucket(steps: u64) -> usize {
    (64 - (steps + 1).leading_zeros() - 1) as usize
}

fn aggregate(runs: u64, outcomes: &[Outcome]) -> SimReport {
    let mut terminated = 0u64;
    let mut censored = 0u64;
    let mut overflowed = 0u64;
    let mut total: u128 = 0;
    let mut hist: Vec<u64> = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Terminated(s) => {
                terminated += 1;
                total += u128::from(*s);
                let b = bucket(*s);
                if hist.len() <= b {
                    hist.resize(b + 1, 0);
                }
                hist[b] += 1;
            }
            Outcome::Censored => censored += 1,
            Outcome::Overflow => {
                censored += 1;
                overflowed += 1;
            }
        }
    }
    let rate = if runs == 0 { 0.0 } else { terminated as f64 / runs as f64 };
    let histogram = hist
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, c)| HistBucket {
            from: (1u64 << k) - 1,
            to: (1u64 << (k + 1)) - 2,
            count: *c,
        })
        .collect();
    SimReport {
        runs,
        terminated,
        censored,
        overflowed,
        termination_rate: rate,
        rate_stderr: if runs == 0 { 0.0 } else { (rate * (1.0 - rate) / runs as f64).sqrt() },
        mean_steps_terminated: (terminated > 0).then(|| total as f64 / terminated as f64),
        histogram,
    }
}

/// Validates `cfg` and runs the simulation.
pub fn simulate(prog: &ProgramSpec, cfg: &SimConfig) -> Result<SimReport, SimError> {
    if cfg.runs == 0 {
        return Err(SimError::InvalidConfig("runs must be positive".into()));
    }
    if cfg.max_steps == 0 {
        return Err(SimError::InvalidConfig("max steps must be positive".into()));
    }
    let sim = Simulator::new(prog, &cfg.bindings)?;
    Ok(sim.simulate(cfg.runs, cfg.max_steps, cfg.seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(bind: &[(&str, i64, i64)], runs: u64, max_steps: u64) -> SimConfig {
        SimConfig {
            bindings: bind
                .iter()
                .map(|&(s, n, d)| (s.to_string(), BigRational::new(n.into(), d.into())))
                .collect(),
            runs,
            max_steps,
            seed: 7,
        }
    }

    #[test]
    fn countdown_takes_five_steps() {
        let p = ProgramSpec::from_source("x = 5\nwhile x > 0:\n x = x - 1").unwrap();
        let r = simulate(&p, &cfg(&[], 100, 100)).unwrap();
        assert_eq!(r.terminated, 100);
        assert_eq!(r.termination_rate, 1.0);
        assert_eq!(r.mean_steps_terminated, Some(5.0));
    }

    #[test]
    fn unbound_symbol_and_zero_runs() {
        let p = ProgramSpec::from_source("x = x0\nwhile x > 0:\n x = x - c").unwrap();
        assert!(matches!(simulate(&p, &cfg(&[("c", 1, 1)], 10, 10)), Err(SimError::UnboundSymbol(s)) if s == "x0"));
        assert!(matches!(
            simulate(&p, &cfg(&[("c", 1, 1), ("x0", 1, 1)], 0, 10)),
            Err(SimError::InvalidConfig(_))
        ));
    }

    #[test]
    fn reproducible() {
        let p = ProgramSpec::from_source("x = x0\nwhile x > 0:\n x = x+c @1/2; x-c").unwrap();
        let c = cfg(&[("c", 1, 1), ("x0", 3, 1)], 500, 1000);
        assert_eq!(simulate(&p, &c).unwrap(), simulate(&p, &c).unwrap());
    }

    #[test]
    fn histogram_buckets() {
        assert_eq!(bucket(0), 0);
        assert_eq!(bucket(1), 1);
        assert_eq!(bucket(2), 1);
        assert_eq!(bucket(3), 2);
    }
}
