//! Closed-form raw moments and supports against sampling.

use std::collections::HashMap;

use num_traits::ToPrimitive;
use probterm_core::distributions::Endpoint;
use probterm_core::simulator::{Sampler, Simulator};
use probterm_core::{DistKind, DistSpec, SymExpr};

const SAMPLES: usize = 1_000_000;

fn r(n: i64, d: i64) -> SymExpr {
    SymExpr::from_ratio(n, d)
}

fn cases() -> Vec<DistSpec> {
    use DistKind::*;
    vec![
        DistSpec::new(Uniform, vec![r(-1, 1), r(3, 1)]),
        DistSpec::new(Gauss, vec![r(1, 1), r(4, 1)]),
        DistSpec::new(Laplace, vec![r(1, 1), r(2, 1)]),
        DistSpec::new(Bernoulli, vec![r(3, 10)]),
        DistSpec::new(Binomial, vec![r(10, 1), r(1, 4)]),
        DistSpec::new(Geometric, vec![r(1, 3)]),
        DistSpec::new(Hypergeometric, vec![r(20, 1), r(7, 1), r(5, 1)]),
        DistSpec::new(Exponential, vec![r(3, 2)]),
        DistSpec::new(Beta, vec![r(2, 1), r(5, 1)]),
        DistSpec::new(ChiSquared, vec![r(3, 1)]),
        DistSpec::new(Rayleigh, vec![r(2, 1)]),
    ]
}

fn draw(d: &DistSpec, seed: u64) -> Vec<f64> {
    let sampler = Sampler::new(d, &HashMap::new()).unwrap();
    let mut rng = Simulator::trial_rng(seed, 0);
    (0..SAMPLES).map(|_| sampler.sample(&mut rng)).collect()
}

fn to_f64(e: &SymExpr) -> f64 {
    e.as_rational().unwrap().to_f64().unwrap()
}

#[test]
fn raw_moments_match_sample_means() {
    let mut failures = Vec::new();
    for (i, d) in cases().iter().enumerate() {
        let xs = draw(d, 100 + i as u64);
        for k in 1..=4u32 {
            let Some(exact) = d.raw_moment(k, 8) else {
                assert!(d.kind == DistKind::Rayleigh && k % 2 == 1, "{:?} order {k} missing", d.kind);
                continue;
            };
            let exact = to_f64(&exact);
            let powers: Vec<f64> = xs.iter().map(|x| x.powi(k as i32)).collect();
            let n = powers.len() as f64;
            let mean = powers.iter().sum::<f64>() / n;
            let var = powers.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0);
            let se = (var / n).sqrt();
            if (mean - exact).abs() > 5.0 * se.max(1e-12) {
                failures.push(format!("{:?} E[X^{k}]: exact {exact}, sampled {mean} +- {se}", d.kind));
            }
        }
    }
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn samples_stay_in_support() {
    for (i, d) in cases().iter().enumerate() {
        let s = d.support();
        let lo = match &s.lo {
            Endpoint::NegInf => f64::NEG_INFINITY,
            Endpoint::At(e) => to_f64(e),
            Endpoint::PosInf => panic!("{:?}: lower end at +inf", d.kind),
        };
        let hi = match &s.hi {
            Endpoint::PosInf => f64::INFINITY,
            Endpoint::At(e) => to_f64(e),
            Endpoint::NegInf => panic!("{:?}: upper end at -inf", d.kind),
        };
        for x in draw(d, 200 + i as u64) {
            assert!(lo <= x && x <= hi, "{:?}: {x} outside [{lo}, {hi}]", d.kind);
        }
    }
}

#[test]
fn moment_cap_is_respected() {
    let d = DistSpec::new(DistKind::Gauss, vec![r(0, 1), r(1, 1)]);
    assert!(d.raw_moment(8, 8).is_some());
    assert!(d.raw_moment(9, 8).is_none());
    assert_eq!(d.raw_moment(0, 0), Some(SymExpr::one()));
}

#[test]
fn symbolic_parameters_give_symbolic_moments() {
    let c = SymExpr::symbol("c");
    let d = DistSpec::new(DistKind::Uniform, vec![SymExpr::zero(), c.clone()]);
    let m = d.raw_moment(2, 8).unwrap();
    assert_eq!(m, c.pow(2).scale_rational(&probterm_core::algebra::rational(1, 3)));
}
