mod support;

use std::path::PathBuf;

use proptest::prelude::*;

use probterm_core::{FrontendError, ProgramSpec};

fn corpus() -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks");
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none() {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.push((name, std::fs::read_to_string(&path).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn corpus_round_trips() {
    let programs = corpus();
    assert!(programs.len() >= 15);
    for (name, text) in programs {
        let p = ProgramSpec::from_source(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let printed = p.to_source();
        let q = ProgramSpec::from_source(&printed).unwrap_or_else(|e| panic!("{name} reprinted: {e}\n{printed}"));
        assert_eq!(p, q, "{name}\n{printed}");
        assert_eq!(printed, q.to_source(), "{name}: printing is not a fixed point");
    }
}

proptest! {
    #[test]
    fn generated_programs_round_trip(seed in any::<u64>()) {
        let text = support::oracle::random_program(seed).render();
        let p = ProgramSpec::from_source(&text).unwrap();
        let q = ProgramSpec::from_source(&p.to_source()).unwrap();
        prop_assert_eq!(p, q);
    }
}

/// A body statement of a fuzzed program.
#[derive(Clone, Debug)]
enum Stmt {
    /// `u = RV(uniform, 0, 1)`
    Draw,
    /// `v = <terms>`; each term is a list of factor names, empty meaning 1.
    Update(usize, Vec<Vec<&'static str>>),
}

const VARS: [&str; 3] = ["x", "y", "z"];

#[derive(Clone, Debug)]
struct Fuzzed {
    inits: [bool; 3],
    guard: &'static str,
    body: Vec<Stmt>,
}

impl Fuzzed {
    fn render(&self) -> String {
        let mut s = String::new();
        for (i, v) in VARS.iter().enumerate() {
            if self.inits[i] {
                s.push_str(&format!("{v} = {}\n", i + 1));
            }
        }
        s.push_str(&format!("while {} > c:\n", self.guard));
        for st in &self.body {
            match st {
                Stmt::Draw => s.push_str("    u = RV(uniform, 0, 1)\n"),
                Stmt::Update(v, terms) => {
                    let parts: Vec<String> = terms
                        .iter()
                        .map(|t| if t.is_empty() { "1".to_string() } else { t.join("*") })
                        .collect();
                    s.push_str(&format!("    {} = {}\n", VARS[*v], parts.join(" + ")));
                }
            }
        }
        s
    }

    /// Independent statement of the structural rules.
    fn valid(&self) -> bool {
        let updated: Vec<usize> = self
            .body
            .iter()
            .filter_map(|s| match s {
                Stmt::Update(v, _) => Some(*v),
                _ => None,
            })
            .collect();
        if updated.is_empty() {
            return false;
        }
        let drawn_at = self.body.iter().position(|s| matches!(s, Stmt::Draw));
        // an unassigned name is a symbol and may appear anywhere
        match VARS.iter().position(|v| *v == self.guard) {
            Some(gi) if !self.inits[gi] && updated.contains(&gi) => return false,
            None if drawn_at.is_some() => return false,
            _ => {}
        }
        for (pos, st) in self.body.iter().enumerate() {
            let Stmt::Update(v, terms) = st else { continue };
            let me = VARS[*v];
            for t in terms {
                let self_deg = t.iter().filter(|f| **f == me).count();
                if self_deg > 1 {
                    return false;
                }
                if self_deg == 1 && !self.inits[*v] {
                    return false;
                }
                for f in t {
                    if *f == me {
                        continue;
                    }
                    if *f == "u" {
                        if drawn_at.is_some_and(|d| d > pos) {
                            return false;
                        }
                        continue;
                    }
                    let j = VARS.iter().position(|w| w == f).unwrap();
                    let upd_pos = self.body.iter().position(|s| matches!(s, Stmt::Update(w, _) if *w == j));
                    if upd_pos.is_none() && !self.inits[j] {
                        // neither assigned nor initialized: the name is a symbol
                        continue;
                    }
                    if self_deg == 1 {
                        // the coefficient of the variable itself may only use draws
                        return false;
                    }
                    if upd_pos.is_some_and(|p| p > pos) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn fuzzed() -> impl Strategy<Value = Fuzzed> {
    let factor = prop::sample::select(vec!["x", "y", "z", "u"]);
    let term = prop::collection::vec(factor, 0..=2);
    let update = (0usize..3, prop::collection::vec(term, 1..=3));
    (
        prop::array::uniform3(any::<bool>()),
        prop::sample::select(vec!["x", "y", "z", "u"]),
        prop::collection::vec(update, 1..=3),
        prop::option::of(0usize..=3),
    )
        .prop_map(|(inits, guard, updates, draw)| {
            // each variable is updated at most once
            let mut seen = [false; 3];
            let mut body: Vec<Stmt> = updates
                .into_iter()
                .filter(|(v, _)| !std::mem::replace(&mut seen[*v], true))
                .map(|(v, t)| Stmt::Update(v, t))
                .collect();
            if let Some(at) = draw {
                body.insert(at.min(body.len()), Stmt::Draw);
            }
            Fuzzed { inits, guard, body }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn acceptance_matches_dependency_rules(f in fuzzed()) {
        let text = f.render();
        let parsed = ProgramSpec::from_source(&text);
        prop_assert_eq!(parsed.is_ok(), f.valid(), "{}\n{:?}", text, parsed.err());
    }
}

fn structure_error(src: &str) -> FrontendError {
    ProgramSpec::from_source(src).unwrap_err()
}

#[test]
fn diagnostics_name_the_variable() {
    let e = structure_error("x = 1\nwhile x > 0:\n    x = x**2");
    assert_eq!(e.variable(), Some("x"));
    let e = structure_error("x = 1\ny = 1\nwhile x > 0:\n    x = x + y\n    y = y + 1");
    assert_eq!(e.variable(), Some("x"));
    let e = structure_error("x = 1\nwhile x > 0:\n    x = x + s\n    s = RV(gauss, 0, 1)");
    assert!(e.to_string().contains('s'), "{e}");
}

#[test]
fn rejects_bad_distributions() {
    assert!(matches!(
        structure_error("x = 1\nwhile x > 0:\n    s = RV(poisson, 1)\n    x = x - s"),
        FrontendError::UnknownDistribution { .. }
    ));
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    s = RV(uniform, 0)\n    x = x - s").is_err());
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    s = RV(bernoulli, 3/2)\n    x = x - s").is_err());
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    s = RV(uniform, 0, x)\n    x = x - s").is_err());
}

#[test]
fn rejects_probabilities_that_do_not_sum_to_one() {
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    x = x + 1 @1/2; x - 1 @1/3").is_err());
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    x = x + 1 @3/2; x - 1").is_err());
    assert!(ProgramSpec::from_source("x = 1\nwhile x > 0:\n    x = x + 1 @1/2; x - 1 @1/2").is_ok());
}

#[test]
fn guard_normalization() {
    let p = ProgramSpec::from_source("x = 1\ny = 2\nwhile x**2 + y < c:\n    x = x + 1").unwrap();
    assert_eq!(probterm_core::algebra::fmt_polynomial(&p.guard.poly), "-x**2 - y + c");
}

proptest! {
    #[test]
    fn guard_normalization_preserves_the_comparison(
        a in -3i64..=3, b in -3i64..=3, c in -3i64..=3,
        greater in any::<bool>(),
        x in -5i64..=5, y in -5i64..=5,
    ) {
        let cop = if greater { ">" } else { "<" };
        let lhs = format!("{a}*x**2 + {b}*y");
        let rhs = format!("{c}*x*y + 1");
        let src = format!("x = 1\ny = 1\nwhile {lhs} {cop} {rhs}:\n    x = x + 1");
        let p = ProgramSpec::from_source(&src).unwrap();
        let l = a * x * x + b * y;
        let r = c * x * y + 1;
        let original = if greater { l > r } else { l < r };
        let env = |name: &str| match name {
            "x" => Some(probterm_core::algebra::int(x)),
            "y" => Some(probterm_core::algebra::int(y)),
            _ => None,
        };
        let g = p.guard.poly.map_coeffs(|q| q.as_rational().unwrap()).eval(&env).unwrap();
        prop_assert_eq!(g > probterm_core::algebra::int(0), original);
    }
}
