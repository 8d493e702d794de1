//! Termination analysis for single-loop polynomial probabilistic programs.
//!
//! The pipeline is [`frontend`] (parse and validate), [`moments`] (closed
//! forms of expected monomials), [`bounds`] (asymptotic bounding functions)
//! and [`rules`] (the four proof rules and the verdict). [`simulator`] runs
//! programs with concrete constants.

pub mod algebra;
pub mod bounds;
pub mod distributions;
pub mod frontend;
pub mod moments;
pub mod report;
pub mod rules;
pub mod simulator;

pub use algebra::{ExpPoly, Extended, Interval, Polynomial, Sign, SymExpr, Trilean};
pub use distributions::{DistKind, DistSpec};
pub use frontend::{FrontendError, ProgramSpec};
pub use report::AnalysisReport;
pub use rules::{analyze, decide, Analysis, AnalysisConfig, AnalysisError, PhaseTimes, RuleKind, RuleResult, Verdict};
pub use simulator::{simulate, SimConfig, SimError, SimReport, Simulator};

use std::time::Instant;

/// Errors from analyzing program text.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Parses, validates and analyzes program text.
pub fn analyze_source(name: &str, text: &str, config: &AnalysisConfig) -> Result<AnalysisReport, Error> {
    let t = Instant::now();
    let prog = ProgramSpec::from_source(text)?;
    let parse_ms = t.elapsed().as_secs_f64() * 1e3;
    let mut a = analyze(&prog, config)?;
    a.phases.parse_ms = parse_ms;
    Ok(AnalysisReport::new(name, a.verdict, a.phases))
}
