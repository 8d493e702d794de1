//! Machine-readable analysis report.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::algebra::Trilean;
use crate::rules::{PhaseTimes, RuleResult, Verdict};

/// One analyzed program: `{program, past, ast, witnesses, assumptions, phases}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub program: String,
    pub past: Trilean,
    pub ast: Trilean,
    pub witnesses: Vec<RuleResult>,
    pub assumptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    pub phases: PhaseTimes,
}

impl AnalysisReport {
    pub fn new(program: impl Into<String>, verdict: Verdict, phases: PhaseTimes) -> Self {
        AnalysisReport {
            program: program.into(),
            past: verdict.past,
            ast: verdict.ast,
            witnesses: verdict.witnesses,
            assumptions: verdict.assumptions,
            notes: verdict.notes,
            phases,
        }
    }

    /// Drops wall-clock data so repeated runs compare equal.
    pub fn canonical(mut self) -> Self {
        self.phases = PhaseTimes::default();
        self
    }

    /// Human-readable block: verdict lines first, then witnesses.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let w = &mut out;
        writeln!(w, "{}", self.program).ok();
        writeln!(w, "PAST: {}", self.past).ok();
        writeln!(w, "AST: {}", self.ast).ok();
        for r in self.witnesses.iter().filter(|r| r.certified.is_true()) {
            writeln!(w, "  {} proves {}", r.rule, r.rule.proves()).ok();
            if let Some(wit) = &r.witness {
                writeln!(w, "    G = {}", wit.guard).ok();
                writeln!(w, "    E[G' - G] = {}", wit.mexp).ok();
                writeln!(w, "    eventual bound: {}", wit.bound).ok();
                if let Some(b) = &wit.branch {
                    writeln!(w, "    branch: {b}").ok();
                }
                for (k, v) in &wit.constants {
                    writeln!(w, "    {k} = {v}").ok();
                }
            }
        }
        for a in &self.assumptions {
            writeln!(w, "  assuming {a}").ok();
        }
        for n in &self.notes {
            writeln!(w, "  note: {n}").ok();
        }
        out
    }
}
