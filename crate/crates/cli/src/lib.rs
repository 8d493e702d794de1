//! Command-line front end: analysis, benchmark suites and simulation.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use probterm_core::algebra::parse_rational;
use probterm_core::{
    analyze_source, simulate, AnalysisConfig, AnalysisReport, Error, PhaseTimes, ProgramSpec, SimConfig, SimError,
    Trilean, Verdict,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DISAGREE: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "probterm", version, about = "Prove or refute (positive) almost-sure termination of probabilistic loops")]
#[command(args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Program files or directories of program files to analyze.
    #[arg(long, num_args = 1..)]
    benchmarks: Vec<PathBuf>,

    /// Emit one JSON document per program.
    #[arg(long)]
    json: bool,

    /// Per-program timeout in seconds.
    #[arg(long, default_value_t = 50.0)]
    timeout: f64,

    /// Zero the timing fields so output is reproducible.
    #[arg(long)]
    canonical: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare verdicts against the expectations in a TOML manifest.
    Suite {
        manifest: PathBuf,
        #[arg(long, default_value_t = 50.0)]
        timeout: f64,
        #[arg(long)]
        json: bool,
    },
    /// Estimate termination statistics by running the program.
    Simulate {
        path: PathBuf,
        /// Symbol value, `name=value`; repeat for every symbol.
        #[arg(long = "bind", value_parser = parse_binding)]
        bind: Vec<(String, BigRational)>,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 10_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
}

fn parse_binding(s: &str) -> Result<(String, BigRational), String> {
    let (name, value) = s.split_once('=').ok_or("expected name=value")?;
    let q = parse_rational(value).ok_or_else(|| format!("`{value}` is not a number"))?;
    Ok((name.trim().to_string(), q))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    match cli.command {
        Some(Command::Suite { manifest, timeout, json }) => run_suite(&manifest, timeout, json, out, err),
        Some(Command::Simulate {
            path,
            bind,
            runs,
            max_steps,
            seed,
            json,
        }) => {
            let cfg = SimConfig {
                bindings: bind.into_iter().collect(),
                runs,
                max_steps,
                seed,
            };
            run_simulate(&path, &cfg, json, out, err)
        }
        None => {
            if cli.benchmarks.is_empty() {
                let _ = writeln!(err, "error: nothing to analyze; pass --benchmarks <path>...");
                return EXIT_INPUT;
            }
            run_analyze(&cli.benchmarks, cli.json, cli.timeout, cli.canonical, out, err)
        }
    }
}

/// Outcome of analyzing one file.
pub enum FileOutcome {
    Report(AnalysisReport),
    TimedOut(AnalysisReport),
    Input(String),
    Internal(String),
}

fn timeout_report(name: &str, secs: f64) -> AnalysisReport {
    let verdict = Verdict {
        past: Trilean::Unknown,
        ast: Trilean::Unknown,
        witnesses: Vec::new(),
        assumptions: Vec::new(),
        notes: vec![format!("timed out after {secs} s")],
    };
    AnalysisReport::new(name, verdict, PhaseTimes::default())
}

/// Reads and analyzes one file on a worker thread, giving up after `timeout`.
pub fn analyze_file(path: &Path, timeout: f64) -> FileOutcome {
    let name = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return FileOutcome::Input(format!("{name}: {e}")),
    };
    let (tx, rx) = mpsc::channel();
    let worker_name = name.clone();
    thread::spawn(move || {
        let r = analyze_source(&worker_name, &text, &AnalysisConfig::default());
        let _ = tx.send(r);
    });
    match rx.recv_timeout(Duration::from_secs_f64(timeout.max(0.001))) {
        Ok(Ok(report)) => FileOutcome::Report(report),
        Ok(Err(Error::Frontend(e))) => FileOutcome::Input(format!("{name}: {e}")),
        Ok(Err(Error::Analysis(e))) => FileOutcome::Internal(format!("{name}: {e}")),
        Err(mpsc::RecvTimeoutError::Timeout) => FileOutcome::TimedOut(timeout_report(&name, timeout)),
        Err(mpsc::RecvTimeoutError::Disconnected) => {
            FileOutcome::Internal(format!("{name}: analysis thread panicked"))
        }
    }
}

/// Expands directories into their files, sorted by name.
fn expand(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = std::fs::read_dir(p)
                .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
                .unwrap_or_default();
            files.retain(|f| f.is_file() && f.extension().is_none_or(|e| e != "toml" && e != "md"));
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    out
}

pub fn run_analyze(
    paths: &[PathBuf],
    json: bool,
    timeout: f64,
    canonical: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let mut code = EXIT_OK;
    for path in expand(paths) {
        let report = match analyze_file(&path, timeout) {
            FileOutcome::Report(r) | FileOutcome::TimedOut(r) => r,
            FileOutcome::Input(msg) => {
                let _ = writeln!(err, "error: {msg}");
                code = code.max(EXIT_INPUT);
                continue;
            }
            FileOutcome::Internal(msg) => {
                let _ = writeln!(err, "internal error: {msg}");
                code = code.max(EXIT_INTERNAL);
                continue;
            }
        };
        let report = if canonical { report.canonical() } else { report };
        if json {
            let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("serializable"));
        } else {
            let _ = writeln!(out, "{}", report.to_text());
        }
    }
    code
}

/// A `[[benchmark]]` entry of a suite manifest.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub past: Trilean,
    pub ast: Trilean,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct Manifest {
    #[serde(rename = "benchmark")]
    pub benchmarks: Vec<ManifestEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Agreement {
    Exact,
    SoundMaybe,
    Disagree,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub program: String,
    pub expected_past: Trilean,
    pub expected_ast: Trilean,
    pub past: Trilean,
    pub ast: Trilean,
    pub agreement: Agreement,
    pub timed_out: bool,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

fn conflict(expected: Trilean, got: Trilean) -> bool {
    matches!(
        (expected, got),
        (Trilean::True, Trilean::False) | (Trilean::False, Trilean::True)
    )
}

pub fn classify(expected: (Trilean, Trilean), got: (Trilean, Trilean)) -> Agreement {
    if conflict(expected.0, got.0) || conflict(expected.1, got.1) {
        Agreement::Disagree
    } else if expected == got {
        Agreement::Exact
    } else {
        Agreement::SoundMaybe
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub exact: usize,
    pub sound_maybe: usize,
    pub disagreements: usize,
    pub errors: usize,
}

pub fn summarize(rows: &[SuiteRow]) -> SuiteSummary {
    let mut s = SuiteSummary::default();
    for r in rows {
        if r.error.is_some() {
            s.errors += 1;
        }
        match r.agreement {
            Agreement::Exact => s.exact += 1,
            Agreement::SoundMaybe => s.sound_maybe += 1,
            Agreement::Disagree => s.disagreements += 1,
        }
    }
    s
}

/// Runs every manifest entry, concurrently, and returns rows in manifest order.
pub fn suite_rows(manifest_path: &Path, timeout: f64) -> Result<Vec<SuiteRow>, String> {
    let text = std::fs::read_to_string(manifest_path).map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    let manifest: Manifest = toml::from_str(&text).map_err(|e| format!("{}: {e}", manifest_path.display()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let rows = thread::scope(|s| {
        let handles: Vec<_> = manifest
            .benchmarks
            .iter()
            .map(|entry| {
                let path = base.join(&entry.path);
                s.spawn(move || {
                    let start = Instant::now();
                    let outcome = analyze_file(&path, timeout);
                    let seconds = start.elapsed().as_secs_f64();
                    let (past, ast, timed_out, error) = match outcome {
                        FileOutcome::Report(r) => (r.past, r.ast, false, None),
                        FileOutcome::TimedOut(r) => (r.past, r.ast, true, None),
                        FileOutcome::Input(m) | FileOutcome::Internal(m) => {
                            (Trilean::Unknown, Trilean::Unknown, false, Some(m))
                        }
                    };
                    SuiteRow {
                        program: entry.path.clone(),
                        expected_past: entry.past,
                        expected_ast: entry.ast,
                        past,
                        ast,
                        agreement: classify((entry.past, entry.ast), (past, ast)),
                        timed_out,
                        seconds,
                        error,
                    }
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("suite worker"))
            .collect::<Vec<_>>()
    });
    Ok(rows)
}

fn pair(a: Trilean, b: Trilean) -> String {
    format!("{}/{}", a.answer(), b.answer())
}

pub fn run_suite(manifest: &Path, timeout: f64, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let rows = match suite_rows(manifest, timeout) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let summary = summarize(&rows);
    if json {
        let doc = serde_json::json!({ "rows": rows, "summary": summary });
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&doc).expect("serializable"));
    } else {
        let width = rows.iter().map(|r| r.program.len()).max().unwrap_or(7).max(7);
        let _ = writeln!(out, "{:<width$}  {:<11}  {:<11}  {:<11}  time", "program", "expected", "got", "agree");
        for r in &rows {
            let agree = match r.agreement {
                Agreement::Exact => "yes",
                Agreement::SoundMaybe => "maybe",
                Agreement::Disagree => "NO",
            };
            let mut time = format!("{:.3}s", r.seconds);
            if r.timed_out {
                time.push_str(" (timeout)");
            }
            let _ = writeln!(
                out,
                "{:<width$}  {:<11}  {:<11}  {:<11}  {time}",
                r.program,
                pair(r.expected_past, r.expected_ast),
                pair(r.past, r.ast),
                agree
            );
            if let Some(e) = &r.error {
                let _ = writeln!(err, "error: {e}");
            }
        }
        let _ = writeln!(
            out,
            "{} programs: {} exact, {} sound-but-Maybe, {} disagreements",
            rows.len(),
            summary.exact,
            summary.sound_maybe,
            summary.disagreements
        );
    }
    if summary.disagreements == 0 {
        EXIT_OK
    } else {
        EXIT_DISAGREE
    }
}

pub fn run_simulate(path: &Path, cfg: &SimConfig, json: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let prog = match ProgramSpec::from_source(&text) {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_INPUT;
        }
    };
    let report = match simulate(&prog, cfg) {
        Ok(r) => r,
        Err(e @ (SimError::UnboundSymbol(_) | SimError::NonPositiveBinding(_) | SimError::InvalidConfig(_))) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    if json {
        let _ = writeln!(out, "{}", serde_json::to_string(&report).expect("serializable"));
        return EXIT_OK;
    }
    let _ = writeln!(out, "runs: {}", report.runs);
    let _ = writeln!(out, "terminated: {}", report.terminated);
    let _ = writeln!(
        out,
        "termination rate: {:.4} +- {:.4}",
        report.termination_rate, report.rate_stderr
    );
    match report.mean_steps_terminated {
        Some(m) => {
            let _ = writeln!(out, "mean steps (terminated runs): {m:.3}");
        }
        None => {
            let _ = writeln!(out, "mean steps (terminated runs): n/a");
        }
    }
    let _ = writeln!(out, "censored at {} steps: {}", cfg.max_steps, report.censored);
    if report.overflowed > 0 {
        let _ = writeln!(out, "  of which overflowed: {}", report.overflowed);
    }
    for b in &report.histogram {
        let _ = writeln!(out, "  steps {}..={}: {}", b.from, b.to, b.count);
    }
    EXIT_OK
}

/// Symbol bindings from `name=value` strings.
pub fn bindings(pairs: &[&str]) -> Result<HashMap<String, BigRational>, String> {
    pairs.iter().map(|p| parse_binding(p)).collect()
}
