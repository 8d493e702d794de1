//! Benchmark fixtures shared by the criterion targets.

use std::path::PathBuf;

/// Root of the in-repo benchmark program corpus.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}
