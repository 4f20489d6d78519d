//! Parallel batch execution and cross-run aggregation.
//!
//! Runs are independent, so a batch farms them out to a dedicated rayon
//! pool and reassembles results in input order. Aggregation reduces each
//! run to its final arrival fractions per category.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{run, EngineError, MetricsFrame, RunResult, RunSpec};
use crate::geo::Environment;

pub const CATEGORIES: [&str; 5] = ["adult", "elderly", "child", "disabled", "all"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub category: String,
    pub mean_final_frac: f64,
    pub sd: f64,
    pub n: u32,
}

/// Outcome of comparing two scenarios over seeds they share.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub a: String,
    pub b: String,
    /// Seeds both scenarios were run with.
    pub seeds: Vec<u64>,
    /// How many shared seeds had a's final all-arrived fraction strictly
    /// above b's.
    pub a_greater: u32,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Run every spec, reducing each result through `f` as soon as it finishes
/// so full run payloads do not pile up in memory. Output order matches
/// input order; the first failure aborts the batch.
pub fn batch_map<T, F>(
    env: &Environment,
    runs: &[RunSpec],
    workers: usize,
    f: F,
) -> Result<Vec<T>, EngineError>
where
    T: Send,
    F: Fn(RunResult) -> T + Sync,
{
    let workers = workers.max(1);
    let execute = |spec: &RunSpec| -> Result<T, EngineError> {
        run(env, spec).map(&f).map_err(|e| EngineError::RunFailed {
            scenario: spec.scenario.name.clone(),
            seed: spec.scenario.seed,
            source: Box::new(e),
        })
    };
    if workers == 1 {
        return runs.iter().map(execute).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::BadConfig(format!("worker pool: {e}")))?;
    pool.install(|| {
        use rayon::prelude::*;
        runs.par_iter().map(execute).collect()
    })
}

pub fn batch_run(
    env: &Environment,
    runs: &[RunSpec],
    workers: usize,
) -> Result<Vec<RunResult>, EngineError> {
    batch_map(env, runs, workers, |r| r)
}

fn final_fractions(frame: &MetricsFrame) -> [f64; 5] {
    [
        frame.adult.fraction,
        frame.elderly.fraction,
        frame.child.fraction,
        frame.disabled.fraction,
        frame.all.fraction,
    ]
}

/// Mean and sample standard deviation of final arrival fractions, grouped
/// by scenario, five rows per scenario in a fixed category order.
pub fn summarize(results: &[RunResult]) -> Vec<SummaryRow> {
    summarize_finals(
        results
            .iter()
            .map(|r| (r.scenario.as_str(), r.frames.last().expect("frames"))),
    )
}

/// Like [`summarize`], from (scenario, final frame) pairs, so callers can
/// reduce runs to their last frame instead of holding whole results.
pub fn summarize_finals<'a>(
    finals: impl IntoIterator<Item = (&'a str, &'a MetricsFrame)>,
) -> Vec<SummaryRow> {
    let mut by_scenario: BTreeMap<&str, Vec<[f64; 5]>> = BTreeMap::new();
    for (scenario, last) in finals {
        by_scenario
            .entry(scenario)
            .or_default()
            .push(final_fractions(last));
    }
    let mut rows = Vec::with_capacity(by_scenario.len() * CATEGORIES.len());
    for (scenario, samples) in by_scenario {
        let n = samples.len();
        for (ci, category) in CATEGORIES.iter().enumerate() {
            let mean = samples.iter().map(|s| s[ci]).sum::<f64>() / n as f64;
            let sd = if n > 1 {
                let var = samples
                    .iter()
                    .map(|s| (s[ci] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1) as f64;
                var.sqrt()
            } else {
                0.0
            };
            rows.push(SummaryRow {
                scenario: scenario.to_string(),
                category: (*category).to_string(),
                mean_final_frac: mean,
                sd,
                n: n as u32,
            });
        }
    }
    rows
}

/// Compare two scenarios' final all-arrived fractions seed by seed.
pub fn paired_comparison(results: &[RunResult], a: &str, b: &str) -> PairedComparison {
    let collect = |name: &str| -> BTreeMap<u64, f64> {
        results
            .iter()
            .filter(|r| r.scenario == name)
            .map(|r| (r.seed, r.frames.last().expect("frames").all.fraction))
            .collect()
    };
    let fa = collect(a);
    let fb = collect(b);
    let seeds: Vec<u64> = fa.keys().filter(|s| fb.contains_key(s)).copied().collect();
    let mut a_greater = 0;
    let mut sum_a = 0.0;
    let mut sum_b = 0.0;
    for s in &seeds {
        let va = fa[s];
        let vb = fb[s];
        if va > vb {
            a_greater += 1;
        }
        sum_a += va;
        sum_b += vb;
    }
    let n = seeds.len().max(1) as f64;
    PairedComparison {
        a: a.to_string(),
        b: b.to_string(),
        seeds,
        a_greater,
        mean_a: sum_a / n,
        mean_b: sum_b / n,
    }
}
