//! CSV serialization for run results, traces, and batch summaries.
//!
//! Formats are part of the reproducibility contract: fractions are fixed at
//! six decimals, times use the shortest f64 form, rows are newline-separated
//! with a trailing newline.

use std::fmt::Write;

use super::{RunResult, SummaryRow};

pub const RESULT_HEADER: &str = "t,adult_arr,adult_frac,elderly_arr,elderly_frac,child_arr,child_frac,disabled_arr,disabled_frac,all_arr,all_frac,trapped,enroute,preevac";
pub const TRACE_HEADER: &str = "t,agent_id,event,detail";
pub const SUMMARY_HEADER: &str = "scenario,category,mean_final_frac,sd,n";

/// One row per recorded frame.
pub fn result_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(64 * (result.frames.len() + 1));
    out.push_str(RESULT_HEADER);
    out.push('\n');
    for f in &result.frames {
        writeln!(
            out,
            "{},{},{:.6},{},{:.6},{},{:.6},{},{:.6},{},{:.6},{},{},{}",
            f.t,
            f.adult.arrived,
            f.adult.fraction,
            f.elderly.arrived,
            f.elderly.fraction,
            f.child.arrived,
            f.child.fraction,
            f.disabled.arrived,
            f.disabled.fraction,
            f.all.arrived,
            f.all.fraction,
            f.trapped,
            f.enroute,
            f.preevac
        )
        .expect("write to String cannot fail");
    }
    out
}

/// One row per trace event, in emission order.
pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::with_capacity(32 * (result.trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &result.trace {
        writeln!(out, "{},{},{},{}", r.t, r.agent, r.event, r.detail)
            .expect("write to String cannot fail");
    }
    out
}

/// One row per (scenario, category) aggregate.
pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::with_capacity(48 * (rows.len() + 1));
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{}",
            r.scenario, r.category, r.mean_final_frac, r.sd, r.n
        )
        .expect("write to String cannot fail");
    }
    out
}
