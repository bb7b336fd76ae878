use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use super::ConvergenceTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub label: String,
    pub final_t: u64,
    pub final_rmse: f64,
    /// First step at or below the target RMSE.
    pub steps_to_target: Option<u64>,
    /// `final_rmse` minus the best `final_rmse` across all traces.
    pub delta_final_rmse: f64,
    /// `steps_to_target` minus the fastest, when both exist.
    pub delta_steps: Option<i64>,
}

/// Traces aligned on step index plus per-trace summaries, sorted by label.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceReport {
    pub target_rmse: f64,
    pub labels: Vec<String>,
    /// One row per distinct step: `(t, rmse per label)`; `None` before a
    /// trace's first point, otherwise the last value at or before `t`.
    pub rows: Vec<(u64, Vec<Option<f64>>)>,
    pub summaries: Vec<TraceSummary>,
}

pub fn compare_traces(traces: &[(String, ConvergenceTrace)], target_rmse: f64) -> Result<TraceReport> {
    if traces.is_empty() {
        return Err(Error::input("no traces to compare"));
    }
    let mut sorted: Vec<&(String, ConvergenceTrace)> = traces.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::input(format!("duplicate trace label {:?}", w[0].0)));
    }
    if let Some((label, _)) = sorted.iter().find(|(_, t)| t.is_empty()) {
        return Err(Error::input(format!("trace {label:?} is empty")));
    }
    let steps: BTreeSet<u64> = sorted
        .iter()
        .flat_map(|(_, t)| t.points().iter().map(|p| p.t))
        .collect();
    let rows = steps
        .into_iter()
        .map(|t| (t, sorted.iter().map(|(_, tr)| tr.rmse_at(t)).collect()))
        .collect();
    let best_rmse = sorted
        .iter()
        .map(|(_, t)| t.last().expect("non-empty").rmse)
        .fold(f64::INFINITY, f64::min);
    let fastest = sorted.iter().filter_map(|(_, t)| t.steps_to(target_rmse)).min();
    let summaries = sorted
        .iter()
        .map(|(label, t)| {
            let last = t.last().expect("non-empty");
            let steps = t.steps_to(target_rmse);
            TraceSummary {
                label: label.clone(),
                final_t: last.t,
                final_rmse: last.rmse,
                steps_to_target: steps,
                delta_final_rmse: last.rmse - best_rmse,
                delta_steps: steps.zip(fastest).map(|(s, f)| s as i64 - f as i64),
            }
        })
        .collect();
    Ok(TraceReport {
        target_rmse,
        labels: sorted.iter().map(|(l, _)| l.clone()).collect(),
        rows,
        summaries,
    })
}

impl TraceReport {
    /// Merged CSV: `t,<label>...`, blank where a trace has not started.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend(self.labels.iter().cloned());
        out.write_record(&header)?;
        for (t, vals) in &self.rows {
            let mut rec = vec![t.to_string()];
            rec.extend(vals.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "target_rmse = {}", self.target_rmse);
        for m in &self.summaries {
            let steps = m.steps_to_target.map_or("never".to_string(), |v| v.to_string());
            let dsteps = m.delta_steps.map_or("-".to_string(), |v| v.to_string());
            let _ = writeln!(
                s,
                "{}: final_t = {}, final_rmse = {}, steps_to_target = {}, delta_final_rmse = {}, delta_steps = {}",
                m.label, m.final_t, m.final_rmse, steps, m.delta_final_rmse, dsteps
            );
        }
        s
    }
}
