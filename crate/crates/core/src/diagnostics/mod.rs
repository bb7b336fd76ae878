//! Convergence traces, trace comparison and the core consistency diagnostic.

mod compare;
mod corcondia;
mod trace;

pub use compare::{compare_traces, TraceReport, TraceSummary};
pub use corcondia::{corcondia, rank_scan, select_rank, Corcondia, RankScanRow, CORCONDIA_ACCEPT};
pub use trace::{ConvergenceTrace, TracePoint};
