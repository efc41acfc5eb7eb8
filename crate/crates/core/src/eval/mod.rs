//! Coverage metrics, baselines, and benchmark harness.

pub mod bench;
pub mod coverage;
pub mod tsp;

pub use bench::{
    fixed_vs_adaptive_dt, format_table, rows_to_csv, run_cell, run_scale_sweep, summarize, BenchmarkRow,
    BenchmarkSummary, CellStatus, DtComparison, DtRun, Method, SweepConfig,
};
pub use coverage::{coverage, CoverageResult};
pub use tsp::{tsp_nearest_neighbor, tsp_subsampled};
