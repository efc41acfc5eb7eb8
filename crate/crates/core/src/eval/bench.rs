//! Scale-sweep benchmark and the fixed versus adaptive step comparison.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::coverage::{coverage, CoverageResult};
use crate::eval::tsp::{tsp_nearest_neighbor, tsp_subsampled};
use crate::plan::{default_start, PlanSetup};
use crate::scalar::Scalar;
use crate::solver::ObjectiveMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Log surrogate, normalized domain, annealed bandwidth.
    SiEmmd,
    /// Raw estimator in physical units with a fixed bandwidth.
    Emmd,
    /// Nearest-neighbor tour cut at the path budget.
    Tsp,
    /// Nearest-neighbor tour through `T` random samples, no budget.
    TspUnconstrained,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SiEmmd, Method::Emmd, Method::Tsp, Method::TspUnconstrained];

    pub fn name(self) -> &'static str {
        match self {
            Method::SiEmmd => "si-emmd",
            Method::Emmd => "emmd",
            Method::Tsp => "tsp",
            Method::TspUnconstrained => "tsp-unconstrained",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
            Error::InvalidConfig(format!("unknown method `{s}`; valid methods: {}", valid.join(", ")))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub methods: Vec<Method>,
    pub scales: Vec<f64>,
    pub repeats: usize,
    /// Bandwidth (m^2) for the raw baseline, shared by every scale. Defaults
    /// to the initial annealing bandwidth.
    pub raw_bandwidth: Option<f64>,
    /// Run cells on the rayon pool.
    pub parallel: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::SiEmmd, Method::Emmd, Method::Tsp],
            scales: vec![1.0, 100.0, 10_000.0],
            repeats: 3,
            raw_bandwidth: None,
            parallel: false,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() || self.scales.is_empty() || self.repeats == 0 {
            return Err(Error::InvalidConfig("sweep needs methods, scales, and repeats >= 1".into()));
        }
        if let Some(s) = self.scales.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidConfig(format!("scale must be positive, got {s}")));
        }
        if matches!(self.raw_bandwidth, Some(h) if !(h > 0.0)) {
            return Err(Error::InvalidConfig("raw_bandwidth must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellStatus {
    Converged,
    NotConverged,
    Failed,
}

/// One cell of the sweep: a method at a scale, one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub method: Method,
    pub scale: f64,
    pub repeat: usize,
    pub coverage_pct: f64,
    pub path_length: f64,
    pub wall_time_s: f64,
    pub converged: bool,
    pub status: CellStatus,
}

pub fn run_cell<F: Scalar>(base: &PlanSetup<F>, method: Method, scale: f64, repeat: usize, raw_bandwidth: f64) -> BenchmarkRow {
    let started = Instant::now();
    let outcome = run_method(&base.scaled(F::lit(scale)), method, raw_bandwidth);
    let wall_time_s = started.elapsed().as_secs_f64();
    let (coverage_pct, path_length, status) = match outcome {
        Ok((c, converged)) => (
            100.0 * c.covered_fraction,
            c.path_length,
            if converged {
                CellStatus::Converged
            } else {
                CellStatus::NotConverged
            },
        ),
        Err(e) => {
            log::warn!("{method} at scale {scale} failed: {e}");
            (0.0, 0.0, CellStatus::Failed)
        }
    };
    BenchmarkRow {
        method,
        scale,
        repeat,
        coverage_pct,
        path_length,
        wall_time_s,
        converged: status == CellStatus::Converged,
        status,
    }
}

fn run_method<F: Scalar>(setup: &PlanSetup<F>, method: Method, raw_bandwidth: f64) -> Result<(CoverageResult, bool)> {
    let start = || {
        setup
            .model
            .initial
            .as_ref()
            .map(|b| b.position.clone())
            .unwrap_or_else(|| default_start(&setup.samples))
    };
    match method {
        Method::SiEmmd | Method::Emmd => {
            let setup = if method == Method::Emmd {
                setup.with_objective(ObjectiveMode::Raw { bandwidth: raw_bandwidth })
            } else {
                setup.with_objective(ObjectiveMode::ScaleInvariant)
            };
            let out = setup.run()?;
            Ok((out.coverage, out.report.converged))
        }
        Method::Tsp => {
            let path = tsp_nearest_neighbor(setup.samples.points(), &start(), setup.model.l_max)?;
            Ok((coverage(&path, &setup.samples, setup.coverage_radius())?, true))
        }
        Method::TspUnconstrained => {
            let path = tsp_subsampled(
                setup.samples.points(),
                &start(),
                setup.solver.horizon,
                setup.solver.rng_seed,
            )?;
            Ok((coverage(&path, &setup.samples, setup.coverage_radius())?, true))
        }
    }
}

/// Runs every method at every scale `repeats` times. Repeats share the seed,
/// so they differ only in timing. Rows come back in method, scale, repeat
/// order regardless of scheduling.
pub fn run_scale_sweep<F: Scalar>(base: &PlanSetup<F>, sweep: &SweepConfig) -> Result<Vec<BenchmarkRow>> {
    sweep.validate()?;
    let raw_bandwidth = sweep.raw_bandwidth.unwrap_or(base.solver.annealing.h0);
    let mut cells = Vec::new();
    for &m in &sweep.methods {
        for &s in &sweep.scales {
            for r in 0..sweep.repeats {
                cells.push((m, s, r));
            }
        }
    }
    let run = |&(m, s, r): &(Method, f64, usize)| run_cell(base, m, s, r, raw_bandwidth);
    Ok(if sweep.parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkSummary {
    pub method: Method,
    pub scale: f64,
    pub repeats: usize,
    pub coverage_mean_pct: f64,
    pub wall_time_mean_s: f64,
    /// Sample standard deviation, only reported for three or more repeats.
    pub wall_time_std_s: Option<f64>,
    pub converged: usize,
}

fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = (values.len() >= 3)
        .then(|| (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt());
    (mean, std)
}

pub fn summarize(rows: &[BenchmarkRow]) -> Vec<BenchmarkSummary> {
    let mut groups: BTreeMap<(Method, u64), Vec<&BenchmarkRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method, r.scale.to_bits())).or_default().push(r);
    }
    let mut out: Vec<BenchmarkSummary> = groups
        .into_values()
        .map(|g| {
            let cov: Vec<f64> = g.iter().map(|r| r.coverage_pct).collect();
            let time: Vec<f64> = g.iter().map(|r| r.wall_time_s).collect();
            let (time_mean, time_std) = mean_std(&time);
            BenchmarkSummary {
                method: g[0].method,
                scale: g[0].scale,
                repeats: g.len(),
                coverage_mean_pct: mean_std(&cov).0,
                wall_time_mean_s: time_mean,
                wall_time_std_s: time_std,
                converged: g.iter().filter(|r| r.converged).count(),
            }
        })
        .collect();
    out.sort_by(|a, b| a.method.cmp(&b.method).then(a.scale.total_cmp(&b.scale)));
    out
}

pub fn rows_to_csv(rows: &[BenchmarkRow]) -> String {
    let mut out = String::from("method,scale,repeat,coverage_pct,path_length_m,wall_time_s,converged,status\n");
    for r in rows {
        let status = match r.status {
            CellStatus::Converged => "converged",
            CellStatus::NotConverged => "not_converged",
            CellStatus::Failed => "failed",
        };
        let _ = writeln!(
            out,
            "{},{},{},{:.6},{:.9e},{:.6},{},{}",
            r.method, r.scale, r.repeat, r.coverage_pct, r.path_length, r.wall_time_s, r.converged, status
        );
    }
    out
}

/// Methods down, scales across; each cell is coverage and time.
pub fn format_table(summaries: &[BenchmarkSummary]) -> String {
    let mut scales: Vec<f64> = summaries.iter().map(|s| s.scale).collect();
    scales.sort_by(f64::total_cmp);
    scales.dedup();
    let mut methods: Vec<Method> = summaries.iter().map(|s| s.method).collect();
    methods.dedup();
    let width = 28;
    let mut out = format!("{:<18}", "method");
    for s in &scales {
        let _ = write!(out, "| {:<width$}", format!("scale {s}"));
    }
    out.push('\n');
    out.push_str(&"-".repeat(18 + scales.len() * (width + 2)));
    out.push('\n');
    for m in methods {
        let _ = write!(out, "{:<18}", m.name());
        for s in &scales {
            let cell = summaries
                .iter()
                .find(|x| x.method == m && x.scale == *s)
                .map(|x| match x.wall_time_std_s {
                    Some(sd) => format!("{:6.2}% {:.3}±{:.3}s", x.coverage_mean_pct, x.wall_time_mean_s, sd),
                    None => format!("{:6.2}% {:.3}s", x.coverage_mean_pct, x.wall_time_mean_s),
                })
                .unwrap_or_default();
            let _ = write!(out, "| {:<width$}", cell);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtRun {
    pub coverage: CoverageResult,
    pub converged: bool,
    pub dts: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DtComparison {
    pub adaptive: DtRun,
    pub fixed: DtRun,
    /// The pinned step, `L_max / ((T - 1) v_max)`.
    pub fixed_dt: f64,
}

/// Solves `setup` as given and again with every step pinned to the duration
/// that spends the path budget at full speed.
pub fn fixed_vs_adaptive_dt<F: Scalar>(setup: &PlanSetup<F>) -> Result<DtComparison> {
    let l_max = setup
        .model
        .l_max
        .filter(|l| *l > F::zero())
        .ok_or_else(|| Error::InvalidConfig("the step comparison needs a positive l_max".into()))?;
    let steps = F::lit((setup.solver.horizon.max(2) - 1) as f64);
    let dt = l_max / (steps * setup.model.v_max);
    let mut fixed = setup.clone();
    fixed.model.dt_min = dt;
    fixed.model.dt_max = dt;
    let run = |s: &PlanSetup<F>| -> Result<DtRun> {
        let out = s.run()?;
        Ok(DtRun {
            dts: out.report.trajectory.dts().iter().map(|d| d.to_f64_lossy()).collect(),
            coverage: out.coverage,
            converged: out.report.converged,
        })
    };
    Ok(DtComparison {
        adaptive: run(setup)?,
        fixed: run(&fixed)?,
        fixed_dt: dt.to_f64_lossy(),
    })
}
