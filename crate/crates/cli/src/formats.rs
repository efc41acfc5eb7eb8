//! On-disk formats: trajectory CSV/JSON, the report, plot data, and atomic
//! multi-file writes.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ergocov::solver::TraceRecord;
use ergocov::{CoverageResult, ModelKind, PointSet, Trajectory};

use crate::CliError;

pub const TRAJECTORY_SCHEMA: u32 = 1;
pub const REPORT_SCHEMA: u32 = 1;

pub use ergocov::export::{format_number as num, knot_times, trajectory_csv};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Units {
    pub length: String,
    pub time: String,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            length: "m".into(),
            time: "s".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    /// Largest bounding-box span of the samples (m).
    pub extent: f64,
    /// Bounding-box minimum corner (m).
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub schema_version: u32,
    pub units: Units,
    pub model: ModelKind,
    pub dim: usize,
    pub normalization: Normalization,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub controls: Vec<Vec<f64>>,
    pub dts: Vec<f64>,
    pub path_length: f64,
}

impl TrajectoryFile {
    pub fn new(traj: &Trajectory, model: ModelKind, normalization: Normalization) -> Self {
        let horizon = traj.horizon();
        let controls = if traj.controls.is_empty() {
            Vec::new()
        } else {
            (0..horizon - 1).map(|t| traj.control(t).to_vec()).collect()
        };
        Self {
            schema_version: TRAJECTORY_SCHEMA,
            units: Units::default(),
            model,
            dim: traj.dim(),
            normalization,
            times: knot_times(traj),
            positions: (0..horizon).map(|t| traj.position(t).to_vec()).collect(),
            velocities: (0..horizon).map(|t| traj.velocity(t).to_vec()).collect(),
            controls,
            dts: traj.dts(),
            path_length: traj.path_length(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Residuals {
    pub max_equality: f64,
    pub max_inequality: f64,
    pub physical_max_equality: f64,
    pub physical_max_inequality: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportFile {
    pub schema_version: u32,
    pub tool_version: String,
    pub converged: bool,
    pub message: String,
    pub final_objective: f64,
    pub final_penalty: f64,
    pub residuals: Residuals,
    pub wall_time_s: f64,
    /// Length of `trace`.
    pub evaluations: usize,
    pub function_evaluations: usize,
    pub normalization: Normalization,
    /// Bandwidth per annealing stage in normalized units.
    pub bandwidths: Vec<f64>,
    pub coverage: CoverageResult,
    pub samples: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
    pub config: serde_json::Value,
}

impl ReportFile {
    /// Rejects reports written under another schema before decoding the rest.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("report is not JSON: {e}")))?;
        match value.get("schema_version").and_then(serde_json::Value::as_u64) {
            Some(v) if v == u64::from(REPORT_SCHEMA) => {}
            other => {
                return Err(CliError::Input(format!(
                    "report schema_version {other:?} does not match supported version {REPORT_SCHEMA}"
                )))
            }
        }
        serde_json::from_value(value).map_err(|e| CliError::Input(format!("malformed report: {e}")))
    }
}

pub fn trace_csv(report: &ReportFile) -> String {
    let mut out = String::from("evaluation,stage,bandwidth,round,iteration,objective,lagrangian,max_violation\n");
    for (i, r) in report.trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{},{},{},{},{},{},{}",
            r.stage,
            num(r.bandwidth),
            r.round,
            r.iteration,
            num(r.objective),
            num(r.lagrangian),
            num(r.max_violation)
        );
    }
    out
}

pub fn schedule_csv(report: &ReportFile) -> String {
    let e = report.normalization.extent;
    let mut out = String::from("stage,h_normalized,h_physical_m2\n");
    for (k, &h) in report.bandwidths.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{}", num(h), num(h * e * e));
    }
    out
}

/// Columns `t, x_1..x_d`, readable by `eval`.
pub fn polyline_csv(times: &[f64], positions: &[Vec<f64>]) -> String {
    let d = positions.first().map_or(0, Vec::len);
    let mut out = String::from("t");
    for k in 1..=d {
        let _ = write!(out, ",x_{k}");
    }
    out.push('\n');
    for (t, p) in times.iter().zip(positions) {
        out.push_str(&num(*t));
        for &x in p {
            out.push(',');
            out.push_str(&num(x));
        }
        out.push('\n');
    }
    out
}

pub fn coverage_mask_csv(samples: &[Vec<f64>], covered: &[bool]) -> String {
    let d = samples.first().map_or(0, Vec::len);
    let mut out = String::from("sample");
    for k in 1..=d {
        let _ = write!(out, ",x_{k}");
    }
    out.push_str(",covered\n");
    for (i, (p, c)) in samples.iter().zip(covered).enumerate() {
        out.push_str(&i.to_string());
        for &x in p {
            out.push(',');
            out.push_str(&num(x));
        }
        let _ = writeln!(out, ",{}", u8::from(*c));
    }
    out
}

/// Positions from a trajectory file: JSON as written by `plan`, or CSV with
/// `x_1..x_d` header columns. Returns the normalization record when present.
pub fn read_positions(path: &Path) -> Result<(PointSet, Option<TrajectoryFile>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let file: TrajectoryFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("{}: not a trajectory file: {e}", path.display())))?;
        if file.schema_version != TRAJECTORY_SCHEMA {
            return Err(CliError::Input(format!(
                "{}: trajectory schema_version {} is not {TRAJECTORY_SCHEMA}",
                path.display(),
                file.schema_version
            )));
        }
        let points = PointSet::from_rows(&file.positions)?;
        return Ok((points, Some(file)));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let bad = |msg: String| CliError::Input(format!("{}: {msg}", path.display()));
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let mut columns = Vec::new();
    for k in 1.. {
        match headers.iter().position(|h| h == format!("x_{k}")) {
            Some(i) => columns.push(i),
            None => break,
        }
    }
    if columns.is_empty() {
        return Err(bad("no x_1.. position columns in header".into()));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let row = columns
            .iter()
            .map(|&i| {
                record
                    .get(i)
                    .unwrap_or("")
                    .parse::<f64>()
                    .map_err(|e| bad(format!("row {}: {e}", line + 2)))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(bad("no trajectory rows".into()));
    }
    Ok((PointSet::from_rows(&rows)?, None))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Files staged in memory and published together: every file goes to a
/// temporary name in the target directory first, then each is renamed.
#[derive(Debug, Default)]
pub struct OutputBatch {
    files: Vec<(String, Vec<u8>)>,
}

impl OutputBatch {
    pub fn add(&mut self, name: &str, contents: impl Into<Vec<u8>>) {
        self.files.push((name.to_string(), contents.into()));
    }

    pub fn digests(&self, dir: &Path) -> Vec<(PathBuf, String)> {
        self.files
            .iter()
            .map(|(n, b)| (dir.join(n), sha256_hex(b)))
            .collect()
    }

    pub fn commit(self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        let io = |e: std::io::Error| CliError::Output(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(io)?;
        let mut staged = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let mut tmp = tempfile::Builder::new()
                .prefix(&format!(".{name}."))
                .tempfile_in(dir)
                .map_err(io)?;
            tmp.write_all(bytes).map_err(io)?;
            tmp.as_file().sync_all().map_err(io)?;
            staged.push((tmp, dir.join(name)));
        }
        let mut written = Vec::with_capacity(staged.len());
        for (tmp, target) in staged {
            tmp.persist(&target).map_err(|e| io(e.error))?;
            written.push(target);
        }
        Ok(written)
    }
}
