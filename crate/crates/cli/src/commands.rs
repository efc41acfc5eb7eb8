use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::Serialize;
use serde_json::json;

use ergocov::eval::{format_table, rows_to_csv, run_scale_sweep, summarize};
use ergocov::{coverage, load_samples, SampleFormat};

use crate::config::LoadedConfig;
use crate::formats::{
    coverage_mask_csv, knot_times, polyline_csv, schedule_csv, sha256_hex, trace_csv, trajectory_csv, Normalization,
    OutputBatch, ReportFile, Residuals, TrajectoryFile, REPORT_SCHEMA,
};
use crate::{Cli, CliError, Command, Outcome};

const MANIFEST_SCHEMA: u32 = 1;

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Plan => plan(cli),
        Command::Bench => bench(cli),
        Command::Eval {
            trajectory,
            domain,
            radius,
        } => eval(trajectory, domain, *radius),
        Command::ExportPlotdata { report } => export_plotdata(cli, report),
    }
}

fn load_config(cli: &Cli) -> Result<LoadedConfig, CliError> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| CliError::Input("--config is required for this command".into()))?;
    let mut loaded = LoadedConfig::load(path)?;
    if let Some(seed) = cli.seed {
        loaded.config.solver.seed = seed;
    }
    Ok(loaded)
}

fn file_digest(path: &Path) -> Result<String, CliError> {
    std::fs::read(path)
        .map(|b| sha256_hex(&b))
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

#[derive(Serialize)]
struct FileRecord {
    path: PathBuf,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    rng_seed: u64,
    started_at: String,
    finished_at: String,
    config: serde_json::Value,
    inputs: Vec<FileRecord>,
    outputs: Vec<FileRecord>,
}

fn manifest_json(
    command: &'static str,
    loaded: &LoadedConfig,
    config_path: &Path,
    started_at: String,
    batch: &OutputBatch,
    dir: &Path,
) -> Result<String, CliError> {
    let domain = loaded.domain_path();
    let manifest = Manifest {
        schema_version: MANIFEST_SCHEMA,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        rng_seed: loaded.config.solver.seed,
        started_at,
        finished_at: Utc::now().to_rfc3339(),
        config: serde_json::to_value(&loaded.config).map_err(|e| CliError::Output(e.to_string()))?,
        inputs: vec![
            FileRecord {
                sha256: file_digest(config_path)?,
                path: config_path.to_path_buf(),
            },
            FileRecord {
                sha256: file_digest(&domain)?,
                path: domain,
            },
        ],
        outputs: batch
            .digests(dir)
            .into_iter()
            .map(|(path, sha256)| FileRecord { path, sha256 })
            .collect(),
    };
    to_json(&manifest)
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Output(e.to_string()))
}

fn plan(cli: &Cli) -> Result<Outcome, CliError> {
    let started_at = Utc::now().to_rfc3339();
    let loaded = load_config(cli)?;
    let mut setup = loaded.setup()?;
    setup.solver.parallel = cli.jobs.is_some_and(|j| j > 1);
    let out = setup.run()?;
    let report = &out.report;
    let normalization = Normalization {
        extent: out.extent,
        offset: out.offset.clone(),
    };
    let traj = &report.trajectory;
    let positions: Vec<Vec<f64>> = (0..traj.horizon()).map(|t| traj.position(t).to_vec()).collect();
    let report_file = ReportFile {
        schema_version: REPORT_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        converged: report.converged,
        message: report.message.clone(),
        final_objective: report.final_objective,
        final_penalty: report.final_penalty,
        residuals: Residuals {
            max_equality: report.residuals.max_eq_violation,
            max_inequality: report.residuals.max_ineq_violation,
            physical_max_equality: report.physical_max_eq_violation,
            physical_max_inequality: report.physical_max_ineq_violation,
        },
        wall_time_s: report.wall_time_s,
        evaluations: report.evaluations,
        function_evaluations: report.function_evaluations,
        normalization: normalization.clone(),
        bandwidths: report.bandwidths.clone(),
        coverage: out.coverage.clone(),
        samples: setup.samples.points().to_rows(),
        times: knot_times(traj),
        positions,
        trace: report.objective_trace.clone(),
        config: serde_json::to_value(&loaded.config).map_err(|e| CliError::Output(e.to_string()))?,
    };

    let dir = loaded.output_dir(cli.output_dir.as_deref());
    let mut batch = OutputBatch::default();
    batch.add("trajectory.csv", trajectory_csv(traj));
    batch.add(
        "trajectory.json",
        to_json(&TrajectoryFile::new(traj, setup.model.kind, normalization))?,
    );
    batch.add("report.json", to_json(&report_file)?);
    let config_path = cli.config.as_deref().unwrap_or(Path::new(""));
    let manifest = manifest_json("plan", &loaded, config_path, started_at, &batch, &dir)?;
    batch.add("manifest.json", manifest);
    for path in batch.commit(&dir)? {
        log::info!("wrote {}", path.display());
    }

    println!(
        "coverage {:.2}% over path length {:.6} m",
        100.0 * out.coverage.covered_fraction,
        out.coverage.path_length
    );
    if report.converged {
        Ok(Outcome::Done)
    } else {
        eprintln!(
            "not converged: {} (physical units: equality {:e}, inequality {:e})",
            report.message, report.physical_max_eq_violation, report.physical_max_ineq_violation
        );
        Ok(Outcome::NotConverged)
    }
}

fn bench(cli: &Cli) -> Result<Outcome, CliError> {
    let started_at = Utc::now().to_rfc3339();
    let loaded = load_config(cli)?;
    let setup = loaded.setup()?;
    let sweep = loaded.sweep(cli.jobs.is_some_and(|j| j > 1))?;
    let rows = run_scale_sweep(&setup, &sweep)?;
    let summaries = summarize(&rows);
    let table = format_table(&summaries);
    print!("{table}");

    let dir = loaded.output_dir(cli.output_dir.as_deref());
    let mut batch = OutputBatch::default();
    batch.add("bench.csv", rows_to_csv(&rows));
    batch.add("bench_summary.json", to_json(&json!({ "summaries": summaries }))?);
    let config_path = cli.config.as_deref().unwrap_or(Path::new(""));
    let manifest = manifest_json("bench", &loaded, config_path, started_at, &batch, &dir)?;
    batch.add("manifest.json", manifest);
    batch.commit(&dir)?;
    Ok(Outcome::Done)
}

fn eval(trajectory: &Path, domain: &Path, radius: f64) -> Result<Outcome, CliError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CliError::Input(format!("--radius must be positive, got {radius}")));
    }
    let format = SampleFormat::from_path(domain)
        .ok_or_else(|| CliError::Input(format!("cannot infer sample format of {}", domain.display())))?;
    let samples = load_samples(domain, format)?;
    let (path, meta) = crate::formats::read_positions(trajectory)?;
    if path.dim() != samples.dim() {
        return Err(CliError::Input(format!(
            "trajectory has dimension {} but the samples have {}",
            path.dim(),
            samples.dim()
        )));
    }
    if let Some(meta) = meta {
        check_units(&meta, &samples)?;
    }
    let result = coverage(&path, &samples, radius)?;
    print!("{}", to_json(&result)?);
    Ok(Outcome::Done)
}

/// The trajectory must carry SI units and the same normalization record the
/// samples produce.
fn check_units(meta: &TrajectoryFile, samples: &ergocov::DomainSamples) -> Result<(), CliError> {
    if meta.units.length != "m" || meta.units.time != "s" {
        return Err(CliError::Input(format!(
            "trajectory units {}/{} are not m/s",
            meta.units.length, meta.units.time
        )));
    }
    let domain = ergocov::NormalizedDomain::new(samples.clone())?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * domain.extent().max(1.0);
    let offset_ok = meta.normalization.offset.len() == domain.dim()
        && meta.normalization.offset.iter().zip(domain.offset()).all(|(&a, &b)| close(a, b));
    if !close(meta.normalization.extent, domain.extent()) || !offset_ok {
        return Err(CliError::Input(format!(
            "trajectory normalization (extent {}, offset {:?}) does not match the samples (extent {}, offset {:?})",
            meta.normalization.extent,
            meta.normalization.offset,
            domain.extent(),
            domain.offset()
        )));
    }
    Ok(())
}

fn export_plotdata(cli: &Cli, report_path: &Path) -> Result<Outcome, CliError> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", report_path.display())))?;
    let report = ReportFile::from_json(&text)?;
    let dir = match &cli.output_dir {
        Some(d) => d.clone(),
        None => report_path.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let mut batch = OutputBatch::default();
    batch.add("trace.csv", trace_csv(&report));
    batch.add("schedule.csv", schedule_csv(&report));
    batch.add("polyline.csv", polyline_csv(&report.times, &report.positions));
    batch.add(
        "coverage_mask.csv",
        coverage_mask_csv(&report.samples, &report.coverage.per_sample_covered),
    );
    batch.commit(&dir)?;
    Ok(Outcome::Done)
}
