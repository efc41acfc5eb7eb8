//! The TOML run configuration. Unknown keys anywhere are errors.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ergocov::eval::{Method, SweepConfig};
use ergocov::{
    default_start, load_samples, AlConfig, AnnealingConfig, Boundary, DynamicsModel, InnerConfig, ModelKind,
    ObjectiveMode, PlanSetup, SampleFormat, SeedStrategy, SolverConfig, VelocityBound,
};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub domain: DomainSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub annealing: AnnealingConfig,
    #[serde(default)]
    pub al: AlConfig,
    #[serde(default)]
    pub inner: InnerConfig,
    #[serde(default)]
    pub coverage: CoverageSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub bench: BenchSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Relative paths resolve against the config file's directory.
    pub path: PathBuf,
    /// Inferred from the extension when absent.
    #[serde(default)]
    pub format: Option<SampleFormat>,
}

/// `"auto"` starts at the sample nearest the bounding-box minimum corner,
/// `"free"` leaves the start unconstrained, a list pins an explicit point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StartSpec {
    Keyword(String),
    Position(Vec<f64>),
}

impl Default for StartSpec {
    fn default() -> Self {
        Self::Keyword("auto".into())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// m/s
    pub v_max: f64,
    pub a_max: Option<f64>,
    /// Path length budget (m).
    pub l_max: Option<f64>,
    /// Duration budget (s).
    pub t_max: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    pub velocity_bound: VelocityBound,
    pub start: StartSpec,
    pub start_velocity: Option<Vec<f64>>,
    pub end: Option<Vec<f64>>,
    pub end_velocity: Option<Vec<f64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::SingleIntegrator,
            v_max: 1.0,
            a_max: None,
            l_max: None,
            t_max: None,
            dt_min: 1e-3,
            dt_max: 1e3,
            velocity_bound: VelocityBound::StepLength,
            start: StartSpec::default(),
            start_velocity: None,
            end: None,
            end_velocity: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveChoice {
    ScaleInvariant,
    Raw,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub horizon: usize,
    pub objective: ObjectiveChoice,
    /// Fixed bandwidth (m^2) for the raw objective; defaults to `annealing.h0`.
    pub raw_bandwidth: Option<f64>,
    pub seed: u64,
    pub seed_strategy: SeedStrategy,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            horizon: 64,
            objective: ObjectiveChoice::ScaleInvariant,
            raw_bandwidth: None,
            seed: 0,
            seed_strategy: SeedStrategy::RandomJitter,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageSection {
    /// Covering radius (m); defaults to `sqrt(annealing.h_phys_star)`.
    pub radius: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchSection {
    pub methods: Vec<Method>,
    pub scales: Vec<f64>,
    pub repeats: usize,
}

impl Default for BenchSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        Self {
            methods: s.methods,
            scales: s.scales,
            repeats: s.repeats,
        }
    }
}

/// A parsed config together with the directory its relative paths hang off.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        let config = parse(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base_dir })
    }

    pub fn domain_path(&self) -> PathBuf {
        self.base_dir.join(&self.config.domain.path)
    }

    pub fn output_dir(&self, flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => self.base_dir.join(&self.config.output.dir),
        }
    }

    pub fn setup(&self) -> Result<PlanSetup, CliError> {
        let c = &self.config;
        let path = self.domain_path();
        let format = match c.domain.format {
            Some(f) => f,
            None => SampleFormat::from_path(&path).ok_or_else(|| {
                CliError::Input(format!(
                    "cannot infer sample format of {}; set domain.format",
                    path.display()
                ))
            })?,
        };
        let samples = load_samples(&path, format)?;
        let d = samples.dim();
        let m = &c.model;
        let initial = match &m.start {
            StartSpec::Keyword(k) if k == "auto" => Some(default_start(&samples)),
            StartSpec::Keyword(k) if k == "free" => None,
            StartSpec::Keyword(k) => {
                return Err(CliError::Input(format!(
                    "model.start must be \"auto\", \"free\", or a point, got {k:?}"
                )))
            }
            StartSpec::Position(p) => Some(p.clone()),
        };
        let model = DynamicsModel {
            kind: m.kind,
            dim: d,
            v_max: m.v_max,
            a_max: m.a_max,
            l_max: m.l_max,
            t_max: m.t_max,
            dt_min: m.dt_min,
            dt_max: m.dt_max,
            velocity_bound: m.velocity_bound,
            initial: initial.map(|position| Boundary {
                position,
                velocity: m.start_velocity.clone(),
            }),
            terminal: m.end.clone().map(|position| Boundary {
                position,
                velocity: m.end_velocity.clone(),
            }),
        };
        model.validate()?;
        let objective = match c.solver.objective {
            ObjectiveChoice::ScaleInvariant => ObjectiveMode::ScaleInvariant,
            ObjectiveChoice::Raw => ObjectiveMode::Raw {
                bandwidth: c.solver.raw_bandwidth.unwrap_or(c.annealing.h0),
            },
        };
        let solver = SolverConfig {
            horizon: c.solver.horizon,
            annealing: c.annealing,
            al: c.al,
            inner: c.inner,
            objective,
            seed_strategy: c.solver.seed_strategy,
            rng_seed: c.solver.seed,
            parallel: false,
        };
        solver.validate()?;
        if matches!(c.coverage.radius, Some(r) if r.is_nan() || r <= 0.0) {
            return Err(CliError::Input("coverage.radius must be positive".into()));
        }
        Ok(PlanSetup {
            samples,
            model,
            solver,
            coverage_radius: c.coverage.radius,
        })
    }

    pub fn sweep(&self, parallel: bool) -> Result<SweepConfig, CliError> {
        let b = &self.config.bench;
        let sweep = SweepConfig {
            methods: b.methods.clone(),
            scales: b.scales.clone(),
            repeats: b.repeats,
            raw_bandwidth: self.config.solver.raw_bandwidth,
            parallel,
        };
        sweep.validate()?;
        Ok(sweep)
    }
}

pub fn parse(text: &str) -> Result<RunConfig, String> {
    let value: toml::Value = toml::from_str(text).map_err(|e| e.to_string())?;
    match value.get("schema_version").and_then(toml::Value::as_integer) {
        Some(v) if v == i64::from(SCHEMA_VERSION) => {}
        Some(v) => return Err(format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}")),
        None => return Err(format!("missing schema_version (expected {SCHEMA_VERSION})")),
    }
    RunConfig::deserialize(value).map_err(|e| e.to_string())
}
