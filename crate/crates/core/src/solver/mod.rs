//! Constrained minimization of the ergodic objective.
//!
//! The solve runs in a working frame: the normalized frame of the domain for
//! the scale-invariant objective, or raw physical coordinates for the
//! baseline. For each bandwidth of the annealing sequence it runs augmented
//! Lagrangian rounds, each an inner unconstrained minimization followed by a
//! multiplier update, and warm-starts the next bandwidth from the result.

pub mod al;
pub mod anneal;
pub mod inner;

use std::cell::Cell;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::domain::{DomainSamples, Frame, NormalizedDomain};
use crate::dynamics::{seed_trajectory, Boundary, ConstraintResidual, DynamicsModel, SearchProjection, SeedStrategy, Trajectory};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::objective::{ObjectiveKind, TargetSet};
use crate::points::PointSet;
use crate::scalar::Scalar;

pub use al::{augmented_lagrangian_value_and_grad, AlContext, AlEval, Multipliers};
pub use anneal::{anneal_sequence, AnnealingSchedule};
pub use inner::{inner_minimize, InnerConfig, InnerMethod, InnerResult, Termination};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnnealingConfig {
    pub h0: f64,
    /// Target physical bandwidth (m^2).
    pub h_phys_star: f64,
    pub stages: usize,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        Self {
            h0: 0.05,
            h_phys_star: 1.5e-3,
            stages: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlConfig {
    pub initial_penalty: f64,
    pub penalty_growth: f64,
    pub max_penalty: f64,
    pub rounds_per_stage: usize,
    /// Round cap for the last bandwidth, where feasibility is settled.
    pub final_stage_rounds: usize,
    pub equality_tolerance: f64,
    pub inequality_tolerance: f64,
}

impl Default for AlConfig {
    fn default() -> Self {
        Self {
            initial_penalty: 10.0,
            penalty_growth: 10.0,
            max_penalty: 1e12,
            rounds_per_stage: 4,
            final_stage_rounds: 20,
            equality_tolerance: 1e-6,
            inequality_tolerance: 1e-6,
        }
    }
}

/// Which objective the solver minimizes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObjectiveMode {
    /// Log surrogate on the normalized domain with bandwidth annealing.
    #[default]
    ScaleInvariant,
    /// Raw estimator in physical coordinates with one fixed physical bandwidth (m^2).
    Raw { bandwidth: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of knots `T`.
    pub horizon: usize,
    pub annealing: AnnealingConfig,
    pub al: AlConfig,
    pub inner: InnerConfig,
    pub objective: ObjectiveMode,
    pub seed_strategy: SeedStrategy,
    pub rng_seed: u64,
    /// Build kernel matrices on the rayon pool. Results are bitwise identical.
    pub parallel: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            horizon: 64,
            annealing: AnnealingConfig::default(),
            al: AlConfig::default(),
            inner: InnerConfig::default(),
            objective: ObjectiveMode::ScaleInvariant,
            seed_strategy: SeedStrategy::RandomJitter,
            rng_seed: 0,
            parallel: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let al = &self.al;
        if self.horizon < 2 {
            return Err(Error::InvalidConfig("horizon must be >= 2".into()));
        }
        if !(al.initial_penalty > 0.0) || !(al.penalty_growth > 1.0) || !(al.max_penalty >= al.initial_penalty) {
            return Err(Error::InvalidConfig("need penalty > 0 and growth > 1".into()));
        }
        if !(al.equality_tolerance > 0.0) || !(al.inequality_tolerance > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if al.rounds_per_stage == 0 {
            return Err(Error::InvalidConfig("need at least one AL round per stage".into()));
        }
        if let ObjectiveMode::Raw { bandwidth } = self.objective {
            if !(bandwidth > 0.0) {
                return Err(Error::InvalidConfig("raw bandwidth must be positive".into()));
            }
        }
        self.inner.validate()
    }
}

/// One accepted inner iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub stage: usize,
    pub bandwidth: f64,
    pub round: usize,
    pub iteration: usize,
    pub objective: f64,
    pub lagrangian: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport<F> {
    /// Final trajectory in physical units.
    pub trajectory: Trajectory<F>,
    pub objective_trace: Vec<TraceRecord>,
    /// Residuals in the working frame, where tolerances are checked.
    pub residuals: ConstraintResidual<F>,
    pub physical_max_eq_violation: F,
    pub physical_max_ineq_violation: F,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Number of trace records.
    pub evaluations: usize,
    /// Objective/gradient evaluations including rejected line-search trials.
    pub function_evaluations: usize,
    pub bandwidths: Vec<F>,
    pub final_objective: F,
    pub final_penalty: F,
    pub working_frame: Frame<F>,
    pub message: String,
}

const SNAP_BITS: i32 = 32;

/// Rounds a normalized coordinate to a multiple of `2^-32`.
fn snap<F: Scalar>(x: F) -> F {
    let q = F::lit(2f64.powi(-SNAP_BITS));
    (x / q).round() * q
}

/// Keeps 32 significant bits.
fn snap_relative<F: Scalar>(x: F) -> F {
    if x == F::zero() || !x.is_finite() {
        return x;
    }
    let q = F::lit(2f64.powi(x.abs().log2().floor().to_i32().unwrap_or(0) - SNAP_BITS));
    (x / q).round() * q
}

fn snap_model<F: Scalar>(m: &DynamicsModel<F>) -> DynamicsModel<F> {
    let snap_boundary = |b: &Boundary<F>| Boundary {
        position: b.position.iter().map(|&x| snap(x)).collect(),
        velocity: b.velocity.as_ref().map(|v| v.iter().map(|&x| snap_relative(x)).collect()),
    };
    DynamicsModel {
        v_max: snap_relative(m.v_max),
        a_max: m.a_max.map(snap_relative),
        l_max: m.l_max.map(snap_relative),
        initial: m.initial.as_ref().map(snap_boundary),
        terminal: m.terminal.as_ref().map(snap_boundary),
        ..m.clone()
    }
}

/// Runs the annealed augmented-Lagrangian solve. `model` is in physical units.
pub fn solve<F: Scalar>(
    domain: &NormalizedDomain<F>,
    model: &DynamicsModel<F>,
    config: &SolverConfig,
) -> Result<SolverReport<F>> {
    let started = Instant::now();
    config.validate()?;
    model.validate()?;
    if model.dim != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: model.dim,
        });
    }
    let d = domain.dim();
    let norm_frame = domain.frame();
    let (frame, objective, bandwidths) = match config.objective {
        ObjectiveMode::ScaleInvariant => {
            let schedule = AnnealingSchedule {
                h0: F::lit(config.annealing.h0),
                h_phys_star: F::lit(config.annealing.h_phys_star),
                stages: config.annealing.stages,
                extent: domain.extent(),
            };
            {
                let h: Vec<F> = anneal_sequence(&schedule)?.into_iter().map(snap_relative).collect();
                (norm_frame.clone(), ObjectiveKind::LogSurrogate, h)
            }
        }
        ObjectiveMode::Raw { bandwidth } => (Frame::identity(d), ObjectiveKind::Raw, vec![F::lit(bandwidth)]),
    };

    let source = domain.source();
    let (targets, working_model, template) = match config.objective {
        ObjectiveMode::ScaleInvariant => {
            // Snapped normalized data is identical across physical scales, so
            // the solve is too.
            let rows: Vec<Vec<F>> = source
                .points()
                .iter()
                .map(|p| frame.to_local(p).into_iter().map(snap).collect())
                .collect();
            let points = PointSet::from_rows(&rows)?;
            let working_model = snap_model(&model.in_frame(&frame));
            let unit = NormalizedDomain::new(DomainSamples::new(points.clone(), Some(source.weights().to_vec()))?)?;
            let template = seed_trajectory(
                &working_model,
                &unit,
                config.horizon,
                config.seed_strategy,
                config.rng_seed,
            )?;
            let template = if unit.frame() == Frame::identity(d) {
                template
            } else {
                template.change_frame(&unit.frame(), &frame)
            };
            (TargetSet::new(points, source.weights().to_vec())?, working_model, template)
        }
        ObjectiveMode::Raw { .. } => {
            let seed = seed_trajectory(
                &model.in_frame(&norm_frame),
                domain,
                config.horizon,
                config.seed_strategy,
                config.rng_seed,
            )?;
            (
                TargetSet::new(source.points().clone(), source.weights().to_vec())?,
                model.clone(),
                seed.change_frame(&norm_frame, &frame),
            )
        }
    };
    let projection = SearchProjection::identity(d);
    let log_dt_start = template.layout().log_dt;
    let fixed_dt = working_model.fixed_dt();

    let al = &config.al;
    let tol_eq = F::lit(al.equality_tolerance);
    let tol_ineq = F::lit(al.inequality_tolerance);
    let mut multipliers = Multipliers::zeros(&working_model, config.horizon);
    let mut penalty = F::lit(al.initial_penalty);
    let mut x = template.to_vector();
    let mut residuals = working_model.residuals(&template);
    let mut prev_violation = residuals.max_violation();
    let mut trace = Vec::new();
    let mut function_evaluations = 0;
    let mut final_objective = F::nan();
    let base_kernel = KernelConfig::squared_euclidean(bandwidths[0])?;

    for (stage, &h) in bandwidths.iter().enumerate() {
        let kernel = base_kernel.with_bandwidth(h)?;
        let last_stage = stage + 1 == bandwidths.len();
        let rounds = if last_stage {
            al.final_stage_rounds.max(al.rounds_per_stage)
        } else {
            al.rounds_per_stage
        };
        for round in 0..rounds {
            let ctx = AlContext {
                model: &working_model,
                targets: &targets,
                kernel: &kernel,
                objective,
                projection: &projection,
                parallel: config.parallel,
            };
            let latest = Cell::new((F::nan(), F::nan()));
            let eval = |z: &[F]| -> Result<(F, Vec<F>)> {
                let tr = template.with_vector(z);
                let e = augmented_lagrangian_value_and_grad(&tr, &multipliers, penalty, &ctx)?;
                latest.set((e.objective, e.residuals.max_violation()));
                let mut g = e.grad;
                if fixed_dt {
                    g[log_dt_start..].fill(F::zero());
                }
                Ok((e.value, g))
            };
            let h64 = h.to_f64_lossy();
            let result = inner_minimize(eval, x, &config.inner, |iteration, value| {
                let (obj, viol) = latest.get();
                trace.push(TraceRecord {
                    stage,
                    bandwidth: h64,
                    round,
                    iteration,
                    objective: obj.to_f64_lossy(),
                    lagrangian: value.to_f64_lossy(),
                    max_violation: viol.to_f64_lossy(),
                });
            })
            .map_err(|e| match e {
                Error::NonFinite(what) => {
                    Error::NonFinite(format!("{what} (stage {stage}, h = {h}, round {round})"))
                }
                other => other,
            })?;
            function_evaluations += result.evaluations;
            x = result.x;
            final_objective = latest.get().0;
            residuals = working_model.residuals(&template.with_vector(&x));
            multipliers.update(&residuals, penalty);
            let violation = residuals.max_violation();
            log::debug!(
                "stage {stage} h={h} round {round}: L={} iters={} ({:?}) violation={violation} mu={penalty}",
                result.value,
                result.iterations,
                result.termination
            );
            if violation > prev_violation * F::lit(0.25) {
                penalty = (penalty * F::lit(al.penalty_growth)).min(F::lit(al.max_penalty));
            }
            prev_violation = violation;
            if residuals.max_eq_violation <= tol_eq && residuals.max_ineq_violation <= tol_ineq {
                break;
            }
        }
    }

    let working_traj = template.with_vector(&x);
    let trajectory = if frame == Frame::identity(d) {
        working_traj
    } else {
        working_traj.change_frame(&frame, &Frame::identity(d))
    };
    let physical = model.residuals(&trajectory);
    let converged = residuals.max_eq_violation <= tol_eq && residuals.max_ineq_violation <= tol_ineq;
    let message = if converged {
        "converged".to_string()
    } else {
        format!(
            "constraints not met: max equality violation {}, max inequality violation {}",
            residuals.max_eq_violation, residuals.max_ineq_violation
        )
    };
    Ok(SolverReport {
        trajectory,
        evaluations: trace.len(),
        objective_trace: trace,
        residuals,
        physical_max_eq_violation: physical.max_eq_violation,
        physical_max_ineq_violation: physical.max_ineq_violation,
        converged,
        wall_time_s: started.elapsed().as_secs_f64(),
        function_evaluations,
        bandwidths,
        final_objective,
        final_penalty: penalty,
        working_frame: frame,
        message,
    })
}
