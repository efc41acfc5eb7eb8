//! Scale-invariant ergodic coverage trajectory optimization.
//!
//! Target samples are normalized by their largest bounding-box span, a
//! trajectory is fit to them by minimizing a log-domain kernel discrepancy
//! under vehicle dynamics with a shrinking kernel bandwidth, and the result is
//! mapped back to physical units. Everything numeric is generic over
//! [`Scalar`]; the aliases below fix `f64` (and `f32`) for everyday use.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod export;
pub mod kernel;
pub mod objective;
pub mod plan;
pub mod points;
pub mod scalar;
pub mod solver;

pub use domain::{compute_extent, load_samples, parse_samples, Frame, SampleFormat};
pub use dynamics::{
    project_to_search_space, seed_trajectory, Boundary, ConstraintResidual, ModelKind, SearchProjection,
    SeedStrategy, VelocityBound,
};
pub use error::{Error, Result};
pub use eval::{coverage, CoverageResult, Method};
pub use kernel::{eval_kernel, log_kernel_matrix, logsumexp, CustomMetric, Metric};
pub use objective::{attention_weights, emmd, emmd_gradient, log_emmd, log_emmd_gradient, ObjectiveKind};
pub use plan::default_start;
pub use scalar::Scalar;
pub use solver::{solve, AlConfig, AnnealingConfig, InnerConfig, InnerMethod, ObjectiveMode, SolverConfig};

pub type PointSet = points::PointSet<f64>;
pub type DomainSamples = domain::DomainSamples<f64>;
pub type NormalizedDomain = domain::NormalizedDomain<f64>;
pub type KernelConfig = kernel::KernelConfig<f64>;
pub type TargetSet = objective::TargetSet<f64>;
pub type TrajectoryPoints = objective::TrajectoryPoints<f64>;
pub type DynamicsModel = dynamics::DynamicsModel<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type AnnealingSchedule = solver::AnnealingSchedule<f64>;
pub type SolverReport = solver::SolverReport<f64>;
pub type PlanSetup = plan::PlanSetup<f64>;

pub type PointSet32 = points::PointSet<f32>;
pub type DomainSamples32 = domain::DomainSamples<f32>;
pub type NormalizedDomain32 = domain::NormalizedDomain<f32>;
pub type KernelConfig32 = kernel::KernelConfig<f32>;
pub type DynamicsModel32 = dynamics::DynamicsModel<f32>;
pub type Trajectory32 = dynamics::Trajectory<f32>;
pub type SolverReport32 = solver::SolverReport<f32>;
