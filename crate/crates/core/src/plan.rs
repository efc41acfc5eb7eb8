//! A complete planning problem: samples, vehicle model, and solver settings.

use serde::Serialize;

use crate::domain::{DomainSamples, NormalizedDomain};
use crate::dynamics::{Boundary, DynamicsModel};
use crate::error::Result;
use crate::eval::coverage::{coverage, CoverageResult};
use crate::scalar::{sq_dist, Scalar};
use crate::solver::{solve, ObjectiveMode, SolverConfig, SolverReport};

#[derive(Debug, Clone)]
pub struct PlanSetup<F> {
    pub samples: DomainSamples<F>,
    /// Physical units.
    pub model: DynamicsModel<F>,
    pub solver: SolverConfig,
    /// Covering radius (m). Defaults to `sqrt(h_phys_star)`.
    pub coverage_radius: Option<F>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PlanOutcome<F> {
    pub report: SolverReport<F>,
    pub coverage: CoverageResult,
    pub extent: F,
    pub offset: Vec<F>,
}

impl<F: Scalar> PlanSetup<F> {
    pub fn coverage_radius(&self) -> F {
        self.coverage_radius
            .unwrap_or_else(|| F::lit(self.solver.annealing.h_phys_star).sqrt())
    }

    /// The same problem with every length multiplied by `s`: sample
    /// coordinates, speed and acceleration limits, path budget, boundary
    /// states, and covering radius. The physical bandwidth target scales by
    /// `s^2`. A raw-objective bandwidth is left alone on purpose.
    pub fn scaled(&self, s: F) -> Self {
        let m = &self.model;
        let scale_vec = |v: &[F]| v.iter().map(|&x| x * s).collect::<Vec<F>>();
        let boundary = |b: &Boundary<F>| Boundary {
            position: scale_vec(&b.position),
            velocity: b.velocity.as_deref().map(scale_vec),
        };
        let mut solver = self.solver.clone();
        let s64 = s.to_f64_lossy();
        solver.annealing.h_phys_star *= s64 * s64;
        Self {
            samples: self.samples.scaled(s),
            model: DynamicsModel {
                v_max: m.v_max * s,
                a_max: m.a_max.map(|a| a * s),
                l_max: m.l_max.map(|l| l * s),
                initial: m.initial.as_ref().map(boundary),
                terminal: m.terminal.as_ref().map(boundary),
                ..m.clone()
            },
            solver,
            coverage_radius: Some(self.coverage_radius() * s),
        }
    }

    pub fn with_objective(&self, objective: ObjectiveMode) -> Self {
        let mut out = self.clone();
        out.solver.objective = objective;
        out
    }

    pub fn domain(&self) -> Result<NormalizedDomain<F>> {
        NormalizedDomain::new(self.samples.clone())
    }

    pub fn run(&self) -> Result<PlanOutcome<F>> {
        let domain = self.domain()?;
        let report = solve(&domain, &self.model, &self.solver)?;
        let coverage = coverage(&report.trajectory.positions(), &self.samples, self.coverage_radius())?;
        Ok(PlanOutcome {
            report,
            coverage,
            extent: domain.extent(),
            offset: domain.offset().to_vec(),
        })
    }
}

/// The sample closest to the minimum corner of the bounding box, first index
/// on ties.
pub fn default_start<F: Scalar>(samples: &DomainSamples<F>) -> Vec<F> {
    let (lo, _) = samples.points().bounding_box();
    let mut best = (F::infinity(), 0);
    for (i, p) in samples.points().iter().enumerate() {
        let d = sq_dist(p, &lo);
        if d < best.0 {
            best = (d, i);
        }
    }
    samples.points().row(best.1).to_vec()
}
