//! Analytic gradients against central finite differences.

mod common;

use std::sync::Arc;

use common::*;
use ergocov::domain::{DomainSamples, NormalizedDomain};
use ergocov::dynamics::{ModelKind, SearchProjection};
use ergocov::kernel::{CustomMetric, KernelConfig};
use ergocov::objective::{emmd, log_emmd, log_sum_gradients, ObjectiveKind, TargetSet, TrajectoryPoints};
use ergocov::points::PointSet;
use ergocov::solver::{augmented_lagrangian_value_and_grad, AlContext, Multipliers};
use rand::Rng;

const STEP: f64 = 1e-6;
const TOL: f64 = 1e-5;

fn with_points(traj: &TrajectoryPoints<f64>, x: &[f64]) -> TrajectoryPoints<f64> {
    TrajectoryPoints::new(PointSet::new(traj.points().dim(), x.to_vec()).unwrap()).unwrap()
}

fn check_objective(kind: ObjectiveKind, seed: u64) {
    let mut rng = rng(seed);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let x0 = inst.traj.points().as_flat().to_vec();
        let eval = kind.evaluate(&inst.traj, &inst.targets, &inst.kernel, false).unwrap();
        let fd = central_difference(
            |x| {
                kind.evaluate(&with_points(&inst.traj, x), &inst.targets, &inst.kernel, false)
                    .unwrap()
                    .value
            },
            &x0,
            STEP,
        );
        let err = relative_error(eval.grad.as_flat(), &fd);
        assert!(err < TOL, "{kind:?}: relative error {err}");
    }
}

#[test]
fn raw_objective_gradient() {
    check_objective(ObjectiveKind::Raw, 1);
}

#[test]
fn log_surrogate_gradient() {
    check_objective(ObjectiveKind::LogSurrogate, 2);
}

#[test]
fn log_surrogate_without_constant_gradient() {
    check_objective(ObjectiveKind::LogSurrogateNoConstant, 3);
}

#[test]
fn constant_only_shifts_the_value() {
    let mut rng = rng(4);
    let inst = random_instance(&mut rng);
    let with = log_emmd(&inst.traj, &inst.targets, &inst.kernel, true).unwrap();
    let without = log_emmd(&inst.traj, &inst.targets, &inst.kernel, false).unwrap();
    assert_eq!(with.grad.as_flat(), without.grad.as_flat());
    // the difference is log C + 2 log M with C the weighted target self-similarity
    let c: f64 = (0..inst.targets.len())
        .flat_map(|i| (0..inst.targets.len()).map(move |j| (i, j)))
        .map(|(i, j)| {
            inst.targets.weights()[i]
                * inst.targets.weights()[j]
                * ergocov::eval_kernel(&inst.kernel, inst.targets.points().row(i), inst.targets.points().row(j))
        })
        .sum();
    let m = inst.targets.len() as f64;
    let expected = c.ln() + 2.0 * m.ln();
    assert!((with.value - without.value - expected).abs() < 1e-10);
}

#[test]
fn log_sums_match_brute_force() {
    let mut rng = rng(5);
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let x0 = inst.traj.points().as_flat().to_vec();
        let (gxx, gxm) = log_sum_gradients(&inst.traj, &inst.targets, &inst.kernel).unwrap();
        let k = &inst.kernel;
        let targets = &inst.targets;
        let log_fxx = |x: &[f64]| {
            let p = PointSet::new(inst.traj.points().dim(), x.to_vec()).unwrap();
            p.iter()
                .flat_map(|a| p.iter().map(move |b| ergocov::eval_kernel(k, a, b)))
                .sum::<f64>()
                .ln()
        };
        let log_fxm = |x: &[f64]| {
            let p = PointSet::new(inst.traj.points().dim(), x.to_vec()).unwrap();
            p.iter()
                .flat_map(|a| {
                    targets
                        .points()
                        .iter()
                        .zip(targets.weights())
                        .map(move |(b, w)| w * ergocov::eval_kernel(k, a, b))
                })
                .sum::<f64>()
                .ln()
        };
        assert!(relative_error(gxx.as_flat(), &central_difference(log_fxx, &x0, STEP)) < TOL);
        assert!(relative_error(gxm.as_flat(), &central_difference(log_fxm, &x0, STEP)) < TOL);
    }
}

/// `sum_k a_k (u_k - v_k)^2`
struct Anisotropic(Vec<f64>);

impl CustomMetric<f64> for Anisotropic {
    fn distance(&self, u: &[f64], v: &[f64]) -> f64 {
        self.0.iter().zip(u.iter().zip(v)).map(|(a, (x, y))| a * (x - y) * (x - y)).sum()
    }

    fn gradient(&self, u: &[f64], v: &[f64], out: &mut [f64]) {
        for (o, (a, (x, y))) in out.iter_mut().zip(self.0.iter().zip(u.iter().zip(v))) {
            *o = 2.0 * a * (x - y);
        }
    }
}

#[test]
fn custom_metric_gradient() {
    let mut rng = rng(6);
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let d = inst.traj.points().dim();
        let weights: Vec<f64> = (0..d).map(|_| rng.gen_range(0.5..2.0)).collect();
        let kernel = KernelConfig::custom(Arc::new(Anisotropic(weights)), inst.kernel.bandwidth(), d).unwrap();
        for kind in [ObjectiveKind::LogSurrogate, ObjectiveKind::Raw] {
            let eval = kind.evaluate(&inst.traj, &inst.targets, &kernel, false).unwrap();
            let x0 = inst.traj.points().as_flat().to_vec();
            let fd = central_difference(
                |x| kind.evaluate(&with_points(&inst.traj, x), &inst.targets, &kernel, false).unwrap().value,
                &x0,
                STEP,
            );
            assert!(relative_error(eval.grad.as_flat(), &fd) < TOL);
        }
    }
}

#[test]
fn residual_vjp() {
    let mut rng = rng(7);
    for kind in [ModelKind::SingleIntegrator, ModelKind::DoubleIntegrator] {
        for _ in 0..15 {
            let (model, traj) = random_model_and_trajectory(&mut rng, kind);
            let h = traj.horizon();
            let w_eq: Vec<f64> = (0..model.equality_count(h)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w_in: Vec<f64> = (0..model.inequality_count(h)).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let vjp = model.residual_vjp(&traj, &w_eq, &w_in);
            let f = |x: &[f64]| {
                let r = model.residuals(&traj.with_vector(x));
                let a: f64 = r.equality.iter().zip(&w_eq).map(|(r, w)| r * w).sum();
                let b: f64 = r.inequality.iter().zip(&w_in).map(|(r, w)| r * w).sum();
                a + b
            };
            let fd = central_difference(f, &traj.to_vector(), STEP);
            let err = relative_error(&vjp, &fd);
            assert!(err < TOL, "{kind:?}: {err}");
        }
    }
}

#[test]
fn augmented_lagrangian_gradient() {
    let mut rng = rng(8);
    for kind in [ModelKind::SingleIntegrator, ModelKind::DoubleIntegrator] {
        for _ in 0..10 {
            let (model, traj) = random_model_and_trajectory(&mut rng, kind);
            let m = rng.gen_range(8..=40);
            let targets = TargetSet::uniform(random_points(&mut rng, m, model.dim)).unwrap();
            let kernel = KernelConfig::squared_euclidean(rng.gen_range(0.05..0.5)).unwrap();
            let h = traj.horizon();
            let multipliers = Multipliers {
                equality: (0..model.equality_count(h)).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                inequality: (0..model.inequality_count(h)).map(|_| rng.gen_range(0.0..1.0)).collect(),
            };
            let projection = SearchProjection::identity(model.dim);
            let ctx = AlContext {
                model: &model,
                targets: &targets,
                kernel: &kernel,
                objective: ObjectiveKind::LogSurrogate,
                projection: &projection,
                parallel: false,
            };
            let eval = augmented_lagrangian_value_and_grad(&traj, &multipliers, 10.0, &ctx).unwrap();
            let fd = central_difference(
                |x| {
                    augmented_lagrangian_value_and_grad(&traj.with_vector(x), &multipliers, 10.0, &ctx)
                        .unwrap()
                        .value
                },
                &traj.to_vector(),
                STEP,
            );
            let err = relative_error(&eval.grad, &fd);
            assert!(err < TOL, "{kind:?}: {err}");
        }
    }
}

#[test]
fn chain_rule_through_normalizing_projection() {
    let mut rng = rng(9);
    let (model, traj) = random_model_and_trajectory(&mut rng, ModelKind::SingleIntegrator);
    let d = model.dim;
    // physical domain about 40 m across
    let raw = random_points(&mut rng, 30, d).map(|x| 40.0 * x - 7.0);
    let domain = NormalizedDomain::new(DomainSamples::uniform(raw).unwrap()).unwrap();
    let traj = traj.change_frame(&ergocov::Frame::identity(d), &domain.frame());
    let projection = SearchProjection::new(domain.frame());
    let targets = TargetSet::from_domain(&domain);
    let kernel = KernelConfig::squared_euclidean(0.2).unwrap();
    let objective = |x: &[f64]| {
        let pts = projection.project(&traj.with_vector(x));
        log_emmd(&pts, &targets, &kernel, true).unwrap()
    };
    let x0 = traj.to_vector();
    let eval = objective(&x0);
    let mut grad = vec![0.0; x0.len()];
    projection.pull_back(&eval.grad, model.state_dim(), &mut grad);
    let fd = central_difference(|x| objective(x).value, &x0, 1e-4);
    assert!(relative_error(&grad, &fd) < TOL);
}

#[test]
fn emmd_value_matches_brute_force() {
    let mut rng = rng(10);
    let inst = random_instance(&mut rng);
    let k = |a: &[f64], b: &[f64]| ergocov::eval_kernel(&inst.kernel, a, b);
    let x = inst.traj.points();
    let mu = inst.targets.points();
    let w = inst.targets.weights();
    let t = x.len() as f64;
    let a: f64 = x.iter().flat_map(|p| x.iter().map(move |q| k(p, q))).sum::<f64>() / (t * t);
    let b: f64 = x
        .iter()
        .flat_map(|p| mu.iter().zip(w).map(move |(q, wi)| wi * k(p, q)))
        .sum::<f64>()
        / t;
    let c: f64 = mu
        .iter()
        .zip(w)
        .flat_map(|(p, wi)| mu.iter().zip(w).map(move |(q, wj)| wi * wj * k(p, q)))
        .sum();
    let value = emmd(&inst.traj, &inst.targets, &inst.kernel).unwrap().value;
    assert!((value - (a - 2.0 * b + c)).abs() < 1e-12);
}
