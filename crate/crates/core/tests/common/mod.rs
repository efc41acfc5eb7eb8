#![allow(dead_code)]

use std::path::PathBuf;

use ergocov::domain::{load_samples, DomainSamples, SampleFormat};
use ergocov::dynamics::{Boundary, DynamicsModel, ModelKind, Trajectory, VelocityBound};
use ergocov::kernel::KernelConfig;
use ergocov::objective::{TargetSet, TrajectoryPoints};
use ergocov::plan::{default_start, PlanSetup};
use ergocov::points::PointSet;
use ergocov::solver::SolverConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load_fixture(name: &str) -> DomainSamples<f64> {
    let path = fixture(name);
    let format = SampleFormat::from_path(&path).unwrap();
    load_samples(&path, format).unwrap()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet<f64> {
    PointSet::new(d, (0..n * d).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
}

pub struct Instance {
    pub traj: TrajectoryPoints<f64>,
    pub targets: TargetSet<f64>,
    pub kernel: KernelConfig<f64>,
}

/// T in 4..=16, M in 8..=64, d in {2, 3}, points in the unit cube.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let t = rng.gen_range(4..=16);
    let m = rng.gen_range(8..=64);
    let d = rng.gen_range(2..=3);
    let h = rng.gen_range(0.05..0.5);
    let traj = TrajectoryPoints::new(random_points(rng, t, d)).unwrap();
    let pts = random_points(rng, m, d);
    let targets = if rng.gen_bool(0.5) {
        TargetSet::uniform(pts).unwrap()
    } else {
        let w: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        TargetSet::new(pts, w.iter().map(|x| x / total).collect()).unwrap()
    };
    Instance {
        traj,
        targets,
        kernel: KernelConfig::squared_euclidean(h).unwrap(),
    }
}

pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..x.len())
        .map(|i| {
            y[i] = x[i] + step;
            let up = f(&y);
            y[i] = x[i] - step;
            let down = f(&y);
            y[i] = x[i];
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// `||a - b|| / max(||a||, ||b||)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// A model using every constraint family, and a random trajectory that
/// violates most of them.
pub fn random_model_and_trajectory(rng: &mut ChaCha8Rng, kind: ModelKind) -> (DynamicsModel<f64>, Trajectory<f64>) {
    let t = rng.gen_range(4..=12);
    let d = rng.gen_range(2..=3);
    let mut model = DynamicsModel::single_integrator(d, 0.8);
    model.kind = kind;
    model.dt_min = 0.05;
    model.dt_max = 0.6;
    model.l_max = Some(1.5);
    model.t_max = Some(2.0);
    model.velocity_bound = VelocityBound::Both;
    if kind == ModelKind::DoubleIntegrator {
        model.a_max = Some(1.2);
    }
    let point = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<f64>>();
    model.initial = Some(Boundary {
        position: point(rng),
        velocity: Some(point(rng)),
    });
    model.terminal = Some(Boundary {
        position: point(rng),
        velocity: None,
    });
    let states = PointSet::new(2 * d, (0..t * 2 * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let controls = if kind == ModelKind::DoubleIntegrator {
        PointSet::new(d, (0..(t - 1) * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    } else {
        PointSet::new(d, Vec::new()).unwrap()
    };
    let log_dt = (0..t - 1).map(|_| rng.gen_range(-3.5f64..0.0)).collect();
    (model, Trajectory::new(states, controls, log_dt).unwrap())
}

/// Desk-scale 3D sweep problem on the bundled surface fixture.
pub fn desk_setup() -> PlanSetup<f64> {
    let samples = load_fixture("desk_surface.obj");
    let mut model = DynamicsModel::single_integrator(3, 1.0);
    model.l_max = Some(9.0);
    model.initial = Some(Boundary {
        position: default_start(&samples),
        velocity: None,
    });
    let mut solver = SolverConfig::default();
    solver.horizon = 200;
    solver.annealing.h0 = 0.05;
    solver.annealing.h_phys_star = 0.12 * 0.12;
    solver.annealing.stages = 10;
    PlanSetup {
        samples,
        model,
        solver,
        coverage_radius: None,
    }
}

/// Two unit-diameter disks ten diameters apart.
pub fn two_cluster_setup(seed: u64) -> PlanSetup<f64> {
    sparse_setup("two_clusters.csv", 14.0, seed)
}

pub fn one_cluster_setup(seed: u64) -> PlanSetup<f64> {
    sparse_setup("one_cluster.csv", 3.0, seed)
}

fn sparse_setup(name: &str, l_max: f64, seed: u64) -> PlanSetup<f64> {
    let samples = load_fixture(name);
    let mut model = DynamicsModel::single_integrator(2, 1.0);
    model.l_max = Some(l_max);
    model.initial = Some(Boundary {
        position: default_start(&samples),
        velocity: None,
    });
    let mut solver = SolverConfig::default();
    solver.horizon = 40;
    solver.annealing.h0 = 0.3;
    solver.annealing.h_phys_star = 0.04;
    solver.rng_seed = seed;
    PlanSetup {
        samples,
        model,
        solver,
        coverage_radius: None,
    }
}
