//! Coverage, baselines, and the benchmark harness.

mod common;

use common::*;
use ergocov::domain::DomainSamples;
use ergocov::dynamics::{Boundary, DynamicsModel};
use ergocov::eval::{
    coverage, fixed_vs_adaptive_dt, format_table, rows_to_csv, run_scale_sweep, summarize, tsp_nearest_neighbor,
    tsp_subsampled, CellStatus, Method, SweepConfig,
};
use ergocov::plan::{default_start, PlanSetup};
use ergocov::points::PointSet;
use ergocov::solver::SolverConfig;

fn small_setup() -> PlanSetup<f64> {
    let samples = load_fixture("unit_square.csv");
    let mut model = DynamicsModel::single_integrator(2, 1.0);
    model.l_max = Some(3.0);
    model.initial = Some(Boundary {
        position: default_start(&samples),
        velocity: None,
    });
    let mut solver = SolverConfig::default();
    solver.horizon = 24;
    solver.annealing.h_phys_star = 0.01;
    solver.annealing.stages = 3;
    PlanSetup {
        samples,
        model,
        solver,
        // off the lattice spacing so boundary cases do not depend on rounding
        coverage_radius: Some(0.13),
    }
}

#[test]
fn coverage_of_brute_force_segment_example() {
    // distances 0.5 and 2 from the segment
    let path = PointSet::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
    let samples = DomainSamples::uniform(PointSet::from_rows(&[[1.0, 0.5], [1.0, 2.0]]).unwrap()).unwrap();
    let c = coverage(&path, &samples, 1.0).unwrap();
    assert_eq!(c.covered_fraction, 0.5);
}

#[test]
fn weighted_coverage() {
    let pts = PointSet::from_rows(&[[0.0, 0.0], [5.0, 0.0]]).unwrap();
    let samples = DomainSamples::new(pts, Some(vec![3.0, 1.0])).unwrap();
    let path = PointSet::from_rows(&[[0.0, 0.1]]).unwrap();
    assert_eq!(coverage(&path, &samples, 0.5).unwrap().covered_fraction, 0.75);
}

#[test]
fn tsp_examples() {
    let pts = PointSet::from_rows(&[[3.0], [1.0], [0.0]]).unwrap();
    let tour = tsp_nearest_neighbor(&pts, &[0.0], None).unwrap();
    assert_eq!(tour.as_flat(), &[0.0, 0.0, 1.0, 3.0]);
    let tour = tsp_nearest_neighbor(&pts, &[0.0], Some(0.0)).unwrap();
    assert_eq!(tour.len(), 2, "start plus the coincident sample at zero cost");
    let far = PointSet::from_rows(&[[3.0], [1.0]]).unwrap();
    assert_eq!(tsp_nearest_neighbor(&far, &[0.0], Some(0.0)).unwrap().len(), 1);
    let sub = tsp_subsampled(&pts, &[0.0], 2, 7).unwrap();
    assert_eq!(sub.len(), 3);
    assert_eq!(sub, tsp_subsampled(&pts, &[0.0], 2, 7).unwrap());
}

#[test]
fn sweep_has_one_row_per_cell() {
    let sweep = SweepConfig {
        methods: vec![Method::SiEmmd, Method::Tsp],
        scales: vec![1.0, 100.0, 10_000.0],
        repeats: 3,
        raw_bandwidth: None,
        parallel: true,
    };
    let rows = run_scale_sweep(&small_setup(), &sweep).unwrap();
    assert_eq!(rows.len(), 18);
    assert_eq!(rows_to_csv(&rows).lines().count(), 19);
    let summaries = summarize(&rows);
    assert_eq!(summaries.len(), 6);
    assert!(summaries.iter().all(|s| s.repeats == 3 && s.wall_time_std_s.is_some()));
    let table = format_table(&summaries);
    assert!(table.contains("si-emmd") && table.contains("tsp") && table.contains("scale 10000"));

    let tsp: Vec<f64> = rows.iter().filter(|r| r.method == Method::Tsp).map(|r| r.coverage_pct).collect();
    assert!(tsp.iter().all(|c| (c - tsp[0]).abs() <= 0.5), "{tsp:?}");
    let again = run_scale_sweep(&small_setup(), &sweep).unwrap();
    let cov = |r: &[ergocov::eval::BenchmarkRow]| r.iter().map(|x| x.coverage_pct).collect::<Vec<_>>();
    assert_eq!(cov(&rows), cov(&again));
}

#[test]
fn failed_cells_are_recorded() {
    let mut setup = small_setup();
    setup.solver.horizon = 1;
    let sweep = SweepConfig {
        methods: vec![Method::SiEmmd, Method::Tsp],
        scales: vec![1.0],
        repeats: 1,
        ..SweepConfig::default()
    };
    let rows = run_scale_sweep(&setup, &sweep).unwrap();
    assert_eq!(rows[0].status, CellStatus::Failed);
    assert!(!rows[0].converged);
    assert_eq!(rows[1].status, CellStatus::Converged);
}

#[test]
fn short_sweeps_omit_std() {
    let sweep = SweepConfig {
        methods: vec![Method::Tsp],
        scales: vec![1.0],
        repeats: 2,
        ..SweepConfig::default()
    };
    let rows = run_scale_sweep(&small_setup(), &sweep).unwrap();
    assert_eq!(summarize(&rows)[0].wall_time_std_s, None);
}

#[test]
fn sweep_config_validation() {
    let setup = small_setup();
    let bad = [
        SweepConfig {
            methods: vec![],
            ..SweepConfig::default()
        },
        SweepConfig {
            scales: vec![0.0],
            ..SweepConfig::default()
        },
        SweepConfig {
            repeats: 0,
            ..SweepConfig::default()
        },
    ];
    for s in bad {
        assert!(run_scale_sweep(&setup, &s).is_err());
    }
    let e = "lkh".parse::<Method>().unwrap_err().to_string();
    assert!(e.contains("si-emmd") && e.contains("tsp-unconstrained"));
}

#[test]
fn fixed_mode_pins_every_step() {
    let c = fixed_vs_adaptive_dt(&one_cluster_setup(0)).unwrap();
    assert!((c.fixed_dt - 3.0 / 39.0).abs() < 1e-15);
    assert!(c.fixed.dts.iter().all(|&d| d == c.fixed_dt));
    assert!(c.adaptive.dts.iter().any(|&d| d != c.adaptive.dts[0]));
}

#[test]
fn single_cluster_shows_no_step_advantage() {
    let (mut a, mut f) = (0.0, 0.0);
    for seed in 0..5 {
        let c = fixed_vs_adaptive_dt(&one_cluster_setup(seed)).unwrap();
        a += c.adaptive.coverage.covered_fraction / 5.0;
        f += c.fixed.coverage.covered_fraction / 5.0;
    }
    assert!((a - f).abs() <= 0.02, "adaptive {a} fixed {f}");
}

#[test]
fn step_comparison_needs_a_budget() {
    let mut setup = one_cluster_setup(0);
    setup.model.l_max = None;
    assert!(fixed_vs_adaptive_dt(&setup).is_err());
}
