//! Unconstrained first-order minimization with Armijo backtracking.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InnerMethod {
    GradientDescent,
    /// Limited-memory BFGS directions on top of the same line search.
    Lbfgs { memory: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerConfig {
    pub max_iterations: usize,
    /// Stop when `||grad||_inf` falls below this.
    pub gradient_tolerance: f64,
    pub method: InnerMethod,
    /// Sufficient-decrease constant `c1`.
    pub armijo: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            gradient_tolerance: 1e-8,
            method: InnerMethod::Lbfgs { memory: 10 },
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.gradient_tolerance > 0.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.backtrack > 0.0
            && self.backtrack < 1.0
            && !matches!(self.method, InnerMethod::Lbfgs { memory: 0 });
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("inner minimizer parameters out of range".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    /// No step satisfying sufficient decrease was found.
    LineSearchStall,
}

#[derive(Debug, Clone)]
pub struct InnerResult<F> {
    pub x: Vec<F>,
    pub value: F,
    pub grad: Vec<F>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: Termination,
}

/// Minimizes `f` from `x0`.
///
/// `observe(iteration, value)` is called for the starting point and after
/// every accepted step; the point just evaluated is always the accepted one
/// when it fires. Accepted values never increase.
pub fn inner_minimize<F, Obj, Obs>(
    mut f: Obj,
    x0: Vec<F>,
    config: &InnerConfig,
    mut observe: Obs,
) -> Result<InnerResult<F>>
where
    F: Scalar,
    Obj: FnMut(&[F]) -> Result<(F, Vec<F>)>,
    Obs: FnMut(usize, F),
{
    let mut x = x0;
    let (mut value, mut grad) = f(&x)?;
    let mut evaluations = 1;
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("objective at the starting point".into()));
    }
    observe(0, value);

    let tol = F::lit(config.gradient_tolerance);
    let c1 = F::lit(config.armijo);
    let shrink = F::lit(config.backtrack);
    let mut history: VecDeque<(Vec<F>, Vec<F>, F)> = VecDeque::new();
    let mut gd_step = F::one();
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;

    while iterations < config.max_iterations {
        let gmax = grad.iter().fold(F::zero(), |m, g| m.max(g.abs()));
        if gmax <= tol {
            termination = Termination::GradientTolerance;
            break;
        }
        let (mut dir, mut step) = match config.method {
            InnerMethod::Lbfgs { .. } if !history.is_empty() => (two_loop(&grad, &history), F::one()),
            InnerMethod::Lbfgs { .. } => (grad.iter().map(|&g| -g).collect(), gmax.recip()),
            InnerMethod::GradientDescent => (grad.iter().map(|&g| -g).collect(), gd_step),
        };
        let mut slope = dot(&grad, &dir);
        if !(slope < F::zero()) {
            history.clear();
            dir = grad.iter().map(|&g| -g).collect();
            slope = -dot(&grad, &grad);
            step = gmax.recip();
        }

        let mut accepted = None;
        for _ in 0..=config.max_backtracks {
            let trial: Vec<F> = x.iter().zip(&dir).map(|(&xi, &di)| xi + step * di).collect();
            if trial == x {
                break;
            }
            let (tv, tg) = f(&trial)?;
            evaluations += 1;
            if tv.is_finite() && tg.iter().all(|g| g.is_finite()) && tv <= value + c1 * step * slope {
                accepted = Some((trial, tv, tg));
                break;
            }
            step = step * shrink;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            termination = Termination::LineSearchStall;
            break;
        };
        iterations += 1;
        if let InnerMethod::Lbfgs { memory } = config.method {
            let s: Vec<F> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            let y: Vec<F> = g_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > F::lit(1e-12) * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
                if history.len() == memory {
                    history.pop_front();
                }
                history.push_back((s, y, sy.recip()));
            }
        } else {
            gd_step = step / shrink;
        }
        x = x_new;
        value = v_new;
        grad = g_new;
        observe(iterations, value);
    }

    Ok(InnerResult {
        x,
        value,
        grad,
        iterations,
        evaluations,
        termination,
    })
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

fn two_loop<F: Scalar>(grad: &[F], history: &VecDeque<(Vec<F>, Vec<F>, F)>) -> Vec<F> {
    let mut q: Vec<F> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi = *qi - a * yi;
        }
        alphas.push(a);
    }
    let (s, y, _) = history.back().expect("nonempty history");
    let gamma = dot(s, y) / dot(y, y);
    for qi in q.iter_mut() {
        *qi = *qi * gamma;
    }
    for ((s, y, rho), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi = *qi + (a - b) * si;
        }
    }
    q.into_iter().map(|v| -v).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(c: &[f64]) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)> + '_ {
        move |x| {
            let v = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
            let g = x.iter().zip(c).map(|(a, b)| 2.0 * (a - b)).collect();
            Ok((v, g))
        }
    }

    #[test]
    fn converges_on_quadratic() {
        let c = [1.0, -2.0, 0.5];
        for method in [InnerMethod::GradientDescent, InnerMethod::Lbfgs { memory: 5 }] {
            let cfg = InnerConfig {
                method,
                max_iterations: 500,
                ..InnerConfig::default()
            };
            let mut values = Vec::new();
            let r = inner_minimize(quadratic(&c), vec![10.0, 10.0, 10.0], &cfg, |_, v| values.push(v)).unwrap();
            assert_eq!(r.termination, Termination::GradientTolerance);
            for (a, b) in r.x.iter().zip(&c) {
                assert!((a - b).abs() < 1e-8, "{method:?}: {a} vs {b}");
            }
            assert!(values.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn rosenbrock_values_monotone() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Ok((v, g))
        };
        let mut values = Vec::new();
        let cfg = InnerConfig {
            max_iterations: 2000,
            ..InnerConfig::default()
        };
        let r = inner_minimize(rosen, vec![-1.2, 1.0], &cfg, |_, v| values.push(v)).unwrap();
        assert!(values.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn nonfinite_start_is_an_error() {
        let f = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(matches!(
            inner_minimize(f, vec![0.0], &InnerConfig::default(), |_, _| {}),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn nonfinite_trials_are_backtracked() {
        // infinite beyond x > 1, minimum at 0.9
        let f = |x: &[f64]| {
            if x[0] > 1.0 {
                Ok((f64::INFINITY, vec![f64::NAN]))
            } else {
                Ok(((x[0] - 0.9).powi(2), vec![2.0 * (x[0] - 0.9)]))
            }
        };
        let cfg = InnerConfig {
            method: InnerMethod::GradientDescent,
            ..InnerConfig::default()
        };
        let r = inner_minimize(f, vec![-5.0], &cfg, |_, _| {}).unwrap();
        assert!((r.x[0] - 0.9).abs() < 1e-6);
    }
}
