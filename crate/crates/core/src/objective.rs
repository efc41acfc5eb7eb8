//! Ergodic maximum-mean-discrepancy objectives over normalized points.
//!
//! With trajectory points `w_t` (uniform mass `1/T`) and target samples `w_i`
//! (weights `pi_i`), write
//!
//! ```text
//! F_xx = sum_{t,s} k(w_t, w_s)      F_xmu = sum_{t,i} pi_i k(w_t, w_i)
//! A = F_xx / T^2                    B = F_xmu / T
//! C = sum_{i,j} pi_i pi_j k(w_i, w_j)
//! ```
//!
//! The raw estimator is `A - 2B + C`. The log surrogate is
//! `log A - 2 log B + log C = log(AC / B^2)`, which Cauchy-Schwarz keeps
//! nonnegative and which vanishes exactly where the raw estimator does.
//! Every sum is formed by log-sum-exp over log-kernel matrices.

use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use crate::domain::NormalizedDomain;
use crate::error::{Error, Result};
use crate::kernel::{build_matrix, lse, KernelConfig, LogKernelMatrix, Metric};
use crate::points::PointSet;
use crate::scalar::Scalar;

/// Trajectory positions in normalized coordinates, one row per knot.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoints<F>(PointSet<F>);

impl<F: Scalar> TrajectoryPoints<F> {
    pub fn new(points: PointSet<F>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if !points.is_finite() {
            return Err(Error::NonFinite("trajectory points".into()));
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &PointSet<F> {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Weighted target samples with a per-bandwidth cache of `log C`.
#[derive(Debug)]
pub struct TargetSet<F> {
    points: PointSet<F>,
    weights: Vec<F>,
    log_weights: Vec<F>,
    log_m: F,
    self_term: RwLock<Vec<(CacheKey, F)>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CacheKey {
    bandwidth_bits: u64,
    metric: usize,
}

impl CacheKey {
    fn of<F: Scalar>(kernel: &KernelConfig<F>) -> Self {
        let metric = match kernel.metric() {
            Metric::SquaredEuclidean => 0,
            Metric::Custom(m) => std::sync::Arc::as_ptr(m) as *const () as usize,
        };
        Self {
            bandwidth_bits: kernel.bandwidth().to_f64_lossy().to_bits(),
            metric,
        }
    }
}

impl<F: Scalar> Clone for TargetSet<F> {
    fn clone(&self) -> Self {
        Self {
            points: self.points.clone(),
            weights: self.weights.clone(),
            log_weights: self.log_weights.clone(),
            log_m: self.log_m,
            self_term: RwLock::new(self.self_term.read().expect("cache poisoned").clone()),
        }
    }
}

impl<F: Scalar> TargetSet<F> {
    /// `weights` must be nonnegative; they are renormalized to sum to one.
    pub fn new(points: PointSet<F>, weights: Vec<F>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.len() != points.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} targets",
                weights.len(),
                points.len()
            )));
        }
        let total: F = weights.iter().copied().sum();
        if !(total > F::zero()) || weights.iter().any(|&w| w < F::zero()) {
            return Err(Error::InvalidInput("target weights must be nonnegative with positive sum".into()));
        }
        let weights: Vec<F> = weights.into_iter().map(|w| w / total).collect();
        Ok(Self {
            log_weights: weights.iter().map(|w| w.ln()).collect(),
            log_m: F::lit(points.len() as f64).ln(),
            points,
            weights,
            self_term: RwLock::new(Vec::new()),
        })
    }

    pub fn uniform(points: PointSet<F>) -> Result<Self> {
        let m = points.len();
        Self::new(points, vec![F::one(); m])
    }

    pub fn from_domain(domain: &NormalizedDomain<F>) -> Self {
        Self::new(domain.normalized_points().clone(), domain.weights().to_vec())
            .expect("normalized domain is a valid target set")
    }

    pub fn points(&self) -> &PointSet<F> {
        &self.points
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `log C = log sum_{i,j} pi_i pi_j k(w_i, w_j)`, computed once per kernel.
    pub fn log_self_similarity(&self, kernel: &KernelConfig<F>) -> F {
        let key = CacheKey::of(kernel);
        if let Some(&(_, v)) = self
            .self_term
            .read()
            .expect("cache poisoned")
            .iter()
            .find(|(k, _)| *k == key)
        {
            return v;
        }
        let value = self.compute_log_self_similarity(kernel);
        let mut cache = self.self_term.write().expect("cache poisoned");
        if !cache.iter().any(|(k, _)| *k == key) {
            cache.push((key, value));
        }
        value
    }

    fn compute_log_self_similarity(&self, kernel: &KernelConfig<F>) -> F {
        let m = self.len();
        let mut row_lse = Vec::with_capacity(m);
        let mut buf = vec![F::zero(); m];
        for i in 0..m {
            let pi = self.points.row(i);
            for (j, b) in buf.iter_mut().enumerate() {
                *b = self.log_weights[i] + self.log_weights[j] + kernel.log_kernel(pi, self.points.row(j));
            }
            row_lse.push(lse(&buf));
        }
        lse(&row_lse)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveTerms<F> {
    /// `log F_xx`, `log F_xmu` (weighted), `log C`.
    LogSurrogate { log_fxx: F, log_fxmu: F, log_fmumu: F },
    /// The three terms `A`, `B`, `C` of the raw estimator.
    Raw { self_term: F, cross_term: F, target_term: F },
}

#[derive(Debug, Clone)]
pub struct ObjectiveEval<F> {
    pub value: F,
    /// Gradient with respect to each normalized trajectory point.
    pub grad: PointSet<F>,
    pub terms: ObjectiveTerms<F>,
}

/// Which ergodic objective to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `log(AC / B^2)`, nonnegative.
    LogSurrogate,
    /// `log F_xx - 2 log F_xmu` without normalizers; same gradient.
    LogSurrogateNoConstant,
    /// `A - 2B + C`.
    Raw,
}

impl ObjectiveKind {
    pub fn evaluate<F: Scalar>(
        self,
        traj: &TrajectoryPoints<F>,
        targets: &TargetSet<F>,
        kernel: &KernelConfig<F>,
        parallel: bool,
    ) -> Result<ObjectiveEval<F>> {
        check_dims(traj, targets)?;
        Ok(match self {
            Self::LogSurrogate => log_surrogate(traj, targets, kernel, true, parallel),
            Self::LogSurrogateNoConstant => log_surrogate(traj, targets, kernel, false, parallel),
            Self::Raw => raw_emmd(traj, targets, kernel, parallel),
        })
    }
}

fn check_dims<F: Scalar>(traj: &TrajectoryPoints<F>, targets: &TargetSet<F>) -> Result<()> {
    if traj.points().dim() != targets.points().dim() {
        return Err(Error::DimensionMismatch {
            expected: targets.points().dim(),
            got: traj.points().dim(),
        });
    }
    Ok(())
}

/// Finite-sample ergodic MMD `A - 2B + C` and its gradient.
pub fn emmd<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
) -> Result<ObjectiveEval<F>> {
    ObjectiveKind::Raw.evaluate(traj, targets, kernel, false)
}

pub fn emmd_gradient<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
) -> Result<PointSet<F>> {
    emmd(traj, targets, kernel).map(|e| e.grad)
}

/// Log-surrogate ergodic MMD. With `include_constant` the value is
/// `log(AC / B^2) >= 0`; without it, `log F_xx - 2 log F_xmu` with unnormalized
/// sums. The gradient is the same either way.
pub fn log_emmd<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
    include_constant: bool,
) -> Result<ObjectiveEval<F>> {
    let kind = if include_constant {
        ObjectiveKind::LogSurrogate
    } else {
        ObjectiveKind::LogSurrogateNoConstant
    };
    kind.evaluate(traj, targets, kernel, false)
}

pub fn log_emmd_gradient<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
) -> Result<PointSet<F>> {
    log_emmd(traj, targets, kernel, true).map(|e| e.grad)
}

/// Gradients of `log F_xx` and `log F_xmu` separately.
pub fn log_sum_gradients<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
) -> Result<(PointSet<F>, PointSet<F>)> {
    check_dims(traj, targets)?;
    let sums = LogSums::new(traj, targets, kernel, false);
    let d = traj.points().dim();
    let t = traj.len();
    let mut gxx = PointSet::new(d, vec![F::zero(); t * d])?;
    let mut gxm = gxx.clone();
    for s in 0..t {
        sums.self_gradient(traj, kernel, s, F::one(), gxx.row_mut(s));
        sums.cross_gradient(traj, targets, kernel, s, F::one(), gxm.row_mut(s));
    }
    Ok((gxx, gxm))
}

/// Globally normalized soft-attention weights.
#[derive(Debug, Clone)]
pub struct AttentionWeights<F> {
    t: usize,
    m: usize,
    alpha: Vec<F>,
    beta: Vec<F>,
}

impl<F: Scalar> AttentionWeights<F> {
    /// `alpha_ts = k(w_t, w_s) / F_xx`.
    pub fn alpha(&self, t: usize, s: usize) -> F {
        self.alpha[t * self.t + s]
    }

    /// `beta_ti = pi_i k(w_t, w_i) / F_xmu`.
    pub fn beta(&self, t: usize, i: usize) -> F {
        self.beta[t * self.m + i]
    }

    pub fn alpha_entries(&self) -> &[F] {
        &self.alpha
    }

    pub fn beta_entries(&self) -> &[F] {
        &self.beta
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.t, self.m)
    }
}

pub fn attention_weights<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
) -> Result<AttentionWeights<F>> {
    check_dims(traj, targets)?;
    let sums = LogSums::new(traj, targets, kernel, false);
    let t = traj.len();
    let m = targets.len();
    let alpha = sums.kxx.entries().iter().map(|&l| (l - sums.log_fxx).exp()).collect();
    let mut beta = Vec::with_capacity(t * m);
    for r in 0..t {
        for (i, &l) in sums.kxm.row(r).iter().enumerate() {
            beta.push((targets.log_weights[i] + l - sums.log_fxmu).exp());
        }
    }
    Ok(AttentionWeights { t, m, alpha, beta })
}

struct LogSums<F> {
    kxx: LogKernelMatrix<F>,
    kxm: LogKernelMatrix<F>,
    log_fxx: F,
    log_fxmu: F,
    inv_h: F,
}

impl<F: Scalar> LogSums<F> {
    fn new(
        traj: &TrajectoryPoints<F>,
        targets: &TargetSet<F>,
        kernel: &KernelConfig<F>,
        parallel: bool,
    ) -> Self {
        let kxx = build_matrix(kernel, traj.points(), traj.points(), parallel);
        let kxm = build_matrix(kernel, traj.points(), targets.points(), parallel);
        let row_lse: Vec<F> = (0..kxx.rows()).map(|r| lse(kxx.row(r))).collect();
        let log_fxx = lse(&row_lse);
        let mut buf = vec![F::zero(); kxm.cols()];
        let row_lse: Vec<F> = (0..kxm.rows())
            .map(|r| {
                for ((b, &l), &lw) in buf.iter_mut().zip(kxm.row(r)).zip(&targets.log_weights) {
                    *b = l + lw;
                }
                lse(&buf)
            })
            .collect();
        let log_fxmu = lse(&row_lse);
        Self {
            kxx,
            kxm,
            log_fxx,
            log_fxmu,
            inv_h: kernel.bandwidth().recip(),
        }
    }

    /// Adds `scale * d log F_xx / d w_s` to `out`.
    fn self_gradient(
        &self,
        traj: &TrajectoryPoints<F>,
        kernel: &KernelConfig<F>,
        s: usize,
        scale: F,
        out: &mut [F],
    ) {
        let ws = traj.points().row(s);
        for t in 0..traj.len() {
            if t == s {
                continue;
            }
            let a = (self.kxx.get(s, t) - self.log_fxx).exp() + (self.kxx.get(t, s) - self.log_fxx).exp();
            kernel.add_metric_gradient(ws, traj.points().row(t), -scale * self.inv_h * a, out);
        }
    }

    /// Adds `scale * d log F_xmu / d w_s` to `out`.
    fn cross_gradient(
        &self,
        traj: &TrajectoryPoints<F>,
        targets: &TargetSet<F>,
        kernel: &KernelConfig<F>,
        s: usize,
        scale: F,
        out: &mut [F],
    ) {
        let ws = traj.points().row(s);
        for (i, &l) in self.kxm.row(s).iter().enumerate() {
            let b = (targets.log_weights[i] + l - self.log_fxmu).exp();
            if b > F::zero() {
                kernel.add_metric_gradient(ws, targets.points.row(i), -scale * self.inv_h * b, out);
            }
        }
    }
}

fn log_surrogate<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
    include_constant: bool,
    parallel: bool,
) -> ObjectiveEval<F> {
    let sums = LogSums::new(traj, targets, kernel, parallel);
    let log_fmumu = targets.log_self_similarity(kernel);
    let two = F::lit(2.0);
    // log A - 2 log B + log C; the 1/T factors cancel.
    let value = if include_constant {
        sums.log_fxx - two * sums.log_fxmu + log_fmumu
    } else {
        sums.log_fxx - two * (sums.log_fxmu + targets.log_m)
    };
    let d = traj.points().dim();
    let t = traj.len();
    let mut grad = PointSet::new(d, vec![F::zero(); t * d]).expect("valid shape");
    for s in 0..t {
        let out = grad.row_mut(s);
        sums.self_gradient(traj, kernel, s, F::one(), out);
        sums.cross_gradient(traj, targets, kernel, s, -two, out);
    }
    ObjectiveEval {
        value,
        grad,
        terms: ObjectiveTerms::LogSurrogate {
            log_fxx: sums.log_fxx,
            log_fxmu: sums.log_fxmu,
            log_fmumu,
        },
    }
}

fn raw_emmd<F: Scalar>(
    traj: &TrajectoryPoints<F>,
    targets: &TargetSet<F>,
    kernel: &KernelConfig<F>,
    parallel: bool,
) -> ObjectiveEval<F> {
    let kxx = build_matrix(kernel, traj.points(), traj.points(), parallel);
    let kxm = build_matrix(kernel, traj.points(), targets.points(), parallel);
    let t = traj.len();
    let tf = F::lit(t as f64);
    let inv_h = kernel.bandwidth().recip();
    let two = F::lit(2.0);

    let self_term = kxx.entries().iter().map(|l| l.exp()).sum::<F>() / (tf * tf);
    let mut cross_sum = F::zero();
    for r in 0..t {
        for (i, &l) in kxm.row(r).iter().enumerate() {
            cross_sum = cross_sum + targets.weights[i] * l.exp();
        }
    }
    let cross_term = cross_sum / tf;
    let target_term = targets.log_self_similarity(kernel).exp();
    let value = self_term - two * cross_term + target_term;

    let d = traj.points().dim();
    let mut grad = PointSet::new(d, vec![F::zero(); t * d]).expect("valid shape");
    let self_scale = -two * inv_h / (tf * tf);
    let cross_scale = two * inv_h / tf;
    for s in 0..t {
        let ws = traj.points().row(s).to_vec();
        let out = grad.row_mut(s);
        for r in 0..t {
            if r != s {
                kernel.add_metric_gradient(&ws, traj.points().row(r), self_scale * kxx.get(s, r).exp(), out);
            }
        }
        for (i, &l) in kxm.row(s).iter().enumerate() {
            let w = targets.weights[i] * l.exp();
            if w > F::zero() {
                kernel.add_metric_gradient(&ws, targets.points.row(i), cross_scale * w, out);
            }
        }
    }
    ObjectiveEval {
        value,
        grad,
        terms: ObjectiveTerms::Raw {
            self_term,
            cross_term,
            target_term,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(rows: &[[f64; 2]]) -> PointSet<f64> {
        PointSet::from_rows(rows).unwrap()
    }

    #[test]
    fn one_by_one_instance() {
        let k = KernelConfig::squared_euclidean(1.0).unwrap();
        let traj = TrajectoryPoints::new(pts(&[[0.0, 0.0]])).unwrap();
        let targets = TargetSet::uniform(pts(&[[1.0, 0.0]])).unwrap();
        let raw = emmd(&traj, &targets, &k).unwrap();
        // hand expansion: A = C = 1, B = e^-1
        let expected = 2.0 * (1.0 - (-1.0f64).exp());
        assert!((raw.value - expected).abs() < 1e-15);
        assert!((raw.value - 1.264_241_1).abs() < 1e-7);
        let log = log_emmd(&traj, &targets, &k, true).unwrap();
        assert!((log.value - 2.0).abs() < 1e-15);
    }

    #[test]
    fn matching_instance_is_zero() {
        let k = KernelConfig::squared_euclidean(0.1).unwrap();
        let p = pts(&[[0.1, 0.2], [0.5, 0.9], [0.7, 0.3], [0.0, 1.0]]);
        let traj = TrajectoryPoints::new(p.clone()).unwrap();
        let targets = TargetSet::uniform(p).unwrap();
        assert!(emmd(&traj, &targets, &k).unwrap().value.abs() < 1e-12);
        assert!(log_emmd(&traj, &targets, &k, true).unwrap().value.abs() < 1e-10);
    }

    #[test]
    fn constant_does_not_change_gradient() {
        let k = KernelConfig::squared_euclidean(0.2).unwrap();
        let traj = TrajectoryPoints::new(pts(&[[0.1, 0.2], [0.4, 0.4], [0.9, 0.1]])).unwrap();
        let targets = TargetSet::uniform(pts(&[[0.0, 0.0], [1.0, 1.0], [0.5, 0.2]])).unwrap();
        let a = log_emmd(&traj, &targets, &k, true).unwrap();
        let b = log_emmd(&traj, &targets, &k, false).unwrap();
        assert_eq!(a.grad, b.grad);
        let ObjectiveTerms::LogSurrogate { log_fmumu, .. } = a.terms else {
            panic!("wrong terms")
        };
        // the offset is exactly log C + 2 log M
        assert!((a.value - b.value - (log_fmumu + 2.0 * 3f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn singleton_attention() {
        let k = KernelConfig::squared_euclidean(0.2).unwrap();
        let traj = TrajectoryPoints::new(pts(&[[0.3, 0.3]])).unwrap();
        let targets = TargetSet::uniform(pts(&[[0.0, 0.0], [1.0, 1.0]])).unwrap();
        let w = attention_weights(&traj, &targets, &k).unwrap();
        assert_eq!(w.alpha_entries(), &[1.0]);
    }

    #[test]
    fn grid_attention_rows_positive() {
        let k = KernelConfig::squared_euclidean(0.05).unwrap();
        let grid: Vec<[f64; 2]> = (0..5)
            .flat_map(|i| (0..5).map(move |j| [i as f64 / 4.0, j as f64 / 4.0]))
            .collect();
        let traj = TrajectoryPoints::new(pts(&grid)).unwrap();
        let targets = TargetSet::uniform(pts(&grid)).unwrap();
        let w = attention_weights(&traj, &targets, &k).unwrap();
        assert!(w.beta_entries().iter().all(|&b| b > 0.0));
    }

    #[test]
    fn coincident_pair_has_zero_raw_gradient() {
        let k = KernelConfig::squared_euclidean(0.3).unwrap();
        let traj = TrajectoryPoints::new(pts(&[[0.5, 0.5]])).unwrap();
        let targets = TargetSet::uniform(pts(&[[0.5, 0.5]])).unwrap();
        let g = emmd_gradient(&traj, &targets, &k).unwrap();
        assert!(g.as_flat().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn self_term_is_cached() {
        let k = KernelConfig::squared_euclidean(0.3).unwrap();
        let targets = TargetSet::uniform(pts(&[[0.0, 0.0], [1.0, 0.5]])).unwrap();
        let a = targets.log_self_similarity(&k);
        assert_eq!(targets.self_term.read().unwrap().len(), 1);
        assert_eq!(targets.log_self_similarity(&k), a);
        targets.log_self_similarity(&k.with_bandwidth(0.1).unwrap());
        assert_eq!(targets.self_term.read().unwrap().len(), 2);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let k = KernelConfig::squared_euclidean(0.3).unwrap();
        let traj = TrajectoryPoints::new(PointSet::from_rows(&[[0.0, 0.0, 0.0]]).unwrap()).unwrap();
        let targets = TargetSet::uniform(pts(&[[0.0, 0.0], [1.0, 0.5]])).unwrap();
        assert!(matches!(emmd(&traj, &targets, &k), Err(Error::DimensionMismatch { .. })));
    }
}
