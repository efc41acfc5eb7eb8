//! Stationary isotropic kernels `k(u, v) = exp(-d(u, v) / h)` evaluated in log space.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::{sq_dist, Scalar};

/// A user-supplied distance with its gradient in the first argument.
pub trait CustomMetric<F>: Send + Sync {
    fn distance(&self, u: &[F], v: &[F]) -> F;
    /// Writes `grad_u d(u, v)` into `out`.
    fn gradient(&self, u: &[F], v: &[F], out: &mut [F]);
}

#[derive(Clone)]
pub enum Metric<F> {
    SquaredEuclidean,
    Custom(Arc<dyn CustomMetric<F>>),
}

impl<F> fmt::Debug for Metric<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SquaredEuclidean => f.write_str("SquaredEuclidean"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct KernelConfig<F> {
    metric: Metric<F>,
    bandwidth: F,
}

/// Number of random pairs a custom metric is spot-checked on.
const CUSTOM_METRIC_PROBES: usize = 16;

impl<F: Scalar> KernelConfig<F> {
    pub fn squared_euclidean(bandwidth: F) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self {
            metric: Metric::SquaredEuclidean,
            bandwidth,
        })
    }

    /// Wraps a custom metric after spot-checking `d >= 0`, `d(u, u) = 0` and
    /// symmetry on random pairs in `[0, 1]^dim`.
    pub fn custom(metric: Arc<dyn CustomMetric<F>>, bandwidth: F, dim: usize) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let mut rng = ChaCha8Rng::seed_from_u64(0x6b65726e);
        let tol = F::lit(1e-10);
        for _ in 0..CUSTOM_METRIC_PROBES {
            let u: Vec<F> = (0..dim).map(|_| F::lit(rng.gen::<f64>())).collect();
            let v: Vec<F> = (0..dim).map(|_| F::lit(rng.gen::<f64>())).collect();
            let duv = metric.distance(&u, &v);
            let dvu = metric.distance(&v, &u);
            if !(duv >= F::zero()) {
                return Err(Error::InvalidKernel("metric returned a negative distance".into()));
            }
            if (duv - dvu).abs() > tol * (F::one() + duv.abs()) {
                return Err(Error::InvalidKernel("metric is not symmetric".into()));
            }
            if metric.distance(&u, &u).abs() > tol {
                return Err(Error::InvalidKernel("metric has d(u, u) != 0".into()));
            }
        }
        Ok(Self {
            metric: Metric::Custom(metric),
            bandwidth,
        })
    }

    pub fn with_bandwidth(&self, bandwidth: F) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(Self {
            metric: self.metric.clone(),
            bandwidth,
        })
    }

    pub fn bandwidth(&self) -> F {
        self.bandwidth
    }

    pub fn metric(&self) -> &Metric<F> {
        &self.metric
    }

    #[inline]
    pub fn distance(&self, u: &[F], v: &[F]) -> F {
        match &self.metric {
            Metric::SquaredEuclidean => sq_dist(u, v),
            Metric::Custom(m) => m.distance(u, v),
        }
    }

    /// `log k(u, v) = -d(u, v) / h`.
    #[inline]
    pub fn log_kernel(&self, u: &[F], v: &[F]) -> F {
        -self.distance(u, v) / self.bandwidth
    }

    /// Accumulates `scale * grad_u d(u, v)` into `out`.
    #[inline]
    pub(crate) fn add_metric_gradient(&self, u: &[F], v: &[F], scale: F, out: &mut [F]) {
        match &self.metric {
            Metric::SquaredEuclidean => {
                let two = scale + scale;
                for ((o, &a), &b) in out.iter_mut().zip(u).zip(v) {
                    *o = *o + two * (a - b);
                }
            }
            Metric::Custom(m) => {
                let mut g = vec![F::zero(); u.len()];
                m.gradient(u, v, &mut g);
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = *o + scale * gi;
                }
            }
        }
    }
}

fn check_bandwidth<F: Scalar>(h: F) -> Result<()> {
    if h > F::zero() && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidKernel(format!("bandwidth must be positive and finite, got {h}")))
    }
}

pub fn eval_kernel<F: Scalar>(config: &KernelConfig<F>, u: &[F], v: &[F]) -> F {
    config.log_kernel(u, v).exp()
}

/// `grad_u d(u, v)`; exactly `2 (u - v)` for the squared Euclidean metric.
pub fn metric_gradient<F: Scalar>(config: &KernelConfig<F>, u: &[F], v: &[F]) -> Vec<F> {
    let mut out = vec![F::zero(); u.len()];
    config.add_metric_gradient(u, v, F::one(), &mut out);
    out
}

/// Dense matrix of log-kernel values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LogKernelMatrix<F> {
    rows: usize,
    cols: usize,
    entries: Vec<F>,
}

impl<F: Scalar> LogKernelMatrix<F> {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> F {
        self.entries[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn entries(&self) -> &[F] {
        &self.entries
    }
}

/// Rows are filled independently, so the parallel path is bitwise identical
/// to the sequential one.
pub fn log_kernel_matrix<F: Scalar>(
    config: &KernelConfig<F>,
    u: &PointSet<F>,
    v: &PointSet<F>,
) -> LogKernelMatrix<F> {
    build_matrix(config, u, v, false)
}

pub(crate) fn build_matrix<F: Scalar>(
    config: &KernelConfig<F>,
    u: &PointSet<F>,
    v: &PointSet<F>,
    parallel: bool,
) -> LogKernelMatrix<F> {
    let (rows, cols) = (u.len(), v.len());
    let mut entries = vec![F::zero(); rows * cols];
    if cols == 0 {
        return LogKernelMatrix { rows, cols, entries };
    }
    let fill = |(i, out): (usize, &mut [F])| {
        let ui = u.row(i);
        for (j, e) in out.iter_mut().enumerate() {
            *e = config.log_kernel(ui, v.row(j));
        }
    };
    if parallel {
        entries.par_chunks_mut(cols).enumerate().for_each(fill);
    } else {
        entries.chunks_mut(cols).enumerate().for_each(fill);
    }
    LogKernelMatrix { rows, cols, entries }
}

/// `log sum exp(values)` with the max shifted out.
pub fn logsumexp<F: Scalar>(values: &[F]) -> Result<F> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.iter().any(|x| x.is_nan() || *x == F::infinity()) {
        return Err(Error::InvalidInput("logsumexp input contains NaN or +inf".into()));
    }
    Ok(lse(values))
}

#[inline]
pub(crate) fn lse<F: Scalar>(values: &[F]) -> F {
    if values.len() == 1 {
        return values[0];
    }
    let m = values.iter().copied().fold(F::neg_infinity(), F::max);
    if m == F::neg_infinity() {
        return m;
    }
    let s: F = values.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}
