use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major set of equally sized points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet<F> {
    dim: usize,
    data: Vec<F>,
}

impl<F: Scalar> PointSet<F> {
    pub fn new(dim: usize, data: Vec<F>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("points must have dimension >= 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[F]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyInput)?;
        let dim = first.as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [F] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, F> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[F] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<F>> {
        self.iter().map(<[F]>::to_vec).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Applies `f` to every coordinate.
    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Self {
            dim: self.dim,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Axis-aligned bounding box as `(min corner, max corner)`.
    pub fn bounding_box(&self) -> (Vec<F>, Vec<F>) {
        let mut lo = vec![F::infinity(); self.dim];
        let mut hi = vec![F::neg_infinity(); self.dim];
        for p in self.iter() {
            for (l, (h, &x)) in lo.iter_mut().zip(hi.iter_mut().zip(p)) {
                *l = l.min(x);
                *h = h.max(x);
            }
        }
        (lo, hi)
    }

    /// Largest pairwise Euclidean distance (brute force).
    pub fn diameter(&self) -> F {
        let mut best = F::zero();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                best = best.max(crate::scalar::sq_dist(self.row(i), self.row(j)));
            }
        }
        best.sqrt()
    }
}
