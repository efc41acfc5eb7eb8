use std::cmp::Ordering;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::{sq_dist, Scalar};

fn lexicographic<F: Scalar>(a: &[F], b: &[F]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.partial_cmp(y).unwrap_or(Ordering::Equal))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Greedy nearest-neighbor tour from `start`. The returned sequence begins
/// with `start` and stops before the first leg that would push the total
/// length past `l_max`. Distance ties, up to rounding, go to the lexicographically
/// smaller point.
pub fn tsp_nearest_neighbor<F: Scalar>(points: &PointSet<F>, start: &[F], l_max: Option<F>) -> Result<PointSet<F>> {
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    if start.len() != points.dim() {
        return Err(Error::DimensionMismatch {
            expected: points.dim(),
            got: start.len(),
        });
    }
    let budget = l_max.unwrap_or_else(F::infinity);
    // relative, so lattice ties and exact budgets survive rescaling
    let tie_tol = F::epsilon() * F::lit(64.0);
    let mut visited = vec![false; points.len()];
    let mut out = start.to_vec();
    let mut current = start.to_vec();
    let mut length = F::zero();
    loop {
        let mut best: Option<(usize, F)> = None;
        for (i, p) in points.iter().enumerate() {
            if visited[i] {
                continue;
            }
            let d = sq_dist(&current, p);
            let better = match best {
                None => true,
                Some((j, bd)) => {
                    let tie = (d - bd).abs() <= tie_tol * bd;
                    (!tie && d < bd) || (tie && lexicographic(p, points.row(j)).is_lt())
                }
            };
            if better {
                best = Some((i, d));
            }
        }
        let Some((i, d2)) = best else { break };
        let leg = d2.sqrt();
        if length + leg > budget * (F::one() + tie_tol) {
            break;
        }
        length = length + leg;
        visited[i] = true;
        current.copy_from_slice(points.row(i));
        out.extend_from_slice(&current);
    }
    PointSet::new(points.dim(), out)
}

/// Tour through `count` samples drawn uniformly without replacement, with no
/// length limit.
pub fn tsp_subsampled<F: Scalar>(points: &PointSet<F>, start: &[F], count: usize, seed: u64) -> Result<PointSet<F>> {
    let count = count.min(points.len());
    if count == 0 {
        return Err(Error::EmptyInput);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = index::sample(&mut rng, points.len(), count).into_vec();
    chosen.sort_unstable();
    let rows: Vec<&[F]> = chosen.iter().map(|&i| points.row(i)).collect();
    tsp_nearest_neighbor(&PointSet::from_rows(&rows)?, start, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_order() {
        let pts = PointSet::from_rows(&[[3.0], [0.0], [1.0]]).unwrap();
        let tour = tsp_nearest_neighbor(&pts, &[0.0], None).unwrap();
        assert_eq!(tour.as_flat(), &[0.0, 0.0, 1.0, 3.0]);
    }

    #[test]
    fn zero_budget_keeps_start_only() {
        let pts = PointSet::from_rows(&[[1.0, 0.0], [2.0, 0.0]]).unwrap();
        let tour = tsp_nearest_neighbor(&pts, &[0.0, 0.0], Some(0.0)).unwrap();
        assert_eq!(tour.len(), 1);
    }

    #[test]
    fn ties_break_lexicographically() {
        let pts = PointSet::from_rows(&[[0.0, 1.0], [0.0, -1.0], [1.0, 0.0], [-1.0, 0.0]]).unwrap();
        let tour = tsp_nearest_neighbor(&pts, &[0.0, 0.0], None).unwrap();
        assert_eq!(tour.row(1), &[-1.0, 0.0]);
    }

    #[test]
    fn truncates_at_budget() {
        let pts = PointSet::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let tour = tsp_nearest_neighbor(&pts, &[0.0], Some(2.5)).unwrap();
        assert_eq!(tour.as_flat(), &[0.0, 1.0, 2.0]);
    }
}
