use serde::{Deserialize, Serialize};

use crate::domain::DomainSamples;
use crate::error::{Error, Result};
use crate::points::PointSet;
use crate::scalar::{point_segment_distance, sq_dist, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    /// Weighted share of covered samples, in `[0, 1]`.
    pub covered_fraction: f64,
    pub radius_phys: f64,
    pub per_sample_covered: Vec<bool>,
    pub path_length: f64,
}

/// Marks a sample covered when its distance to the polyline through `path`
/// is at most `radius`. A one-point path covers a ball around that point.
pub fn coverage<F: Scalar>(path: &PointSet<F>, samples: &DomainSamples<F>, radius: F) -> Result<CoverageResult> {
    if !(radius > F::zero()) || !radius.is_finite() {
        return Err(Error::InvalidInput(format!("covering radius must be positive, got {radius}")));
    }
    if path.is_empty() {
        return Err(Error::EmptyInput);
    }
    if path.dim() != samples.dim() {
        return Err(Error::DimensionMismatch {
            expected: samples.dim(),
            got: path.dim(),
        });
    }
    let knots: Vec<&[F]> = path.iter().collect();
    let per_sample_covered: Vec<bool> = samples
        .points()
        .iter()
        .map(|p| {
            if knots.len() == 1 {
                return sq_dist(p, knots[0]).sqrt() <= radius;
            }
            knots
                .windows(2)
                .any(|seg| point_segment_distance(p, seg[0], seg[1]) <= radius)
        })
        .collect();
    let covered_fraction = if samples.is_uniform() {
        per_sample_covered.iter().filter(|c| **c).count() as f64 / samples.len() as f64
    } else {
        per_sample_covered
            .iter()
            .zip(samples.weights())
            .filter(|(c, _)| **c)
            .map(|(_, w)| w.to_f64_lossy())
            .sum::<f64>()
            .min(1.0)
    };
    let path_length = knots
        .windows(2)
        .map(|seg| sq_dist(seg[0], seg[1]).sqrt().to_f64_lossy())
        .sum();
    Ok(CoverageResult {
        covered_fraction,
        radius_phys: radius.to_f64_lossy(),
        per_sample_covered,
        path_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(rows: &[[f64; 2]]) -> DomainSamples<f64> {
        DomainSamples::uniform(PointSet::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn segment_example() {
        let path = PointSet::from_rows(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        let c = coverage(&path, &samples(&[[1.0, 0.5], [1.0, 2.0]]), 1.0).unwrap();
        assert_eq!(c.covered_fraction, 0.5);
        assert_eq!(c.per_sample_covered, vec![true, false]);
        assert_eq!(c.path_length, 2.0);
    }

    #[test]
    fn through_all_and_far_away() {
        let s = samples(&[[0.0, 0.0], [1.0, 1.0], [3.0, 0.0]]);
        let through = PointSet::from_rows(&[[0.0, 0.0], [1.0, 1.0], [3.0, 0.0]]).unwrap();
        assert_eq!(coverage(&through, &s, 1e-9).unwrap().covered_fraction, 1.0);
        let far = PointSet::from_rows(&[[0.0, 10.0], [3.0, 10.0]]).unwrap();
        assert_eq!(coverage(&far, &s, 1.0).unwrap().covered_fraction, 0.0);
    }

    #[test]
    fn rejects_bad_radius() {
        let s = samples(&[[0.0, 0.0], [1.0, 1.0]]);
        let p = PointSet::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(coverage(&p, &s, 0.0).is_err());
        assert!(coverage(&p, &s, f64::NAN).is_err());
    }
}
