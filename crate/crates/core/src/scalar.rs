//! Floating-point abstraction shared by every numeric module.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar the optimizer is generic over (`f32` or `f64`).
///
/// Everything in the crate is written against this trait; the concrete
/// aliases at the crate root pin it to `f64`, which is what the CLI uses.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal. Values outside the target range saturate to ±inf.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).unwrap_or_else(|| {
            if value.is_sign_negative() {
                Self::neg_infinity()
            } else {
                Self::infinity()
            }
        })
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Squared Euclidean distance between two equally sized slices.
#[inline]
pub(crate) fn sq_dist<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .fold(F::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

#[inline]
pub(crate) fn norm<F: Scalar>(a: &[F]) -> F {
    a.iter().fold(F::zero(), |acc, &x| acc + x * x).sqrt()
}

/// Euclidean distance from `p` to the segment `[a, b]`.
pub(crate) fn point_segment_distance<F: Scalar>(p: &[F], a: &[F], b: &[F]) -> F {
    let mut ab2 = F::zero();
    let mut ap_ab = F::zero();
    for ((&pi, &ai), &bi) in p.iter().zip(a).zip(b) {
        ab2 = ab2 + (bi - ai) * (bi - ai);
        ap_ab = ap_ab + (pi - ai) * (bi - ai);
    }
    let t = if ab2 > F::zero() {
        (ap_ab / ab2).max(F::zero()).min(F::one())
    } else {
        F::zero()
    };
    p.iter()
        .zip(a)
        .zip(b)
        .fold(F::zero(), |acc, ((&pi, &ai), &bi)| {
            let q = ai + t * (bi - ai);
            acc + (pi - q) * (pi - q)
        })
        .sqrt()
}
