use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Geometric bandwidth continuation from `h0` to the normalized image of a
/// physical bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule<F> {
    /// Initial normalized bandwidth.
    pub h0: F,
    /// Target physical bandwidth, in squared length units (m^2).
    pub h_phys_star: F,
    /// Number of stages `K`.
    pub stages: usize,
    /// Environment extent `e` the physical bandwidth is normalized by.
    pub extent: F,
}

impl<F: Scalar> AnnealingSchedule<F> {
    /// `h_phys_star / e^2`.
    pub fn h_norm_star(&self) -> F {
        self.h_phys_star / (self.extent * self.extent)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |x: F| x > F::zero() && x.is_finite();
        if self.stages < 2 {
            return Err(Error::InvalidSchedule(format!("need K >= 2 stages, got {}", self.stages)));
        }
        if !positive(self.h0) || !positive(self.h_phys_star) || !positive(self.extent) {
            return Err(Error::InvalidSchedule(
                "h0, h_phys_star and extent must be positive".into(),
            ));
        }
        if !positive(self.h_norm_star()) {
            return Err(Error::InvalidSchedule("normalized target bandwidth underflows".into()));
        }
        Ok(())
    }
}

/// `h_k = h0 (h* / h0)^(k / (K - 1))` for `k = 0..K`, endpoints exact.
pub fn anneal_sequence<F: Scalar>(schedule: &AnnealingSchedule<F>) -> Result<Vec<F>> {
    schedule.validate()?;
    let k_last = schedule.stages - 1;
    let h0 = schedule.h0;
    let target = schedule.h_norm_star();
    let log_ratio = (target / h0).ln();
    let mut out: Vec<F> = (0..schedule.stages)
        .map(|k| h0 * (log_ratio * F::lit(k as f64 / k_last as f64)).exp())
        .collect();
    out[0] = h0;
    out[k_last] = target;
    Ok(out)
}
