//! Augmented Lagrangian of the ergodic objective under dynamics constraints.
//!
//! ```text
//! L = E(x) + lam . f + (mu/2) |f|^2 + (1/(2 mu)) sum( max(0, sig + mu h)^2 - sig^2 )
//! ```
//!
//! The inequality term is the usual rewrite of
//! `(mu/2) |max(0, sig/mu + h)|^2 - |sig|^2 / (2 mu)`.

use crate::dynamics::{ConstraintResidual, DynamicsModel, SearchProjection, Trajectory};
use crate::error::{Error, Result};
use crate::kernel::KernelConfig;
use crate::objective::{ObjectiveKind, TargetSet};
use crate::scalar::Scalar;

/// Lagrange multiplier estimates; inequality entries are kept nonnegative.
#[derive(Debug, Clone, PartialEq)]
pub struct Multipliers<F> {
    pub equality: Vec<F>,
    pub inequality: Vec<F>,
}

impl<F: Scalar> Multipliers<F> {
    pub fn zeros(model: &DynamicsModel<F>, horizon: usize) -> Self {
        Self {
            equality: vec![F::zero(); model.equality_count(horizon)],
            inequality: vec![F::zero(); model.inequality_count(horizon)],
        }
    }

    /// First-order multiplier update from the residuals at the subproblem solution.
    pub fn update(&mut self, residuals: &ConstraintResidual<F>, penalty: F) {
        for (l, &f) in self.equality.iter_mut().zip(&residuals.equality) {
            *l = *l + penalty * f;
        }
        for (s, &h) in self.inequality.iter_mut().zip(&residuals.inequality) {
            *s = (*s + penalty * h).max(F::zero());
        }
    }
}

/// Everything the augmented Lagrangian needs besides the iterate.
pub struct AlContext<'a, F> {
    pub model: &'a DynamicsModel<F>,
    pub targets: &'a TargetSet<F>,
    pub kernel: &'a KernelConfig<F>,
    pub objective: ObjectiveKind,
    pub projection: &'a SearchProjection<F>,
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct AlEval<F> {
    pub value: F,
    /// The ergodic objective alone.
    pub objective: F,
    /// Gradient over the flat decision vector.
    pub grad: Vec<F>,
    pub residuals: ConstraintResidual<F>,
}

pub fn augmented_lagrangian_value_and_grad<F: Scalar>(
    traj: &Trajectory<F>,
    multipliers: &Multipliers<F>,
    penalty: F,
    ctx: &AlContext<'_, F>,
) -> Result<AlEval<F>> {
    let horizon = traj.horizon();
    if multipliers.equality.len() != ctx.model.equality_count(horizon)
        || multipliers.inequality.len() != ctx.model.inequality_count(horizon)
    {
        return Err(Error::InvalidInput("multipliers do not match the constraint count".into()));
    }
    if penalty < F::zero() {
        return Err(Error::InvalidInput("penalty must be nonnegative".into()));
    }
    let points = ctx.projection.project(traj);
    let obj = ctx
        .objective
        .evaluate(&points, ctx.targets, ctx.kernel, ctx.parallel)?;
    let residuals = ctx.model.residuals(traj);

    let half = F::lit(0.5);
    let mut value = obj.value;
    let mut w_eq = Vec::with_capacity(residuals.equality.len());
    for (&lam, &f) in multipliers.equality.iter().zip(&residuals.equality) {
        value = value + lam * f + half * penalty * f * f;
        w_eq.push(lam + penalty * f);
    }
    let mut w_ineq = Vec::with_capacity(residuals.inequality.len());
    for (&sig, &h) in multipliers.inequality.iter().zip(&residuals.inequality) {
        let shifted = (sig + penalty * h).max(F::zero());
        value = value
            + if penalty > F::zero() {
                half * (shifted * shifted - sig * sig) / penalty
            } else {
                // mu -> 0 limit
                sig * h
            };
        w_ineq.push(shifted);
    }

    let mut grad = ctx.model.residual_vjp(traj, &w_eq, &w_ineq);
    ctx.projection
        .pull_back(&obj.grad, ctx.model.state_dim(), &mut grad);
    Ok(AlEval {
        value,
        objective: obj.value,
        grad,
        residuals,
    })
}
