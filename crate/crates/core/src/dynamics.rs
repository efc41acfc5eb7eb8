//! Discretized dynamics with optimizable log time steps.
//!
//! A trajectory is `T` states `x_t = [p_t, v_t]` (position then velocity,
//! `n = 2d`) and `T - 1` log step durations. Step durations are always
//! `exp(log_dt) > 0`. The double integrator adds `T - 1` acceleration controls.
//!
//! Transcription uses explicit Euler:
//!
//! ```text
//! p_{t+1} - (p_t + dt_t v_t) = 0
//! v_{t+1} - (v_t + dt_t a_t) = 0      (double integrator only)
//! ```
//!
//! Nothing here knows about physical units; the solver hands in a model and
//! trajectory already expressed in its working frame.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{Frame, NormalizedDomain};
use crate::error::{Error, Result};
use crate::objective::TrajectoryPoints;
use crate::points::PointSet;
use crate::scalar::{norm, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    SingleIntegrator,
    DoubleIntegrator,
}

/// Which speed limit formulation is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityBound {
    /// `||p_{t+1} - p_t|| <= v_max dt_t`
    #[default]
    StepLength,
    /// `||v_t|| <= v_max`
    StateSpeed,
    Both,
}

fn none<T>() -> Option<T> {
    None
}

/// A fixed endpoint. The velocity is only pinned when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Boundary<F> {
    pub position: Vec<F>,
    #[serde(default = "none")]
    pub velocity: Option<Vec<F>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsModel<F> {
    pub kind: ModelKind,
    /// Position dimension `d`.
    pub dim: usize,
    pub v_max: F,
    pub a_max: Option<F>,
    /// Bound on total path length.
    pub l_max: Option<F>,
    /// Bound on total duration.
    pub t_max: Option<F>,
    pub dt_min: F,
    pub dt_max: F,
    pub velocity_bound: VelocityBound,
    pub initial: Option<Boundary<F>>,
    pub terminal: Option<Boundary<F>>,
}

impl<F: Scalar> DynamicsModel<F> {
    /// Single integrator with default step bounds and no boundary conditions.
    pub fn single_integrator(dim: usize, v_max: F) -> Self {
        Self {
            kind: ModelKind::SingleIntegrator,
            dim,
            v_max,
            a_max: None,
            l_max: None,
            t_max: None,
            dt_min: F::lit(1e-3),
            dt_max: F::lit(1e3),
            velocity_bound: VelocityBound::StepLength,
            initial: None,
            terminal: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidModel(msg.into()));
        if self.dim == 0 {
            return bad("position dimension must be >= 1");
        }
        if !(self.v_max > F::zero() && self.v_max.is_finite()) {
            return bad("v_max must be positive");
        }
        if !(self.dt_min > F::zero()) || !(self.dt_min <= self.dt_max) || !self.dt_max.is_finite() {
            return bad("dt bounds must satisfy 0 < dt_min <= dt_max < inf");
        }
        if matches!(self.a_max, Some(a) if !(a > F::zero())) {
            return bad("a_max must be positive");
        }
        if matches!(self.l_max, Some(l) if !(l >= F::zero())) {
            return bad("l_max must be nonnegative");
        }
        if matches!(self.t_max, Some(t) if !(t > F::zero())) {
            return bad("t_max must be positive");
        }
        for b in self.initial.iter().chain(&self.terminal) {
            if b.position.len() != self.dim || b.velocity.as_ref().is_some_and(|v| v.len() != self.dim) {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    got: b.position.len(),
                });
            }
        }
        Ok(())
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        2 * self.dim
    }

    pub fn has_controls(&self) -> bool {
        self.kind == ModelKind::DoubleIntegrator
    }

    /// `dt_min == dt_max`: step durations are pinned and not optimized.
    pub fn fixed_dt(&self) -> bool {
        self.dt_min == self.dt_max
    }

    /// The same model with lengths expressed in `frame` (`x = offset + scale u`).
    pub fn in_frame(&self, frame: &Frame<F>) -> Self {
        let s = frame.scale;
        let boundary = |b: &Boundary<F>| Boundary {
            position: frame.to_local(&b.position),
            velocity: b.velocity.as_ref().map(|v| v.iter().map(|&x| x / s).collect()),
        };
        Self {
            v_max: self.v_max / s,
            a_max: self.a_max.map(|a| a / s),
            l_max: self.l_max.map(|l| l / s),
            initial: self.initial.as_ref().map(boundary),
            terminal: self.terminal.as_ref().map(boundary),
            ..self.clone()
        }
    }

    pub fn equality_count(&self, horizon: usize) -> usize {
        let per_step = if self.has_controls() { 2 } else { 1 } * self.dim;
        let boundary = |b: &Option<Boundary<F>>| {
            b.as_ref()
                .map_or(0, |b| self.dim + b.velocity.as_ref().map_or(0, |_| self.dim))
        };
        per_step * (horizon - 1) + boundary(&self.initial) + boundary(&self.terminal)
    }

    pub fn inequality_count(&self, horizon: usize) -> usize {
        let steps = horizon - 1;
        let mut n = 2 * steps;
        if matches!(self.velocity_bound, VelocityBound::StepLength | VelocityBound::Both) {
            n += steps;
        }
        if matches!(self.velocity_bound, VelocityBound::StateSpeed | VelocityBound::Both) {
            n += horizon;
        }
        n += usize::from(self.l_max.is_some());
        if self.has_controls() && self.a_max.is_some() {
            n += steps;
        }
        n + usize::from(self.t_max.is_some())
    }

    pub fn equality_residuals(&self, traj: &Trajectory<F>) -> Vec<F> {
        let d = self.dim;
        let mut out = Vec::with_capacity(self.equality_count(traj.horizon()));
        for t in 0..traj.horizon() - 1 {
            let dt = traj.dt(t);
            let (p0, v0) = (traj.position(t), traj.velocity(t));
            let p1 = traj.position(t + 1);
            out.extend((0..d).map(|k| p1[k] - (p0[k] + dt * v0[k])));
            if self.has_controls() {
                let (v1, a) = (traj.velocity(t + 1), traj.control(t));
                out.extend((0..d).map(|k| v1[k] - (v0[k] + dt * a[k])));
            }
        }
        for (b, t) in [(&self.initial, 0), (&self.terminal, traj.horizon() - 1)] {
            if let Some(b) = b {
                out.extend(traj.position(t).iter().zip(&b.position).map(|(&x, &y)| x - y));
                if let Some(v) = &b.velocity {
                    out.extend(traj.velocity(t).iter().zip(v).map(|(&x, &y)| x - y));
                }
            }
        }
        out
    }

    pub fn inequality_residuals(&self, traj: &Trajectory<F>) -> Vec<F> {
        let steps = traj.horizon() - 1;
        let mut out = Vec::with_capacity(self.inequality_count(traj.horizon()));
        let step_lengths: Vec<F> = (0..steps).map(|t| traj.step_length(t)).collect();
        if matches!(self.velocity_bound, VelocityBound::StepLength | VelocityBound::Both) {
            out.extend((0..steps).map(|t| step_lengths[t] - self.v_max * traj.dt(t)));
        }
        if matches!(self.velocity_bound, VelocityBound::StateSpeed | VelocityBound::Both) {
            out.extend((0..traj.horizon()).map(|t| norm(traj.velocity(t)) - self.v_max));
        }
        let (lo, hi) = (self.dt_min.ln(), self.dt_max.ln());
        out.extend(traj.log_dt.iter().map(|&l| lo - l));
        out.extend(traj.log_dt.iter().map(|&l| l - hi));
        if let Some(l_max) = self.l_max {
            out.push(step_lengths.iter().copied().sum::<F>() - l_max);
        }
        if let (true, Some(a_max)) = (self.has_controls(), self.a_max) {
            out.extend((0..steps).map(|t| norm(traj.control(t)) - a_max));
        }
        if let Some(t_max) = self.t_max {
            out.push((0..steps).map(|t| traj.dt(t)).sum::<F>() - t_max);
        }
        out
    }

    pub fn residuals(&self, traj: &Trajectory<F>) -> ConstraintResidual<F> {
        ConstraintResidual::new(self.equality_residuals(traj), self.inequality_residuals(traj))
    }

    /// Gradient of `w_eq . f(x) + w_ineq . h(x)` over the flat decision vector
    /// (layout of [`Trajectory::to_vector`]).
    pub fn residual_vjp(&self, traj: &Trajectory<F>, w_eq: &[F], w_ineq: &[F]) -> Vec<F> {
        let d = self.dim;
        let n = self.state_dim();
        let horizon = traj.horizon();
        let steps = horizon - 1;
        let layout = traj.layout();
        let mut g = vec![F::zero(); layout.len];
        let pos = |t: usize, k: usize| t * n + k;
        let vel = |t: usize, k: usize| t * n + d + k;
        let ctl = |t: usize, k: usize| layout.controls + t * d + k;
        let ldt = |t: usize| layout.log_dt + t;

        let mut r = 0;
        for t in 0..steps {
            let dt = traj.dt(t);
            let v0 = traj.velocity(t);
            for k in 0..d {
                let w = w_eq[r + k];
                g[pos(t + 1, k)] = g[pos(t + 1, k)] + w;
                g[pos(t, k)] = g[pos(t, k)] - w;
                g[vel(t, k)] = g[vel(t, k)] - w * dt;
                g[ldt(t)] = g[ldt(t)] - w * dt * v0[k];
            }
            r += d;
            if self.has_controls() {
                let a = traj.control(t);
                for k in 0..d {
                    let w = w_eq[r + k];
                    g[vel(t + 1, k)] = g[vel(t + 1, k)] + w;
                    g[vel(t, k)] = g[vel(t, k)] - w;
                    g[ctl(t, k)] = g[ctl(t, k)] - w * dt;
                    g[ldt(t)] = g[ldt(t)] - w * dt * a[k];
                }
                r += d;
            }
        }
        for (b, t) in [(&self.initial, 0), (&self.terminal, steps)] {
            if let Some(b) = b {
                for k in 0..d {
                    g[pos(t, k)] = g[pos(t, k)] + w_eq[r + k];
                }
                r += d;
                if b.velocity.is_some() {
                    for k in 0..d {
                        g[vel(t, k)] = g[vel(t, k)] + w_eq[r + k];
                    }
                    r += d;
                }
            }
        }
        debug_assert_eq!(r, w_eq.len());

        // Unit step directions; zero-length steps get a zero subgradient.
        let units: Vec<Vec<F>> = (0..steps)
            .map(|t| {
                let (p0, p1) = (traj.position(t), traj.position(t + 1));
                let diff: Vec<F> = p1.iter().zip(p0).map(|(&a, &b)| a - b).collect();
                let len = norm(&diff);
                if len > F::zero() {
                    diff.into_iter().map(|x| x / len).collect()
                } else {
                    vec![F::zero(); d]
                }
            })
            .collect();
        let add_step = |g: &mut Vec<F>, t: usize, w: F| {
            for k in 0..d {
                g[pos(t + 1, k)] = g[pos(t + 1, k)] + w * units[t][k];
                g[pos(t, k)] = g[pos(t, k)] - w * units[t][k];
            }
        };
        let add_unit = |g: &mut Vec<F>, x: &[F], idx: &dyn Fn(usize) -> usize, w: F| {
            let len = norm(x);
            if len > F::zero() {
                for (k, &xk) in x.iter().enumerate() {
                    g[idx(k)] = g[idx(k)] + w * xk / len;
                }
            }
        };

        let mut r = 0;
        if matches!(self.velocity_bound, VelocityBound::StepLength | VelocityBound::Both) {
            for t in 0..steps {
                let w = w_ineq[r + t];
                add_step(&mut g, t, w);
                g[ldt(t)] = g[ldt(t)] - w * self.v_max * traj.dt(t);
            }
            r += steps;
        }
        if matches!(self.velocity_bound, VelocityBound::StateSpeed | VelocityBound::Both) {
            for t in 0..horizon {
                add_unit(&mut g, traj.velocity(t), &|k| vel(t, k), w_ineq[r + t]);
            }
            r += horizon;
        }
        for t in 0..steps {
            g[ldt(t)] = g[ldt(t)] - w_ineq[r + t] + w_ineq[r + steps + t];
        }
        r += 2 * steps;
        if self.l_max.is_some() {
            let w = w_ineq[r];
            for t in 0..steps {
                add_step(&mut g, t, w);
            }
            r += 1;
        }
        if self.has_controls() && self.a_max.is_some() {
            for t in 0..steps {
                add_unit(&mut g, traj.control(t), &|k| ctl(t, k), w_ineq[r + t]);
            }
            r += steps;
        }
        if self.t_max.is_some() {
            let w = w_ineq[r];
            for t in 0..steps {
                g[ldt(t)] = g[ldt(t)] + w * traj.dt(t);
            }
            r += 1;
        }
        debug_assert_eq!(r, w_ineq.len());
        g
    }
}

/// Stacked constraint values; `equality` should be zero and `inequality` nonpositive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintResidual<F> {
    pub equality: Vec<F>,
    pub inequality: Vec<F>,
    pub max_eq_violation: F,
    pub max_ineq_violation: F,
}

impl<F: Scalar> ConstraintResidual<F> {
    pub fn new(equality: Vec<F>, inequality: Vec<F>) -> Self {
        let max_eq_violation = equality.iter().fold(F::zero(), |m, &x| m.max(x.abs()));
        let max_ineq_violation = inequality.iter().fold(F::zero(), |m, &x| m.max(x));
        Self {
            equality,
            inequality,
            max_eq_violation,
            max_ineq_violation,
        }
    }

    pub fn max_violation(&self) -> F {
        self.max_eq_violation.max(self.max_ineq_violation)
    }
}

/// Index ranges of the blocks inside the flat decision vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorLayout {
    pub controls: usize,
    pub log_dt: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<F> {
    /// `T x n` states, position first.
    pub states: PointSet<F>,
    /// `(T - 1) x d` accelerations; empty for the single integrator.
    pub controls: PointSet<F>,
    pub log_dt: Vec<F>,
}

impl<F: Scalar> Trajectory<F> {
    pub fn new(states: PointSet<F>, controls: PointSet<F>, log_dt: Vec<F>) -> Result<Self> {
        let horizon = states.len();
        if horizon < 2 {
            return Err(Error::InvalidInput(format!("horizon must be >= 2, got {horizon}")));
        }
        if log_dt.len() != horizon - 1 {
            return Err(Error::InvalidInput("need exactly T - 1 log time steps".into()));
        }
        if !states.dim().is_multiple_of(2) {
            return Err(Error::InvalidInput("state must be [position, velocity]".into()));
        }
        if !controls.is_empty() && (controls.len() != horizon - 1 || controls.dim() != states.dim() / 2) {
            return Err(Error::InvalidInput("controls must be (T - 1) x d".into()));
        }
        Ok(Self {
            states,
            controls,
            log_dt,
        })
    }

    pub fn horizon(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states.dim() / 2
    }

    #[inline]
    pub fn position(&self, t: usize) -> &[F] {
        &self.states.row(t)[..self.dim()]
    }

    #[inline]
    pub fn velocity(&self, t: usize) -> &[F] {
        &self.states.row(t)[self.dim()..]
    }

    #[inline]
    pub fn control(&self, t: usize) -> &[F] {
        self.controls.row(t)
    }

    #[inline]
    pub fn dt(&self, t: usize) -> F {
        self.log_dt[t].exp()
    }

    pub fn dts(&self) -> Vec<F> {
        self.log_dt.iter().map(|l| l.exp()).collect()
    }

    pub fn step_length(&self, t: usize) -> F {
        crate::scalar::sq_dist(self.position(t), self.position(t + 1)).sqrt()
    }

    pub fn path_length(&self) -> F {
        (0..self.horizon() - 1).map(|t| self.step_length(t)).sum()
    }

    /// Positions as a `T x d` point set.
    pub fn positions(&self) -> PointSet<F> {
        let d = self.dim();
        let data = self.states.iter().flat_map(|s| s[..d].iter().copied()).collect();
        PointSet::new(d, data).expect("valid shape")
    }

    pub fn layout(&self) -> VectorLayout {
        let controls = self.states.as_flat().len();
        let log_dt = controls + self.controls.as_flat().len();
        VectorLayout {
            controls,
            log_dt,
            len: log_dt + self.log_dt.len(),
        }
    }

    /// Flattens to `[states, controls, log_dt]`.
    pub fn to_vector(&self) -> Vec<F> {
        let mut v = Vec::with_capacity(self.layout().len);
        v.extend_from_slice(self.states.as_flat());
        v.extend_from_slice(self.controls.as_flat());
        v.extend_from_slice(&self.log_dt);
        v
    }

    /// Rebuilds a trajectory of the same shape from a flat vector.
    pub fn with_vector(&self, x: &[F]) -> Self {
        let l = self.layout();
        assert_eq!(x.len(), l.len, "decision vector length");
        Self {
            states: PointSet::new(self.states.dim(), x[..l.controls].to_vec()).expect("shape"),
            controls: PointSet::new(self.controls.dim(), x[l.controls..l.log_dt].to_vec()).expect("shape"),
            log_dt: x[l.log_dt..].to_vec(),
        }
    }

    /// Re-expresses positions, velocities and controls from frame `from` into frame `to`.
    pub fn change_frame(&self, from: &Frame<F>, to: &Frame<F>) -> Self {
        let d = self.dim();
        let ratio = from.scale / to.scale;
        let mut states = self.states.clone();
        for t in 0..self.horizon() {
            let row = states.row_mut(t);
            let p = to.to_local(&from.to_physical(&row[..d]));
            row[..d].copy_from_slice(&p);
            for v in &mut row[d..] {
                *v = *v * ratio;
            }
        }
        Self {
            states,
            controls: self.controls.map(|a| a * ratio),
            log_dt: self.log_dt.clone(),
        }
    }
}

/// Maps trajectory positions into search-space coordinates through a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchProjection<F> {
    frame: Frame<F>,
}

impl<F: Scalar> SearchProjection<F> {
    pub fn new(frame: Frame<F>) -> Self {
        Self { frame }
    }

    pub fn identity(dim: usize) -> Self {
        Self::new(Frame::identity(dim))
    }

    pub fn frame(&self) -> &Frame<F> {
        &self.frame
    }

    pub fn project(&self, traj: &Trajectory<F>) -> TrajectoryPoints<F> {
        let d = traj.dim();
        let mut data = Vec::with_capacity(traj.horizon() * d);
        for t in 0..traj.horizon() {
            data.extend(self.frame.to_local(traj.position(t)));
        }
        TrajectoryPoints::new(PointSet::new(d, data).expect("shape")).expect("finite trajectory")
    }

    /// `d w_t / d x_t`: a `d x n` row-major matrix equal to `(1/e) [I 0]`.
    pub fn jacobian(&self, state_dim: usize) -> Vec<F> {
        let d = self.frame.offset.len();
        let mut j = vec![F::zero(); d * state_dim];
        for k in 0..d {
            j[k * state_dim + k] = self.frame.scale.recip();
        }
        j
    }

    /// Adds `J^T grad_points` to the state block of a flat trajectory gradient.
    pub fn pull_back(&self, grad_points: &PointSet<F>, state_dim: usize, out: &mut [F]) {
        let inv = self.frame.scale.recip();
        for (t, g) in grad_points.iter().enumerate() {
            for (k, &gk) in g.iter().enumerate() {
                out[t * state_dim + k] = out[t * state_dim + k] + gk * inv;
            }
        }
    }
}

/// Normalized positions of a physical trajectory.
pub fn project_to_search_space<F: Scalar>(
    traj: &Trajectory<F>,
    domain: &NormalizedDomain<F>,
) -> Result<TrajectoryPoints<F>> {
    if traj.dim() != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: traj.dim(),
        });
    }
    Ok(SearchProjection::new(domain.frame()).project(traj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStrategy {
    /// Evenly spaced points from the start to the farthest bounding-box corner.
    Line,
    /// Boustrophedon sweep over the first two axes.
    Lawnmower2d,
    /// Short seeded random walk from the start.
    #[default]
    RandomJitter,
}

/// Per-axis step of the random-walk seed, in normalized units.
const JITTER_STEP: f64 = 4e-3;

/// Initial guess in the normalized frame of `domain`.
///
/// `model` must already be expressed in that frame. Velocities (and
/// accelerations) are filled in so the Euler residuals vanish; only the
/// boundary conditions may be violated.
pub fn seed_trajectory<F: Scalar>(
    model: &DynamicsModel<F>,
    domain: &NormalizedDomain<F>,
    horizon: usize,
    strategy: SeedStrategy,
    rng_seed: u64,
) -> Result<Trajectory<F>> {
    model.validate()?;
    if horizon < 2 {
        return Err(Error::InvalidInput(format!("horizon must be >= 2, got {horizon}")));
    }
    let d = model.dim;
    if d != domain.dim() {
        return Err(Error::DimensionMismatch {
            expected: domain.dim(),
            got: d,
        });
    }
    let (lo, hi) = domain.normalized_points().bounding_box();
    let start = model
        .initial
        .as_ref()
        .map(|b| b.position.clone())
        .unwrap_or_else(|| lo.clone());
    let positions: Vec<Vec<F>> = match strategy {
        SeedStrategy::Line => {
            let corners = 1usize << d;
            let end = (0..corners)
                .map(|mask| {
                    (0..d)
                        .map(|k| if mask >> k & 1 == 1 { hi[k] } else { lo[k] })
                        .collect::<Vec<F>>()
                })
                .fold((F::neg_infinity(), lo.clone()), |best, c| {
                    let dist = crate::scalar::sq_dist(&c, &start);
                    if dist > best.0 {
                        (dist, c)
                    } else {
                        best
                    }
                })
                .1;
            let denom = F::lit((horizon - 1) as f64);
            (0..horizon)
                .map(|t| {
                    let s = F::lit(t as f64) / denom;
                    start.iter().zip(&end).map(|(&a, &b)| a + s * (b - a)).collect()
                })
                .collect()
        }
        SeedStrategy::Lawnmower2d => lawnmower(&lo, &hi, horizon),
        SeedStrategy::RandomJitter => {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            let mut p = start.clone();
            let mut out = Vec::with_capacity(horizon);
            out.push(p.clone());
            for _ in 1..horizon {
                for k in 0..d {
                    let step = F::lit(JITTER_STEP * rng.gen_range(-1.0..=1.0));
                    p[k] = (p[k] + step).max(lo[k]).min(hi[k]);
                }
                out.push(p.clone());
            }
            out
        }
    };

    let l_guess = model.l_max.filter(|&l| l > F::zero()).unwrap_or(F::one());
    let dt = (l_guess / (F::lit(horizon as f64) * model.v_max))
        .max(model.dt_min)
        .min(model.dt_max);
    let log_dt = vec![dt.ln(); horizon - 1];
    let dt = log_dt[0].exp();

    let mut vel = vec![vec![F::zero(); d]; horizon];
    for t in 0..horizon - 1 {
        for k in 0..d {
            vel[t][k] = (positions[t + 1][k] - positions[t][k]) / dt;
        }
    }
    let mut data = Vec::with_capacity(horizon * 2 * d);
    for (p, v) in positions.iter().zip(&vel) {
        data.extend_from_slice(p);
        data.extend_from_slice(v);
    }
    let states = PointSet::new(2 * d, data)?;
    let controls = if model.has_controls() {
        let mut c = Vec::with_capacity((horizon - 1) * d);
        for t in 0..horizon - 1 {
            c.extend((0..d).map(|k| (vel[t + 1][k] - vel[t][k]) / dt));
        }
        PointSet::new(d, c)?
    } else {
        PointSet::new(d, Vec::new())?
    };
    Trajectory::new(states, controls, log_dt)
}

fn lawnmower<F: Scalar>(lo: &[F], hi: &[F], horizon: usize) -> Vec<Vec<F>> {
    let d = lo.len();
    let mid: Vec<F> = lo.iter().zip(hi).map(|(&a, &b)| (a + b) / F::lit(2.0)).collect();
    if d < 2 {
        return (0..horizon).map(|_| mid.clone()).collect();
    }
    let lanes = ((horizon as f64).sqrt().ceil() as usize).max(2);
    // Waypoints of the serpentine, then resample evenly by arc length.
    let mut way: Vec<Vec<F>> = Vec::with_capacity(2 * lanes);
    for lane in 0..lanes {
        let y = lo[1] + (hi[1] - lo[1]) * F::lit(lane as f64 / (lanes - 1) as f64);
        let (x0, x1) = if lane % 2 == 0 { (lo[0], hi[0]) } else { (hi[0], lo[0]) };
        for x in [x0, x1] {
            let mut p = mid.clone();
            p[0] = x;
            p[1] = y;
            way.push(p);
        }
    }
    let seg: Vec<F> = way.windows(2).map(|w| crate::scalar::sq_dist(&w[0], &w[1]).sqrt()).collect();
    let total: F = seg.iter().copied().sum();
    let mut out = Vec::with_capacity(horizon);
    let mut i = 0;
    let mut acc = F::zero();
    for t in 0..horizon {
        let target = total * F::lit(t as f64 / (horizon - 1) as f64);
        while i + 1 < seg.len() && acc + seg[i] < target {
            acc = acc + seg[i];
            i += 1;
        }
        let s = if seg[i] > F::zero() {
            ((target - acc) / seg[i]).max(F::zero()).min(F::one())
        } else {
            F::zero()
        };
        out.push(
            way[i]
                .iter()
                .zip(&way[i + 1])
                .map(|(&a, &b)| a + s * (b - a))
                .collect(),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSamples;

    fn traj(positions: &[[f64; 2]], velocities: &[[f64; 2]], dts: &[f64]) -> Trajectory<f64> {
        let rows: Vec<Vec<f64>> = positions
            .iter()
            .zip(velocities)
            .map(|(p, v)| vec![p[0], p[1], v[0], v[1]])
            .collect();
        Trajectory::new(
            PointSet::from_rows(&rows).unwrap(),
            PointSet::new(2, vec![]).unwrap(),
            dts.iter().map(|d| d.ln()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn euler_residual_examples() {
        let m = DynamicsModel::single_integrator(2, 1.0);
        let tr = traj(&[[0.0, 0.0], [0.5, 0.0]], &[[1.0, 0.0], [0.0, 0.0]], &[0.5]);
        let r = m.equality_residuals(&tr);
        assert!(r.iter().all(|x| x.abs() < 1e-15));
        let tr = traj(&[[0.0, 0.0], [0.6, 0.0]], &[[1.0, 0.0], [0.0, 0.0]], &[0.5]);
        let r = m.equality_residuals(&tr);
        assert!((r[0] - 0.1).abs() < 1e-12 && r[1].abs() < 1e-15);
        let tr = traj(&[[0.3, 0.3]; 3], &[[0.0, 0.0]; 3], &[0.2, 0.7]);
        assert!(m.equality_residuals(&tr).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn inequality_examples() {
        let mut m = DynamicsModel::single_integrator(2, 2.0);
        m.l_max = Some(10.0);
        let tr = traj(&[[0.0, 0.0], [1.0, 0.0]], &[[1.0, 0.0], [0.0, 0.0]], &[1.0]);
        assert!((m.inequality_residuals(&tr)[0] + 1.0).abs() < 1e-15);
        let tr = traj(&[[0.0, 0.0], [3.0, 0.0]], &[[3.0, 0.0], [0.0, 0.0]], &[1.0]);
        assert!((m.inequality_residuals(&tr)[0] - 1.0).abs() < 1e-15);
        let tr = traj(&[[0.5, 0.5]; 4], &[[0.0, 0.0]; 4], &[1.0; 3]);
        let r = m.inequality_residuals(&tr);
        assert_eq!(*r.last().unwrap(), -10.0);
        assert_eq!(r.len(), m.inequality_count(4));
    }

    #[test]
    fn boundary_residuals_are_appended() {
        let mut m = DynamicsModel::single_integrator(2, 1.0);
        m.initial = Some(Boundary {
            position: vec![1.0, 1.0],
            velocity: None,
        });
        m.terminal = Some(Boundary {
            position: vec![0.0, 0.0],
            velocity: Some(vec![0.0, 0.0]),
        });
        let tr = traj(&[[0.0, 0.0]; 3], &[[0.0, 0.0]; 3], &[1.0; 2]);
        let r = m.equality_residuals(&tr);
        assert_eq!(r.len(), m.equality_count(3));
        assert_eq!(&r[4..6], &[-1.0, -1.0]);
        assert!(r[6..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn projection_examples() {
        let samples = DomainSamples::uniform(
            PointSet::from_rows(&[[0.0, 0.0, 0.0], [1000.0, 10.0, 5.0]]).unwrap(),
        )
        .unwrap();
        let dom = NormalizedDomain::new(samples).unwrap();
        let states = PointSet::from_rows(&[[500.0, 0.0, 0.0, 1.0, 2.0, 3.0], [0.0; 6]]).unwrap();
        let tr = Trajectory::new(states, PointSet::new(3, vec![]).unwrap(), vec![0.0]).unwrap();
        let w = project_to_search_space(&tr, &dom).unwrap();
        assert_eq!(w.points().row(0), &[0.5, 0.0, 0.0]);
        let proj = SearchProjection::<f64>::new(dom.frame());
        let j = proj.jacobian(6);
        for r in 0..3 {
            for c in 0..6 {
                let selector = if r == c { 1.0 } else { 0.0 };
                assert!((j[r * 6 + c] * 1000.0 - selector).abs() < 1e-15);
            }
        }
    }

    fn unit_square() -> NormalizedDomain<f64> {
        let rows: Vec<[f64; 2]> = (0..4)
            .flat_map(|i| (0..4).map(move |j| [i as f64 / 3.0, j as f64 / 3.0]))
            .collect();
        NormalizedDomain::new(DomainSamples::uniform(PointSet::from_rows(&rows).unwrap()).unwrap())
            .unwrap()
    }

    #[test]
    fn line_seed_is_evenly_spaced() {
        let m = DynamicsModel::single_integrator(2, 1.0);
        let tr = seed_trajectory(&m, &unit_square(), 5, SeedStrategy::Line, 0).unwrap();
        for t in 0..5 {
            let s = t as f64 / 4.0;
            assert!(tr.position(t).iter().all(|&x| (x - s).abs() < 1e-15));
        }
        assert!(m.equality_residuals(&tr).iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn lawnmower_stays_in_box() {
        let m = DynamicsModel::single_integrator(2, 1.0);
        let tr = seed_trajectory(&m, &unit_square(), 16, SeedStrategy::Lawnmower2d, 0).unwrap();
        for t in 0..16 {
            assert!(tr.position(t).iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)));
        }
        assert!(tr.path_length() > 1.0);
    }

    #[test]
    fn jitter_seed_is_deterministic() {
        let mut m = DynamicsModel::single_integrator(2, 1.0);
        m.initial = Some(Boundary {
            position: vec![0.5, 0.5],
            velocity: None,
        });
        let a = seed_trajectory(&m, &unit_square(), 30, SeedStrategy::RandomJitter, 7).unwrap();
        let b = seed_trajectory(&m, &unit_square(), 30, SeedStrategy::RandomJitter, 7).unwrap();
        let c = seed_trajectory(&m, &unit_square(), 30, SeedStrategy::RandomJitter, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.position(0), &[0.5, 0.5]);
        assert!(m.residuals(&a).max_eq_violation < 1e-12);
    }

    #[test]
    fn seed_dt_is_clamped() {
        let mut m = DynamicsModel::single_integrator(2, 1.0);
        m.dt_min = 0.25;
        m.dt_max = 0.25;
        let tr = seed_trajectory(&m, &unit_square(), 10, SeedStrategy::Line, 0).unwrap();
        assert!(tr.dts().iter().all(|&d| (d - 0.25).abs() < 1e-15));
    }

    #[test]
    fn invalid_models_are_rejected() {
        let mut m = DynamicsModel::single_integrator(2, 1.0);
        m.dt_min = 2.0;
        m.dt_max = 1.0;
        assert!(m.validate().is_err());
        let m = DynamicsModel::single_integrator(2, 0.0);
        assert!(m.validate().is_err());
    }
}
