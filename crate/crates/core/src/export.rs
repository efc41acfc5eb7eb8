//! Plain-text trajectory output.

use std::fmt::Write as _;

use crate::dynamics::Trajectory;
use crate::scalar::Scalar;

/// Shortest decimal form that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    format!("{x:?}")
}

/// Cumulative time at each knot, starting from zero.
pub fn knot_times<F: Scalar>(traj: &Trajectory<F>) -> Vec<f64> {
    let mut t = vec![0.0];
    for dt in traj.dts() {
        t.push(t.last().copied().unwrap_or(0.0) + dt.to_f64_lossy());
    }
    t
}

/// Columns `t, x_1..x_d, v_1..v_d, dt`; `dt` is the step leaving the knot and
/// is empty on the last row.
pub fn trajectory_csv<F: Scalar>(traj: &Trajectory<F>) -> String {
    let d = traj.dim();
    let mut out = String::from("t");
    for k in 1..=d {
        let _ = write!(out, ",x_{k}");
    }
    for k in 1..=d {
        let _ = write!(out, ",v_{k}");
    }
    out.push_str(",dt\n");
    for (t, time) in knot_times(traj).iter().enumerate() {
        out.push_str(&format_number(*time));
        for &x in traj.position(t).iter().chain(traj.velocity(t)) {
            out.push(',');
            out.push_str(&format_number(x.to_f64_lossy()));
        }
        out.push(',');
        if t + 1 < traj.horizon() {
            out.push_str(&format_number(traj.dt(t).to_f64_lossy()));
        }
        out.push('\n');
    }
    out
}
