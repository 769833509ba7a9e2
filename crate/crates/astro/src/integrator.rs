//! Dormand–Prince 5(4) with embedded error control, endpoint output only.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::forces::ForceModel;
use crate::state::CartesianState;

pub const MIN_STEP: f64 = 1e-14;
pub const MIN_TOL: f64 = 1e-14;
pub const MAX_TOL: f64 = 1e-6;
/// Radius (DU) below which a trajectory counts as an impact.
pub const IMPACT_RADIUS: f64 = 1.0;

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights minus the embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

type Y = [f64; 6];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Propagation {
    pub state: CartesianState,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    /// Sum over accepted steps of the largest absolute local error estimate.
    pub error_estimate: f64,
}

fn deriv(forces: &ForceModel, t: f64, y: &Y) -> Y {
    let r = Vector3::new(y[0], y[1], y[2]);
    let v = Vector3::new(y[3], y[4], y[5]);
    let a = forces.acceleration(t, &r, &v);
    [y[3], y[4], y[5], a.x, a.y, a.z]
}

fn error_norm(err: &Y, y0: &Y, y1: &Y, tol: f64) -> f64 {
    (0..6)
        .map(|i| err[i].abs() / (tol + tol * y0[i].abs().max(y1[i].abs())))
        .fold(0.0, f64::max)
}

fn initial_step(forces: &ForceModel, t: f64, y: &Y, f0: &Y, tol: f64, span: f64) -> f64 {
    let scale = |i: usize| tol + tol * y[i].abs();
    let d0 = (0..6).map(|i| (y[i] / scale(i)).powi(2)).sum::<f64>().sqrt() / 6f64.sqrt();
    let d1 = (0..6).map(|i| (f0[i] / scale(i)).powi(2)).sum::<f64>().sqrt() / 6f64.sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let mut y1 = [0.0; 6];
    for i in 0..6 {
        y1[i] = y[i] + h0 * f0[i];
    }
    let f1 = deriv(forces, t + h0, &y1);
    let d2 = (0..6).map(|i| ((f1[i] - f0[i]) / scale(i)).powi(2)).sum::<f64>().sqrt() / 6f64.sqrt() / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// Propagates `state` to `t_final` (TU) with `atol = rtol = tol`.
pub fn propagate(state: &CartesianState, forces: &ForceModel, t_final: f64, tol: f64) -> Result<Propagation> {
    state.check()?;
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(AstroError::Domain(format!("tolerance {tol:e} outside [{MIN_TOL:e}, {MAX_TOL:e}]")));
    }
    if !(t_final >= state.epoch) || !t_final.is_finite() {
        return Err(AstroError::Domain(format!(
            "t_final {t_final} precedes the epoch {}",
            state.epoch
        )));
    }
    let mut t = state.epoch;
    let mut y = state.to_array();
    let mut out = Propagation {
        state: *state,
        accepted_steps: 0,
        rejected_steps: 0,
        error_estimate: 0.0,
    };
    if t_final == t {
        return Ok(out);
    }
    let mut k = [[0.0; 6]; 7];
    k[0] = deriv(forces, t, &y);
    let mut h = initial_step(forces, t, &y, &k[0], tol, t_final - t);

    while t < t_final {
        let last_good = CartesianState::from_array(&y, t);
        let remaining = t_final - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        } else if h < MIN_STEP {
            return Err(AstroError::StepUnderflow { last_good, step: h });
        }

        let mut stage = [0.0; 6];
        for s in 1..7 {
            for i in 0..6 {
                stage[i] = y[i] + h * (0..s).map(|j| A[s][j] * k[j][i]).sum::<f64>();
            }
            k[s] = deriv(forces, t + C[s] * h, &stage);
        }
        // Stage 7 is evaluated at the fifth-order solution.
        let y_new = stage;
        let mut err = [0.0; 6];
        for i in 0..6 {
            err[i] = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
        }
        let norm = error_norm(&err, &y, &y_new, tol);
        if !norm.is_finite() || y_new.iter().any(|v| !v.is_finite()) {
            return Err(AstroError::NonFinite { last_good });
        }

        if norm <= 1.0 {
            t = if last { t_final } else { t + h };
            y = y_new;
            k[0] = k[6];
            out.accepted_steps += 1;
            out.error_estimate += err.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let radius = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
            if radius < IMPACT_RADIUS {
                return Err(AstroError::Impact {
                    last_good: CartesianState::from_array(&y, t),
                    radius,
                });
            }
            let factor = if norm == 0.0 { MAX_FACTOR } else { SAFETY * norm.powf(-0.2) };
            h *= factor.clamp(MIN_FACTOR, MAX_FACTOR);
        } else {
            out.rejected_steps += 1;
            h *= (SAFETY * norm.powf(-0.2)).clamp(MIN_FACTOR, 1.0);
        }
    }
    out.state = CartesianState::from_array(&y, t_final);
    Ok(out)
}
