//! Keplerian and equinoctial elements.
//!
//! `h = e sin(ω + f_r Ω)`, `k = e cos(ω + f_r Ω)`,
//! `p = sin i sin Ω / (1 + f_r cos i)`, `q = sin i cos Ω / (1 + f_r cos i)`,
//! `λ = M + ω + f_r Ω`.
//!
//! For `f_r = +1` the `p, q` denominator is `1 + cos i` (so `p, q` carry
//! `tan(i/2)`); for `f_r = −1` it is `1 − cos i` (`cot(i/2)`).
//!
//! Cartesian conversions go through the equinoctial frame directly, so they
//! stay regular at zero eccentricity and zero inclination where `ω` and `Ω`
//! are undefined.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::state::CartesianState;

pub const KEPLER_TOL: f64 = 1e-13;
pub const KEPLER_MAX_ITER: usize = 50;
const SINGULAR_TOL: f64 = 1e-9;
/// Inclination above which the retrograde set is chosen by default.
pub const RETROGRADE_THRESHOLD_DEG: f64 = 175.0;

/// Wraps an angle to `(−π, π]`.
pub fn wrap_pi(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w > PI {
        w - TAU
    } else {
        w
    }
}

pub fn wrap_two_pi(x: f64) -> f64 {
    let w = x.rem_euclid(TAU);
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// `+1` for direct orbits, `−1` above 175° inclination.
pub fn retrograde_factor(inclination: f64) -> i8 {
    if inclination > RETROGRADE_THRESHOLD_DEG.to_radians() {
        -1
    } else {
        1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeplerianElements {
    /// DU
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    pub mean_anomaly: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquinoctialState {
    /// DU
    pub a: f64,
    pub h: f64,
    pub k: f64,
    pub p: f64,
    pub q: f64,
    /// Mean longitude in `(−π, π]`.
    pub lambda: f64,
    pub f_r: i8,
}

impl EquinoctialState {
    pub fn check(&self) -> Result<()> {
        if !(self.a > 0.0) || !self.a.is_finite() {
            return Err(AstroError::Domain(format!("semimajor axis must be positive, got {}", self.a)));
        }
        if !(self.h * self.h + self.k * self.k < 1.0) {
            return Err(AstroError::Domain("h² + k² must be below 1 (elliptic orbit)".into()));
        }
        if ![self.p, self.q, self.lambda].iter().all(|v| v.is_finite()) {
            return Err(AstroError::Domain("non-finite equinoctial element".into()));
        }
        if self.f_r != 1 && self.f_r != -1 {
            return Err(AstroError::Domain(format!("retrograde factor must be ±1, got {}", self.f_r)));
        }
        Ok(())
    }

    /// `[a, h, k, p, q, λ]`
    pub fn to_array(&self) -> [f64; 6] {
        [self.a, self.h, self.k, self.p, self.q, self.lambda]
    }

    pub fn from_array(x: &[f64], f_r: i8) -> Self {
        EquinoctialState {
            a: x[0],
            h: x[1],
            k: x[2],
            p: x[3],
            q: x[4],
            lambda: wrap_pi(x[5]),
            f_r,
        }
    }

    fn fr(&self) -> f64 {
        self.f_r as f64
    }

    /// Unit vectors `f̂, ĝ, ŵ` of the equinoctial frame.
    pub fn frame(&self) -> [Vector3<f64>; 3] {
        let (p, q, i) = (self.p, self.q, self.fr());
        let s = 1.0 / (1.0 + p * p + q * q);
        [
            Vector3::new(1.0 - p * p + q * q, 2.0 * p * q, -2.0 * i * p) * s,
            Vector3::new(2.0 * i * p * q, (1.0 + p * p - q * q) * i, 2.0 * q) * s,
            Vector3::new(2.0 * p, -2.0 * q, (1.0 - p * p - q * q) * i) * s,
        ]
    }
}

fn check_singular(i: f64, f_r: i8) -> Result<()> {
    let near = if f_r == 1 { (i - PI).abs() } else { i.abs() };
    if near < SINGULAR_TOL {
        return Err(AstroError::Singularity { f_r });
    }
    Ok(())
}

pub fn keplerian_to_equinoctial(kep: &KeplerianElements, f_r: i8) -> Result<EquinoctialState> {
    if f_r != 1 && f_r != -1 {
        return Err(AstroError::Domain(format!("retrograde factor must be ±1, got {f_r}")));
    }
    if !(kep.a > 0.0) || !(0.0..1.0).contains(&kep.e) {
        return Err(AstroError::Domain(format!("need a > 0 and 0 ≤ e < 1, got a = {}, e = {}", kep.a, kep.e)));
    }
    if !(0.0..=PI).contains(&kep.i) {
        return Err(AstroError::Domain(format!("inclination {} outside [0, π]", kep.i)));
    }
    check_singular(kep.i, f_r)?;
    let fr = f_r as f64;
    let lon = kep.argp + fr * kep.raan;
    let t = kep.i.sin() / (1.0 + fr * kep.i.cos());
    Ok(EquinoctialState {
        a: kep.a,
        h: kep.e * lon.sin(),
        k: kep.e * lon.cos(),
        p: t * kep.raan.sin(),
        q: t * kep.raan.cos(),
        lambda: wrap_pi(kep.mean_anomaly + lon),
        f_r,
    })
}

/// Inverse of [`keplerian_to_equinoctial`]. Angles land in `[0, 2π)`; `Ω = 0`
/// when `p = q = 0` and `ω + f_r Ω = 0` when `e = 0`.
pub fn equinoctial_to_keplerian(eq: &EquinoctialState) -> Result<KeplerianElements> {
    eq.check()?;
    let fr = eq.fr();
    let t = eq.p.hypot(eq.q);
    let half = 2.0 * t.atan();
    let i = if eq.f_r == 1 { half } else { PI - half };
    let raan = eq.p.atan2(eq.q);
    let lon = eq.h.atan2(eq.k);
    Ok(KeplerianElements {
        a: eq.a,
        e: eq.h.hypot(eq.k),
        i,
        raan: wrap_two_pi(raan),
        argp: wrap_two_pi(lon - fr * raan),
        mean_anomaly: wrap_two_pi(eq.lambda - lon),
    })
}

/// Solves `λ = F + h cos F − k sin F` for the eccentric longitude `F`.
pub fn eccentric_longitude(lambda: f64, h: f64, k: f64) -> Result<f64> {
    let mut f = lambda;
    let mut residual = f64::INFINITY;
    for _ in 0..KEPLER_MAX_ITER {
        let (s, c) = f.sin_cos();
        residual = f + h * c - k * s - lambda;
        let step = residual / (1.0 - h * s - k * c);
        f -= step;
        if step.abs() <= KEPLER_TOL {
            return Ok(f);
        }
    }
    Err(AstroError::Iteration {
        iterations: KEPLER_MAX_ITER,
        residual,
    })
}

pub fn equinoctial_to_cartesian(eq: &EquinoctialState, mu: f64, epoch: f64) -> Result<CartesianState> {
    eq.check()?;
    if !(mu > 0.0) {
        return Err(AstroError::Domain(format!("mu must be positive, got {mu}")));
    }
    let (a, h, k) = (eq.a, eq.h, eq.k);
    let f = eccentric_longitude(eq.lambda, h, k)?;
    let (sf, cf) = f.sin_cos();
    let beta = 1.0 / (1.0 + (1.0 - h * h - k * k).sqrt());
    let n = (mu / (a * a * a)).sqrt();
    let r = a * (1.0 - k * cf - h * sf);
    let x1 = a * ((1.0 - h * h * beta) * cf + h * k * beta * sf - k);
    let y1 = a * (h * k * beta * cf + (1.0 - k * k * beta) * sf - h);
    let vx1 = n * a * a / r * (h * k * beta * cf - (1.0 - h * h * beta) * sf);
    let vy1 = n * a * a / r * ((1.0 - k * k * beta) * cf - h * k * beta * sf);
    let [fh, gh, _] = eq.frame();
    Ok(CartesianState::from_vectors(fh * x1 + gh * y1, fh * vx1 + gh * vy1, epoch))
}

pub fn cartesian_to_equinoctial(state: &CartesianState, mu: f64, f_r: i8) -> Result<EquinoctialState> {
    state.check()?;
    if f_r != 1 && f_r != -1 {
        return Err(AstroError::Domain(format!("retrograde factor must be ±1, got {f_r}")));
    }
    let (r, v) = (state.r(), state.v());
    let rn = r.norm();
    let hvec = r.cross(&v);
    if !(hvec.norm() > 0.0) {
        return Err(AstroError::Domain("rectilinear orbit (r ∥ v)".into()));
    }
    let w = hvec.normalize();
    let fr = f_r as f64;
    let denom = 1.0 + fr * w.z;
    if denom.abs() < SINGULAR_TOL * SINGULAR_TOL {
        return Err(AstroError::Singularity { f_r });
    }
    let p = w.x / denom;
    let q = -w.y / denom;
    let inv_a = 2.0 / rn - v.norm_squared() / mu;
    if !(inv_a > 0.0) {
        return Err(AstroError::Domain("orbit is not elliptic".into()));
    }
    let a = 1.0 / inv_a;
    let ecc = (r * (v.norm_squared() - mu / rn) - v * r.dot(&v)) / mu;
    let mut eq = EquinoctialState {
        a,
        h: 0.0,
        k: 0.0,
        p,
        q,
        lambda: 0.0,
        f_r,
    };
    let [fh, gh, _] = eq.frame();
    let (h, k) = (ecc.dot(&gh), ecc.dot(&fh));
    let (x1, y1) = (r.dot(&fh), r.dot(&gh));
    let root = (1.0 - h * h - k * k).sqrt();
    let beta = 1.0 / (1.0 + root);
    let cf = k + ((1.0 - k * k * beta) * x1 - h * k * beta * y1) / (a * root);
    let sf = h + ((1.0 - h * h * beta) * y1 - h * k * beta * x1) / (a * root);
    let f = sf.atan2(cf);
    eq.h = h;
    eq.k = k;
    eq.lambda = wrap_pi(f + h * f.cos() - k * f.sin());
    Ok(eq)
}

pub fn keplerian_to_cartesian(kep: &KeplerianElements, mu: f64, epoch: f64) -> Result<CartesianState> {
    let f_r = retrograde_factor(kep.i);
    equinoctial_to_cartesian(&keplerian_to_equinoctial(kep, f_r)?, mu, epoch)
}

pub fn cartesian_to_keplerian(state: &CartesianState, mu: f64) -> Result<KeplerianElements> {
    let w = state.angular_momentum();
    let i = (w.z / w.norm()).clamp(-1.0, 1.0).acos();
    equinoctial_to_keplerian(&cartesian_to_equinoctial(state, mu, retrograde_factor(i))?)
}
