#![allow(dead_code)]

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepsr_astro::{CartesianState, KeplerianElements};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn stumpff(z: f64) -> (f64, f64) {
    if z > 1e-6 {
        let s = z.sqrt();
        ((1.0 - s.cos()) / z, (s - s.sin()) / (s * z))
    } else if z < -1e-6 {
        let s = (-z).sqrt();
        ((s.cosh() - 1.0) / -z, (s.sinh() - s) / (s * -z))
    } else {
        (0.5 - z / 24.0 + z * z / 720.0, 1.0 / 6.0 - z / 120.0 + z * z / 5040.0)
    }
}

/// Two-body propagation by the universal-variable form of Kepler's equation.
pub fn kepler_universal(state: &CartesianState, dt: f64, mu: f64) -> CartesianState {
    let (r0v, v0v) = (state.r(), state.v());
    let r0 = r0v.norm();
    let vr0 = r0v.dot(&v0v) / r0;
    let alpha = 2.0 / r0 - v0v.norm_squared() / mu;
    let sqmu = mu.sqrt();
    let mut chi = sqmu * alpha.abs() * dt;
    for _ in 0..200 {
        let z = alpha * chi * chi;
        let (c, s) = stumpff(z);
        let f = r0 * vr0 / sqmu * chi * chi * c + (1.0 - alpha * r0) * chi.powi(3) * s + r0 * chi - sqmu * dt;
        let df = r0 * vr0 / sqmu * chi * (1.0 - z * s) + (1.0 - alpha * r0) * chi * chi * c + r0;
        let step = f / df;
        chi -= step;
        if step.abs() <= 1e-15 * chi.abs().max(1.0) {
            break;
        }
    }
    let z = alpha * chi * chi;
    let (c, s) = stumpff(z);
    let f = 1.0 - chi * chi / r0 * c;
    let g = dt - chi.powi(3) * s / sqmu;
    let r = r0v * f + v0v * g;
    let rn = r.norm();
    let fdot = sqmu / (rn * r0) * (alpha * chi.powi(3) * s - chi);
    let gdot = 1.0 - chi * chi / rn * c;
    CartesianState::from_vectors(r, r0v * fdot + v0v * gdot, state.epoch + dt)
}

/// Mean to eccentric anomaly by bisection (slow, independent of the library's Newton solver).
pub fn eccentric_anomaly(m: f64, e: f64) -> f64 {
    let m = m.rem_euclid(2.0 * PI);
    let (mut lo, mut hi) = (0.0, 2.0 * PI);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid - e * mid.sin() < m {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Perifocal state rotated by `R3(−Ω) R1(−i) R3(−ω)`.
pub fn classical_to_cartesian(kep: &KeplerianElements, mu: f64) -> CartesianState {
    let ea = eccentric_anomaly(kep.mean_anomaly, kep.e);
    let b = (1.0 - kep.e * kep.e).sqrt();
    let n = (mu / kep.a.powi(3)).sqrt();
    let r = kep.a * (1.0 - kep.e * ea.cos());
    let pos = Vector3::new(kep.a * (ea.cos() - kep.e), kep.a * b * ea.sin(), 0.0);
    let vel = Vector3::new(-ea.sin(), b * ea.cos(), 0.0) * (n * kep.a * kep.a / r);
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), kep.raan)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), kep.i)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), kep.argp);
    CartesianState::from_vectors(rot * pos, rot * vel, 0.0)
}

pub fn random_elements(rng: &mut impl Rng, i_range: (f64, f64)) -> KeplerianElements {
    KeplerianElements {
        a: rng.random_range(1.05..8.0),
        e: rng.random_range(0.0..0.9),
        i: rng.random_range(i_range.0..i_range.1),
        raan: rng.random_range(0.0..2.0 * PI),
        argp: rng.random_range(0.0..2.0 * PI),
        mean_anomaly: rng.random_range(0.0..2.0 * PI),
    }
}

/// Random low-orbit state: radius 1.05–1.3 DU, speed near circular, perigee above 1.02 DU.
pub fn random_leo(rng: &mut impl Rng) -> CartesianState {
    loop {
        let dir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let vdir = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if dir.norm() < 0.1 || vdir.norm() < 0.1 || dir.normalize().cross(&vdir.normalize()).norm() < 0.2 {
            continue;
        }
        let r = dir.normalize() * rng.random_range(1.05f64..1.3);
        let v = vdir.normalize() * (rng.random_range(0.85f64..1.15) / r.norm().sqrt());
        let state = CartesianState::from_vectors(r, v, 0.0);
        let a = 1.0 / (2.0 / r.norm() - v.norm_squared());
        let p = state.angular_momentum().norm_squared();
        let e = (1.0 - p / a).max(0.0).sqrt();
        if a * (1.0 - e) < 1.02 {
            continue;
        }
        return state;
    }
}

pub fn angle_diff(a: f64, b: f64) -> f64 {
    sepsr_astro::wrap_pi(a - b).abs()
}
