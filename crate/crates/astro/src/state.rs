use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

/// Inertial position and velocity in canonical units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartesianState {
    /// DU
    pub position: [f64; 3],
    /// DU/TU
    pub velocity: [f64; 3],
    /// TU
    pub epoch: f64,
}

impl CartesianState {
    pub fn new(position: [f64; 3], velocity: [f64; 3], epoch: f64) -> Result<Self> {
        let s = CartesianState { position, velocity, epoch };
        s.check()?;
        Ok(s)
    }

    pub fn from_vectors(r: Vector3<f64>, v: Vector3<f64>, epoch: f64) -> Self {
        CartesianState {
            position: r.into(),
            velocity: v.into(),
            epoch,
        }
    }

    pub fn check(&self) -> Result<()> {
        let finite = self.position.iter().chain(&self.velocity).all(|v| v.is_finite()) && self.epoch.is_finite();
        if !finite {
            return Err(AstroError::Domain("state has non-finite entries".into()));
        }
        if !(self.r().norm() > 0.0) {
            return Err(AstroError::Domain("position must be nonzero".into()));
        }
        Ok(())
    }

    pub fn r(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }

    pub fn v(&self) -> Vector3<f64> {
        Vector3::from(self.velocity)
    }

    /// `[x, y, z, ẋ, ẏ, ż]`
    pub fn to_array(&self) -> [f64; 6] {
        let (r, v) = (self.position, self.velocity);
        [r[0], r[1], r[2], v[0], v[1], v[2]]
    }

    pub fn from_array(y: &[f64], epoch: f64) -> Self {
        CartesianState {
            position: [y[0], y[1], y[2]],
            velocity: [y[3], y[4], y[5]],
            epoch,
        }
    }

    /// `v²/2 − μ/r`
    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * self.v().norm_squared() - mu / self.r().norm()
    }

    pub fn angular_momentum(&self) -> Vector3<f64> {
        self.r().cross(&self.v())
    }
}
