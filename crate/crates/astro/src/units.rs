//! Canonical units: distance in Earth mean radii, time in `TU = √(DU³/μ)`.

use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};
use crate::state::CartesianState;

pub const EARTH_MEAN_RADIUS_KM: f64 = 6371.0;
/// km³/s²
pub const MU_EARTH: f64 = 3.986e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalUnits {
    pub du_km: f64,
    pub tu_s: f64,
    /// The μ (km³/s²) that defines TU.
    pub mu: f64,
}

impl CanonicalUnits {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(AstroError::Domain(format!("mu must be positive, got {mu}")));
        }
        let du_km = EARTH_MEAN_RADIUS_KM;
        Ok(CanonicalUnits {
            du_km,
            tu_s: (du_km.powi(3) / mu).sqrt(),
            mu,
        })
    }

    pub fn earth() -> Self {
        Self::new(MU_EARTH).expect("positive constant")
    }

    /// km/s per DU/TU.
    pub fn velocity_unit(&self) -> f64 {
        self.du_km / self.tu_s
    }

    pub fn km_to_du(&self, km: f64) -> f64 {
        km / self.du_km
    }

    pub fn du_to_km(&self, du: f64) -> f64 {
        du * self.du_km
    }

    pub fn hours_to_tu(&self, hours: f64) -> f64 {
        hours * 3600.0 / self.tu_s
    }

    pub fn seconds_to_tu(&self, s: f64) -> f64 {
        s / self.tu_s
    }

    /// Builds a canonical state from km and m/s.
    pub fn state_from_km_m_s(&self, position_km: [f64; 3], velocity_m_s: [f64; 3], epoch_tu: f64) -> CartesianState {
        let vu = self.velocity_unit() * 1000.0;
        CartesianState {
            position: position_km.map(|x| x / self.du_km),
            velocity: velocity_m_s.map(|x| x / vu),
            epoch: epoch_tu,
        }
    }
}
