//! Point mass, low-degree harmonics and cannonball drag.
//!
//! Configuration is in physical units; [`ForceModel`] holds everything
//! converted to canonical units once. The body frame rotates about `z` at a
//! constant rate from alignment with the inertial frame at `t = 0`.

use nalgebra::{Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::atmosphere::Atmosphere;
use crate::error::{AstroError, Result};
use crate::gravity::{HarmonicField, StokesTable, GRAVITY_REFERENCE_RADIUS_KM, MAX_DEGREE};
use crate::state::CartesianState;
use crate::units::{CanonicalUnits, MU_EARTH};

/// rad/s
pub const EARTH_ROTATION_RATE: f64 = 7.292_115e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceModelConfig {
    /// km³/s²
    pub mu: f64,
    pub harmonic_degree: usize,
    pub stokes: StokesTable,
    pub drag_enabled: bool,
    pub drag_coefficient: f64,
    /// m²/kg
    pub area_to_mass: f64,
    pub atmosphere: Atmosphere,
    /// rad/s
    pub earth_rotation_rate: f64,
    /// Radius (km) subtracted from `|r|` to get altitude for the density lookup.
    pub atmosphere_radius_km: f64,
}

impl Default for ForceModelConfig {
    fn default() -> Self {
        ForceModelConfig {
            mu: MU_EARTH,
            harmonic_degree: 0,
            stokes: StokesTable::default(),
            drag_enabled: false,
            drag_coefficient: 2.0,
            area_to_mass: 0.01,
            atmosphere: Atmosphere::default(),
            earth_rotation_rate: EARTH_ROTATION_RATE,
            atmosphere_radius_km: GRAVITY_REFERENCE_RADIUS_KM,
        }
    }
}

impl ForceModelConfig {
    pub fn two_body() -> Self {
        Self::default()
    }

    pub fn with_degree(degree: usize) -> Self {
        ForceModelConfig {
            harmonic_degree: degree,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(AstroError::Domain(format!("mu must be positive, got {}", self.mu)));
        }
        if self.harmonic_degree > MAX_DEGREE {
            return Err(AstroError::Domain(format!(
                "harmonic_degree {} exceeds {MAX_DEGREE}",
                self.harmonic_degree
            )));
        }
        self.stokes.validate()?;
        if self.drag_enabled && (!(self.drag_coefficient >= 0.0) || !(self.area_to_mass >= 0.0)) {
            return Err(AstroError::Domain("drag coefficient and area-to-mass must be non-negative".into()));
        }
        if !self.earth_rotation_rate.is_finite() || !self.atmosphere_radius_km.is_finite() {
            return Err(AstroError::Domain("non-finite rotation rate or atmosphere radius".into()));
        }
        Atmosphere::new(self.atmosphere.bands.clone())?;
        Ok(())
    }

    /// Compiles in units derived from this configuration's own μ.
    pub fn compile(&self) -> Result<ForceModel> {
        ForceModel::new(self, CanonicalUnits::new(self.mu)?)
    }
}

#[derive(Debug, Clone)]
pub struct ForceModel {
    units: CanonicalUnits,
    /// μ / μ_units; 1 unless μ itself is perturbed.
    mu: f64,
    field: HarmonicField,
    drag: Option<Drag>,
    /// rad/TU
    omega: f64,
}

#[derive(Debug, Clone)]
struct Drag {
    atmosphere: Atmosphere,
    /// `½ C_D (A/m)` times DU in metres, so that `a = −k ρ |v| v` in canonical units.
    k: f64,
    du_km: f64,
    radius_km: f64,
}

impl ForceModel {
    pub fn new(config: &ForceModelConfig, units: CanonicalUnits) -> Result<Self> {
        config.validate()?;
        let drag = config.drag_enabled.then(|| Drag {
            atmosphere: config.atmosphere.clone(),
            k: 0.5 * config.drag_coefficient * config.area_to_mass * units.du_km * 1000.0,
            du_km: units.du_km,
            radius_km: config.atmosphere_radius_km,
        });
        Ok(ForceModel {
            units,
            mu: config.mu / units.mu,
            field: HarmonicField::new(
                &config.stokes,
                config.harmonic_degree,
                GRAVITY_REFERENCE_RADIUS_KM / units.du_km,
            )?,
            drag,
            omega: config.earth_rotation_rate * units.tu_s,
        })
    }

    pub fn units(&self) -> CanonicalUnits {
        self.units
    }

    /// Canonical gravitational parameter (1 at the nominal μ).
    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn has_drag(&self) -> bool {
        self.drag.is_some()
    }

    /// Total acceleration in DU/TU².
    pub fn acceleration(&self, t: f64, r: &Vector3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
        let rn = r.norm();
        let mut acc = r * (-self.mu / (rn * rn * rn));
        if self.field.degree() >= 2 {
            let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), -self.omega * t);
            let body = rot * r;
            acc += rot.inverse() * self.field.acceleration(&body, self.mu);
        }
        if let Some(d) = &self.drag {
            let v_rel = v - Vector3::new(-self.omega * r.y, self.omega * r.x, 0.0);
            let h_km = rn * d.du_km - d.radius_km;
            let rho = d.atmosphere.density(h_km);
            acc -= v_rel * (d.k * rho * v_rel.norm());
        }
        acc
    }
}

/// Acceleration at a state (DU/TU²).
pub fn acceleration(state: &CartesianState, forces: &ForceModel) -> Result<[f64; 3]> {
    state.check()?;
    Ok(forces.acceleration(state.epoch, &state.r(), &state.v()).into())
}
