//! Scenario files: one TOML document with a section per stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sepsr::AlsConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateSystem {
    #[default]
    Cartesian,
    Equinoctial,
}

/// What produces the "true" outputs for a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    /// Orbit propagation of the sampled state.
    #[default]
    Propagation,
    /// `q = [x₁x₂ + ½x₁², x₁ − x₂ + x₂³/6]` on two inputs.
    Poly,
    /// A seeded separated representation (see `[separable]`).
    Separable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParameter {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    /// Cartesian: km and m/s. Equinoctial: `a` in km, `λ` in rad. Toy oracles: raw inputs.
    pub mean: Vec<f64>,
    /// Per-component standard deviations, same units as `mean`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
    /// Full covariance in the units of `mean`; overrides `std`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<Vec<Vec<f64>>>,
    /// Equinoctial retrograde factor; chosen from the mean inclination if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrograde_factor: Option<i8>,
}

/// Extra random inputs appended after the state.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParametersSection {
    /// km³/s²
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<RandomParameter>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_coefficient: Option<RandomParameter>,
    /// m²/kg
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area_to_mass: Option<RandomParameter>,
    /// Treat every Stokes coefficient with a nonzero σ as a random input.
    #[serde(default)]
    pub stokes: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingSection {
    pub n_train: usize,
    pub n_validate: usize,
    /// Surrogate draws for histograms and RIC samples.
    pub n_surrogate_mc: usize,
    pub n_sobol: usize,
    /// Histogram bins; Freedman–Diaconis when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram_bins: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSection {
    pub train: u64,
    pub validate: u64,
    pub surrogate: u64,
    pub sobol: [u64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForcesSection {
    /// Nominal μ (km³/s²); also defines the time unit.
    pub mu: f64,
    pub harmonic_degree: usize,
    pub drag: bool,
    pub drag_coefficient: f64,
    /// m²/kg
    pub area_to_mass: f64,
    /// rad/s
    pub earth_rotation_rate: f64,
    /// `n,m,C,S,sigma_C,sigma_S`; the embedded low-degree table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stokes_file: Option<PathBuf>,
    /// `h_min_km,h_max_km,rho0_kg_m3,h0_km,H_km`; the bundled table when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atmosphere_file: Option<PathBuf>,
}

impl Default for ForcesSection {
    fn default() -> Self {
        ForcesSection {
            mu: sepsr_astro::units::MU_EARTH,
            harmonic_degree: 0,
            drag: false,
            drag_coefficient: 2.0,
            area_to_mass: 0.01,
            earth_rotation_rate: sepsr_astro::forces::EARTH_ROTATION_RATE,
            stokes_file: None,
            atmosphere_file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationSection {
    pub span_hours: f64,
    pub tolerance: f64,
}

impl Default for PropagationSection {
    fn default() -> Self {
        PropagationSection {
            span_hours: 36.0,
            tolerance: 1e-13,
        }
    }
}

/// Toy target `q = Σ_l s_l u0_l Π_i u_i^l(x_i)` with seeded coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparableSection {
    pub rank: usize,
    pub degree_count: usize,
    pub output_dim: usize,
    pub seed: u64,
}

impl Default for SeparableSection {
    fn default() -> Self {
        SeparableSection {
            rank: 2,
            degree_count: 4,
            output_dim: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub n_list: Vec<usize>,
    pub repeats: usize,
    /// 0-based output index whose STD is tracked.
    pub qoi: usize,
    /// MC reference size when no exact reference exists.
    pub n_reference: usize,
    pub seed: u64,
}

impl Default for StudySection {
    fn default() -> Self {
        StudySection {
            n_list: vec![100, 200, 400, 800, 1600],
            repeats: 20,
            qoi: 0,
            n_reference: 100_000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssertSection {
    /// Largest allowed validation residual-RMS / sample-RMS ratio.
    pub max_validation_ratio: f64,
}

impl Default for AssertSection {
    fn default() -> Self {
        AssertSection {
            max_validation_ratio: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub coordinate_system: CoordinateSystem,
    #[serde(default)]
    pub oracle: OracleKind,
    pub output_dir: PathBuf,
    pub state: StateSection,
    #[serde(default)]
    pub parameters: ParametersSection,
    pub sampling: SamplingSection,
    pub seeds: SeedSection,
    #[serde(default)]
    pub als: AlsConfig,
    #[serde(default)]
    pub forces: ForcesSection,
    #[serde(default)]
    pub propagation: PropagationSection,
    #[serde(default)]
    pub separable: SeparableSection,
    #[serde(default)]
    pub study: StudySection,
    #[serde(default)]
    pub assert: AssertSection,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => bad(format!("{}: {m}", path.display())),
            other => other,
        })?;
        // Data files are relative to the scenario file.
        let base = path.parent().unwrap_or(Path::new(""));
        for file in [&mut cfg.forces.stokes_file, &mut cfg.forces.atmosphere_file].into_iter().flatten() {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }

    /// Number of state (or toy) inputs.
    pub fn state_dim(&self) -> usize {
        self.state.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.state_dim();
        if d == 0 {
            return Err(bad("state.mean is empty"));
        }
        match self.oracle {
            OracleKind::Propagation if d != 6 => return Err(bad(format!("propagation needs a 6-element state, got {d}"))),
            OracleKind::Poly if d != 2 => return Err(bad(format!("the poly oracle takes 2 inputs, got {d}"))),
            _ => {}
        }
        if self.oracle != OracleKind::Propagation
            && (self.parameters.mu.is_some()
                || self.parameters.drag_coefficient.is_some()
                || self.parameters.area_to_mass.is_some()
                || self.parameters.stokes)
        {
            return Err(bad("extra random parameters need the propagation oracle"));
        }
        if self.state.mean.iter().any(|v| !v.is_finite()) {
            return Err(bad("state.mean has non-finite entries"));
        }
        match (&self.state.std, &self.state.covariance) {
            (_, Some(cov)) => {
                if cov.len() != d || cov.iter().any(|row| row.len() != d) {
                    return Err(bad(format!("state.covariance must be {d}×{d}")));
                }
            }
            (Some(std), None) => {
                if std.len() != d {
                    return Err(bad(format!("state.std has {} entries, expected {d}", std.len())));
                }
                if std.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
                    return Err(bad("state.std entries must be finite and non-negative"));
                }
            }
            (None, None) => return Err(bad("give state.std or state.covariance")),
        }
        if let Some(f) = self.state.retrograde_factor {
            if f != 1 && f != -1 {
                return Err(bad(format!("retrograde_factor must be ±1, got {f}")));
            }
        }
        for (name, p) in [
            ("mu", &self.parameters.mu),
            ("drag_coefficient", &self.parameters.drag_coefficient),
            ("area_to_mass", &self.parameters.area_to_mass),
        ] {
            if let Some(p) = p {
                if !(p.std >= 0.0) || !p.mean.is_finite() || !p.std.is_finite() {
                    return Err(bad(format!("parameters.{name} needs a finite mean and std ≥ 0")));
                }
            }
        }
        let s = &self.sampling;
        if s.n_train == 0 || s.n_validate == 0 || s.n_surrogate_mc < 2 || s.n_sobol < 2 {
            return Err(bad("sample counts must be positive (n_surrogate_mc, n_sobol ≥ 2)"));
        }
        if s.histogram_bins == Some(0) {
            return Err(bad("histogram_bins must be positive"));
        }
        if self.seeds.sobol[0] == self.seeds.sobol[1] {
            return Err(bad("the two Sobol seeds must differ"));
        }
        self.als.validate().map_err(|e| bad(format!("als: {e}")))?;
        if !(self.propagation.span_hours >= 0.0) {
            return Err(bad("propagation.span_hours must be non-negative"));
        }
        if !(sepsr_astro::integrator::MIN_TOL..=sepsr_astro::integrator::MAX_TOL).contains(&self.propagation.tolerance) {
            return Err(bad("propagation.tolerance must lie in [1e-14, 1e-6]"));
        }
        if self.oracle == OracleKind::Separable {
            let sp = &self.separable;
            if sp.rank == 0 || sp.degree_count == 0 || sp.output_dim == 0 {
                return Err(bad("separable rank, degree_count and output_dim must be positive"));
            }
        }
        if self.study.repeats < 2 {
            return Err(bad("study.repeats must be at least 2"));
        }
        if self.study.n_list.is_empty() || self.study.n_list.contains(&0) {
            return Err(bad("study.n_list must hold positive sizes"));
        }
        if !(self.assert.max_validation_ratio > 0.0) {
            return Err(bad("assert.max_validation_ratio must be positive"));
        }
        Ok(())
    }
}
