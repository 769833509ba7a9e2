//! Input distributions and the "true" map each scenario samples.

use nalgebra::DMatrix;
use rayon::prelude::*;
use sepsr::{BasisSpec, SeparatedRepresentation};
use sepsr_astro::{
    cartesian_to_equinoctial, equinoctial_to_cartesian, equinoctial_to_keplerian, propagate, retrograde_factor,
    sample_initial_states, wrap_pi, Atmosphere, CanonicalUnits, CartesianState, EquinoctialState, ForceModel,
    ForceModelConfig, InitialSamples, StokesTable,
};

use crate::config::{CoordinateSystem, OracleKind, ScenarioConfig};
use crate::error::{HarnessError, Result};

pub const CARTESIAN_NAMES: [&str; 6] = ["x", "y", "z", "vx", "vy", "vz"];
pub const EQUINOCTIAL_NAMES: [&str; 6] = ["a", "h", "k", "p", "q", "lambda"];

#[derive(Debug, Clone, Copy)]
enum StokesSlot {
    C(usize),
    S(usize),
}

#[derive(Debug, Clone)]
struct Orbit {
    units: CanonicalUnits,
    forces: ForceModelConfig,
    coordinates: CoordinateSystem,
    f_r: i8,
    t_final: f64,
    tol: f64,
    mu_slot: Option<usize>,
    cd_slot: Option<usize>,
    am_slot: Option<usize>,
    stokes_slots: Vec<(usize, StokesSlot)>,
    /// Propagated mean-state `λ`; sample `λ`s are unwrapped next to it.
    nominal_lambda: f64,
}

#[derive(Debug, Clone)]
enum Truth {
    Poly,
    Separable(SeparatedRepresentation),
    Orbit(Box<Orbit>),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    /// Working units: canonical for orbit states, physical for extra parameters.
    mean: Vec<f64>,
    cov: DMatrix<f64>,
    truth: Truth,
}

fn state_scales(config: &ScenarioConfig, units: &CanonicalUnits) -> Vec<f64> {
    match (config.oracle, config.coordinate_system) {
        (OracleKind::Propagation, CoordinateSystem::Cartesian) => {
            let v = 1.0 / (units.velocity_unit() * 1000.0);
            vec![1.0 / units.du_km, 1.0 / units.du_km, 1.0 / units.du_km, v, v, v]
        }
        (OracleKind::Propagation, CoordinateSystem::Equinoctial) => {
            vec![1.0 / units.du_km, 1.0, 1.0, 1.0, 1.0, 1.0]
        }
        _ => vec![1.0; config.state_dim()],
    }
}

fn load_stokes(config: &ScenarioConfig) -> Result<StokesTable> {
    match &config.forces.stokes_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            Ok(StokesTable::from_csv(&text, &p.display().to_string())?)
        }
        None => Ok(StokesTable::default()),
    }
}

fn load_atmosphere(config: &ScenarioConfig) -> Result<Atmosphere> {
    match &config.forces.atmosphere_file {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| HarnessError::io(p, e))?;
            Ok(Atmosphere::from_csv(&text, &p.display().to_string())?)
        }
        None => Ok(Atmosphere::default()),
    }
}

/// Seeded toy target: every factor is `1 + σ·(noise in the higher
/// coefficients)` with `σ = 0.5/√d`, which keeps the product's tails light at
/// large `d`. Term scales decay as `0.3^l`.
pub fn separable_target(d: usize, m: usize, rank: usize, p: usize, seed: u64) -> Result<SeparatedRepresentation> {
    let z = sepsr::sampling::standard_normal_rows(seed, rank * (d * p + m), 1);
    let spread = 0.5 / (d as f64).sqrt();
    let mut it = z.into_iter();
    let mut coeffs = Vec::with_capacity(rank);
    let mut det = Vec::with_capacity(rank);
    for _ in 0..rank {
        let mut per_dir = Vec::with_capacity(d);
        for _ in 0..d {
            let mut c: Vec<f64> = (0..p).map(|_| spread * it.next().unwrap()).collect();
            c[0] = 1.0;
            per_dir.push(c);
        }
        coeffs.push(per_dir);
        det.push((0..m).map(|_| it.next().unwrap()).collect());
    }
    let scales = (0..rank).map(|l| 0.3f64.powi(l as i32)).collect();
    Ok(SeparatedRepresentation::new(BasisSpec::new(p)?, scales, det, coeffs)?)
}

impl Scenario {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let units = CanonicalUnits::new(config.forces.mu)?;
        let d0 = config.state_dim();
        let scales = state_scales(config, &units);
        let mut mean: Vec<f64> = config.state.mean.iter().zip(&scales).map(|(m, s)| m * s).collect();
        let mut variances = Vec::new();
        let state_cov = match (&config.state.covariance, &config.state.std) {
            (Some(c), _) => DMatrix::from_fn(d0, d0, |i, k| c[i][k] * scales[i] * scales[k]),
            (None, Some(s)) => DMatrix::from_fn(d0, d0, |i, k| if i == k { (s[i] * scales[i]).powi(2) } else { 0.0 }),
            (None, None) => unreachable!("validated"),
        };

        let (mut input_names, output_names): (Vec<String>, Vec<String>) = match config.oracle {
            OracleKind::Propagation => {
                let names = match config.coordinate_system {
                    CoordinateSystem::Cartesian => CARTESIAN_NAMES,
                    CoordinateSystem::Equinoctial => EQUINOCTIAL_NAMES,
                };
                let v: Vec<String> = names.iter().map(|s| s.to_string()).collect();
                (v.clone(), v)
            }
            OracleKind::Poly => (vec!["x1".into(), "x2".into()], vec!["q1".into(), "q2".into()]),
            OracleKind::Separable => (
                (1..=d0).map(|i| format!("x{i}")).collect(),
                (1..=config.separable.output_dim).map(|m| format!("q{m}")).collect(),
            ),
        };

        let truth = match config.oracle {
            OracleKind::Poly => Truth::Poly,
            OracleKind::Separable => {
                let sp = &config.separable;
                Truth::Separable(separable_target(d0, sp.output_dim, sp.rank, sp.degree_count, sp.seed)?)
            }
            OracleKind::Propagation => {
                let stokes = load_stokes(config)?;
                let forces = ForceModelConfig {
                    mu: config.forces.mu,
                    harmonic_degree: config.forces.harmonic_degree,
                    stokes,
                    drag_enabled: config.forces.drag,
                    drag_coefficient: config.forces.drag_coefficient,
                    area_to_mass: config.forces.area_to_mass,
                    atmosphere: load_atmosphere(config)?,
                    earth_rotation_rate: config.forces.earth_rotation_rate,
                    ..ForceModelConfig::default()
                };
                forces.validate()?;
                let mut slot = |name: &str, p: &Option<crate::config::RandomParameter>, mean: &mut Vec<f64>| {
                    p.as_ref().map(|p| {
                        mean.push(p.mean);
                        variances.push(p.std * p.std);
                        input_names.push(name.to_string());
                        mean.len() - 1
                    })
                };
                let mu_slot = slot("mu", &config.parameters.mu, &mut mean);
                let cd_slot = slot("C_D", &config.parameters.drag_coefficient, &mut mean);
                let am_slot = slot("A_m", &config.parameters.area_to_mass, &mut mean);
                let mut stokes_slots = Vec::new();
                if config.parameters.stokes {
                    for (j, e) in forces.stokes.entries.iter().enumerate() {
                        if e.sigma_c > 0.0 {
                            mean.push(e.c);
                            variances.push(e.sigma_c * e.sigma_c);
                            input_names.push(format!("C{}{}", e.n, e.m));
                            stokes_slots.push((mean.len() - 1, StokesSlot::C(j)));
                        }
                    }
                    for (j, e) in forces.stokes.entries.iter().enumerate() {
                        if e.sigma_s > 0.0 {
                            mean.push(e.s);
                            variances.push(e.sigma_s * e.sigma_s);
                            input_names.push(format!("S{}{}", e.n, e.m));
                            stokes_slots.push((mean.len() - 1, StokesSlot::S(j)));
                        }
                    }
                }
                let f_r = match config.coordinate_system {
                    CoordinateSystem::Cartesian => 1,
                    CoordinateSystem::Equinoctial => config.state.retrograde_factor.unwrap_or_else(|| {
                        let eq = EquinoctialState::from_array(&mean[..6], 1);
                        equinoctial_to_keplerian(&eq).map(|k| retrograde_factor(k.i)).unwrap_or(1)
                    }),
                };
                let mut orbit = Orbit {
                    units,
                    forces,
                    coordinates: config.coordinate_system,
                    f_r,
                    t_final: units.hours_to_tu(config.propagation.span_hours),
                    tol: config.propagation.tolerance,
                    mu_slot,
                    cd_slot,
                    am_slot,
                    stokes_slots,
                    nominal_lambda: 0.0,
                };
                if config.coordinate_system == CoordinateSystem::Equinoctial {
                    orbit.nominal_lambda = orbit.propagate_raw(&mean)?[5];
                }
                Truth::Orbit(Box::new(orbit))
            }
        };

        let d = mean.len();
        let mut cov = DMatrix::zeros(d, d);
        cov.view_mut((0, 0), (d0, d0)).copy_from(&state_cov);
        for (k, v) in variances.iter().enumerate() {
            cov[(d0 + k, d0 + k)] = *v;
        }
        Ok(Scenario {
            input_names,
            output_names,
            mean,
            cov,
            truth,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.output_names.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn is_cartesian_orbit(&self) -> bool {
        matches!(&self.truth, Truth::Orbit(o) if o.coordinates == CoordinateSystem::Cartesian)
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<InitialSamples> {
        Ok(sample_initial_states(&self.mean, &self.cov, n, seed)?)
    }

    /// True outputs for one mapped input row.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.truth {
            Truth::Poly => Ok(vec![x[0] * x[1] + 0.5 * x[0] * x[0], x[0] - x[1] + x[1].powi(3) / 6.0]),
            Truth::Separable(model) => Ok(model.evaluate(x)?),
            Truth::Orbit(orbit) => orbit.evaluate(x),
        }
    }

    /// True outputs for every row, in row order.
    pub fn evaluate_rows(&self, values: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim();
        let rows: Vec<Vec<f64>> = values
            .par_chunks_exact(d)
            .map(|x| self.evaluate(x))
            .collect::<Result<_>>()?;
        Ok(rows.concat())
    }

    /// Exact output mean and covariance, when the target is a separated
    /// representation evaluated on standard normal inputs.
    pub fn exact_moments(&self) -> Option<(Vec<f64>, Vec<Vec<f64>>)> {
        let Truth::Separable(model) = &self.truth else {
            return None;
        };
        let d = self.input_dim();
        let standard = self.mean.iter().all(|&m| m == 0.0) && self.cov == DMatrix::identity(d, d);
        standard.then(|| (sepsr::analytic_mean(model), sepsr::analytic_covariance(model)))
    }

    /// Cartesian state for an output row of a Cartesian orbit scenario.
    pub fn output_state(&self, q: &[f64]) -> Option<CartesianState> {
        match &self.truth {
            Truth::Orbit(o) if o.coordinates == CoordinateSystem::Cartesian => {
                Some(CartesianState::from_array(q, o.t_final))
            }
            _ => None,
        }
    }
}

impl Orbit {
    fn sample_forces(&self, x: &[f64]) -> Result<ForceModel> {
        let mut cfg = self.forces.clone();
        if let Some(k) = self.mu_slot {
            cfg.mu = x[k];
        }
        if let Some(k) = self.cd_slot {
            cfg.drag_coefficient = x[k];
        }
        if let Some(k) = self.am_slot {
            cfg.area_to_mass = x[k];
        }
        for &(k, slot) in &self.stokes_slots {
            match slot {
                StokesSlot::C(j) => cfg.stokes.entries[j].c = x[k],
                StokesSlot::S(j) => cfg.stokes.entries[j].s = x[k],
            }
        }
        Ok(ForceModel::new(&cfg, self.units)?)
    }

    /// Propagated outputs with `λ` wrapped to `(−π, π]`.
    fn propagate_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        let forces = self.sample_forces(x)?;
        let start = match self.coordinates {
            CoordinateSystem::Cartesian => CartesianState::from_array(&x[..6], 0.0),
            CoordinateSystem::Equinoctial => {
                equinoctial_to_cartesian(&EquinoctialState::from_array(&x[..6], self.f_r), forces.mu(), 0.0)?
            }
        };
        let end = propagate(&start, &forces, self.t_final, self.tol)?.state;
        Ok(match self.coordinates {
            CoordinateSystem::Cartesian => end.to_array().to_vec(),
            CoordinateSystem::Equinoctial => cartesian_to_equinoctial(&end, forces.mu(), self.f_r)?.to_array().to_vec(),
        })
    }

    fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut q = self.propagate_raw(x)?;
        if self.coordinates == CoordinateSystem::Equinoctial {
            q[5] = self.nominal_lambda + wrap_pi(q[5] - self.nominal_lambda);
        }
        Ok(q)
    }
}
