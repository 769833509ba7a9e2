//! Piecewise-exponential atmosphere: `ρ(h) = ρ₀ exp(−(h − h₀)/H)` per altitude band.

use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

const BUNDLED: &str = include_str!("../data/atmosphere.csv");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereBand {
    pub h_min_km: f64,
    pub h_max_km: f64,
    pub rho0_kg_m3: f64,
    pub h0_km: f64,
    pub scale_height_km: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atmosphere {
    pub bands: Vec<AtmosphereBand>,
}

impl Default for Atmosphere {
    fn default() -> Self {
        Atmosphere::from_csv(BUNDLED, "bundled atmosphere table").expect("bundled table parses")
    }
}

impl Atmosphere {
    pub fn new(mut bands: Vec<AtmosphereBand>) -> Result<Self> {
        if bands.is_empty() {
            return Err(AstroError::Domain("atmosphere table is empty".into()));
        }
        bands.sort_by(|a, b| a.h_min_km.total_cmp(&b.h_min_km));
        for b in &bands {
            if !(b.rho0_kg_m3 >= 0.0) || !(b.scale_height_km > 0.0) || !(b.h_max_km > b.h_min_km) {
                return Err(AstroError::Domain(format!("bad atmosphere band starting at {} km", b.h_min_km)));
            }
        }
        Ok(Atmosphere { bands })
    }

    /// One band covering all altitudes.
    pub fn single_band(rho0_kg_m3: f64, h0_km: f64, scale_height_km: f64) -> Result<Self> {
        Atmosphere::new(vec![AtmosphereBand {
            h_min_km: f64::NEG_INFINITY,
            h_max_km: f64::INFINITY,
            rho0_kg_m3,
            h0_km,
            scale_height_km,
        }])
    }

    /// Parses `h_min_km,h_max_km,rho0_kg_m3,h0_km,H_km` with a header row.
    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut bands = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| AstroError::Parse {
                    location: format!("{origin}:{}", line_no + 1),
                    message: e.to_string(),
                })?;
            if vals.len() != 5 {
                return Err(AstroError::Parse {
                    location: format!("{origin}:{}", line_no + 1),
                    message: format!("expected 5 fields, got {}", vals.len()),
                });
            }
            bands.push(AtmosphereBand {
                h_min_km: vals[0],
                h_max_km: vals[1],
                rho0_kg_m3: vals[2],
                h0_km: vals[3],
                scale_height_km: vals[4],
            });
        }
        Atmosphere::new(bands)
    }

    /// Density in kg/m³. Altitudes outside the table use the nearest band.
    pub fn density(&self, h_km: f64) -> f64 {
        let band = self
            .bands
            .iter()
            .find(|b| h_km < b.h_max_km)
            .unwrap_or(&self.bands[self.bands.len() - 1]);
        band.rho0_kg_m3 * (-(h_km - band.h0_km) / band.scale_height_km).exp()
    }
}
