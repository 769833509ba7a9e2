//! Low-degree spherical-harmonic gravity (degree and order ≤ 4).
//!
//! Coefficients are stored fully normalized, as published, and converted to
//! unnormalized form once when a force model is built. The acceleration uses
//! the `V_nm`/`W_nm` recursion of Cunningham as given by Montenbruck & Gill.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{AstroError, Result};

pub const MAX_DEGREE: usize = 4;
/// Reference radius of the published coefficient set (km).
pub const GRAVITY_REFERENCE_RADIUS_KM: f64 = 6378.1363;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StokesEntry {
    pub n: usize,
    pub m: usize,
    pub c: f64,
    pub s: f64,
    pub sigma_c: f64,
    pub sigma_s: f64,
}

/// Normalized Stokes coefficients `C̄_nm`, `S̄_nm` with their standard deviations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StokesTable {
    pub entries: Vec<StokesEntry>,
}

const fn entry(n: usize, m: usize, c: f64, s: f64, sigma_c: f64, sigma_s: f64) -> StokesEntry {
    StokesEntry { n, m, c, s, sigma_c, sigma_s }
}

const LOW_DEGREE: [StokesEntry; 7] = [
    entry(2, 0, -4.8416e-04, 0.0, 6.1e-11, 0.0),
    entry(2, 2, 2.4393e-06, -1.4002e-06, 3.1e-11, 3.1e-11),
    entry(3, 0, 9.5721e-07, 0.0, 1.1e-11, 0.0),
    entry(3, 1, 2.0304e-06, 2.4820e-07, 1.6e-11, 1.6e-11),
    entry(3, 2, 9.0479e-07, -6.1898e-07, 2.2e-11, 2.2e-11),
    entry(3, 3, 7.2127e-07, 1.4143e-06, 2.6e-11, 2.6e-11),
    entry(4, 0, 5.3999e-07, 0.0, 8.2e-12, 0.0),
];

impl Default for StokesTable {
    fn default() -> Self {
        StokesTable {
            entries: LOW_DEGREE.to_vec(),
        }
    }
}

impl StokesTable {
    pub fn new(entries: Vec<StokesEntry>) -> Result<Self> {
        let t = StokesTable { entries };
        t.validate()?;
        Ok(t)
    }

    /// Only `C̄_20`, for zonal J2 studies.
    pub fn j2_only() -> Self {
        StokesTable {
            entries: vec![LOW_DEGREE[0]],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = [[false; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        for e in &self.entries {
            if e.n < 2 || e.n > MAX_DEGREE || e.m > e.n {
                return Err(AstroError::Domain(format!("Stokes index ({}, {}) outside 2 ≤ n ≤ {MAX_DEGREE}, m ≤ n", e.n, e.m)));
            }
            if seen[e.n][e.m] {
                return Err(AstroError::Domain(format!("duplicate Stokes entry ({}, {})", e.n, e.m)));
            }
            seen[e.n][e.m] = true;
            if ![e.c, e.s, e.sigma_c, e.sigma_s].iter().all(|v| v.is_finite()) || e.sigma_c < 0.0 || e.sigma_s < 0.0 {
                return Err(AstroError::Domain(format!("bad values in Stokes entry ({}, {})", e.n, e.m)));
            }
        }
        Ok(())
    }

    pub fn get(&self, n: usize, m: usize) -> Option<&StokesEntry> {
        self.entries.iter().find(|e| e.n == n && e.m == m)
    }

    /// Parses `n,m,C,S,sigma_C,sigma_S` with a header row.
    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| AstroError::Parse {
                location: format!("{origin}:{}", line_no + 1),
                message,
            };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 6 {
                return Err(parse_err(format!("expected 6 fields, got {}", fields.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|e| parse_err(format!("{s:?}: {e}")));
            let real = |s: &str| s.parse::<f64>().map_err(|e| parse_err(format!("{s:?}: {e}")));
            entries.push(StokesEntry {
                n: int(fields[0])?,
                m: int(fields[1])?,
                c: real(fields[2])?,
                s: real(fields[3])?,
                sigma_c: real(fields[4])?,
                sigma_s: real(fields[5])?,
            });
        }
        StokesTable::new(entries)
    }
}

/// `N_nm = √((2 − δ_m0)(2n + 1)(n − m)!/(n + m)!)`, so that `C_nm = N_nm C̄_nm`.
pub fn normalization(n: usize, m: usize) -> f64 {
    let ratio: f64 = ((n - m + 1)..=(n + m)).map(|k| k as f64).product::<f64>().recip();
    let delta = if m == 0 { 1.0 } else { 2.0 };
    (delta * (2 * n + 1) as f64 * ratio).sqrt()
}

/// Unnormalized coefficients up to a degree, in body-fixed canonical units.
#[derive(Debug, Clone)]
pub struct HarmonicField {
    degree: usize,
    /// Reference radius in DU.
    radius: f64,
    c: [[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1],
    s: [[f64; MAX_DEGREE + 1]; MAX_DEGREE + 1],
}

impl HarmonicField {
    pub fn new(table: &StokesTable, degree: usize, radius_du: f64) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(AstroError::Domain(format!("harmonic degree {degree} exceeds {MAX_DEGREE}")));
        }
        table.validate()?;
        let mut c = [[0.0; MAX_DEGREE + 1]; MAX_DEGREE + 1];
        let mut s = c;
        for e in table.entries.iter().filter(|e| e.n <= degree) {
            let f = normalization(e.n, e.m);
            c[e.n][e.m] = f * e.c;
            s[e.n][e.m] = f * e.s;
        }
        Ok(HarmonicField {
            degree,
            radius: radius_du,
            c,
            s,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Perturbing acceleration (degrees 2..=N) at a body-fixed position, for `GM = mu`.
    pub fn acceleration(&self, r: &Vector3<f64>, mu: f64) -> Vector3<f64> {
        if self.degree < 2 {
            return Vector3::zeros();
        }
        const K: usize = MAX_DEGREE + 2;
        let nmax = self.degree + 1;
        let mut v = [[0.0; K]; K];
        let mut w = [[0.0; K]; K];
        let rr = r.norm_squared();
        let re = self.radius;
        let (x0, y0, z0) = (re * r.x / rr, re * r.y / rr, re * r.z / rr);
        let rho = re * re / rr;

        v[0][0] = re / rr.sqrt();
        for m in 0..=nmax {
            if m > 0 {
                let f = (2 * m - 1) as f64;
                v[m][m] = f * (x0 * v[m - 1][m - 1] - y0 * w[m - 1][m - 1]);
                w[m][m] = f * (x0 * w[m - 1][m - 1] + y0 * v[m - 1][m - 1]);
            }
            if m < nmax {
                let f = (2 * m + 1) as f64;
                v[m + 1][m] = f * z0 * v[m][m];
                w[m + 1][m] = f * z0 * w[m][m];
            }
            for n in (m + 2)..=nmax {
                let a = (2 * n - 1) as f64 / (n - m) as f64;
                let b = (n + m - 1) as f64 / (n - m) as f64;
                v[n][m] = a * z0 * v[n - 1][m] - b * rho * v[n - 2][m];
                w[n][m] = a * z0 * w[n - 1][m] - b * rho * w[n - 2][m];
            }
        }

        let mut acc = Vector3::zeros();
        for n in 2..=self.degree {
            for m in 0..=n {
                let (c, s) = (self.c[n][m], self.s[n][m]);
                if c == 0.0 && s == 0.0 {
                    continue;
                }
                if m == 0 {
                    acc.x -= c * v[n + 1][1];
                    acc.y -= c * w[n + 1][1];
                } else {
                    let f = ((n - m + 1) * (n - m + 2)) as f64;
                    acc.x += 0.5 * (-c * v[n + 1][m + 1] - s * w[n + 1][m + 1])
                        + 0.5 * f * (c * v[n + 1][m - 1] + s * w[n + 1][m - 1]);
                    acc.y += 0.5 * (-c * w[n + 1][m + 1] + s * v[n + 1][m + 1])
                        + 0.5 * f * (-c * w[n + 1][m - 1] + s * v[n + 1][m - 1]);
                }
                acc.z += (n - m + 1) as f64 * (-c * v[n + 1][m] - s * w[n + 1][m]);
            }
        }
        acc * (mu / (re * re))
    }
}
