//! Correlated Gaussian inputs `q₀ = mean + L ξ` from seeded standard normals.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{AstroError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct InitialSamples {
    pub dim: usize,
    /// `N × d` standard normals, row-major.
    pub xi: Vec<f64>,
    /// `N × d` mapped samples, row-major.
    pub values: Vec<f64>,
}

impl InitialSamples {
    pub fn len(&self) -> usize {
        self.xi.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn xi_row(&self, j: usize) -> &[f64] {
        &self.xi[j * self.dim..(j + 1) * self.dim]
    }

    pub fn value_row(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }
}

/// Lower-triangular `L` with `L Lᵀ = cov`.
///
/// Positive semidefinite input is accepted: a pivot at or below
/// `1e-12 · trace` zeroes its column, which is exact for a PSD matrix since
/// the rest of that column must then vanish too. No pivoting is done, so a
/// diagonal covariance maps input `j` to `ξ_j` alone.
pub fn covariance_factor(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = cov.nrows();
    if cov.ncols() != d {
        return Err(AstroError::Domain(format!("covariance must be square, got {}×{}", d, cov.ncols())));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(AstroError::Domain("covariance has non-finite entries".into()));
    }
    let trace = cov.trace();
    let scale = cov.abs().max().max(trace.abs());
    if (cov - cov.transpose()).abs().max() > 1e-12 * scale {
        return Err(AstroError::Domain("covariance is not symmetric".into()));
    }
    let min_eig = SymmetricEigen::new(cov.clone()).eigenvalues.min();
    if min_eig < -1e-12 * trace.abs() {
        return Err(AstroError::Decomposition { eigenvalue: min_eig });
    }
    let floor = 1e-12 * trace.abs();
    let mut l = DMatrix::zeros(d, d);
    for j in 0..d {
        let pivot = cov[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if pivot <= floor {
            continue;
        }
        let diag = pivot.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..d {
            let s = cov[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// Draws `n` samples of `N(mean, cov)` with the standard normals seeded by `seed`.
pub fn sample_initial_states(mean: &[f64], cov: &DMatrix<f64>, n: usize, seed: u64) -> Result<InitialSamples> {
    let d = mean.len();
    if cov.nrows() != d {
        return Err(AstroError::Domain(format!("mean has {d} entries but covariance is {}×{}", cov.nrows(), cov.ncols())));
    }
    let l = covariance_factor(cov)?;
    let xi = sepsr::sampling::standard_normal_rows(seed, n, d);
    let mut values = vec![0.0; n * d];
    for (x, q) in xi.chunks_exact(d.max(1)).zip(values.chunks_exact_mut(d.max(1))) {
        for i in 0..d {
            q[i] = mean[i] + (0..=i).map(|k| l[(i, k)] * x[k]).sum::<f64>();
        }
    }
    Ok(InitialSamples { dim: d, xi, values })
}
