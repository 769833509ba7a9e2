//! Orthonormal probabilists' Hermite basis.
//!
//! Every univariate factor of a separated representation is expanded in
//! `ψ_1, …, ψ_P`, where `ψ_p` is the probabilists' Hermite polynomial of
//! degree `p − 1` scaled so that `E[ψ_p(ξ) ψ_q(ξ)] = δ_pq` for `ξ ~ N(0, 1)`.
//!
//! The analytic moment formulas in [`crate::stats`] rely on exactly this
//! normalization: `ψ_1 ≡ 1`, `E[ψ_p] = 0` for `p > 1`, and unit second
//! moments. A model fitted with any other scaling would give wrong moments.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrError};

/// Number of basis functions `P`; the highest polynomial degree is `P − 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct BasisSpec {
    degree_count: usize,
}

impl BasisSpec {
    pub fn new(degree_count: usize) -> Result<Self> {
        if degree_count == 0 {
            return Err(SrError::Contract(
                "basis degree count P must be at least 1".into(),
            ));
        }
        Ok(Self { degree_count })
    }

    pub fn degree_count(&self) -> usize {
        self.degree_count
    }

    /// Returns `[ψ_1(ξ), …, ψ_P(ξ)]`.
    pub fn eval_basis(&self, xi: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.degree_count];
        self.eval_basis_into(xi, &mut out)?;
        Ok(out)
    }

    /// Writes the basis values into `out`, which must hold exactly `P` entries.
    pub fn eval_basis_into(&self, xi: f64, out: &mut [f64]) -> Result<()> {
        if !xi.is_finite() {
            return Err(SrError::Domain(format!(
                "Hermite basis evaluated at non-finite point {xi}"
            )));
        }
        if out.len() != self.degree_count {
            return Err(SrError::DimensionMismatch {
                context: "eval_basis_into",
                expected: self.degree_count,
                actual: out.len(),
            });
        }
        fill_basis(xi, out);
        Ok(())
    }

    /// Evaluates the factor `Σ_p coeffs[p] ψ_p(ξ)`.
    pub fn eval_factor(&self, coeffs: &[f64], xi: f64) -> Result<f64> {
        if coeffs.len() != self.degree_count {
            return Err(SrError::DimensionMismatch {
                context: "eval_factor",
                expected: self.degree_count,
                actual: coeffs.len(),
            });
        }
        if !xi.is_finite() {
            return Err(SrError::Domain(format!(
                "Hermite factor evaluated at non-finite point {xi}"
            )));
        }
        Ok(factor_value(coeffs, xi))
    }
}

impl TryFrom<usize> for BasisSpec {
    type Error = SrError;

    fn try_from(value: usize) -> Result<Self> {
        BasisSpec::new(value)
    }
}

impl From<BasisSpec> for usize {
    fn from(spec: BasisSpec) -> usize {
        spec.degree_count
    }
}

/// Normalized three-term recurrence:
/// `ψ_{n+1} = (ξ ψ_n − √n ψ_{n−1}) / √(n+1)` with `ψ_0 = 1`, `ψ_1 = ξ`
/// (indices here are polynomial degrees).
#[inline]
pub(crate) fn fill_basis(xi: f64, out: &mut [f64]) {
    let len = out.len();
    if len == 0 {
        return;
    }
    out[0] = 1.0;
    if len == 1 {
        return;
    }
    out[1] = xi;
    for n in 1..len - 1 {
        let nf = n as f64;
        out[n + 1] = (xi * out[n] - nf.sqrt() * out[n - 1]) / (nf + 1.0).sqrt();
    }
}

/// Unchecked factor evaluation by the same recurrence, without allocating.
#[inline]
pub(crate) fn factor_value(coeffs: &[f64], xi: f64) -> f64 {
    let len = coeffs.len();
    if len == 0 {
        return 0.0;
    }
    let mut prev = 1.0;
    let mut acc = coeffs[0];
    if len == 1 {
        return acc;
    }
    let mut cur = xi;
    acc += coeffs[1] * cur;
    for (n, &c) in coeffs.iter().enumerate().skip(2) {
        let deg = (n - 1) as f64;
        let next = (xi * cur - deg.sqrt() * prev) / (deg + 1.0).sqrt();
        acc += c * next;
        prev = cur;
        cur = next;
    }
    acc
}
