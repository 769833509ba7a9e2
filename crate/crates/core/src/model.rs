//! Separated representation of a vector-valued map and its training data.
//!
//! A rank-`r` model approximates `q: ℝᵈ → ℝᴹ` as
//!
//! ```text
//! q̂(ξ) = Σ_l s_l · u0_l · Π_i u_{i,l}(ξ_i),    u_{i,l}(ξ) = Σ_p c_{i,l,p} ψ_p(ξ)
//! ```
//!
//! with scales `s_l`, unit deterministic factors `u0_l ∈ ℝᴹ`, and per-direction
//! coefficient vectors `c_{i,l} ∈ ℝᴾ` in the orthonormal Hermite basis.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SrError};
use crate::hermite::{factor_value, BasisSpec};

pub const MODEL_FORMAT: &str = "sepsr-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SeparatedRepresentation {
    input_dim: usize,
    output_dim: usize,
    basis: BasisSpec,
    scales: Vec<f64>,
    /// `r × M`, row-major.
    det_factors: Vec<f64>,
    /// `r × d × P`, row-major over (term, direction, degree).
    coeffs: Vec<f64>,
}

impl SeparatedRepresentation {
    /// Builds a model from nested per-term arrays: `det_factors[l]` has `M`
    /// entries and `coeffs[l][i]` has `P` entries.
    pub fn new(
        basis: BasisSpec,
        scales: Vec<f64>,
        det_factors: Vec<Vec<f64>>,
        coeffs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let rank = scales.len();
        if rank == 0 {
            return Err(SrError::Contract("separation rank must be at least 1".into()));
        }
        if det_factors.len() != rank || coeffs.len() != rank {
            return Err(SrError::Contract(format!(
                "term count mismatch: {} scales, {} deterministic factors, {} coefficient sets",
                rank,
                det_factors.len(),
                coeffs.len()
            )));
        }
        let output_dim = det_factors[0].len();
        let input_dim = coeffs[0].len();
        let flat_det: Vec<f64> = det_factors.iter().flatten().copied().collect();
        let mut flat_coeffs = Vec::with_capacity(rank * input_dim * basis.degree_count());
        for (l, term) in coeffs.iter().enumerate() {
            if term.len() != input_dim {
                return Err(SrError::Contract(format!(
                    "term {l} has {} directions, expected {input_dim}",
                    term.len()
                )));
            }
            for dir in term {
                flat_coeffs.extend_from_slice(dir);
            }
        }
        Self::from_flat(input_dim, output_dim, basis, scales, flat_det, flat_coeffs)
    }

    /// Builds a model from flat row-major storage.
    pub fn from_flat(
        input_dim: usize,
        output_dim: usize,
        basis: BasisSpec,
        scales: Vec<f64>,
        det_factors: Vec<f64>,
        coeffs: Vec<f64>,
    ) -> Result<Self> {
        let rank = scales.len();
        if rank == 0 || input_dim == 0 || output_dim == 0 {
            return Err(SrError::Contract(format!(
                "model dimensions must be positive (r={rank}, d={input_dim}, M={output_dim})"
            )));
        }
        let p = basis.degree_count();
        if det_factors.len() != rank * output_dim {
            return Err(SrError::DimensionMismatch {
                context: "deterministic factors",
                expected: rank * output_dim,
                actual: det_factors.len(),
            });
        }
        if coeffs.len() != rank * input_dim * p {
            return Err(SrError::DimensionMismatch {
                context: "factor coefficients",
                expected: rank * input_dim * p,
                actual: coeffs.len(),
            });
        }
        if let Some(bad) = scales.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(SrError::Contract(format!(
                "scales must be finite and non-negative, found {bad}"
            )));
        }
        if det_factors.iter().chain(&coeffs).any(|v| !v.is_finite()) {
            return Err(SrError::Contract("model contains non-finite values".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            basis,
            scales,
            det_factors,
            coeffs,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn basis(&self) -> BasisSpec {
        self.basis
    }

    pub fn degree_count(&self) -> usize {
        self.basis.degree_count()
    }

    pub fn rank(&self) -> usize {
        self.scales.len()
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn scale(&self, term: usize) -> f64 {
        self.scales[term]
    }

    pub fn det_factor(&self, term: usize) -> &[f64] {
        let m = self.output_dim;
        &self.det_factors[term * m..(term + 1) * m]
    }

    pub fn coeffs(&self, term: usize, direction: usize) -> &[f64] {
        let p = self.degree_count();
        let start = (term * self.input_dim + direction) * p;
        &self.coeffs[start..start + p]
    }

    /// Value of the univariate factor `u_{direction, term}` at `xi`.
    pub fn factor(&self, term: usize, direction: usize, xi: f64) -> f64 {
        factor_value(self.coeffs(term, direction), xi)
    }

    pub(crate) fn scales_mut(&mut self) -> &mut [f64] {
        &mut self.scales
    }

    pub(crate) fn det_factor_mut(&mut self, term: usize) -> &mut [f64] {
        let m = self.output_dim;
        &mut self.det_factors[term * m..(term + 1) * m]
    }

    pub(crate) fn coeffs_mut(&mut self, term: usize, direction: usize) -> &mut [f64] {
        let p = self.degree_count();
        let start = (term * self.input_dim + direction) * p;
        &mut self.coeffs[start..start + p]
    }

    pub(crate) fn push_term(&mut self, scale: f64, det_factor: &[f64], coeffs: &[f64]) {
        debug_assert_eq!(det_factor.len(), self.output_dim);
        debug_assert_eq!(coeffs.len(), self.input_dim * self.degree_count());
        self.scales.push(scale);
        self.det_factors.extend_from_slice(det_factor);
        self.coeffs.extend_from_slice(coeffs);
    }

    /// Evaluates `q̂(ξ)`.
    pub fn evaluate(&self, xi: &[f64]) -> Result<Vec<f64>> {
        if xi.len() != self.input_dim {
            return Err(SrError::DimensionMismatch {
                context: "evaluate",
                expected: self.input_dim,
                actual: xi.len(),
            });
        }
        if let Some(bad) = xi.iter().find(|v| !v.is_finite()) {
            return Err(SrError::Domain(format!("evaluation point contains {bad}")));
        }
        let mut out = vec![0.0; self.output_dim];
        self.evaluate_into(xi, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a caller-provided buffer of length `M`.
    pub fn evaluate_into(&self, xi: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for l in 0..self.rank() {
            let w = self.scales[l] * self.term_product(l, xi);
            for (o, u) in out.iter_mut().zip(self.det_factor(l)) {
                *o += w * u;
            }
        }
    }

    /// `Π_i u_{i,l}(ξ_i)` for one term.
    pub fn term_product(&self, term: usize, xi: &[f64]) -> f64 {
        (0..self.input_dim)
            .map(|i| self.factor(term, i, xi[i]))
            .product()
    }

    /// Evaluates the model on every row of `inputs` (`n × d`, row-major).
    pub fn evaluate_rows(&self, inputs: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        let m = self.output_dim;
        let n = inputs.len() / d;
        let mut out = vec![0.0; n * m];
        for (row, o) in inputs.chunks_exact(d).zip(out.chunks_exact_mut(m)) {
            self.evaluate_into(row, o);
        }
        out
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            degree_count: self.degree_count(),
            rank: self.rank(),
            scales: self.scales.clone(),
            det_factors: self.det_factors.clone(),
            coeffs: self.coeffs.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| SrError::Parse {
            location: format!("{origin}:{}:{}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if file.format != MODEL_FORMAT {
            return Err(SrError::Parse {
                location: origin.to_string(),
                message: format!("unknown format tag {:?}", file.format),
            });
        }
        if file.version != MODEL_VERSION {
            return Err(SrError::Version {
                found: file.version,
                expected: MODEL_VERSION,
            });
        }
        if file.rank != file.scales.len() {
            return Err(SrError::Parse {
                location: origin.to_string(),
                message: format!(
                    "rank field {} disagrees with {} scales",
                    file.rank,
                    file.scales.len()
                ),
            });
        }
        let basis = BasisSpec::new(file.degree_count).map_err(|e| SrError::Parse {
            location: origin.to_string(),
            message: e.to_string(),
        })?;
        Self::from_flat(
            file.input_dim,
            file.output_dim,
            basis,
            file.scales,
            file.det_factors,
            file.coeffs,
        )
        .map_err(|e| SrError::Parse {
            location: origin.to_string(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format: String,
    version: u32,
    input_dim: usize,
    output_dim: usize,
    degree_count: usize,
    rank: usize,
    scales: Vec<f64>,
    det_factors: Vec<f64>,
    coeffs: Vec<f64>,
}

pub fn save_model(model: &SeparatedRepresentation, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model.to_json()).map_err(|e| SrError::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SeparatedRepresentation> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| SrError::io(path, e))?;
    SeparatedRepresentation::from_json(&text, &path.display().to_string())
}

/// Paired samples `(ξ_j, q(ξ_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    input_dim: usize,
    output_dim: usize,
    /// `N × d`, row-major.
    inputs: Vec<f64>,
    /// `N × M`, row-major.
    outputs: Vec<f64>,
    pub rng_seed: u64,
}

impl TrainingSet {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        inputs: Vec<f64>,
        outputs: Vec<f64>,
        rng_seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(SrError::Contract("training set dimensions must be positive".into()));
        }
        if !inputs.len().is_multiple_of(input_dim) {
            return Err(SrError::Contract(format!(
                "input buffer of length {} is not a multiple of d={input_dim}",
                inputs.len()
            )));
        }
        let n = inputs.len() / input_dim;
        if n == 0 {
            return Err(SrError::Contract("training set needs at least one sample".into()));
        }
        if outputs.len() != n * output_dim {
            return Err(SrError::DimensionMismatch {
                context: "training outputs",
                expected: n * output_dim,
                actual: outputs.len(),
            });
        }
        if inputs.iter().chain(&outputs).any(|v| !v.is_finite()) {
            return Err(SrError::Contract("training set contains non-finite entries".into()));
        }
        Ok(Self {
            input_dim,
            output_dim,
            inputs,
            outputs,
            rng_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.input_dim
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.input_dim..(j + 1) * self.input_dim]
    }

    pub fn output(&self, j: usize) -> &[f64] {
        &self.outputs[j * self.output_dim..(j + 1) * self.output_dim]
    }

    /// Returns a new set with samples reordered by `order`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.len() {
            return Err(SrError::DimensionMismatch {
                context: "permutation",
                expected: self.len(),
                actual: order.len(),
            });
        }
        let mut inputs = Vec::with_capacity(self.inputs.len());
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for &j in order {
            inputs.extend_from_slice(self.input(j));
            outputs.extend_from_slice(self.output(j));
        }
        Self::new(self.input_dim, self.output_dim, inputs, outputs, self.rng_seed)
    }

    /// CSV with a `# rng_seed=` comment, then header `xi_1,…,xi_d,q_1,…,q_M`.
    /// Values use shortest round-trip decimal formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# rng_seed={}", self.rng_seed);
        let header: Vec<String> = (1..=self.input_dim)
            .map(|i| format!("xi_{i}"))
            .chain((1..=self.output_dim).map(|m| format!("q_{m}")))
            .collect();
        s.push_str(&header.join(","));
        s.push('\n');
        for j in 0..self.len() {
            let row: Vec<String> = self
                .input(j)
                .iter()
                .chain(self.output(j))
                .map(|v| format_f64(*v))
                .collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str, origin: &str) -> Result<Self> {
        let mut rng_seed = 0;
        let mut header: Option<(usize, usize)> = None;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| SrError::Parse {
                location: format!("{origin}:{line_no}"),
                message,
            };
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("rng_seed=") {
                    rng_seed = v
                        .trim()
                        .parse()
                        .map_err(|e| parse_err(format!("bad rng_seed: {e}")))?;
                }
                continue;
            }
            match header {
                None => {
                    let mut d = 0;
                    let mut m = 0;
                    for (col, name) in line.split(',').map(str::trim).enumerate() {
                        if let Some(i) = name.strip_prefix("xi_") {
                            if m > 0 || i != (d + 1).to_string() {
                                return Err(parse_err(format!("unexpected column {name:?} at {col}")));
                            }
                            d += 1;
                        } else if let Some(i) = name.strip_prefix("q_") {
                            if i != (m + 1).to_string() {
                                return Err(parse_err(format!("unexpected column {name:?} at {col}")));
                            }
                            m += 1;
                        } else {
                            return Err(parse_err(format!("unknown column {name:?}")));
                        }
                    }
                    if d == 0 || m == 0 {
                        return Err(parse_err("header needs xi_ and q_ columns".into()));
                    }
                    header = Some((d, m));
                }
                Some((d, m)) => {
                    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
                    if fields.len() != d + m {
                        return Err(parse_err(format!(
                            "expected {} fields, found {}",
                            d + m,
                            fields.len()
                        )));
                    }
                    for (col, f) in fields.iter().enumerate() {
                        let v: f64 = f
                            .parse()
                            .map_err(|e| parse_err(format!("column {}: {e}", col + 1)))?;
                        if col < d {
                            inputs.push(v);
                        } else {
                            outputs.push(v);
                        }
                    }
                }
            }
        }
        let (d, m) = header.ok_or_else(|| SrError::Parse {
            location: origin.to_string(),
            message: "missing header row".into(),
        })?;
        Self::new(d, m, inputs, outputs, rng_seed).map_err(|e| SrError::Parse {
            location: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv()).map_err(|e| SrError::io(path, e))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| SrError::io(path, e))?;
        Self::from_csv(&text, &path.display().to_string())
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Data-dependent norm `sqrt((1/N) Σ_j ‖row_j‖²)` of an `N`-row buffer.
pub fn data_norm(values: &[f64], n_rows: usize) -> Result<f64> {
    if n_rows == 0 {
        return Err(SrError::Contract("data norm over zero samples".into()));
    }
    if !values.len().is_multiple_of(n_rows) {
        return Err(SrError::Contract(format!(
            "buffer of length {} does not split into {n_rows} rows",
            values.len()
        )));
    }
    let sum: f64 = values.iter().map(|v| v * v).sum();
    Ok((sum / n_rows as f64).sqrt())
}

/// `γ = ‖q − q̂‖_D / ‖q‖_D` over the training set.
pub fn relative_residual(model: &SeparatedRepresentation, train: &TrainingSet) -> Result<f64> {
    check_dims(model, train)?;
    let n = train.len();
    let denom = data_norm(train.outputs(), n)?;
    if denom == 0.0 {
        return Err(SrError::DivisionByZero(
            "training outputs are identically zero; relative residual undefined".into(),
        ));
    }
    let pred = model.evaluate_rows(train.inputs());
    let resid: Vec<f64> = train
        .outputs()
        .iter()
        .zip(&pred)
        .map(|(q, p)| q - p)
        .collect();
    Ok(data_norm(&resid, n)? / denom)
}

pub(crate) fn check_dims(model: &SeparatedRepresentation, train: &TrainingSet) -> Result<()> {
    if model.input_dim() != train.input_dim() {
        return Err(SrError::DimensionMismatch {
            context: "model/training input dimension",
            expected: model.input_dim(),
            actual: train.input_dim(),
        });
    }
    if model.output_dim() != train.output_dim() {
        return Err(SrError::DimensionMismatch {
            context: "model/training output dimension",
            expected: model.output_dim(),
            actual: train.output_dim(),
        });
    }
    Ok(())
}
