//! Alternating least squares with greedy rank adaptation.
//!
//! One full sweep solves a linear least-squares problem for the coefficients
//! of every input direction in turn (all terms at once), then one for the
//! deterministic factors, renormalizing after each solve. Sweeps at a fixed
//! rank stop once the relative residual `γ` improves by less than `δ` over two
//! sweeps; the rank is then increased by appending a freshly initialized term
//! until `γ ≤ ε` or the rank cap is reached.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrError};
use crate::hermite::{fill_basis, BasisSpec};
use crate::model::{check_dims, data_norm, SeparatedRepresentation, TrainingSet};

/// Condition estimates above this are recorded as warnings.
pub const CONDITION_WARNING: f64 = 1e12;
/// With no regularization, systems whose triangular factor has a condition
/// estimate above this are treated as singular.
pub const CONDITION_SINGULAR: f64 = 1e14;
/// Initial scale of an appended term, relative to `‖q‖_D`.
pub const INIT_SCALE_FRACTION: f64 = 1e-3;
/// Default standard deviation of the random perturbation of the constant
/// factor used to initialize a term.
pub const DEFAULT_INIT_SPREAD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlsConfig {
    /// Target relative residual `ε`.
    pub epsilon: f64,
    /// Stall tolerance `δ` on the two-sweep improvement of `γ`.
    pub delta: f64,
    pub max_rank: usize,
    pub max_sweeps_per_rank: usize,
    /// Tikhonov parameter added to the normal matrix; 0 disables it.
    pub ridge_lambda: f64,
    pub init_seed: u64,
    /// Basis size `P`.
    pub degree_count: usize,
    /// Spread of the random perturbation in new-term initialization.
    pub init_spread: f64,
    /// Try an extrapolated iterate after every sweep; it is kept only if it
    /// lowers `γ`.
    pub extrapolate: bool,
    /// Number of seeded candidates tried for every new term; each is swept
    /// `candidate_sweeps` times and the one with the lowest `γ` is kept.
    pub term_candidates: usize,
    /// Additional candidates at every rank increase that reinitialize all
    /// terms instead of keeping the current ones.
    pub restart_candidates: usize,
    pub candidate_sweeps: usize,
}

impl Default for AlsConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            delta: 1e-7,
            max_rank: 5,
            max_sweeps_per_rank: 200,
            ridge_lambda: 0.0,
            init_seed: 0,
            degree_count: 4,
            init_spread: DEFAULT_INIT_SPREAD,
            extrapolate: true,
            term_candidates: 4,
            restart_candidates: 2,
            candidate_sweeps: 20,
        }
    }
}

impl AlsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !(self.delta > 0.0) {
            return Err(SrError::Contract(format!(
                "epsilon and delta must be positive (got {}, {})",
                self.epsilon, self.delta
            )));
        }
        if self.max_rank == 0 || self.max_sweeps_per_rank == 0 || self.term_candidates == 0 {
            return Err(SrError::Contract(
                "max_rank, max_sweeps_per_rank and term_candidates must be at least 1".into(),
            ));
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(SrError::Contract(format!(
                "ridge_lambda must be finite and non-negative, got {}",
                self.ridge_lambda
            )));
        }
        BasisSpec::new(self.degree_count)?;
        check_spread(self.init_spread)
    }
}

fn check_spread(spread: f64) -> Result<()> {
    if spread >= 0.0 && spread.is_finite() {
        Ok(())
    } else {
        Err(SrError::Contract(format!(
            "init_spread must be finite and non-negative, got {spread}"
        )))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    EpsilonMet,
    MaxRankStalled,
    MaxSweeps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionWarning {
    pub rank: usize,
    /// Input direction (0-based); `None` for the deterministic-factor solve.
    pub direction: Option<usize>,
    pub condition: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub final_rank: usize,
    /// `gamma_history[r - 1]` holds γ after initialization at rank `r`
    /// followed by γ after each full sweep at that rank.
    pub gamma_history: Vec<Vec<f64>>,
    pub final_gamma: f64,
    pub converged: bool,
    pub termination_reason: TerminationReason,
    pub condition_warnings: Vec<ConditionWarning>,
    pub sample_warnings: Vec<String>,
}

/// Result of one linear solve inside a sweep.
#[derive(Debug, Clone)]
pub struct SolveInfo {
    /// Solution before renormalization: the stacked `c_k^l` for a direction
    /// solve, or the rows `u0^l` of `Z` for the deterministic solve.
    pub raw: Vec<f64>,
    pub condition: f64,
}

/// Working state of the solver: the model plus cached basis and factor
/// values at the training inputs.
#[derive(Debug, Clone)]
pub struct AlsState<'a> {
    train: &'a TrainingSet,
    model: SeparatedRepresentation,
    /// `N × d × P`: `ψ_p(ξ_{i,j})`.
    basis_values: Vec<f64>,
    /// `r × d × N`: `u_i^l(ξ_{i,j})`.
    factor_values: Vec<f64>,
    /// `d × P × P`: empirical Gram matrix of the basis in each direction.
    grams: Vec<f64>,
    output_norm: f64,
    ridge_lambda: f64,
    init_spread: f64,
    /// Extrapolation step length is `sweep^(1/root)`; `root` grows on every
    /// rejected step and resets when a term is added.
    extrapolation_root: f64,
    warnings: Vec<ConditionWarning>,
}

impl<'a> AlsState<'a> {
    /// Starts from a single freshly initialized term.
    pub fn new(
        train: &'a TrainingSet,
        degree_count: usize,
        seed: u64,
        ridge_lambda: f64,
        init_spread: f64,
    ) -> Result<Self> {
        let basis = BasisSpec::new(degree_count)?;
        check_spread(init_spread)?;
        let basis_values = tabulate_basis(train, basis);
        let output_norm = data_norm(train.outputs(), train.len())?;
        let (scale, det, coeffs) = new_term(train, basis, &basis_values, output_norm, init_spread, seed);
        let model = SeparatedRepresentation::from_flat(
            train.input_dim(),
            train.output_dim(),
            basis,
            vec![scale],
            det,
            coeffs,
        )?;
        let mut state = Self::with_cache(train, model, basis_values, output_norm, ridge_lambda)?;
        state.init_spread = init_spread;
        Ok(state)
    }

    /// Wraps an existing model; its dimensions must match the training set.
    pub fn from_model(train: &'a TrainingSet, model: SeparatedRepresentation, ridge_lambda: f64) -> Result<Self> {
        check_dims(&model, train)?;
        let basis_values = tabulate_basis(train, model.basis());
        let output_norm = data_norm(train.outputs(), train.len())?;
        Self::with_cache(train, model, basis_values, output_norm, ridge_lambda)
    }

    fn with_cache(
        train: &'a TrainingSet,
        model: SeparatedRepresentation,
        basis_values: Vec<f64>,
        output_norm: f64,
        ridge_lambda: f64,
    ) -> Result<Self> {
        if !(ridge_lambda >= 0.0) {
            return Err(SrError::Contract(format!("ridge_lambda must be non-negative, got {ridge_lambda}")));
        }
        let grams = basis_grams(train, model.degree_count(), &basis_values);
        let mut state = Self {
            train,
            model,
            basis_values,
            factor_values: Vec::new(),
            grams,
            output_norm,
            ridge_lambda,
            init_spread: DEFAULT_INIT_SPREAD,
            extrapolation_root: 3.0,
            warnings: Vec::new(),
        };
        state.refresh_factor_values();
        Ok(state)
    }

    pub fn model(&self) -> &SeparatedRepresentation {
        &self.model
    }

    pub fn into_model(self) -> SeparatedRepresentation {
        self.model
    }

    pub fn rank(&self) -> usize {
        self.model.rank()
    }

    pub fn condition_warnings(&self) -> &[ConditionWarning] {
        &self.warnings
    }

    fn n(&self) -> usize {
        self.train.len()
    }

    fn refresh_factor_values(&mut self) {
        let (n, d, r) = (self.n(), self.model.input_dim(), self.model.rank());
        let mut values = vec![0.0; r * d * n];
        for l in 0..r {
            for i in 0..d {
                let row = &mut values[(l * d + i) * n..(l * d + i + 1) * n];
                let c = self.model.coeffs(l, i);
                for (j, v) in row.iter_mut().enumerate() {
                    *v = dot(c, self.basis_row(j, i));
                }
            }
        }
        self.factor_values = values;
    }

    #[inline]
    fn basis_row(&self, j: usize, i: usize) -> &[f64] {
        let (d, p) = (self.model.input_dim(), self.model.degree_count());
        let start = (j * d + i) * p;
        &self.basis_values[start..start + p]
    }

    #[inline]
    fn factor_row(&self, l: usize, i: usize) -> &[f64] {
        let (n, d) = (self.n(), self.model.input_dim());
        &self.factor_values[(l * d + i) * n..(l * d + i + 1) * n]
    }

    /// `Π_{i ≠ skip} u_i^l(ξ_{i,j})` for every sample `j`.
    fn partial_products(&self, l: usize, skip: Option<usize>) -> Vec<f64> {
        let mut prod = vec![1.0; self.n()];
        for i in (0..self.model.input_dim()).filter(|&i| Some(i) != skip) {
            for (p, u) in prod.iter_mut().zip(self.factor_row(l, i)) {
                *p *= u;
            }
        }
        prod
    }

    /// Current relative residual on the training set.
    pub fn gamma(&self) -> f64 {
        let (n, m, r) = (self.n(), self.model.output_dim(), self.model.rank());
        let mut pred = vec![0.0; n * m];
        for l in 0..r {
            let s = self.model.scale(l);
            let u0 = self.model.det_factor(l);
            let prod = self.partial_products(l, None);
            for (j, w) in prod.iter().enumerate() {
                let w = s * w;
                for (o, u) in pred[j * m..(j + 1) * m].iter_mut().zip(u0) {
                    *o += w * u;
                }
            }
        }
        let sq: f64 = self
            .train
            .outputs()
            .iter()
            .zip(&pred)
            .map(|(q, p)| (q - p) * (q - p))
            .sum();
        (sq / n as f64).sqrt() / self.output_norm
    }

    /// Solves for `{c_k^l}` (all terms, direction `k`, 0-based) with the other
    /// directions and the deterministic factors fixed, then renormalizes each
    /// updated factor to unit `‖·‖_D`, folding the norm into `s_l`.
    pub fn sweep_direction(&mut self, k: usize) -> Result<SolveInfo> {
        let (n, d, m, r, p) = (
            self.n(),
            self.model.input_dim(),
            self.model.output_dim(),
            self.model.rank(),
            self.model.degree_count(),
        );
        if k >= d {
            return Err(SrError::Contract(format!("direction {k} out of range for d={d}")));
        }
        // A is (N·M) × (r·P); row j·M+m, column l·P+p.
        let mut a = DMatrix::<f64>::zeros(n * m, r * p);
        let mut col_scale = vec![0.0; r];
        for l in 0..r {
            // A term with zero scale carries no information about its own
            // column block; solving with s = 1 spans the same columns.
            let s = effective_scale(self.model.scale(l));
            col_scale[l] = s;
            let u0 = self.model.det_factor(l);
            let prod = self.partial_products(l, Some(k));
            for j in 0..n {
                let w = s * prod[j];
                let psi = self.basis_row(j, k);
                for (mm, &u) in u0.iter().enumerate() {
                    let wu = w * u;
                    for (pp, &b) in psi.iter().enumerate() {
                        a[(j * m + mm, l * p + pp)] = wu * b;
                    }
                }
            }
        }
        let h = DMatrix::from_row_slice(n * m, 1, self.train.outputs());
        let (z, condition) = solve_least_squares(a, h, self.ridge_lambda, &format!("direction {k}"))?;
        self.note_condition(Some(k), condition);
        let raw: Vec<f64> = z.column(0).iter().copied().collect();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(SrError::NonFinite {
                stage: "direction solve",
                rank: r,
                sweep: 0,
                direction: Some(k),
            });
        }

        for l in 0..r {
            let c = &raw[l * p..(l + 1) * p];
            let mut values: Vec<f64> = (0..n).map(|j| dot(c, self.basis_row(j, k))).collect();
            let norm = data_norm(&values, n)?;
            let coeffs = self.model.coeffs_mut(l, k);
            if norm > 0.0 && norm.is_finite() {
                for (dst, src) in coeffs.iter_mut().zip(c) {
                    *dst = src / norm;
                }
                values.iter_mut().for_each(|v| *v /= norm);
                self.model.scales_mut()[l] = col_scale[l] * norm;
            } else {
                reset_degenerate(coeffs);
                values.iter_mut().for_each(|v| *v = 1.0);
                self.model.scales_mut()[l] = 0.0;
            }
            let start = (l * d + k) * n;
            self.factor_values[start..start + n].copy_from_slice(&values);
        }
        Ok(SolveInfo { raw, condition })
    }

    /// Solves for the deterministic factors `{u0^l}` with every `c_i^l` fixed,
    /// then normalizes each to unit Euclidean length, folding it into `s_l`.
    pub fn solve_det_factors(&mut self) -> Result<SolveInfo> {
        let (n, m, r) = (self.n(), self.model.output_dim(), self.model.rank());
        let mut a = DMatrix::<f64>::zeros(n, r);
        let mut col_scale = vec![0.0; r];
        for l in 0..r {
            let s = effective_scale(self.model.scale(l));
            col_scale[l] = s;
            for (j, w) in self.partial_products(l, None).into_iter().enumerate() {
                a[(j, l)] = s * w;
            }
        }
        let h = DMatrix::from_row_slice(n, m, self.train.outputs());
        let (z, condition) = solve_least_squares(a, h, self.ridge_lambda, "deterministic factors")?;
        self.note_condition(None, condition);
        let mut raw = Vec::with_capacity(r * m);
        for l in 0..r {
            raw.extend(z.row(l).iter().copied());
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(SrError::NonFinite {
                stage: "deterministic solve",
                rank: r,
                sweep: 0,
                direction: None,
            });
        }
        for l in 0..r {
            let row = &raw[l * m..(l + 1) * m];
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (dst, src) in self.model.det_factor_mut(l).iter_mut().zip(row) {
                    *dst = src / norm;
                }
                self.model.scales_mut()[l] = col_scale[l] * norm;
            } else {
                self.model.scales_mut()[l] = 0.0;
            }
        }
        Ok(SolveInfo { raw, condition })
    }

    /// One full sweep: every direction, then the deterministic factors.
    pub fn full_sweep(&mut self) -> Result<()> {
        for k in 0..self.model.input_dim() {
            self.sweep_direction(k)?;
        }
        self.solve_det_factors()?;
        Ok(())
    }

    /// Appends one freshly initialized term; existing terms are untouched.
    pub fn add_term(&mut self, seed: u64) {
        let (scale, det, coeffs) = new_term(
            self.train,
            self.model.basis(),
            &self.basis_values,
            self.output_norm,
            self.init_spread,
            seed,
        );
        self.model.push_term(scale, &det, &coeffs);
        self.extrapolation_root = 3.0;
        let (n, d) = (self.n(), self.model.input_dim());
        let p = self.model.degree_count();
        for i in 0..d {
            let c = &coeffs[i * p..(i + 1) * p];
            let row: Vec<f64> = (0..n).map(|j| dot(c, self.basis_row(j, i))).collect();
            self.factor_values.extend(row);
        }
    }

    /// Snapshot of the current iterate for [`AlsState::try_extrapolate`].
    pub fn iterate(&self) -> Iterate {
        let m = &self.model;
        let mut weighted_det = Vec::with_capacity(m.rank() * m.output_dim());
        for l in 0..m.rank() {
            weighted_det.extend(m.det_factor(l).iter().map(|u| m.scale(l) * u));
        }
        Iterate {
            coeffs: (0..m.rank())
                .flat_map(|l| (0..m.input_dim()).flat_map(move |i| m.coeffs(l, i).iter().copied()))
                .collect(),
            weighted_det,
        }
    }

    /// Moves to `x + α(x − prev)`, where `x` is the current iterate, if that
    /// lowers `γ`; otherwise leaves the state untouched. Returns whether the
    /// step was taken.
    pub fn try_extrapolate(&mut self, prev: &Iterate, alpha: f64) -> bool {
        let (d, m, p, r) = (
            self.model.input_dim(),
            self.model.output_dim(),
            self.model.degree_count(),
            self.model.rank(),
        );
        if prev.weighted_det.len() != r * m {
            return false;
        }
        let gamma = self.gamma();
        let current = self.iterate();
        let mut candidate = self.model.clone();
        for l in 0..r {
            let mut sign = 1.0;
            let mut norm_product = 1.0;
            for i in 0..d {
                let at = (l * d + i) * p;
                let now = &current.coeffs[at..at + p];
                let before = &prev.coeffs[at..at + p];
                // Factors are only defined up to sign; align before stepping.
                let flip = if dot(now, before) < 0.0 { -1.0 } else { 1.0 };
                sign *= flip;
                let mut c: Vec<f64> = now
                    .iter()
                    .zip(before)
                    .map(|(x, y)| x + alpha * (x - flip * y))
                    .collect();
                let norm = self.gram_norm(i, &c);
                if !(norm > 0.0) || !norm.is_finite() {
                    return false;
                }
                c.iter_mut().for_each(|v| *v /= norm);
                norm_product *= norm;
                candidate.coeffs_mut(l, i).copy_from_slice(&c);
            }
            let w: Vec<f64> = current.weighted_det[l * m..(l + 1) * m]
                .iter()
                .zip(&prev.weighted_det[l * m..(l + 1) * m])
                .map(|(x, y)| x + alpha * (x - sign * y))
                .collect();
            let w_norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(w_norm > 0.0) || !w_norm.is_finite() {
                return false;
            }
            for (dst, v) in candidate.det_factor_mut(l).iter_mut().zip(&w) {
                *dst = v / w_norm;
            }
            candidate.scales_mut()[l] = w_norm * norm_product;
        }
        let saved_model = std::mem::replace(&mut self.model, candidate);
        let saved_values = std::mem::take(&mut self.factor_values);
        self.refresh_factor_values();
        if self.gamma() < gamma {
            true
        } else {
            self.model = saved_model;
            self.factor_values = saved_values;
            false
        }
    }

    fn gram_norm(&self, direction: usize, c: &[f64]) -> f64 {
        let p = c.len();
        let g = &self.grams[direction * p * p..(direction + 1) * p * p];
        let mut acc = 0.0;
        for a in 0..p {
            acc += c[a] * dot(&g[a * p..(a + 1) * p], c);
        }
        acc.max(0.0).sqrt()
    }

    fn note_condition(&mut self, direction: Option<usize>, condition: f64) {
        if condition > CONDITION_WARNING {
            self.warnings.push(ConditionWarning {
                rank: self.model.rank(),
                direction,
                condition,
            });
        }
    }
}

/// Unnormalized iterate: every `c_i^l` (term-major) and every `s^l u0^l`.
#[derive(Debug, Clone)]
pub struct Iterate {
    coeffs: Vec<f64>,
    weighted_det: Vec<f64>,
}

fn basis_grams(train: &TrainingSet, p: usize, basis_values: &[f64]) -> Vec<f64> {
    let (n, d) = (train.len(), train.input_dim());
    let mut grams = vec![0.0; d * p * p];
    for j in 0..n {
        for i in 0..d {
            let psi = &basis_values[(j * d + i) * p..(j * d + i + 1) * p];
            let g = &mut grams[i * p * p..(i + 1) * p * p];
            for a in 0..p {
                for b in 0..p {
                    g[a * p + b] += psi[a] * psi[b];
                }
            }
        }
    }
    grams.iter_mut().for_each(|v| *v /= n as f64);
    grams
}

#[inline]
fn effective_scale(s: f64) -> f64 {
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn reset_degenerate(coeffs: &mut [f64]) {
    coeffs.iter_mut().for_each(|c| *c = 0.0);
    coeffs[0] = 1.0;
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tabulate_basis(train: &TrainingSet, basis: BasisSpec) -> Vec<f64> {
    let p = basis.degree_count();
    let mut out = vec![0.0; train.inputs().len() * p];
    for (xi, dst) in train.inputs().iter().zip(out.chunks_exact_mut(p)) {
        fill_basis(*xi, dst);
    }
    out
}

/// Seeded term: coefficients `e_1 + spread·z` with `z` standard normal, each
/// factor scaled to unit `‖·‖_D` on the training inputs; standard-normal deterministic factor scaled
/// to unit length; scale `INIT_SCALE_FRACTION · ‖q‖_D`.
fn new_term(
    train: &TrainingSet,
    basis: BasisSpec,
    basis_values: &[f64],
    output_norm: f64,
    spread: f64,
    seed: u64,
) -> (f64, Vec<f64>, Vec<f64>) {
    let (n, d, m, p) = (train.len(), train.input_dim(), train.output_dim(), basis.degree_count());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs: Vec<f64> = (0..d * p)
        .map(|k| {
            let z: f64 = StandardNormal.sample(&mut rng);
            if k % p == 0 {
                1.0 + spread * z
            } else {
                spread * z
            }
        })
        .collect();
    for i in 0..d {
        let c = &mut coeffs[i * p..(i + 1) * p];
        let sq: f64 = (0..n)
            .map(|j| {
                let start = (j * d + i) * p;
                let v = dot(c, &basis_values[start..start + p]);
                v * v
            })
            .sum();
        let norm = (sq / n as f64).sqrt();
        if norm > 0.0 && norm.is_finite() {
            c.iter_mut().for_each(|v| *v /= norm);
        } else {
            reset_degenerate(c);
        }
    }
    let mut det: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = det.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        det.iter_mut().for_each(|v| *v /= norm);
    } else {
        det[0] = 1.0;
    }
    (INIT_SCALE_FRACTION * output_norm, det, coeffs)
}

/// Least-squares solve of `A X ≈ B`.
///
/// Without regularization this uses a Householder QR of `A`; the condition
/// estimate is the ratio of extreme diagonal magnitudes of `R`. With
/// `ridge > 0` it solves `(AᵀA + ridge·I) X = AᵀB` by Cholesky.
pub fn solve_least_squares(
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    ridge: f64,
    context: &str,
) -> Result<(DMatrix<f64>, f64)> {
    let cols = a.ncols();
    if ridge > 0.0 {
        let mut normal = a.tr_mul(&a);
        for i in 0..cols {
            normal[(i, i)] += ridge;
        }
        let rhs = a.tr_mul(&b);
        let chol = normal.cholesky().ok_or_else(|| SrError::RankDeficient {
            context: context.to_string(),
            condition: f64::INFINITY,
        })?;
        let diag = chol.l_dirty().diagonal();
        let (lo, hi) = extreme_abs(diag.iter().copied());
        let condition = if lo > 0.0 { (hi / lo).powi(2) } else { f64::INFINITY };
        return Ok((chol.solve(&rhs), condition));
    }
    if a.nrows() < cols {
        return Err(SrError::RankDeficient {
            context: format!("{context}: {} equations for {cols} unknowns", a.nrows()),
            condition: f64::INFINITY,
        });
    }
    let qr = a.qr();
    let mut qtb = b;
    qr.q_tr_mul(&mut qtb);
    let r = qr.r();
    let (lo, hi) = extreme_abs(r.diagonal().iter().copied());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition <= CONDITION_SINGULAR) {
        return Err(SrError::RankDeficient {
            context: context.to_string(),
            condition,
        });
    }
    let top = qtb.rows(0, cols).into_owned();
    let x = r.solve_upper_triangular(&top).ok_or_else(|| SrError::RankDeficient {
        context: context.to_string(),
        condition,
    })?;
    Ok((x, condition))
}

fn extreme_abs(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, 0.0_f64), |(lo, hi), v| (lo.min(v.abs()), hi.max(v.abs())))
}

/// Seed for the term appended at `rank` (1-based).
pub fn term_seed(init_seed: u64, rank: usize) -> u64 {
    init_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(rank as u64)
        .rotate_left(17)
}

/// Fits a separated representation to `train`.
pub fn fit(train: &TrainingSet, config: &AlsConfig) -> Result<(SeparatedRepresentation, FitReport)> {
    config.validate()?;
    let (n, d, m) = (train.len(), train.input_dim(), train.output_dim());
    let p = config.degree_count;
    let mut sample_warnings = Vec::new();
    let mut check_samples = |r: usize| {
        let recommended = r * p * d + r * m;
        if n < recommended {
            sample_warnings.push(format!(
                "rank {r}: {n} samples is below the recommended r·P·d + r·M = {recommended}"
            ));
        }
    };
    if n * m < 1 {
        return Err(SrError::Fit("no equations for the deterministic factors".into()));
    }
    check_samples(1);

    let base = AlsState::new(train, p, term_seed(config.init_seed, 1), config.ridge_lambda, config.init_spread)?;
    let (mut state, mut history, mut stalled) = best_candidate(base, config, 1, true)?;
    let mut gamma_history: Vec<Vec<f64>> = Vec::new();
    let reason;
    loop {
        let rank = state.rank();
        let remaining = config.max_sweeps_per_rank.saturating_sub(history.len() - 1);
        if remaining > 0 && !stalled && *history.last().unwrap() > config.epsilon {
            stalled = run_sweeps(&mut state, config, remaining, &mut history)?;
        }
        let gamma = *history.last().expect("history is never empty");
        gamma_history.push(std::mem::take(&mut history));
        if gamma <= config.epsilon {
            reason = TerminationReason::EpsilonMet;
            break;
        }
        if rank >= config.max_rank {
            reason = if stalled {
                TerminationReason::MaxRankStalled
            } else {
                TerminationReason::MaxSweeps
            };
            break;
        }
        if n * m < rank + 1 {
            return Err(SrError::Fit(format!(
                "{n} samples × {m} outputs cannot determine {} deterministic factors",
                rank + 1
            )));
        }
        check_samples(rank + 1);
        (state, history, stalled) = best_candidate(state, config, rank + 1, false)?;
    }

    let final_gamma = *gamma_history.last().and_then(|h| h.last()).unwrap();
    let report = FitReport {
        final_rank: state.rank(),
        gamma_history,
        final_gamma,
        converged: reason == TerminationReason::EpsilonMet,
        termination_reason: reason,
        condition_warnings: state.condition_warnings().to_vec(),
        sample_warnings,
    };
    Ok((state.into_model(), report))
}

/// Seed of candidate `index` for the term appended at `rank`.
fn candidate_seed(init_seed: u64, rank: usize, index: usize) -> u64 {
    if index == 0 {
        term_seed(init_seed, rank)
    } else {
        term_seed(init_seed ^ (index as u64).wrapping_mul(0xD1B5_4A32_D192_ED03), rank)
    }
}

/// Brings the fit to `rank` terms. Candidates are `base` plus one seeded term
/// (`config.term_candidates` of them) and, past rank 1, fresh models of
/// `rank` seeded terms (`config.restart_candidates`). With a single candidate
/// no sweeps are run; otherwise each gets a burst of sweeps and the lowest `γ`
/// wins. `base` already holds its first term when `first` is set.
fn best_candidate<'a>(
    base: AlsState<'a>,
    config: &AlsConfig,
    rank: usize,
    first: bool,
) -> Result<(AlsState<'a>, Vec<f64>, bool)> {
    let train = base.train;
    let fresh = |index: usize, terms: usize| -> Result<AlsState<'a>> {
        let seed = |r: usize| candidate_seed(config.init_seed, r, index);
        let mut state = AlsState::new(train, config.degree_count, seed(1), config.ridge_lambda, config.init_spread)?;
        for r in 2..=terms {
            state.add_term(seed(r));
        }
        Ok(state)
    };
    let make = |index: usize| -> Result<AlsState<'a>> {
        if index >= config.term_candidates {
            return fresh(index, rank);
        }
        if first {
            return if index == 0 { Ok(base.clone()) } else { fresh(index, 1) };
        }
        let mut state = base.clone();
        state.add_term(candidate_seed(config.init_seed, rank, index));
        Ok(state)
    };
    let total = config.term_candidates + if first { 0 } else { config.restart_candidates };
    if total == 1 {
        let state = make(0)?;
        let history = vec![state.gamma()];
        return Ok((state, history, false));
    }
    let burst = config.candidate_sweeps.min(config.max_sweeps_per_rank);
    let mut best: Option<(AlsState<'a>, Vec<f64>, bool)> = None;
    for index in 0..total {
        let mut state = make(index)?;
        let mut history = vec![state.gamma()];
        let stalled = run_sweeps(&mut state, config, burst, &mut history)?;
        let gamma = *history.last().unwrap();
        if best.as_ref().is_none_or(|(_, h, _)| gamma < *h.last().unwrap()) {
            best = Some((state, history, stalled));
        }
        if gamma <= config.epsilon {
            break;
        }
    }
    Ok(best.expect("at least one candidate"))
}

/// Runs up to `max_sweeps` full sweeps, appending `γ` after each to
/// `history`, which must hold every earlier value at this rank. Stops when
/// `γ ≤ ε` or on the stall rule; returns whether the stall rule fired.
fn run_sweeps(state: &mut AlsState<'_>, config: &AlsConfig, max_sweeps: usize, history: &mut Vec<f64>) -> Result<bool> {
    let d = state.model().input_dim();
    let rank = state.rank();
    for _ in 0..max_sweeps {
        let sweep = history.len();
        let before = (config.extrapolate && sweep > 1).then(|| state.iterate());
        for k in 0..d {
            state.sweep_direction(k).map_err(|e| with_sweep(e, rank, sweep))?;
        }
        state.solve_det_factors().map_err(|e| with_sweep(e, rank, sweep))?;
        if let Some(before) = before {
            if !state.try_extrapolate(&before, (sweep as f64).powf(1.0 / state.extrapolation_root)) {
                state.extrapolation_root += 1.0;
            }
        }
        let gamma = state.gamma();
        if !gamma.is_finite() {
            return Err(SrError::NonFinite {
                stage: "relative residual",
                rank,
                sweep,
                direction: None,
            });
        }
        history.push(gamma);
        if gamma <= config.epsilon {
            return Ok(false);
        }
        let t = history.len() - 1;
        if t >= 2 && history[t - 2] - history[t] < config.delta {
            return Ok(true);
        }
    }
    Ok(false)
}

fn with_sweep(err: SrError, rank: usize, sweep: usize) -> SrError {
    match err {
        SrError::NonFinite { stage, direction, .. } => SrError::NonFinite {
            stage,
            rank,
            sweep,
            direction,
        },
        SrError::RankDeficient { context, condition } => SrError::RankDeficient {
            context: format!("{context} (rank {rank}, sweep {sweep})"),
            condition,
        },
        other => other,
    }
}

/// Single direction update on a standalone model (0-based `k`).
pub fn sweep_direction(
    model: &SeparatedRepresentation,
    train: &TrainingSet,
    k: usize,
    ridge_lambda: f64,
) -> Result<(SeparatedRepresentation, SolveInfo)> {
    let mut state = AlsState::from_model(train, model.clone(), ridge_lambda)?;
    let info = state.sweep_direction(k)?;
    Ok((state.into_model(), info))
}

/// Deterministic-factor update on a standalone model.
pub fn solve_det_factors(
    model: &SeparatedRepresentation,
    train: &TrainingSet,
    ridge_lambda: f64,
) -> Result<(SeparatedRepresentation, SolveInfo)> {
    let mut state = AlsState::from_model(train, model.clone(), ridge_lambda)?;
    let info = state.solve_det_factors()?;
    Ok((state.into_model(), info))
}

/// Returns a copy of `model` with one seeded term appended.
pub fn init_rank_term(
    model: &SeparatedRepresentation,
    train: &TrainingSet,
    seed: u64,
) -> Result<SeparatedRepresentation> {
    let mut state = AlsState::from_model(train, model.clone(), 0.0)?;
    state.add_term(seed);
    Ok(state.into_model())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn gaussian_inputs(n: usize, d: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n * d).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn config_validation() {
        assert!(AlsConfig::default().validate().is_ok());
        let bad = AlsConfig {
            epsilon: 0.0,
            ..AlsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AlsConfig {
            ridge_lambda: -1.0,
            ..AlsConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = AlsConfig {
            max_rank: 0,
            ..AlsConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_data_is_rank_one() {
        let n = 40;
        let inputs = gaussian_inputs(n, 3, 1);
        let outputs: Vec<f64> = (0..n).flat_map(|_| [5.0, -2.0]).collect();
        let train = TrainingSet::new(3, 2, inputs, outputs, 1).unwrap();
        let cfg = AlsConfig {
            epsilon: 1e-12,
            delta: 1e-15,
            max_rank: 3,
            max_sweeps_per_rank: 500,
            degree_count: 3,
            ..AlsConfig::default()
        };
        let (model, report) = fit(&train, &cfg).unwrap();
        assert_eq!(report.final_rank, 1);
        assert!(report.final_gamma <= 1e-12, "{}", report.final_gamma);
        let norm = 29f64.sqrt();
        let u0 = model.det_factor(0);
        let sign = u0[0].signum();
        assert_abs_diff_eq!(sign * u0[0], 5.0 / norm, epsilon = 1e-10);
        assert_abs_diff_eq!(sign * u0[1], -2.0 / norm, epsilon = 1e-10);
        // s times the product of the (constant) factors carries ‖[5,-2]‖.
        let magnitude = model.scale(0) * model.term_product(0, &[0.0; 3]).abs();
        assert_abs_diff_eq!(magnitude, norm, epsilon = 1e-9);
    }

    #[test]
    fn sum_of_two_inputs_needs_rank_two() {
        let n = 50;
        let inputs = gaussian_inputs(n, 2, 2);
        let outputs: Vec<f64> = inputs.chunks(2).map(|x| x[0] + x[1]).collect();
        let train = TrainingSet::new(2, 1, inputs, outputs, 2).unwrap();
        let cfg = AlsConfig {
            epsilon: 1e-10,
            delta: 1e-14,
            max_rank: 2,
            max_sweeps_per_rank: 2000,
            degree_count: 2,
            ..AlsConfig::default()
        };
        let (_, report) = fit(&train, &cfg).unwrap();
        assert!(report.final_rank <= 2);
        assert!(report.final_gamma <= 1e-10, "{report:?}");
        assert_eq!(report.termination_reason, TerminationReason::EpsilonMet);
    }

    #[test]
    fn scalar_constant_direction_solve() {
        // r = 1, P = 1, M = 1: the direction solve reduces to one unknown.
        let inputs = vec![0.3, -1.2, 0.8, 2.0];
        let outputs = vec![1.0, 2.0, 4.0, 5.0];
        let train = TrainingSet::new(1, 1, inputs, outputs.clone(), 0).unwrap();
        let model = SeparatedRepresentation::new(
            BasisSpec::new(1).unwrap(),
            vec![2.0],
            vec![vec![1.0]],
            vec![vec![vec![1.0]]],
        )
        .unwrap();
        let (_, info) = sweep_direction(&model, &train, 0, 0.0).unwrap();
        // minimize Σ (q_j − 2c)² ⇒ c = mean(q) / 2
        let mean = outputs.iter().sum::<f64>() / 4.0;
        assert_abs_diff_eq!(info.raw[0], mean / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn det_solve_normalizes() {
        let inputs = gaussian_inputs(30, 2, 3);
        let outputs: Vec<f64> = inputs
            .chunks(2)
            .flat_map(|x| [x[0] * x[1], 1.0 + x[0], -x[1]])
            .collect();
        let train = TrainingSet::new(2, 3, inputs, outputs, 0).unwrap();
        let mut state = AlsState::new(&train, 3, 9, 0.0, DEFAULT_INIT_SPREAD).unwrap();
        state.add_term(10);
        state.full_sweep().unwrap();
        for l in 0..2 {
            let norm: f64 = state.model().det_factor(l).iter().map(|v| v * v).sum::<f64>().sqrt();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn underdetermined_direction_system_errors_without_ridge() {
        // N·M = 2 equations for r·P = 3 unknowns.
        let train = TrainingSet::new(1, 1, vec![0.1, 0.7], vec![1.0, 2.0], 0).unwrap();
        let mut state = AlsState::new(&train, 3, 0, 0.0, DEFAULT_INIT_SPREAD).unwrap();
        let err = state.sweep_direction(0).unwrap_err();
        assert!(matches!(err, SrError::RankDeficient { .. }));
        assert!(err.to_string().contains("ridge_lambda"));
        let mut ridged = AlsState::new(&train, 3, 0, 1e-6, DEFAULT_INIT_SPREAD).unwrap();
        assert!(ridged.sweep_direction(0).is_ok());
    }

    #[test]
    fn init_is_deterministic_and_appends_one_term() {
        let inputs = gaussian_inputs(20, 2, 4);
        let outputs: Vec<f64> = inputs.chunks(2).map(|x| x[0]).collect();
        let train = TrainingSet::new(2, 1, inputs, outputs, 0).unwrap();
        let state = AlsState::new(&train, 3, 5, 0.0, DEFAULT_INIT_SPREAD).unwrap();
        let base = state.model().clone();
        let a = init_rank_term(&base, &train, 77).unwrap();
        let b = init_rank_term(&base, &train, 77).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rank(), base.rank() + 1);
        assert_eq!(a.coeffs(0, 1), base.coeffs(0, 1));
        for i in 0..2 {
            let sq: f64 = (0..train.len())
                .map(|j| a.factor(1, i, train.input(j)[i]).powi(2))
                .sum();
            assert_abs_diff_eq!((sq / train.len() as f64).sqrt(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sweep_reports_bad_direction() {
        let train = TrainingSet::new(1, 1, vec![0.1, 0.7], vec![1.0, 2.0], 0).unwrap();
        let mut state = AlsState::new(&train, 1, 0, 0.0, DEFAULT_INIT_SPREAD).unwrap();
        assert!(matches!(state.sweep_direction(1), Err(SrError::Contract(_))));
    }
}
