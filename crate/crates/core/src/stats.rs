//! Moments, sampled PDFs and validation residuals of a fitted model.
//!
//! The closed forms assume the orthonormal Hermite basis: the mean of a
//! factor is its first coefficient and the inner product of two factors is
//! the dot product of their coefficient vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrError};
use crate::model::{SeparatedRepresentation, TrainingSet};
use crate::sampling::{fill_chunk, CHUNK_ROWS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentSource {
    Analytic,
    Sampled { samples: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSummary {
    pub mean: Vec<f64>,
    /// `M × M`, row-major.
    pub covariance: Vec<Vec<f64>>,
    pub source: MomentSource,
}

impl MomentSummary {
    pub fn std_dev(&self) -> Vec<f64> {
        self.covariance
            .iter()
            .enumerate()
            .map(|(m, row)| row[m].max(0.0).sqrt())
            .collect()
    }
}

/// `E(q̂_m) = Σ_l s_l u0_{l,m} Π_i c_{i,l,1}`.
pub fn analytic_mean(model: &SeparatedRepresentation) -> Vec<f64> {
    let mut mean = vec![0.0; model.output_dim()];
    for l in 0..model.rank() {
        let w: f64 = model.scale(l)
            * (0..model.input_dim())
                .map(|i| model.coeffs(l, i)[0])
                .product::<f64>();
        for (o, u) in mean.iter_mut().zip(model.det_factor(l)) {
            *o += w * u;
        }
    }
    mean
}

/// Second-moment Gram matrix `G_{l,l'} = s_l s_{l'} Π_i ⟨c_{i,l}, c_{i,l'}⟩`.
fn term_gram(model: &SeparatedRepresentation) -> Vec<f64> {
    let r = model.rank();
    let mut g = vec![0.0; r * r];
    for l in 0..r {
        for k in l..r {
            let mut prod = model.scale(l) * model.scale(k);
            for i in 0..model.input_dim() {
                prod *= model
                    .coeffs(l, i)
                    .iter()
                    .zip(model.coeffs(k, i))
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
            g[l * r + k] = prod;
            g[k * r + l] = prod;
        }
    }
    g
}

/// `COV_{m,m'} = Σ_{l,l'} u0_{l,m} u0_{l',m'} G_{l,l'} − E(q̂_m) E(q̂_{m'})`.
pub fn analytic_covariance(model: &SeparatedRepresentation) -> Vec<Vec<f64>> {
    let (r, m) = (model.rank(), model.output_dim());
    let g = term_gram(model);
    let mean = analytic_mean(model);
    let mut cov = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for l in 0..r {
                let ul = model.det_factor(l)[a];
                for k in 0..r {
                    acc += ul * model.det_factor(k)[b] * g[l * r + k];
                }
            }
            let v = acc - mean[a] * mean[b];
            cov[a][b] = v;
            cov[b][a] = v;
        }
    }
    cov
}

pub fn analytic_moments(model: &SeparatedRepresentation) -> MomentSummary {
    MomentSummary {
        mean: analytic_mean(model),
        covariance: analytic_covariance(model),
        source: MomentSource::Analytic,
    }
}

/// Sample mean and (1/N-normalized) covariance of an `N × M` buffer.
pub fn sample_moments(samples: &[f64], m: usize) -> Result<MomentSummary> {
    if m == 0 || samples.is_empty() || !samples.len().is_multiple_of(m) {
        return Err(SrError::Contract(format!(
            "cannot split {} values into rows of width {m}",
            samples.len()
        )));
    }
    let n = samples.len() / m;
    let mut mean = vec![0.0; m];
    for row in samples.chunks_exact(m) {
        for (acc, v) in mean.iter_mut().zip(row) {
            *acc += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let mut cov = vec![vec![0.0; m]; m];
    for row in samples.chunks_exact(m) {
        for a in 0..m {
            let da = row[a] - mean[a];
            for b in a..m {
                cov[a][b] += da * (row[b] - mean[b]);
            }
        }
    }
    for a in 0..m {
        for b in a..m {
            cov[a][b] /= n as f64;
            cov[b][a] = cov[a][b];
        }
    }
    Ok(MomentSummary {
        mean,
        covariance: cov,
        source: MomentSource::Sampled { samples: n },
    })
}

/// Evaluates the model at `n` seeded standard-normal inputs; `N × M` row-major.
pub fn sample_surrogate(model: &SeparatedRepresentation, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SrError::Contract("sample count must be at least 1".into()));
    }
    let (d, m) = (model.input_dim(), model.output_dim());
    let mut out = vec![0.0; n * m];
    out.par_chunks_mut(CHUNK_ROWS * m)
        .enumerate()
        .for_each(|(c, chunk)| {
            let rows = chunk.len() / m;
            let mut xi = vec![0.0; rows * d];
            fill_chunk(seed, c, d, &mut xi);
            for (x, o) in xi.chunks_exact(d).zip(chunk.chunks_exact_mut(m)) {
                model.evaluate_into(x, o);
            }
        });
    Ok(out)
}

/// Extracts column `m` of an `N × width` buffer.
pub fn column(samples: &[f64], width: usize, m: usize) -> Vec<f64> {
    samples.chunks_exact(width).map(|row| row[m]).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` edges; equal to `[v, v]` when every sample equals `v`.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("bin_left,bin_right,count\n");
        for (k, c) in self.counts.iter().enumerate() {
            s.push_str(&format!("{:?},{:?},{}\n", self.edges[k], self.edges[k + 1], c));
        }
        s
    }
}

/// Equal-width histogram over `[min, max]`. All-equal samples collapse into a
/// single degenerate bin holding every sample.
pub fn histogram(samples: &[f64], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(SrError::Contract("histogram needs at least one bin".into()));
    }
    if samples.is_empty() {
        return Err(SrError::Contract("histogram of an empty sample".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(SrError::Domain("histogram of non-finite samples".into()));
    }
    let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return Ok(Histogram {
            edges: vec![lo, hi],
            counts: vec![samples.len() as u64],
        });
    }
    let width = (hi - lo) / bins as f64;
    let edges: Vec<f64> = (0..=bins)
        .map(|k| if k == bins { hi } else { lo + width * k as f64 })
        .collect();
    let mut counts = vec![0u64; bins];
    for &v in samples {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Freedman–Diaconis bin count with a floor of 10 (and a cap of 10 000).
pub fn freedman_diaconis_bins(samples: &[f64]) -> usize {
    const FLOOR: usize = 10;
    if samples.len() < 4 {
        return FLOOR;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        sorted[lo] + frac * (sorted[(lo + 1).min(sorted.len() - 1)] - sorted[lo])
    };
    let iqr = q(0.75) - q(0.25);
    let range = sorted[sorted.len() - 1] - sorted[0];
    if !(iqr > 0.0) || !(range > 0.0) {
        return FLOOR;
    }
    let width = 2.0 * iqr / (sorted.len() as f64).cbrt();
    ((range / width).ceil() as usize).clamp(FLOOR, 10_000)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationTable {
    pub samples: usize,
    pub residual_rms: Vec<f64>,
    pub sample_rms: Vec<f64>,
}

impl ValidationTable {
    pub fn ratios(&self) -> Vec<f64> {
        self.residual_rms
            .iter()
            .zip(&self.sample_rms)
            .map(|(r, s)| r / s)
            .collect()
    }
}

/// Per-QoI RMS of held-out residuals and of the held-out samples themselves.
/// The hold-out set must not overlap the training data.
pub fn validation_rms(model: &SeparatedRepresentation, holdout: &TrainingSet) -> Result<ValidationTable> {
    crate::model::check_dims(model, holdout)?;
    let n = holdout.len();
    if n == 0 {
        return Err(SrError::Contract("empty hold-out set".into()));
    }
    let m = model.output_dim();
    let pred = model.evaluate_rows(holdout.inputs());
    let mut resid = vec![0.0; m];
    let mut signal = vec![0.0; m];
    for (q_row, p_row) in holdout.outputs().chunks_exact(m).zip(pred.chunks_exact(m)) {
        for k in 0..m {
            resid[k] += (q_row[k] - p_row[k]).powi(2);
            signal[k] += q_row[k].powi(2);
        }
    }
    let rms = |v: Vec<f64>| v.into_iter().map(|s| (s / n as f64).sqrt()).collect();
    Ok(ValidationTable {
        samples: n,
        residual_rms: rms(resid),
        sample_rms: rms(signal),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::BasisSpec;
    use approx::assert_abs_diff_eq;

    fn linear(coeff_sets: Vec<Vec<Vec<f64>>>, det: Vec<Vec<f64>>, scales: Vec<f64>, p: usize) -> SeparatedRepresentation {
        SeparatedRepresentation::new(BasisSpec::new(p).unwrap(), scales, det, coeff_sets).unwrap()
    }

    #[test]
    fn identity_model_moments() {
        // q̂ = ξ1
        let m = linear(vec![vec![vec![0.0, 1.0]]], vec![vec![1.0]], vec![1.0], 2);
        assert_eq!(analytic_mean(&m), vec![0.0]);
        assert_abs_diff_eq!(analytic_covariance(&m)[0][0], 1.0);
    }

    #[test]
    fn perfectly_correlated_outputs() {
        // q̂ = [ξ1, ξ1] = √2 · [1,1]/√2 · ξ1
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = linear(vec![vec![vec![0.0, 1.0]]], vec![vec![h, h]], vec![2f64.sqrt()], 2);
        let cov = analytic_covariance(&m);
        for row in &cov {
            for v in row {
                assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn constant_model_mean_matches_evaluation() {
        let m = linear(
            vec![vec![vec![2.0, 0.0, 0.0], vec![-1.5, 0.0, 0.0]]],
            vec![vec![0.6, 0.8]],
            vec![3.0],
            3,
        );
        let at = m.evaluate(&[0.4, -2.0]).unwrap();
        let mean = analytic_mean(&m);
        assert_abs_diff_eq!(mean[0], at[0], epsilon = 1e-14);
        assert_abs_diff_eq!(mean[1], at[1], epsilon = 1e-14);
        assert_abs_diff_eq!(analytic_covariance(&m)[0][0], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn single_direction_parseval() {
        // One non-trivial direction: variance = Σ_{p≥2} (s · c_p · Π other c_1)².
        let m = linear(
            vec![vec![vec![0.5, 0.3, -0.2, 0.1], vec![2.0, 0.0, 0.0, 0.0]]],
            vec![vec![1.0]],
            vec![1.5],
            4,
        );
        let factor = 1.5 * 2.0;
        let expected = factor * factor * (0.3f64.powi(2) + 0.2f64.powi(2) + 0.1f64.powi(2));
        assert_abs_diff_eq!(analytic_covariance(&m)[0][0], expected, epsilon = 1e-14);
        assert_abs_diff_eq!(analytic_mean(&m)[0], factor * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn surrogate_sampling_is_deterministic() {
        let m = linear(vec![vec![vec![1.0, 0.5], vec![0.2, 1.0]]], vec![vec![1.0]], vec![1.0], 2);
        let a = sample_surrogate(&m, 10_000, 3).unwrap();
        assert_eq!(a, sample_surrogate(&m, 10_000, 3).unwrap());
        assert!(sample_surrogate(&m, 0, 3).is_err());

        let c = linear(vec![vec![vec![4.0, 0.0]]], vec![vec![1.0]], vec![1.0], 2);
        assert_eq!(sample_surrogate(&c, 1, 0).unwrap(), vec![4.0]);
    }

    #[test]
    fn histogram_examples() {
        let h = histogram(&[0.0, 1.0, 2.0, 3.0], 2).unwrap();
        assert_eq!(h.edges, vec![0.0, 1.5, 3.0]);
        assert_eq!(h.counts, vec![2, 2]);

        let flat = histogram(&[2.0; 5], 7).unwrap();
        assert_eq!(flat.edges, vec![2.0, 2.0]);
        assert_eq!(flat.counts, vec![5]);

        assert!(histogram(&[1.0], 0).is_err());
        assert!(histogram(&[], 3).is_err());
    }

    #[test]
    fn fd_bins_floor() {
        assert_eq!(freedman_diaconis_bins(&[1.0, 2.0]), 10);
        assert_eq!(freedman_diaconis_bins(&[3.0; 100]), 10);
        let spread: Vec<f64> = (0..100_000).map(|k| k as f64).collect();
        assert!(freedman_diaconis_bins(&spread) > 10);
    }

    #[test]
    fn validation_extremes() {
        let m = linear(vec![vec![vec![0.0, 1.0]]], vec![vec![1.0]], vec![1.0], 2);
        let inputs = vec![0.5, -1.0, 2.0];
        let exact = TrainingSet::new(1, 1, inputs.clone(), inputs.clone(), 0).unwrap();
        let t = validation_rms(&m, &exact).unwrap();
        assert_eq!(t.residual_rms, vec![0.0]);

        let zero = linear(vec![vec![vec![0.0, 1.0]]], vec![vec![1.0]], vec![0.0], 2);
        let t = validation_rms(&zero, &exact).unwrap();
        assert_eq!(t.residual_rms, t.sample_rms);
    }
}
