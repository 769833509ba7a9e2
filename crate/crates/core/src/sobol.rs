//! First-order Sobol indices of a surrogate, estimated by Monte Carlo.
//!
//! `S_{i,m} = V(E(q̂_m | ξ_i)) / V(q̂_m)`. The numerator uses the pick-freeze
//! product estimator
//!
//! ```text
//! Û_{i,m} = 1/(N−1) Σ_j q̂_m(ξ_j) · q̂_m(ξ'_{1,j}, …, ξ_{i,j}, …, ξ'_{d,j})
//! ```
//!
//! with two independent sample sets, and `S = (Û − E(q̂_m)²) / V(q̂_m)` where
//! the mean and variance come from the closed-form moments of the model.
//! These are first-order (main-effect) indices, not total-effect indices.
//!
//! With [`SobolEstimator::Centered`] (the default) the analytic mean is
//! subtracted from `q̂_m` before forming the products. The index is unchanged
//! in expectation, but the estimator variance no longer scales with `E(q̂_m)²`,
//! which matters for outputs whose mean dwarfs their spread.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SrError};
use crate::model::SeparatedRepresentation;
use crate::sampling::{fill_chunk, CHUNK_ROWS};
use crate::stats::{analytic_covariance, analytic_mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolEstimator {
    #[default]
    Centered,
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SobolResult {
    /// `indices[i][m]`: input `i`, output `m`. Small negative values are
    /// estimator noise and are kept as-is.
    pub indices: Vec<Vec<f64>>,
    pub n_samples: usize,
    pub seed_pair: (u64, u64),
    pub mean: Vec<f64>,
    /// Analytic `V(q̂_m)` used as denominators.
    pub variance: Vec<f64>,
    /// Outputs with zero variance; their indices are reported as 0.
    pub degenerate: Vec<bool>,
    pub estimator: SobolEstimator,
}

impl SobolResult {
    pub fn index(&self, input: usize, output: usize) -> f64 {
        self.indices[input][output]
    }

    /// Sum of first-order indices per output.
    pub fn column_sums(&self) -> Vec<f64> {
        let m = self.variance.len();
        (0..m)
            .map(|k| self.indices.iter().map(|row| row[k]).sum())
            .collect()
    }

    /// Rows are inputs, columns outputs; metadata lines start with `#`.
    pub fn to_csv(&self, input_names: &[String], output_names: &[String]) -> String {
        let mut s = String::new();
        s.push_str("# kind=first_order_sobol\n");
        s.push_str(&format!("# n_samples={}\n", self.n_samples));
        s.push_str(&format!("# seed_a={}\n# seed_b={}\n", self.seed_pair.0, self.seed_pair.1));
        s.push_str(&format!(
            "# estimator={}\n",
            match self.estimator {
                SobolEstimator::Centered => "centered",
                SobolEstimator::Raw => "raw",
            }
        ));
        let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        s.push_str(&format!("# variance={}\n", join(&self.variance)));
        let flags: Vec<&str> = self.degenerate.iter().map(|&b| if b { "1" } else { "0" }).collect();
        s.push_str(&format!("# degenerate={}\n", flags.join(",")));
        s.push_str("input");
        for name in output_names {
            s.push(',');
            s.push_str(name);
        }
        s.push('\n');
        for (name, row) in input_names.iter().zip(&self.indices) {
            s.push_str(name);
            s.push(',');
            s.push_str(&join(row));
            s.push('\n');
        }
        s
    }
}

pub fn sobol_indices(model: &SeparatedRepresentation, n: usize, seeds: (u64, u64)) -> Result<SobolResult> {
    sobol_indices_with(model, n, seeds, SobolEstimator::default())
}

pub fn sobol_indices_with(
    model: &SeparatedRepresentation,
    n: usize,
    seeds: (u64, u64),
    estimator: SobolEstimator,
) -> Result<SobolResult> {
    if n < 2 {
        return Err(SrError::Contract("Sobol estimation needs at least 2 samples".into()));
    }
    if seeds.0 == seeds.1 {
        return Err(SrError::Contract("the two Sobol sample sets need distinct seeds".into()));
    }
    let (d, m) = (model.input_dim(), model.output_dim());
    let mean = analytic_mean(model);
    let cov = analytic_covariance(model);
    let variance: Vec<f64> = (0..m).map(|k| cov[k][k]).collect();
    let shift: Vec<f64> = match estimator {
        SobolEstimator::Centered => mean.clone(),
        SobolEstimator::Raw => vec![0.0; m],
    };

    let chunks = n.div_ceil(CHUNK_ROWS);
    let partials: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let rows = CHUNK_ROWS.min(n - c * CHUNK_ROWS);
            chunk_products(model, &shift, seeds, c, rows)
        })
        .collect();
    let mut sums = vec![0.0; d * m];
    for part in &partials {
        for (acc, v) in sums.iter_mut().zip(part) {
            *acc += v;
        }
    }

    let mut indices = vec![vec![0.0; m]; d];
    let mut degenerate = vec![false; m];
    for k in 0..m {
        if !(variance[k] > 0.0) {
            degenerate[k] = true;
            continue;
        }
        let offset = match estimator {
            SobolEstimator::Centered => 0.0,
            SobolEstimator::Raw => mean[k] * mean[k],
        };
        for i in 0..d {
            let u_hat = sums[i * m + k] / (n - 1) as f64;
            indices[i][k] = (u_hat - offset) / variance[k];
        }
    }
    Ok(SobolResult {
        indices,
        n_samples: n,
        seed_pair: seeds,
        mean,
        variance,
        degenerate,
        estimator,
    })
}

/// Partial sums `Σ_j q̃_m(ξ_j) q̃_m(ξ^{(i)}_j)` over one chunk, laid out `d × M`.
fn chunk_products(
    model: &SeparatedRepresentation,
    shift: &[f64],
    seeds: (u64, u64),
    chunk: usize,
    rows: usize,
) -> Vec<f64> {
    let (d, m, r) = (model.input_dim(), model.output_dim(), model.rank());
    let mut xa = vec![0.0; rows * d];
    let mut xb = vec![0.0; rows * d];
    fill_chunk(seeds.0, chunk, d, &mut xa);
    fill_chunk(seeds.1, chunk, d, &mut xb);

    let mut sums = vec![0.0; d * m];
    let mut fa = vec![0.0; r * d];
    let mut fb = vec![0.0; r * d];
    let mut suffix = vec![0.0; d + 1];
    let mut base = vec![0.0; m];
    let mut mixed = vec![0.0; d * m];
    for (a, b) in xa.chunks_exact(d).zip(xb.chunks_exact(d)) {
        for l in 0..r {
            for i in 0..d {
                fa[l * d + i] = model.factor(l, i, a[i]);
                fb[l * d + i] = model.factor(l, i, b[i]);
            }
        }
        base.copy_from_slice(shift);
        base.iter_mut().for_each(|v| *v = -*v);
        for v in mixed.chunks_exact_mut(m) {
            v.copy_from_slice(&base);
        }
        for l in 0..r {
            let s = model.scale(l);
            let u0 = model.det_factor(l);
            let fa_l = &fa[l * d..(l + 1) * d];
            let fb_l = &fb[l * d..(l + 1) * d];
            let w: f64 = s * fa_l.iter().product::<f64>();
            for (o, u) in base.iter_mut().zip(u0) {
                *o += w * u;
            }
            // mixed_i = fa_i · Π_{k≠i} fb_k via prefix/suffix products.
            suffix[d] = 1.0;
            for i in (0..d).rev() {
                suffix[i] = suffix[i + 1] * fb_l[i];
            }
            let mut prefix = 1.0;
            for i in 0..d {
                let w = s * prefix * fa_l[i] * suffix[i + 1];
                for (o, u) in mixed[i * m..(i + 1) * m].iter_mut().zip(u0) {
                    *o += w * u;
                }
                prefix *= fb_l[i];
            }
        }
        for i in 0..d {
            for k in 0..m {
                sums[i * m + k] += base[k] * mixed[i * m + k];
            }
        }
    }
    sums
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorVariability {
    pub direction: usize,
    pub term: usize,
    pub scale: f64,
    /// `|u_{direction,term}(ξ)|` on the grid.
    pub values: Vec<f64>,
}

impl FactorVariability {
    pub fn range(&self) -> f64 {
        let lo = self.values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Grid range weighted by the term scale, i.e. the spread the factor
    /// induces in its term when the other factors sit at unit size.
    pub fn weighted_range(&self) -> f64 {
        self.scale * self.range()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorTable {
    pub grid: Vec<f64>,
    pub rows: Vec<FactorVariability>,
}

impl FactorTable {
    /// Long format: `direction,term,scale,xi,abs_u`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("direction,term,scale,xi,abs_u\n");
        for row in &self.rows {
            for (x, v) in self.grid.iter().zip(&row.values) {
                s.push_str(&format!(
                    "{},{},{:?},{:?},{:?}\n",
                    row.direction + 1,
                    row.term + 1,
                    row.scale,
                    x,
                    v
                ));
            }
        }
        s
    }

    /// The `(direction, term)` row with the largest scale-weighted range.
    pub fn most_variable(&self) -> Option<&FactorVariability> {
        self.rows
            .iter()
            .max_by(|a, b| a.weighted_range().total_cmp(&b.weighted_range()))
    }
}

/// Tabulates `|u_i^l|` on a uniform grid over `[-4, 4]`.
pub fn factor_variability_table(model: &SeparatedRepresentation, grid_points: usize) -> Result<FactorTable> {
    if grid_points < 2 {
        return Err(SrError::Contract("factor grid needs at least 2 points".into()));
    }
    let grid: Vec<f64> = (0..grid_points)
        .map(|k| -4.0 + 8.0 * k as f64 / (grid_points - 1) as f64)
        .collect();
    let mut rows = Vec::with_capacity(model.input_dim() * model.rank());
    for i in 0..model.input_dim() {
        for l in 0..model.rank() {
            rows.push(FactorVariability {
                direction: i,
                term: l,
                scale: model.scale(l),
                values: grid.iter().map(|&x| model.factor(l, i, x).abs()).collect(),
            });
        }
    }
    Ok(FactorTable { grid, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermite::BasisSpec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_bad_arguments() {
        let m = SeparatedRepresentation::new(
            BasisSpec::new(2).unwrap(),
            vec![1.0],
            vec![vec![1.0]],
            vec![vec![vec![0.0, 1.0]]],
        )
        .unwrap();
        assert!(sobol_indices(&m, 1, (1, 2)).is_err());
        assert!(sobol_indices(&m, 100, (3, 3)).is_err());
        assert!(factor_variability_table(&m, 1).is_err());
    }

    #[test]
    fn degenerate_output_is_flagged() {
        // q̂ = [ξ1, const]
        let m = SeparatedRepresentation::new(
            BasisSpec::new(2).unwrap(),
            vec![1.0, 2.0],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![vec![vec![0.0, 1.0]], vec![vec![1.0, 0.0]]],
        )
        .unwrap();
        let res = sobol_indices(&m, 20_000, (1, 2)).unwrap();
        assert_eq!(res.degenerate, vec![false, true]);
        assert_eq!(res.index(0, 1), 0.0);
        assert_abs_diff_eq!(res.index(0, 0), 1.0, epsilon = 0.03);
    }

    #[test]
    fn factor_table_shapes() {
        let m = SeparatedRepresentation::new(
            BasisSpec::new(2).unwrap(),
            vec![1.0],
            vec![vec![1.0]],
            vec![vec![vec![1.0, 0.0], vec![0.0, 1.0]]],
        )
        .unwrap();
        let t = factor_variability_table(&m, 9).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows[0].values.iter().all(|&v| v == 1.0));
        assert_eq!(t.rows[1].values, t.grid.iter().map(|x| x.abs()).collect::<Vec<_>>());
        assert_eq!(t.most_variable().unwrap().direction, 1);
        assert_eq!(t.to_csv().lines().count(), 1 + 18);
    }
}
