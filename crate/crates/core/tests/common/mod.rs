#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Gauss–Hermite rule for the standard normal weight (Golub–Welsch).
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

pub fn normals(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

pub fn uniform(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Dense least squares by Householder QR, independent of the solver code path.
pub fn dense_lstsq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-14).expect("svd solve")
}

/// Random model whose factors are `1 + spread·(random higher-degree part)`.
pub fn perturbed_model(
    r: usize,
    d: usize,
    m: usize,
    p: usize,
    spread: f64,
    seed: u64,
) -> sepsr::SeparatedRepresentation {
    let mut c = normals(r * d * p, seed);
    for (k, v) in c.iter_mut().enumerate() {
        *v = if k % p == 0 { 1.0 + 0.2 * *v } else { spread * *v };
    }
    let u = normals(r * m, seed + 1);
    let s = uniform(r, 0.5, 2.0, seed + 2);
    sepsr::SeparatedRepresentation::from_flat(d, m, sepsr::BasisSpec::new(p).unwrap(), s, u, c).unwrap()
}

/// Sample mean and covariance of an `n × m` row-major matrix, with the
/// standard error of every entry.
pub struct SampleStats {
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    pub cov_se: Vec<Vec<f64>>,
}

pub fn sample_stats(samples: &[f64], m: usize) -> SampleStats {
    let n = samples.len() / m;
    let nf = n as f64;
    let mut mean = vec![0.0; m];
    for row in samples.chunks(m) {
        for (a, v) in mean.iter_mut().zip(row) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|v| *v /= nf);
    let mut cov = vec![vec![0.0; m]; m];
    let mut cov_sq = vec![vec![0.0; m]; m];
    for row in samples.chunks(m) {
        for a in 0..m {
            for b in 0..m {
                let z = (row[a] - mean[a]) * (row[b] - mean[b]);
                cov[a][b] += z;
                cov_sq[a][b] += z * z;
            }
        }
    }
    let mut cov_se = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            let mu = cov[a][b] / nf;
            cov_se[a][b] = ((cov_sq[a][b] / nf - mu * mu) / nf).sqrt();
            cov[a][b] = mu;
        }
    }
    let mean_se = (0..m).map(|a| (cov[a][a] / nf).sqrt()).collect();
    SampleStats { mean, mean_se, cov, cov_se }
}

/// Rank-2 separable polynomial of degree 3 in `d` inputs: a dominant term and
/// a second one at 0.3 of its scale, each factor `1 + O(1/√d)` so the product
/// stays well scaled as `d` grows.
pub fn separable_target(d: usize, m: usize, seed: u64) -> sepsr::SeparatedRepresentation {
    let (r, p) = (2, 4);
    let sigma = 0.5 / (d as f64).sqrt();
    let mut c = normals(r * d * p, 1000 + seed);
    for (k, v) in c.iter_mut().enumerate() {
        *v = if k % p == 0 { 1.0 } else { sigma * *v };
    }
    let u = normals(r * m, 2000 + seed);
    sepsr::SeparatedRepresentation::from_flat(d, m, sepsr::BasisSpec::new(p).unwrap(), vec![1.0, 0.3], u, c).unwrap()
}
