mod common;

use common::perturbed_model;
use sepsr::sobol::sobol_indices_with;
use sepsr::{sobol_indices, BasisSpec, SeparatedRepresentation, SobolEstimator};

/// `Σ_l s_l u0_l Π_i u_i^l` where term `l` is given by per-direction
/// coefficient vectors.
fn model(p: usize, terms: &[(f64, Vec<Vec<f64>>)]) -> SeparatedRepresentation {
    SeparatedRepresentation::new(
        BasisSpec::new(p).unwrap(),
        terms.iter().map(|t| t.0).collect(),
        terms.iter().map(|_| vec![1.0]).collect(),
        terms.iter().map(|t| t.1.clone()).collect(),
    )
    .unwrap()
}

/// Closed-form first-order indices of a separated representation:
/// `V(E[q̂_m | ξ_i])` by orthonormality, over the analytic variance.
fn exact_indices(m: &SeparatedRepresentation) -> Vec<Vec<f64>> {
    let (r, d, outs) = (m.rank(), m.input_dim(), m.output_dim());
    let w = |l: usize, k: usize| m.scale(l) * m.det_factor(l)[k];
    let cond_var = |i: usize, k: usize| -> f64 {
        let mut v = 0.0;
        for a in 0..r {
            for b in 0..r {
                let mut prod = w(a, k) * w(b, k);
                for j in (0..d).filter(|&j| j != i) {
                    prod *= m.coeffs(a, j)[0] * m.coeffs(b, j)[0];
                }
                let tail: f64 = m.coeffs(a, i)[1..].iter().zip(&m.coeffs(b, i)[1..]).map(|(x, y)| x * y).sum();
                v += prod * tail;
            }
        }
        v
    };
    let cov = sepsr::analytic_covariance(m);
    (0..d).map(|i| (0..outs).map(|k| cond_var(i, k) / cov[k][k]).collect()).collect()
}

const N: usize = 1_000_000;

#[test]
fn single_input_explains_everything() {
    let q = model(2, &[(1.0, vec![vec![0.0, 1.0], vec![1.0, 0.0]])]);
    let s = sobol_indices(&q, N, (1, 2)).unwrap();
    assert!((s.index(0, 0) - 1.0).abs() < 0.01);
    assert!(s.index(1, 0).abs() < 0.01);
}

#[test]
fn weighted_sum_splits_by_variance() {
    let q = model(
        2,
        &[
            (1.0, vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            (2.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
        ],
    );
    let s = sobol_indices(&q, N, (3, 4)).unwrap();
    assert!((s.index(0, 0) - 0.2).abs() < 0.01, "{:?}", s.indices);
    assert!((s.index(1, 0) - 0.8).abs() < 0.01, "{:?}", s.indices);
}

#[test]
fn interaction_term_is_not_first_order() {
    let q = model(
        2,
        &[
            (1.0, vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
            (1.0, vec![vec![0.0, 1.0], vec![0.0, 1.0]]),
        ],
    );
    let s = sobol_indices(&q, N, (5, 6)).unwrap();
    assert!((s.index(0, 0) - 0.5).abs() < 0.02, "{:?}", s.indices);
    assert!(s.index(1, 0).abs() < 0.02, "{:?}", s.indices);
}

#[test]
fn random_models_match_closed_form() {
    for seed in 0..5u64 {
        let m = perturbed_model(3, 4, 2, 4, 0.6, 40 + seed);
        let exact = exact_indices(&m);
        let est = sobol_indices(&m, N, (seed, seed + 1000)).unwrap();
        for i in 0..4 {
            for k in 0..2 {
                assert!((est.index(i, k) - exact[i][k]).abs() < 0.01, "seed {seed}: {:?} vs {exact:?}", est.indices);
                assert!((-0.05..=1.05).contains(&est.index(i, k)));
            }
        }
        for sum in est.column_sums() {
            assert!(sum <= 1.02);
        }
    }
}

#[test]
fn additive_models_are_exhausted_by_first_order() {
    let d = 4;
    let terms: Vec<(f64, Vec<Vec<f64>>)> = (0..d)
        .map(|i| {
            let dirs = (0..d)
                .map(|j| if j == i { vec![0.3, 1.0 / (1.0 + i as f64), 0.2 * i as f64] } else { vec![1.0, 0.0, 0.0] })
                .collect();
            (1.0 + i as f64, dirs)
        })
        .collect();
    let q = model(3, &terms);
    let s = sobol_indices(&q, N, (8, 9)).unwrap();
    let total = s.column_sums()[0];
    assert!((total - 1.0).abs() < 0.02, "{total}");
}

#[test]
fn raw_estimator_agrees_on_centered_output() {
    let q = model(2, &[(1.0, vec![vec![0.0, 1.0], vec![1.0, 0.0]]), (2.0, vec![vec![1.0, 0.0], vec![0.0, 1.0]])]);
    let s = sobol_indices_with(&q, N, (3, 4), SobolEstimator::Raw).unwrap();
    assert!((s.index(0, 0) - 0.2).abs() < 0.01 && (s.index(1, 0) - 0.8).abs() < 0.01);
}

fn std_dev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn doubling_samples_shrinks_spread_by_root_two() {
    let q = perturbed_model(2, 3, 1, 3, 0.6, 77);
    let spread = |n: usize| -> f64 {
        let values: Vec<f64> = (0..20u64)
            .map(|k| sobol_indices(&q, n, (1000 + k, 5000 + k)).unwrap().index(0, 0))
            .collect();
        std_dev(&values)
    };
    let ratio = spread(20_000) / spread(40_000);
    let target = 2f64.sqrt();
    assert!((ratio - target).abs() <= 0.25 * target, "ratio {ratio}");
}

#[test]
fn permuting_inputs_permutes_rows() {
    let m = perturbed_model(2, 3, 2, 3, 0.7, 91);
    let perm = [2usize, 0, 1];
    let coeffs: Vec<Vec<Vec<f64>>> = (0..m.rank())
        .map(|l| perm.iter().map(|&i| m.coeffs(l, i).to_vec()).collect())
        .collect();
    let permuted = SeparatedRepresentation::new(
        m.basis(),
        m.scales().to_vec(),
        (0..m.rank()).map(|l| m.det_factor(l).to_vec()).collect(),
        coeffs,
    )
    .unwrap();
    let a = sobol_indices(&m, N, (21, 22)).unwrap();
    let b = sobol_indices(&permuted, N, (21, 22)).unwrap();
    for (row, &i) in perm.iter().enumerate() {
        for k in 0..2 {
            assert!((b.index(row, k) - a.index(i, k)).abs() < 0.01);
        }
    }
    let exact = exact_indices(&permuted);
    let exact_orig = exact_indices(&m);
    for (row, &i) in perm.iter().enumerate() {
        for k in 0..2 {
            assert!((exact[row][k] - exact_orig[i][k]).abs() < 1e-12);
        }
    }
}

#[test]
fn csv_has_metadata_and_one_row_per_input() {
    let q = perturbed_model(1, 2, 2, 2, 0.5, 5);
    let s = sobol_indices(&q, 1000, (1, 2)).unwrap();
    let csv = s.to_csv(&["a".into(), "b".into()], &["x".into(), "y".into()]);
    let lines: Vec<&str> = csv.lines().collect();
    assert!(lines.iter().any(|l| l.starts_with('#')));
    let body: Vec<&&str> = lines.iter().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(body.len(), 3);
    assert!(body[0].starts_with("input,x,y"));
}
