use attrition_core::linreg::{fit_ols, fit_ols_columns, predict_ttl};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn design(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let x: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..p).map(|_| rng.gen_range(-5.0..5.0)).collect())
        .collect();
    let y = x
        .iter()
        .map(|r| 1.5 + r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + rng.gen_range(-0.5..0.5))
        .collect();
    (x, y)
}

/// Gaussian elimination with partial pivoting on the normal equations of
/// `[1 | x]`.
fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len() + 1;
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &t) in x.iter().zip(y) {
        let z: Vec<f64> = std::iter::once(1.0).chain(row.iter().copied()).collect();
        for i in 0..p {
            for j in 0..p {
                a[i][j] += z[i] * z[j];
            }
            a[i][p] += z[i] * t;
        }
    }
    for c in 0..p {
        let pivot = (c..p).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, pivot);
        for r in 0..p {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=p {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    (0..p).map(|i| a[i][p] / a[i][i]).collect()
}

#[test]
fn well_posed_fit_matches_normal_equations() {
    for seed in 0..20 {
        let (x, y) = design(60, 5, seed);
        let model = fit_ols(&x, &y, 0.0).unwrap();
        let oracle = normal_equations(&x, &y);
        assert!((model.intercept - oracle[0]).abs() < 1e-8, "seed {seed}");
        for (b, o) in model.coefficients.iter().zip(&oracle[1..]) {
            assert!((b - o).abs() < 1e-8, "seed {seed}: {b} vs {o}");
        }
    }
}

#[test]
fn duplicated_column_leaves_predictions_unchanged() {
    let (x, y) = design(50, 4, 7);
    let base = fit_ols(&x, &y, 1e-8).unwrap();
    let widened: Vec<Vec<f64>> = x
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(r[1]);
            r
        })
        .collect();
    let dup = fit_ols(&widened, &y, 1e-8).unwrap();
    // Minimum-norm solution splits the weight evenly.
    assert!((dup.coefficients[1] - dup.coefficients[4]).abs() < 1e-6);
    for (a, b) in x.iter().zip(&widened) {
        let pa = predict_ttl(&base, a).unwrap();
        let pb = predict_ttl(&dup, b).unwrap();
        assert!((pa - pb).abs() < 1e-6, "{pa} vs {pb}");
    }
}

#[test]
fn column_subset_ignores_other_inputs() {
    let (x, y) = design(40, 6, 3);
    let names: Vec<String> = ["a", "c", "e"].iter().map(|s| s.to_string()).collect();
    let model = fit_ols_columns(&x, &y, 1e-8, &[0, 2, 4], &names).unwrap();
    let sub: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0], r[2], r[4]]).collect();
    let direct = fit_ols(&sub, &y, 1e-8).unwrap();
    let mut probe = x[0].clone();
    let before = predict_ttl(&model, &probe).unwrap();
    probe[1] += 100.0;
    probe[5] -= 100.0;
    assert_eq!(before, predict_ttl(&model, &probe).unwrap());
    assert!((before - predict_ttl(&direct, &sub[0]).unwrap()).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn small_target_perturbation_moves_fit_continuously(seed in 0u64..10_000, bump in -1e-6f64..1e-6) {
        let (x, mut y) = design(30, 3, seed);
        let a = fit_ols(&x, &y, 1e-8).unwrap();
        y[0] += bump;
        let b = fit_ols(&x, &y, 1e-8).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            prop_assert!((p - q).abs() < 1e-3);
        }
        prop_assert!((a.intercept - b.intercept).abs() < 1e-3);
    }

    #[test]
    fn residuals_are_orthogonal_to_columns(seed in 0u64..10_000) {
        let (x, y) = design(25, 4, seed);
        let m = fit_ols(&x, &y, 0.0).unwrap();
        let resid: Vec<f64> = x.iter().zip(&y).map(|(r, t)| t - predict_ttl(&m, r).unwrap()).collect();
        prop_assert!(resid.iter().sum::<f64>().abs() < 1e-8);
        for j in 0..4 {
            let dot: f64 = x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
            prop_assert!(dot.abs() < 1e-7, "column {} dot {}", j, dot);
        }
    }
}
