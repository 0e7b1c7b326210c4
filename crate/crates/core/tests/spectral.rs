use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spectral_dispersal::linalg::{affine_family, max_real_eigenvalue};
use spectral_dispersal::spectral::{
    asymptotic_limits, bound_curve, bound_derivative, collatz_wielandt, karlin_map, principal_eigen, row_sum_bracket,
    spectral_bound, threshold_mu, CurveGrid, InfiniteLimit,
};
use spectral_dispersal::sweeps::{random_irreducible_quasi_positive, random_network, random_nonconstant};
use spectral_dispersal::{Error, NoThresholdCase};

fn two_patch() -> (DMatrix<f64>, Vec<f64>) {
    (DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.5, -1.0]), vec![1.0, 2.0])
}

fn closed_form(mu: f64) -> f64 {
    (6.0 - 3.0 * mu + (9.0 * mu * mu - 4.0 * mu + 4.0).sqrt()) / 4.0
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `A` with zero column sums, so `s(A) = 0`.
fn laplacian_negative(seed: u64, n: usize) -> DMatrix<f64> {
    random_network(&mut rng(seed), n).matrix().clone()
}

#[test]
fn two_patch_curve_matches_closed_form() {
    let (a, q) = two_patch();
    for mu in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let s = spectral_bound(&affine_family(&a, &q, mu), 1e-13).unwrap();
        assert!((s - closed_form(mu)).abs() < 1e-9, "mu = {mu}");
    }
    let (ds, d2s) = bound_derivative(&a, &q, 1.0, 1e-13).unwrap();
    assert!((ds + 1.0 / 6.0).abs() < 1e-6);
    // s'' = (9g − (9μ−2)²) / (4 g^{3/2}) with g = 9μ² − 4μ + 4.
    assert!((d2s - 8.0 / 27.0).abs() < 1e-5, "{d2s}");
}

#[test]
fn dense_spectrum_oracle() {
    for seed in 0..50 {
        let m = random_irreducible_quasi_positive(&mut rng(seed), 5);
        let e = principal_eigen(&m, 1e-12).unwrap();
        assert!((e.value - max_real_eigenvalue(&m)).abs() < 1e-9, "seed {seed}");
        assert!(e.right.iter().chain(e.left.iter()).all(|&x| x > 0.0));
        assert!((e.right.sum() - 1.0).abs() < 1e-14 && (e.left.sum() - 1.0).abs() < 1e-14);
        assert!(e.residual <= 1e-12 * m.abs().row_sum().max().max(1.0));
    }
}

#[test]
fn non_quasi_positive_goes_through_dense_spectrum() {
    let m = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
    assert!(spectral_bound(&m, 1e-10).unwrap().abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn collatz_wielandt_bounds_from_above(seed in any::<u64>(), n in 2usize..=7) {
        let mut r = rng(seed);
        let a = random_irreducible_quasi_positive(&mut r, n);
        let u: Vec<f64> = (0..n).map(|_| r.random_range(0.01..10.0)).collect();
        let e = principal_eigen(&a, 1e-12).unwrap();
        prop_assert!(collatz_wielandt(&a, &u).unwrap() >= e.value - 1e-9);
        let at_vector = collatz_wielandt(&a, e.right.as_slice()).unwrap();
        prop_assert!((at_vector - e.value).abs() < 1e-9);
    }

    #[test]
    fn row_sums_bracket_the_bound(seed in any::<u64>(), n in 2usize..=7, mu in 0.01f64..50.0) {
        let mut r = rng(seed);
        let a = random_irreducible_quasi_positive(&mut r, n);
        let q = random_nonconstant(&mut r, n, -2.0, 2.0);
        let (lo, hi) = row_sum_bracket(&a, &q, mu).unwrap();
        let s = spectral_bound(&affine_family(&a, &q, mu), 1e-12).unwrap();
        let slack = 1e-9 * (1.0 + mu);
        prop_assert!(lo - slack <= s && s <= hi + slack, "{lo} <= {s} <= {hi}");
    }

    #[test]
    fn derivative_matches_central_difference(seed in any::<u64>(), n in 2usize..=6, mu in 0.05f64..20.0) {
        let mut r = rng(seed);
        let a = laplacian_negative(seed, n);
        let q = random_nonconstant(&mut r, n, -2.0, 2.0);
        let (ds, d2s) = bound_derivative(&a, &q, mu, 1e-13).unwrap();
        let h = 1e-4 * mu;
        let s = |m: f64| spectral_bound(&affine_family(&a, &q, m), 1e-14).unwrap();
        let fd = (s(mu + h) - s(mu - h)) / (2.0 * h);
        prop_assert!((ds - fd).abs() <= 1e-6 * ds.abs().max(1e-3), "ds {ds} fd {fd}");
        prop_assert!(ds < 0.0 && d2s > 0.0);
        // Slope bound: ds <= s(A) = 0.
        prop_assert!(ds <= 1e-7);
    }

    #[test]
    fn limits_bracket_and_weights(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = rng(seed);
        let a = laplacian_negative(seed, n);
        let q: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        let l = asymptotic_limits(&a, &q, 1e-12).unwrap();
        let InfiniteLimit::Finite(inf) = l.at_infinity else { panic!("zero column sums give a finite limit") };
        prop_assert!(inf <= l.at_zero + 1e-10);
        let v = l.weights.unwrap();
        prop_assert!(v.iter().all(|&x| x > 0.0 && x < 1.0));
        prop_assert!((v.sum() - 1.0).abs() < 1e-12);
        let far = spectral_bound(&affine_family(&a, &q, 1e6), 1e-14).unwrap();
        prop_assert!((far - inf).abs() < 1e-4 * (1.0 + inf.abs()), "{far} vs {inf}");
    }

    #[test]
    fn threshold_zeroes_the_bound(seed in any::<u64>(), n in 2usize..=6) {
        let mut r = rng(seed);
        let a = laplacian_negative(seed, n);
        let alpha = principal_eigen(&a, 1e-13).unwrap().right;
        let mut q: Vec<f64> = (0..n).map(|_| r.random_range(-3.0..3.0)).collect();
        // Shift q so that M > 0 > m.
        let m: f64 = alpha.iter().zip(&q).map(|(a, q)| a * q).sum();
        let big_m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shift = -(m + big_m) / 2.0;
        q.iter_mut().for_each(|x| *x += shift);
        prop_assume!(big_m - m > 0.1);
        let mu = threshold_mu(&a, &q, None, 1e-10).unwrap();
        let s = spectral_bound(&affine_family(&a, &q, mu), 1e-13).unwrap();
        prop_assert!(s.abs() <= 1e-10 * (1.0 + mu), "s({mu}) = {s}");
    }
}

#[test]
fn third_difference_changes_sign() {
    let (a, q) = two_patch();
    let h = 0.02;
    let s = |mu: f64| spectral_bound(&affine_family(&a, &q, mu), 1e-14).unwrap();
    let third: Vec<f64> = (1..240)
        .map(|k| k as f64 * h)
        .map(|mu| (s(mu + 2.0 * h) - 2.0 * s(mu + h) + 2.0 * s(mu - h) - s(mu - 2.0 * h)) / (2.0 * h * h * h))
        .collect();
    assert!(third.iter().any(|&d| d < -1e-3) && third.iter().any(|&d| d > 1e-3));
}

#[test]
fn constant_q_is_flat() {
    let a = laplacian_negative(5, 5);
    for mu in [0.01, 1.0, 100.0] {
        let (ds, _) = bound_derivative(&a, &[0.7; 5], mu, 1e-13).unwrap();
        assert!(ds.abs() < 1e-9);
    }
}

#[test]
fn curve_rows_equal_pointwise_evaluation() {
    let (a, q) = two_patch();
    let grid = CurveGrid { mu_min: 0.1, mu_max: 10.0, steps: 100 };
    let curve = bound_curve(&a, &q, grid, 1e-12).unwrap();
    assert_eq!(curve.rows.len(), 100);
    for row in &curve.rows {
        let s = spectral_bound(&affine_family(&a, &q, row.mu), 1e-12).unwrap();
        assert_eq!(row.s, s);
        let (ds, d2s) = bound_derivative(&a, &q, row.mu, 1e-12).unwrap();
        assert_eq!((row.ds, row.d2s), (ds, d2s));
    }
    assert!(curve.rows.windows(2).all(|w| w[1].s < w[0].s));
    assert!((curve.rows[0].s - closed_form(0.1)).abs() < 1e-9);
}

#[test]
fn leaky_network_strictly_decreases_with_constant_q() {
    // Column 0 loses 0.3 out of the system.
    let a = DMatrix::from_row_slice(2, 2, &[-1.3, 1.0, 1.0, -1.0]);
    let grid = CurveGrid { mu_min: 0.1, mu_max: 5.0, steps: 30 };
    let curve = bound_curve(&a, &[0.5, 0.5], grid, 1e-12).unwrap();
    assert!(curve.rows.windows(2).all(|w| w[1].s < w[0].s));
    let limits = asymptotic_limits(&a, &[0.5, 0.5], 1e-12).unwrap();
    assert_eq!(limits.at_infinity, InfiniteLimit::NegInfinity);
}

#[test]
fn no_threshold_cases_are_named() {
    let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]);
    assert_eq!(threshold_mu(&a, &[1.0, 1.0], None, 1e-10), Err(Error::NoThreshold(NoThresholdCase::PersistenceAllMu)));
    assert_eq!(threshold_mu(&a, &[-1.0, -0.5], None, 1e-10), Err(Error::NoThreshold(NoThresholdCase::ExtinctionAllMu)));
    let (a, q) = two_patch();
    assert!(matches!(threshold_mu(&a, &q, None, 1e-10), Err(Error::NoThreshold(NoThresholdCase::PersistenceAllMu))));
}

#[test]
fn karlin_two_patch_values() {
    let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    let at = |mu: f64| karlin_map(&p, &[1.0, 4.0], mu, 1e-13).unwrap();
    assert!((at(0.5) - 2.5).abs() < 1e-10);
    // Root of λ² − 5(1−μ)λ + 4(1−2μ) = 0 at μ = 1/4.
    let quad = (3.75 + (3.75f64 * 3.75 - 8.0).sqrt()) / 2.0;
    assert!((at(0.25) - quad).abs() < 1e-10);
    assert!(at(0.25) > at(0.5));
    assert!((karlin_map(&p, &[1.0, 1.0], 0.3, 1e-13).unwrap() - 1.0).abs() < 1e-12);
}
