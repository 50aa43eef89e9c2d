mod common;

use common::*;
use ndarray::{array, Array2};
use nnsphere::linalg::{
    build_v, check_symmetric, smallest_eigenvalue, spectral_scale, unshifted_form,
};
use nnsphere::SimilarityMatrix;
use rand::Rng;

#[test]
fn smallest_eigenvalue_matches_dense_oracle() {
    let mut r = rng(11);
    let tol = 1e-10;
    for trial in 0..100 {
        let m = r.random_range(1..=50);
        let a = random_symmetric(&mut r, m).mapv(|v| v * 10.0);
        let got = smallest_eigenvalue(a.view(), tol).unwrap();
        let want = dense_min_eig(&a);
        // The oracle itself carries rounding error of order m * eps * |A|.
        let slack = tol * want.abs().max(1.0) + 1e-13 * spectral_scale(a.view());
        assert!(
            (got - want).abs() <= slack,
            "trial {trial}, m = {m}: {got} vs {want}"
        );
    }
}

#[test]
fn smallest_eigenvalue_default_tolerance_on_10x10() {
    let mut r = rng(3);
    let tol = 1e-8;
    for _ in 0..20 {
        let a = random_symmetric(&mut r, 10);
        let got = smallest_eigenvalue(a.view(), tol).unwrap();
        let want = dense_min_eig(&a);
        assert!((got - want).abs() <= tol * want.abs().max(1.0));
    }
}

#[test]
fn smallest_eigenvalue_is_deterministic() {
    let a = random_symmetric(&mut rng(5), 30);
    let x = smallest_eigenvalue(a.view(), 1e-8).unwrap();
    let y = smallest_eigenvalue(a.view(), 1e-8).unwrap();
    assert_eq!(x.to_bits(), y.to_bits());
}

#[test]
fn smallest_eigenvalue_small_cases() {
    let d = smallest_eigenvalue(
        Array2::<f64>::from_diag(&array![1.0, 2.0, 3.0]).view(),
        1e-12,
    )
    .unwrap();
    assert!((d - 1.0).abs() <= 1e-12);
    assert_eq!(
        smallest_eigenvalue(Array2::<f64>::zeros((3, 3)).view(), 1e-12).unwrap(),
        0.0
    );
    let x = smallest_eigenvalue(array![[0.0, 1.0], [1.0, 0.0]].view(), 1e-12).unwrap();
    assert!((x + 1.0).abs() < 1e-12);
    assert!(smallest_eigenvalue(array![[0.0, 1.0], [0.0, 0.0]].view(), 1e-12).is_err());
}

#[test]
fn build_v_min_eigenvalue_equals_eps_eta() {
    let mut r = rng(21);
    for _ in 0..20 {
        let m = r.random_range(2..=30);
        let w = random_similarity(&mut r, m);
        let v = build_v(&w, 0.5, 1e-6).unwrap();
        let lam = dense_min_eig(v.as_array());
        assert!((lam - 1e-6).abs() <= 1e-8, "m = {m}: lambda_min(V) = {lam}");
    }
}

#[test]
fn build_v_is_psd_and_affine_consistent() {
    let mut r = rng(8);
    for _ in 0..10 {
        let m = r.random_range(2..=25);
        let w = random_similarity(&mut r, m);
        for &alpha in &[0.0, 0.1, 0.37, 0.5, 0.8, 0.99, 1.0] {
            let v = build_v(&w, alpha, 0.0).unwrap();
            check_symmetric(v.view()).unwrap();
            let scale = spectral_scale(v.view());
            assert!(dense_min_eig(v.as_array()) >= -1e-8 * scale);
            assert!(v.delta() >= 0.0);
            let base = unshifted_form(&w, alpha);
            let naive = w.as_array() * (1.0 - alpha) - Array2::<f64>::ones((m, m)) * alpha;
            let diff = v.as_array() - &(Array2::<f64>::eye(m) * v.delta());
            for ((a, b), c) in diff.iter().zip(naive.iter()).zip(base.iter()) {
                assert!((a - b).abs() <= 1e-12);
                assert!((b - c).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn build_v_known_shifts() {
    let v = build_v(&SimilarityMatrix::identity(2), 0.0, 0.0).unwrap();
    assert_eq!(v.delta(), 0.0);
    assert_eq!(v.as_array(), &Array2::<f64>::eye(2));

    let w = random_similarity(&mut rng(1), 7);
    let v = build_v(&w, 1.0, 0.0).unwrap();
    assert!((v.delta() - 7.0).abs() < 1e-10);
}
