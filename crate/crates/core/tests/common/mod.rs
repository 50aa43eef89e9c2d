#![allow(dead_code)]

use nalgebra::DMatrix;
use ndarray::Array2;
use nnsphere::{SimilarityMatrix, SphereMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Symmetric matrix with entries uniform in [-1, 1].
pub fn random_symmetric(rng: &mut ChaCha8Rng, m: usize) -> Array2<f64> {
    let mut a = Array2::zeros((m, m));
    for i in 0..m {
        for j in i..m {
            let v = rng.random_range(-1.0..=1.0);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

/// Non-negative symmetric matrix with entries uniform in [0, 1].
pub fn random_similarity(rng: &mut ChaCha8Rng, m: usize) -> SimilarityMatrix {
    SimilarityMatrix::new(random_symmetric(rng, m).mapv(f64::abs)).unwrap()
}

/// Uniformly distributed point of the non-negative unit sphere in R^k.
pub fn sphere_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..k)
            .map(|_| rng.sample::<f64, _>(StandardNormal).abs())
            .collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_sphere(rng: &mut ChaCha8Rng, m: usize, k: usize) -> SphereMatrix {
    let mut a = Array2::zeros((m, k));
    for i in 0..m {
        for (j, v) in sphere_point(rng, k).into_iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    SphereMatrix::new(a).unwrap()
}

/// Wishart matrix `B B^T` with a square standard normal `B` (positive
/// definite almost surely).
pub fn random_psd(rng: &mut ChaCha8Rng, m: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((m, m), |_| rng.sample::<f64, _>(StandardNormal));
    b.dot(&b.t())
}

/// Eigenvalues from a full dense symmetric eigendecomposition.
pub fn dense_eigenvalues(a: &Array2<f64>) -> Vec<f64> {
    let m = a.nrows();
    let d = DMatrix::from_fn(m, m, |i, j| a[[i, j]]);
    let mut ev: Vec<f64> = d.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn dense_min_eig(a: &Array2<f64>) -> f64 {
    dense_eigenvalues(a)[0]
}

/// Angle between two vectors in radians.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}
