//! Synthetic problem generators: partially observed multi-matching, random
//! binary clustering similarities, 2D Gaussian mixtures, and a local-scaling
//! Gaussian kernel to turn point clouds into similarity matrices.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::SimilarityMatrix;
use crate::rounding::BlockStructure;

/// Degrees of freedom of the chi-square used for per-component variances.
const VARIANCE_DOF: f64 = 4.0;

/// Scale floor for coincident points in [`kernel_similarity`].
pub const MIN_KERNEL_SCALE: f64 = 1e-12;

/// Default neighbour rank for the local kernel scale.
pub const DEFAULT_NEIGHBOR_INDEX: usize = 7;

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingInstance {
    pub w: SimilarityMatrix,
    pub blocks: BlockStructure,
    /// Universe feature id of every point.
    pub ground_truth: Vec<usize>,
    /// True universe size.
    pub d: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringInstance {
    pub w: SimilarityMatrix,
    pub ground_truth: Vec<usize>,
    pub k_star: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    /// `m x 2` observations.
    pub points: Array2<f64>,
    pub ground_truth: Vec<usize>,
    pub k_star: usize,
}

/// Multi-matching with partial observations.
///
/// Each of `q` objects observes each of the `d` universe features with
/// probability `rho`. For every pair of objects a fraction `sigma` of the true
/// correspondences is corrupted by cyclically shifting their second endpoints.
pub fn gen_partial_matching(
    q: usize,
    d: usize,
    rho: f64,
    sigma: f64,
    seed: u64,
) -> Result<MatchingInstance> {
    if q < 2 {
        return Err(invalid(format!("q must be >= 2, got {q}")));
    }
    if d < 1 {
        return Err(invalid("d must be >= 1"));
    }
    check_probability("rho", rho)?;
    check_probability("sigma", sigma)?;
    let mut rng = rng_from_seed(seed);

    let mut objects: Vec<Vec<usize>> = Vec::with_capacity(q);
    for _ in 0..q {
        let mut feats: Vec<usize> = (0..d).filter(|_| rng.random::<f64>() < rho).collect();
        feats.shuffle(&mut rng);
        objects.push(feats);
    }
    let sizes: Vec<usize> = objects.iter().map(Vec::len).collect();
    let m: usize = sizes.iter().sum();
    if m == 0 {
        return Err(Error::EmptyInstance);
    }
    let blocks = BlockStructure::new(sizes)?;
    let offsets = blocks.offsets();
    let ground_truth: Vec<usize> = objects.iter().flatten().copied().collect();

    let mut w = Array2::<f64>::eye(m);
    for i in 0..q {
        for j in (i + 1)..q {
            // (row in i, row in j) for every shared feature, in i's point order
            let mut pairs: Vec<(usize, usize)> = objects[i]
                .iter()
                .enumerate()
                .filter_map(|(a, f)| {
                    objects[j]
                        .iter()
                        .position(|g| g == f)
                        .map(|b| (offsets[i] + a, offsets[j] + b))
                })
                .collect();
            let n_bad = (sigma * pairs.len() as f64).ceil() as usize;
            if n_bad >= 2 {
                let picked = rand::seq::index::sample(&mut rng, pairs.len(), n_bad).into_vec();
                let shift = rng.random_range(1..n_bad);
                let targets: Vec<usize> = picked.iter().map(|&p| pairs[p].1).collect();
                for (t, &p) in picked.iter().enumerate() {
                    pairs[p].1 = targets[(t + shift) % n_bad];
                }
            }
            for (a, b) in pairs {
                w[[a, b]] = 1.0;
                w[[b, a]] = 1.0;
            }
        }
    }
    Ok(MatchingInstance {
        w: SimilarityMatrix::from_trusted(w),
        blocks,
        ground_truth,
        d,
        seed,
    })
}

/// Random binary similarity for clustering.
///
/// Points receive uniform labels among `k_star` clusters. Every off-diagonal
/// entry of the co-membership matrix is flipped with probability `rho` and
/// then zeroed with probability `nu`; the diagonal stays 1.
pub fn gen_binary_clustering(
    m: usize,
    k_star: usize,
    rho: f64,
    nu: f64,
    seed: u64,
) -> Result<ClusteringInstance> {
    if k_star < 1 || m < k_star {
        return Err(invalid(format!(
            "need m >= k_star >= 1, got m = {m}, k_star = {k_star}"
        )));
    }
    check_probability("rho", rho)?;
    check_probability("nu", nu)?;
    let mut rng = rng_from_seed(seed);
    let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..k_star)).collect();
    let mut w = Array2::<f64>::eye(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let mut v = labels[i] == labels[j];
            let flip = rng.random::<f64>() < rho;
            let mask = rng.random::<f64>() < nu;
            if flip {
                v = !v;
            }
            if mask {
                v = false;
            }
            let x = if v { 1.0 } else { 0.0 };
            w[[i, j]] = x;
            w[[j, i]] = x;
        }
    }
    Ok(ClusteringInstance {
        w: SimilarityMatrix::from_trusted(w),
        ground_truth: labels,
        k_star,
        seed,
    })
}

/// Average Euclidean distance over all pairs of rows.
pub fn mean_pairwise_distance(points: &Array2<f64>) -> f64 {
    let n = points.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = &points.row(i) - &points.row(j);
            total += d.dot(&d).sqrt();
        }
    }
    total / (n * (n - 1) / 2) as f64
}

/// Centers and per-component variances of a generated mixture.
#[derive(Debug, Clone)]
pub struct GmmComponents {
    pub centers: Array2<f64>,
    pub variances: Vec<f64>,
}

fn gmm_components(
    k_star: usize,
    mean_sep: f64,
    mean_var: f64,
    rng: &mut ChaCha8Rng,
) -> GmmComponents {
    let mut centers = Array2::<f64>::zeros((k_star, 2));
    if k_star >= 2 {
        for c in centers.iter_mut() {
            *c = StandardNormal.sample(rng);
        }
        let current = mean_pairwise_distance(&centers);
        if current > 0.0 {
            centers.mapv_inplace(|v| v * mean_sep / current);
        }
    }
    let chi = ChiSquared::new(VARIANCE_DOF).expect("valid dof");
    let mut variances: Vec<f64> = (0..k_star).map(|_| chi.sample(rng)).collect();
    let avg = variances.iter().sum::<f64>() / k_star as f64;
    for v in variances.iter_mut() {
        *v *= mean_var / avg;
    }
    GmmComponents { centers, variances }
}

/// Samples `n_samples` labelled points from a random 2D isotropic Gaussian
/// mixture with equal weights.
///
/// Centers are standard normal draws rescaled so that their average pairwise
/// distance is exactly `mean_sep`. Component variances are chi-square draws
/// rescaled so that their average is exactly `mean_var`.
pub fn gen_gmm(
    k_star: usize,
    n_samples: usize,
    mean_sep: f64,
    mean_var: f64,
    seed: u64,
) -> Result<PointCloud> {
    if k_star < 1 || n_samples < k_star {
        return Err(invalid(format!(
            "need n_samples >= k_star >= 1, got n_samples = {n_samples}, k_star = {k_star}"
        )));
    }
    if !(mean_sep > 0.0 && mean_sep.is_finite()) || !(mean_var > 0.0 && mean_var.is_finite()) {
        return Err(invalid("mean_sep and mean_var must be positive and finite"));
    }
    let mut rng = rng_from_seed(seed);
    let comp = gmm_components(k_star, mean_sep, mean_var, &mut rng);
    let mut points = Array2::<f64>::zeros((n_samples, 2));
    let mut ground_truth = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let c = rng.random_range(0..k_star);
        let sd = comp.variances[c].sqrt();
        for dim in 0..2 {
            let z: f64 = StandardNormal.sample(&mut rng);
            points[[i, dim]] = comp.centers[[c, dim]] + sd * z;
        }
        ground_truth.push(c);
    }
    Ok(PointCloud {
        points,
        ground_truth,
        k_star,
    })
}

/// The mixture components [`gen_gmm`] would draw for this seed.
pub fn gmm_components_for_seed(
    k_star: usize,
    mean_sep: f64,
    mean_var: f64,
    seed: u64,
) -> GmmComponents {
    gmm_components(k_star, mean_sep, mean_var, &mut rng_from_seed(seed))
}

/// Local-scaling Gaussian kernel
/// `W_ij = exp(-||x_i - x_j||^2 / (s_i s_j))`, where `s_i` is the distance from
/// `x_i` to its `neighbor_index`-th nearest neighbour.
pub fn kernel_similarity(cloud: &PointCloud, neighbor_index: usize) -> Result<SimilarityMatrix> {
    let x = &cloud.points;
    let m = x.nrows();
    if neighbor_index < 1 || neighbor_index >= m {
        return Err(invalid(format!(
            "neighbor_index must lie in [1, {}), got {neighbor_index}",
            m
        )));
    }
    if let Some(((i, j), _)) = x.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(i, j));
    }
    let mut sq = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in (i + 1)..m {
            let d = &x.row(i) - &x.row(j);
            let v = d.dot(&d);
            sq[[i, j]] = v;
            sq[[j, i]] = v;
        }
    }
    let mut floored = 0;
    let scales: Vec<f64> = (0..m)
        .map(|i| {
            let mut dists: Vec<f64> = (0..m).filter(|&j| j != i).map(|j| sq[[i, j]]).collect();
            dists.sort_by(f64::total_cmp);
            let s = dists[neighbor_index - 1].sqrt();
            if s < MIN_KERNEL_SCALE {
                floored += 1;
                MIN_KERNEL_SCALE
            } else {
                s
            }
        })
        .collect();
    if floored > 0 {
        log::warn!("{floored} point(s) have coincident neighbours; kernel scale floored at {MIN_KERNEL_SCALE}");
    }
    let mut w = Array2::<f64>::eye(m);
    for i in 0..m {
        for j in (i + 1)..m {
            let v = (-sq[[i, j]] / (scales[i] * scales[j])).exp();
            w[[i, j]] = v;
            w[[j, i]] = v;
        }
    }
    Ok(SimilarityMatrix::from_trusted(w))
}

impl PointCloud {
    /// Clustering instance with the kernel similarity of this cloud.
    pub fn to_clustering_instance(
        &self,
        neighbor_index: usize,
        seed: u64,
    ) -> Result<ClusteringInstance> {
        Ok(ClusteringInstance {
            w: kernel_similarity(self, neighbor_index)?,
            ground_truth: self.ground_truth.clone(),
            k_star: self.k_star,
            seed,
        })
    }
}
