//! Independent oracles and random ensembles for the acceptance suite.

use ndarray::Array2;
use nnsphere::problems::{ClusteringInstance, MatchingInstance};
use nnsphere::relaxation::BinaryRowStochasticMatrix;
use nnsphere::rounding::round_clustering;
use nnsphere::{SphereMatrix, SweepParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
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

/// Wishart matrix `B B^T` with a square standard normal `B`.
pub fn wishart(rng: &mut ChaCha8Rng, m: usize) -> Array2<f64> {
    let b = Array2::from_shape_fn((m, m), |_| rng.sample::<f64, _>(StandardNormal));
    b.dot(&b.t())
}

pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos()
}

/// Best of `n` samples of the non-negative sphere for `<x, .>`, split evenly
/// over all faces of the orthant so that boundary maximizers are reachable.
pub fn monte_carlo_argmax(x: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = x.len();
    let faces: Vec<Vec<usize>> = (1..(1usize << k))
        .map(|mask| (0..k).filter(|&j| mask >> j & 1 == 1).collect())
        .collect();
    let per_face = (n / faces.len()).max(1);
    let mut best = vec![0.0; k];
    let mut best_val = f64::NEG_INFINITY;
    for face in &faces {
        for _ in 0..per_face {
            let p = sphere_point(rng, face.len());
            let mut s = vec![0.0; k];
            for (&j, v) in face.iter().zip(p) {
                s[j] = v;
            }
            let v: f64 = s.iter().zip(x).map(|(a, b)| a * b).sum();
            if v > best_val {
                best_val = v;
                best = s;
            }
        }
    }
    best
}

/// All injective maps of `rows` rows into `cols` columns, in lexicographic
/// order.
pub fn injective_maps(rows: usize, cols: usize) -> Vec<Vec<usize>> {
    fn rec(
        rows: usize,
        cols: usize,
        cur: &mut Vec<usize>,
        used: &mut [bool],
        out: &mut Vec<Vec<usize>>,
    ) {
        if cur.len() == rows {
            out.push(cur.clone());
            return;
        }
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(rows, cols, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(
        rows,
        cols,
        &mut Vec::new(),
        &mut vec![false; cols],
        &mut out,
    );
    out
}

/// Every binary row-stochastic `m x k` matrix.
pub fn enumerate_binary(m: usize, k: usize) -> Vec<BinaryRowStochasticMatrix> {
    (0..k.pow(m as u32))
        .map(|mut code| {
            let cols = (0..m)
                .map(|_| {
                    let c = code % k;
                    code /= k;
                    c
                })
                .collect();
            BinaryRowStochasticMatrix::new(cols, k).unwrap()
        })
        .collect()
}

/// Indices whose value is within a relative `1e-9` of the optimum.
pub fn optimal_set(values: &[f64], maximize: bool) -> Vec<usize> {
    let best = if maximize {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let tol = 1e-9 * best.abs().max(1.0);
    (0..values.len())
        .filter(|&i| (values[i] - best).abs() <= tol)
        .collect()
}

/// Co-membership oracle: true when both labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

/// F-score and cluster count of a full clustering solve.
pub fn solve_clustering(inst: &ClusteringInstance, params: &SweepParams) -> (f64, usize) {
    let sol = nnsphere::solve(&inst.w, params).unwrap();
    let labels = round_clustering(&sol.u);
    let r = nnsphere::evaluation::score_clustering(&labels, &inst.ground_truth).unwrap();
    (r.f_score, labels.n_clusters())
}

/// F-score of a full matching solve.
pub fn solve_matching(inst: &MatchingInstance, params: &SweepParams) -> f64 {
    let sol = nnsphere::solve(&inst.w, params).unwrap();
    let perms = nnsphere::rounding::round_matching(&sol.u, &inst.blocks).unwrap();
    nnsphere::evaluation::score_matching(&perms, inst)
        .unwrap()
        .f_score
}

/// Runs `f` over `items` on scoped threads, keeping input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items.len().max(1));
    let chunk = items.len().div_ceil(jobs).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(|| c.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    })
}
