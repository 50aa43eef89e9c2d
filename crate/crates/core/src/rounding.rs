//! Rounding of a relaxed solution to discrete assignments.
//!
//! Clustering takes the row-wise argmax. Multi-matching solves one
//! rectangular linear assignment problem per object block so that the points
//! of an object map injectively into the universe columns.

use ndarray::{s, Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relaxation::SphereMatrix;

/// Relative gap below which two entries of a row count as tied.
///
/// Rows that agree in exact arithmetic can differ in the last few bits after
/// the normalisation in each power step.
pub const TIE_TOL: f64 = 1e-12;

/// Partition of the `m` rows into `q` consecutive object blocks.
///
/// Blocks may be empty: an object that observes no features contributes no
/// rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockStructure {
    sizes: Vec<usize>,
}

impl BlockStructure {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Empty("block structure needs q >= 1 objects"));
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn q(&self) -> usize {
        self.sizes.len()
    }

    pub fn m(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Row offset of each block followed by `m`.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.sizes.len() + 1);
        let mut acc = 0;
        out.push(0);
        for &s in &self.sizes {
            acc += s;
            out.push(acc);
        }
        out
    }

    /// Object index of every row.
    pub fn object_of_rows(&self) -> Vec<usize> {
        self.sizes
            .iter()
            .enumerate()
            .flat_map(|(o, &s)| std::iter::repeat_n(o, s))
            .collect()
    }
}

/// Injective map from the points of one object into the universe columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartialPermutation {
    assignment: Vec<Option<usize>>,
}

impl PartialPermutation {
    pub fn new(assignment: Vec<Option<usize>>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for c in assignment.iter().flatten() {
            if !seen.insert(*c) {
                return Err(Error::InvalidParameter(format!(
                    "column {c} is assigned twice within one object"
                )));
            }
        }
        Ok(Self { assignment })
    }

    pub fn assignment(&self) -> &[Option<usize>] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Dense `m_i x k` 0/1 matrix.
    pub fn to_dense(&self, k: usize) -> Array2<f64> {
        let mut out = Array2::zeros((self.assignment.len(), k));
        for (r, c) in self.assignment.iter().enumerate() {
            if let Some(c) = c {
                out[[r, *c]] = 1.0;
            }
        }
        out
    }
}

/// Cluster id of every point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabels {
    pub labels: Vec<usize>,
}

impl ClusterLabels {
    pub fn n_clusters(&self) -> usize {
        let mut l = self.labels.clone();
        l.sort_unstable();
        l.dedup();
        l.len()
    }
}

/// Row-wise argmax; entries within [`TIE_TOL`] of the maximum tie and go to the
/// smallest column.
pub fn round_clustering(u: &SphereMatrix) -> ClusterLabels {
    let labels = u
        .as_array()
        .rows()
        .into_iter()
        .map(|row| {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let floor = max - TIE_TOL * max.abs();
            row.iter().position(|&v| v >= floor).unwrap_or(0)
        })
        .collect();
    ClusterLabels { labels }
}

/// Solves one assignment problem per object block.
pub fn round_matching(
    u: &SphereMatrix,
    blocks: &BlockStructure,
) -> Result<Vec<PartialPermutation>> {
    if blocks.m() != u.m() {
        return Err(Error::DimensionMismatch(format!(
            "blocks cover {} rows but U has {}",
            blocks.m(),
            u.m()
        )));
    }
    let k = u.k();
    let offsets = blocks.offsets();
    let mut out = Vec::with_capacity(blocks.q());
    for (b, &size) in blocks.sizes().iter().enumerate() {
        if size > k {
            return Err(Error::Infeasible { block: b, size, k });
        }
        let profit = u.as_array().slice(s![offsets[b]..offsets[b + 1], ..]);
        let sol = lap_solve(profit)?;
        out.push(PartialPermutation {
            assignment: sol.assignment.into_iter().map(Some).collect(),
        });
    }
    Ok(out)
}

/// Optimal row-to-column assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct LapSolution {
    pub assignment: Vec<usize>,
    pub total: f64,
}

/// Maximum-profit injective assignment of every row of a `rows x cols`
/// matrix (`rows <= cols`). Among optimal assignments the lexicographically
/// smallest one is returned.
pub fn lap_solve(profit: ArrayView2<'_, f64>) -> Result<LapSolution> {
    let (rows, cols) = profit.dim();
    if rows > cols {
        return Err(Error::Infeasible {
            block: 0,
            size: rows,
            k: cols,
        });
    }
    if let Some(((i, j), _)) = profit.indexed_iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::NonFinite(i, j));
    }
    if rows == 0 {
        return Ok(LapSolution {
            assignment: Vec::new(),
            total: 0.0,
        });
    }

    let cost = |r: usize, c: usize| -profit[[r, c]];
    let (mut assignment, best) = hungarian(rows, cols, &cost);
    let scale = profit.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale * rows as f64;

    // Lexicographic refinement: fix rows in order, trying columns below the
    // current optimal choice and keeping the first that preserves optimality.
    let mut fixed: Vec<usize> = Vec::with_capacity(rows);
    let mut fixed_profit = 0.0;
    for r in 0..rows {
        let current = assignment[r];
        let mut chosen = current;
        for c in 0..current {
            if fixed.contains(&c) {
                continue;
            }
            let free_cols: Vec<usize> = (0..cols)
                .filter(|&j| j != c && !fixed.contains(&j))
                .collect();
            let rest_rows: Vec<usize> = (r + 1..rows).collect();
            let sub = |i: usize, j: usize| -profit[[rest_rows[i], free_cols[j]]];
            let (sub_assign, sub_cost) = if rest_rows.is_empty() {
                (Vec::new(), 0.0)
            } else {
                hungarian(rest_rows.len(), free_cols.len(), &sub)
            };
            let total = fixed_profit + profit[[r, c]] - sub_cost;
            if total >= -best - tol {
                chosen = c;
                for (i, j) in sub_assign.into_iter().enumerate() {
                    assignment[r + 1 + i] = free_cols[j];
                }
                break;
            }
        }
        assignment[r] = chosen;
        fixed.push(chosen);
        fixed_profit += profit[[r, chosen]];
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| profit[[r, c]])
        .sum();
    Ok(LapSolution { assignment, total })
}

/// Minimum-cost assignment of `n` rows into `m >= n` columns by successive
/// shortest augmenting paths with dual potentials. Returns the column of
/// every row and the total cost.
fn hungarian(n: usize, m: usize, cost: &dyn Fn(usize, usize) -> f64) -> (Vec<usize>, f64) {
    debug_assert!(n <= m);
    const NONE: usize = usize::MAX;
    // Index 0 is a virtual column; rows and columns are 1-based below.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut row_of = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if row_of[j] != 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    let total = assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| cost(r, c))
        .sum();
    (assignment, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn lap_identity() {
        let sol = lap_solve(Array2::<f64>::eye(3).view()).unwrap();
        assert_eq!(sol.assignment, vec![0, 1, 2]);
        assert_eq!(sol.total, 3.0);
    }

    #[test]
    fn lap_single_row_picks_argmax() {
        let sol = lap_solve(array![[0.1, 0.7, 0.3, 0.7]].view()).unwrap();
        assert_eq!(sol.assignment, vec![1]);
    }

    #[test]
    fn lap_rejects_tall() {
        assert!(matches!(
            lap_solve(Array2::<f64>::zeros((3, 2)).view()),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn lap_lexicographic_ties() {
        // every assignment has profit 0
        let sol = lap_solve(Array2::<f64>::zeros((2, 4)).view()).unwrap();
        assert_eq!(sol.assignment, vec![0, 1]);
        let p = array![[1.0, 1.0, 0.0], [1.0, 1.0, 0.0]];
        assert_eq!(lap_solve(p.view()).unwrap().assignment, vec![0, 1]);
    }

    #[test]
    fn matching_examples() {
        let u = SphereMatrix::new(array![[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let blocks = BlockStructure::new(vec![2]).unwrap();
        let out = round_matching(&u, &blocks).unwrap();
        assert_eq!(out[0].assignment(), &[Some(0), Some(2)]);

        let p = array![[0.9, 0.8, 0.0], [0.85, 0.1, 0.05]];
        let sol = lap_solve(p.view()).unwrap();
        assert_eq!(sol.assignment, vec![1, 0]);
        assert!((sol.total - 1.65).abs() < 1e-12);
    }

    #[test]
    fn matching_infeasible_block() {
        let u = SphereMatrix::new(array![[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let blocks = BlockStructure::new(vec![3]).unwrap();
        assert!(matches!(
            round_matching(&u, &blocks),
            Err(Error::Infeasible {
                block: 0,
                size: 3,
                k: 2
            })
        ));
    }

    #[test]
    fn empty_blocks_are_allowed() {
        let u = SphereMatrix::new(array![[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let blocks = BlockStructure::new(vec![1, 0, 1]).unwrap();
        let out = round_matching(&u, &blocks).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[1].is_empty());
        assert_eq!(blocks.offsets(), vec![0, 1, 1, 2]);
        assert_eq!(blocks.object_of_rows(), vec![0, 2]);
    }

    #[test]
    fn clustering_argmax() {
        let u =
            SphereMatrix::new(array![[0.6, 0.8, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        assert_eq!(round_clustering(&u).labels, vec![1, 0, 2]);
        let tie = SphereMatrix::new(array![[0.5f64.sqrt(), 0.5f64.sqrt()]]).unwrap();
        assert_eq!(round_clustering(&tie).labels, vec![0]);
        let a = 0.5f64.sqrt();
        let b = f64::from_bits(a.to_bits() + 3);
        let c = (1.0 - a * a - b * b).max(0.0).sqrt();
        let near = SphereMatrix::new(array![[a, b, c]]).unwrap();
        assert_eq!(round_clustering(&near).labels, vec![0]);
    }

    #[test]
    fn partial_permutation_rejects_duplicates() {
        assert!(PartialPermutation::new(vec![Some(1), None, Some(1)]).is_err());
        assert!(PartialPermutation::new(vec![Some(1), None, Some(2)]).is_ok());
    }
}
