//! Universe-size-free driver: similarity preprocessing, the descending
//! alpha-sweep with warm-started conditional power iterations, and the
//! alpha-pick rule that selects a solution from the convergence-rate curve.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{build_v, SimilarityMatrix};
use crate::relaxation::{objective_g, objective_g_change, power_step, SphereMatrix};

/// Parameters of the alpha-sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    /// Upper bound on the universe size (number of columns of `U`).
    pub k: usize,
    /// Step by which alpha decreases.
    pub eps_alpha: f64,
    /// Power iterations per alpha.
    pub n_inner: usize,
    /// Extra diagonal shift added on top of `-lambda_min`.
    pub eps_eta: f64,
    /// Constant added to every similarity entry after normalization.
    pub kappa: f64,
    /// Keep every `snapshot_every`-th snapshot. With a value above 1 the
    /// picked solution is recovered by re-running the sweep up to the pick.
    pub snapshot_every: usize,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            k: 100,
            eps_alpha: 0.01,
            n_inner: 20,
            eps_eta: 0.0,
            kappa: 0.0,
            snapshot_every: 1,
        }
    }
}

impl SweepParams {
    pub fn with_k(k: usize) -> Self {
        Self {
            k,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidParameter(format!(
                "k must be >= 2, got {}",
                self.k
            )));
        }
        if !(self.eps_alpha > 0.0 && self.eps_alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eps_alpha must lie in (0, 1], got {}",
                self.eps_alpha
            )));
        }
        if self.n_inner == 0 {
            return Err(Error::InvalidParameter("n_inner must be >= 1".into()));
        }
        if !(self.eps_eta >= 0.0 && self.eps_eta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "eps_eta must be finite and >= 0, got {}",
                self.eps_eta
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter(
                "snapshot_every must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// The alpha values visited by the sweep: `1 - eps, 1 - 2 eps, ...` down
    /// to the last value that is still `>= 0`.
    pub fn alpha_grid(&self) -> Vec<f64> {
        let steps = (1.0 / self.eps_alpha + 1e-9).floor() as usize;
        (1..=steps)
            .map(|s| {
                let a = 1.0 - s as f64 * self.eps_alpha;
                if a.abs() < 1e-12 {
                    0.0
                } else {
                    a.max(0.0)
                }
            })
            .collect()
    }
}

/// Per-alpha record of a sweep.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SweepTrace {
    pub alphas: Vec<f64>,
    pub etas: Vec<f64>,
    pub objectives: Vec<f64>,
    /// Aligned with `alphas`; `None` where the snapshot was thinned out.
    pub snapshots: Vec<Option<SphereMatrix>>,
}

impl SweepTrace {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    pub fn snapshot(&self, index: usize) -> Option<&SphereMatrix> {
        self.snapshots.get(index).and_then(Option::as_ref)
    }
}

/// `W <- D W D` with `D = sqrt(m) diag(W 1)^{-1/2}`.
pub fn normalize(w: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    let m = w.m();
    let a = w.as_array();
    let mut scale = Vec::with_capacity(m);
    for (i, row) in a.rows().into_iter().enumerate() {
        let s: f64 = row.iter().sum();
        if !(s > 0.0) {
            return Err(Error::ZeroRowSum(i));
        }
        scale.push((m as f64).sqrt() / s.sqrt());
    }
    // D_i * D_j is commutative, so the result stays exactly symmetric.
    let out = Array2::from_shape_fn((m, m), |(i, j)| a[[i, j]] * (scale[i] * scale[j]));
    Ok(SimilarityMatrix::from_trusted(out))
}

/// `W <- W + kappa 1 1^T`.
pub fn kappa_shift(w: &SimilarityMatrix, kappa: f64) -> Result<SimilarityMatrix> {
    if !(kappa >= 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "kappa must be finite and >= 0, got {kappa}"
        )));
    }
    if kappa == 0.0 {
        return Ok(w.clone());
    }
    Ok(SimilarityMatrix::from_trusted(
        w.as_array().mapv(|v| v + kappa),
    ))
}

/// The first `m` rows of a stack of `k x k` identity blocks: row `i` is
/// `e_{i mod k}`.
pub fn init_u0(m: usize, k: usize) -> Result<SphereMatrix> {
    if m == 0 || k == 0 {
        return Err(Error::Empty("init_u0 needs m >= 1 and k >= 1"));
    }
    let mut u = Array2::zeros((m, k));
    for i in 0..m {
        u[[i, i % k]] = 1.0;
    }
    Ok(SphereMatrix::from_trusted(u))
}

/// Runs the descending alpha-sweep on an already preprocessed similarity
/// matrix.
pub fn alpha_sweep(w: &SimilarityMatrix, params: &SweepParams) -> Result<SweepTrace> {
    params.validate()?;
    let grid = params.alpha_grid();
    sweep_steps(w, params, grid.len(), true).map(|(trace, _)| trace)
}

/// Runs the first `steps` outer steps. Returns the trace and the final `U`.
fn sweep_steps(
    w: &SimilarityMatrix,
    params: &SweepParams,
    steps: usize,
    record: bool,
) -> Result<(SweepTrace, SphereMatrix)> {
    let m = w.m();
    if m == 0 {
        return Err(Error::EmptyInstance);
    }
    let mut u = init_u0(m, params.k)?;
    let mut trace = SweepTrace::default();
    for (index, alpha) in params.alpha_grid().into_iter().take(steps).enumerate() {
        let v = build_v(w, alpha, params.eps_eta).map_err(|e| Error::AtAlpha {
            alpha,
            source: Box::new(e),
        })?;
        let mut prev = u.clone();
        for step in 0..params.n_inner {
            let next = power_step(&u, &v)?;
            if step + 1 < params.n_inner {
                u = next;
            } else {
                prev = std::mem::replace(&mut u, next);
            }
        }
        if !record {
            continue;
        }
        let eta = objective_g_change(w, u.view(), prev.view(), alpha)?.abs();
        trace.alphas.push(alpha);
        trace.etas.push(eta);
        trace.objectives.push(objective_g(w, u.view(), alpha)?);
        trace.snapshots.push(if index % params.snapshot_every == 0 {
            Some(u.clone())
        } else {
            None
        });
    }
    Ok((trace, u))
}

/// Outcome of the alpha-pick rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaPick {
    /// Index of the picked alpha in the trace.
    pub index: usize,
    /// First local maximum of eta scanning from the start (alpha near 1).
    pub right_max: Option<usize>,
    /// First local maximum of eta scanning back from the end (alpha near 0).
    pub left_max: Option<usize>,
    /// Set when no interior bracket exists and the global minimum was used.
    pub degenerate: bool,
}

/// Picks the index of the smallest eta between the first local maximum seen
/// from each end of the curve. Ties resolve to the smallest index.
///
/// When either scan runs off the end without meeting a descent, or the two
/// scans cross (only possible on a flat top), the global minimum is returned
/// and flagged as degenerate.
pub fn alpha_pick(etas: &[f64]) -> Result<AlphaPick> {
    let n = etas.len();
    if n == 0 {
        return Err(Error::Empty("eta curve"));
    }
    let argmin = |lo: usize, hi: usize| {
        let mut best = lo;
        for i in lo..=hi {
            if etas[i] < etas[best] {
                best = i;
            }
        }
        best
    };

    let right = (0..n.saturating_sub(1)).find(|&i| etas[i + 1] < etas[i]);
    let left = (1..n).rev().find(|&i| etas[i - 1] < etas[i]);
    match (right, left) {
        (Some(r), Some(l)) if r <= l => Ok(AlphaPick {
            index: argmin(r, l),
            right_max: Some(r),
            left_max: Some(l),
            degenerate: false,
        }),
        _ => Ok(AlphaPick {
            index: argmin(0, n - 1),
            right_max: right,
            left_max: left,
            degenerate: true,
        }),
    }
}

/// Result of the full pipeline.
#[derive(Debug, Clone)]
pub struct Solution {
    /// The relaxed solution at the picked alpha.
    pub u: SphereMatrix,
    pub trace: SweepTrace,
    pub pick: AlphaPick,
    pub alpha: f64,
}

/// Normalizes, kappa-shifts, sweeps and picks.
pub fn solve(w_raw: &SimilarityMatrix, params: &SweepParams) -> Result<Solution> {
    params.validate()?;
    if w_raw.m() == 0 {
        return Err(Error::EmptyInstance);
    }
    let w = kappa_shift(&normalize(w_raw)?, params.kappa)?;
    let trace = alpha_sweep(&w, params)?;
    let pick = alpha_pick(&trace.etas)?;
    let u = match trace.snapshot(pick.index) {
        Some(u) => u.clone(),
        None => sweep_steps(&w, params, pick.index + 1, false)?.1,
    };
    let alpha = trace.alphas[pick.index];
    Ok(Solution {
        u,
        trace,
        pick,
        alpha,
    })
}
