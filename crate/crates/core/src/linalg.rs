//! Dense symmetric matrix primitives: validated similarity matrices,
//! smallest-eigenvalue estimation and assembly of the shifted quadratic form
//! `V(alpha) = delta * I + (1 - alpha) * W - alpha * 1 1^T`.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when checking symmetry.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Default relative accuracy of [`smallest_eigenvalue`].
pub const DEFAULT_EIG_TOL: f64 = 1e-15;

const BISECTION_CAP: usize = 4096;

/// A symmetric, entrywise non-negative `m x m` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Array2<f64>", into = "Array2<f64>")]
pub struct SimilarityMatrix {
    data: Array2<f64>,
}

impl SimilarityMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        check_symmetric(data.view())?;
        for ((i, j), &v) in data.indexed_iter() {
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: i,
                    col: j,
                    value: v,
                });
            }
        }
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
        })
    }

    /// Builds from dense rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let m = rows.len();
        let mut data = Array2::zeros((m, m));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::NotSquare(m, row.len()));
            }
            for (j, &v) in row.iter().enumerate() {
                data[[i, j]] = v;
            }
        }
        Self::new(data)
    }

    pub fn identity(m: usize) -> Self {
        Self {
            data: Array2::eye(m),
        }
    }

    pub fn ones(m: usize) -> Self {
        Self {
            data: Array2::ones((m, m)),
        }
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    pub(crate) fn from_trusted(data: Array2<f64>) -> Self {
        debug_assert!(data.is_square());
        Self { data }
    }
}

impl TryFrom<Array2<f64>> for SimilarityMatrix {
    type Error = Error;

    fn try_from(value: Array2<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SimilarityMatrix> for Array2<f64> {
    fn from(value: SimilarityMatrix) -> Self {
        value.data
    }
}

/// `V(alpha) = delta * I + (1 - alpha) * W - alpha * 1 1^T`, shifted so that it
/// is positive semi-definite.
#[derive(Debug, Clone)]
pub struct QuadraticFormMatrix {
    data: Array2<f64>,
    alpha: f64,
    delta: f64,
}

impl QuadraticFormMatrix {
    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn as_array(&self) -> &Array2<f64> {
        &self.data
    }

    /// Wraps an arbitrary symmetric matrix. Used to run power iterations on
    /// matrices that do not come from a similarity matrix.
    pub fn from_symmetric(data: Array2<f64>) -> Result<Self> {
        check_symmetric(data.view())?;
        Ok(Self {
            data: data.as_standard_layout().into_owned(),
            alpha: f64::NAN,
            delta: 0.0,
        })
    }
}

/// Verifies that `a` is square, finite and symmetric within
/// [`SYMMETRY_TOL`] relative to its largest absolute entry.
pub fn check_symmetric(a: ArrayView2<'_, f64>) -> Result<()> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::NotSquare(r, c));
    }
    let mut scale: f64 = 0.0;
    for ((i, j), &v) in a.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i, j));
        }
        scale = scale.max(v.abs());
    }
    let tol = SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE);
    for i in 0..r {
        for j in (i + 1)..r {
            let diff = (a[[i, j]] - a[[j, i]]).abs();
            if diff > tol {
                return Err(Error::NotSymmetric {
                    row: i,
                    col: j,
                    diff,
                });
            }
        }
    }
    Ok(())
}

/// Dense product `a * b`.
///
/// Every output row is accumulated in the same order over the shared
/// dimension, so two equal rows of `a` always give bitwise equal output rows.
pub fn matmul(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let (m, n) = a.dim();
    let (n2, k) = b.dim();
    assert_eq!(n, n2, "inner dimensions differ");
    let b = b.as_standard_layout();
    let bs = b.as_slice().expect("standard layout");
    let mut out = Array2::<f64>::zeros((m, k));
    {
        let os = out.as_slice_mut().expect("standard layout");
        for i in 0..m {
            let orow = &mut os[i * k..(i + 1) * k];
            for l in 0..n {
                let s = a[[i, l]];
                if s == 0.0 {
                    continue;
                }
                let brow = &bs[l * k..(l + 1) * k];
                for (o, &bv) in orow.iter_mut().zip(brow) {
                    *o += s * bv;
                }
            }
        }
    }
    out
}

/// Upper bound on `max |lambda|` from Gershgorin discs (max absolute row sum).
pub fn spectral_scale(a: ArrayView2<'_, f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest eigenvalue of a symmetric matrix, accurate to
/// `tol * max(1, |lambda_min|)`.
///
/// The matrix is reduced to tridiagonal form by Householder reflections and
/// the smallest eigenvalue is isolated by Sturm-sequence bisection.
pub fn smallest_eigenvalue(a: ArrayView2<'_, f64>, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eigenvalue tolerance must be positive, got {tol}"
        )));
    }
    check_symmetric(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Empty("matrix"));
    }
    let (d, e) = tridiagonalize(a);
    smallest_tridiagonal_eigenvalue(&d, &e, tol)
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// Returns the diagonal and the sub-diagonal.
fn tridiagonalize(a: ArrayView2<'_, f64>) -> (Vec<f64>, Vec<f64>) {
    let n = a.nrows();
    // Symmetrize on the way in; the reduction only reads the lower triangle
    // conceptually but updates both halves.
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            w[i * n + j] = 0.5 * (a[[i, j]] + a[[j, i]]);
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for col in 0..n.saturating_sub(2) {
        let len = n - col - 1;
        let x = |r: usize| w[(col + 1 + r) * n + col];
        let norm = (0..len).map(|r| x(r) * x(r)).sum::<f64>().sqrt();
        d[col] = w[col * n + col];
        if norm == 0.0 {
            e[col] = 0.0;
            continue;
        }
        let x0 = x(0);
        let alpha = if x0 > 0.0 { -norm } else { norm };
        for r in 0..len {
            v[r] = x(r);
        }
        v[0] -= alpha;
        let vnorm = v[..len].iter().map(|t| t * t).sum::<f64>().sqrt();
        e[col] = alpha;
        if vnorm == 0.0 {
            continue;
        }
        for t in v[..len].iter_mut() {
            *t /= vnorm;
        }
        // p = A_sub v, K = v^T p, q = p - K v, A_sub -= 2 (v q^T + q v^T)
        let off = col + 1;
        for r in 0..len {
            let row = &w[(off + r) * n + off..(off + r) * n + off + len];
            p[r] = row.iter().zip(&v[..len]).map(|(a, b)| a * b).sum();
        }
        let kk: f64 = p[..len].iter().zip(&v[..len]).map(|(a, b)| a * b).sum();
        for r in 0..len {
            p[r] -= kk * v[r];
        }
        for r in 0..len {
            let (vr, qr) = (v[r], p[r]);
            let row = &mut w[(off + r) * n + off..(off + r) * n + off + len];
            for (c, cell) in row.iter_mut().enumerate() {
                *cell -= 2.0 * (vr * p[c] + qr * v[c]);
            }
        }
    }
    if n >= 2 {
        d[n - 2] = w[(n - 2) * n + (n - 2)];
        e[n - 2] = w[(n - 1) * n + (n - 2)];
    }
    d[n - 1] = w[(n - 1) * n + (n - 1)];
    (d, e)
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let denom = if q == 0.0 {
            f64::EPSILON * (e[i - 1].abs() + f64::MIN_POSITIVE)
        } else {
            q
        };
        q = d[i] - x - e[i - 1] * e[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn smallest_tridiagonal_eigenvalue(d: &[f64], e: &[f64], tol: f64) -> Result<f64> {
    let n = d.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::NoConvergence {
            iterations: 0,
            best: f64::NAN,
        });
    }
    // Widen slightly so that the bracket is strict.
    let pad = f64::EPSILON * (lo.abs().max(hi.abs()) + 1.0) * 4.0;
    lo -= pad;
    hi += pad;
    for _ in 0..BISECTION_CAP {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol * 0.5 * lo.abs().min(hi.abs()).max(1.0) || mid <= lo || mid >= hi {
            return Ok(mid);
        }
        if sturm_count(d, e, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::NoConvergence {
        iterations: BISECTION_CAP,
        best: 0.5 * (lo + hi),
    })
}

/// `(1 - alpha) * W - alpha * 1 1^T`.
pub fn unshifted_form(w: &SimilarityMatrix, alpha: f64) -> Array2<f64> {
    w.as_array().mapv(|v| (1.0 - alpha) * v - alpha)
}

/// Assembles `V(alpha)` with `delta = max(0, -lambda_min) + eps_eta`, where
/// `lambda_min` is the smallest eigenvalue of `(1 - alpha) W - alpha 1 1^T`.
pub fn build_v(w: &SimilarityMatrix, alpha: f64, eps_eta: f64) -> Result<QuadraticFormMatrix> {
    build_v_with_tol(w, alpha, eps_eta, DEFAULT_EIG_TOL)
}

pub fn build_v_with_tol(
    w: &SimilarityMatrix,
    alpha: f64,
    eps_eta: f64,
    tol: f64,
) -> Result<QuadraticFormMatrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in [0, 1], got {alpha}"
        )));
    }
    if !(eps_eta >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps_eta must be non-negative, got {eps_eta}"
        )));
    }
    let mut data = unshifted_form(w, alpha);
    let lambda_min = smallest_eigenvalue(data.view(), tol)?;
    // Eigenvalues within the rounding error of the reduction count as zero.
    let noise = data.nrows() as f64 * f64::EPSILON * spectral_scale(data.view());
    let shift = if lambda_min < -noise {
        -lambda_min
    } else {
        0.0
    };
    let delta = shift + eps_eta;
    if delta != 0.0 {
        for i in 0..data.nrows() {
            data[[i, i]] += delta;
        }
    }
    Ok(QuadraticFormMatrix { data, alpha, delta })
}
