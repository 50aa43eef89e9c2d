//! The relaxed variable: matrices whose rows live on the non-negative unit
//! sphere, the row-wise projection onto that set, one conditional power
//! iteration step, and the least-squares / quadratic-form objectives.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matmul, QuadraticFormMatrix, SimilarityMatrix};

/// Allowed deviation of a row norm from 1.
pub const ROW_NORM_TOL: f64 = 1e-9;

/// An `m x k` matrix with non-negative entries and unit-norm rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Array2<f64>", into = "Array2<f64>")]
pub struct SphereMatrix {
    data: Array2<f64>,
}

impl SphereMatrix {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::Empty("sphere matrix needs k >= 1 columns"));
        }
        for (i, row) in data.rows().into_iter().enumerate() {
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0)) {
                return Err(Error::NotOnSphere {
                    row: i,
                    reason: format!("entry {v} is negative or NaN"),
                });
            }
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > ROW_NORM_TOL {
                return Err(Error::NotOnSphere {
                    row: i,
                    reason: format!("norm {norm}"),
                });
            }
        }
        Ok(Self::from_trusted(data))
    }

    pub(crate) fn from_trusted(data: Array2<f64>) -> Self {
        Self {
            data: data.as_standard_layout().into_owned(),
        }
    }

    pub fn m(&self) -> usize {
        self.data.nrows()
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
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
}

impl TryFrom<Array2<f64>> for SphereMatrix {
    type Error = Error;

    fn try_from(value: Array2<f64>) -> Result<Self> {
        Self::new(value)
    }
}

impl From<SphereMatrix> for Array2<f64> {
    fn from(value: SphereMatrix) -> Self {
        value.data
    }
}

/// A binary matrix whose rows are canonical basis vectors, stored as the
/// column index of each row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryRowStochasticMatrix {
    columns: Vec<usize>,
    k: usize,
}

impl BinaryRowStochasticMatrix {
    pub fn new(columns: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&c) = columns.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidParameter(format!(
                "column {c} out of range for k = {k}"
            )));
        }
        Ok(Self { columns, k })
    }

    pub fn from_dense(a: ArrayView2<'_, f64>) -> Result<Self> {
        let mut columns = Vec::with_capacity(a.nrows());
        for (i, row) in a.rows().into_iter().enumerate() {
            let ones: Vec<usize> = row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v == 1.0)
                .map(|(j, _)| j)
                .collect();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            if ones.len() != 1 || zeros + 1 != row.len() {
                return Err(Error::InvalidParameter(format!(
                    "row {i} is not a canonical basis vector"
                )));
            }
            columns.push(ones[0]);
        }
        Ok(Self {
            columns,
            k: a.ncols(),
        })
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn m(&self) -> usize {
        self.columns.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.columns.len(), self.k));
        for (i, &c) in self.columns.iter().enumerate() {
            out[[i, c]] = 1.0;
        }
        out
    }

    /// Binary row-stochastic matrices are also points of the non-negative sphere.
    pub fn to_sphere(&self) -> SphereMatrix {
        SphereMatrix::from_trusted(self.to_dense())
    }
}

/// Closest point of the non-negative unit sphere to `x` in the sense of
/// maximizing `<x, y>`.
///
/// Clamps negatives and normalizes; when no entry is positive the result is
/// the basis vector at the (first) largest entry.
pub fn project_row(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Empty("projection input"));
    }
    let mut y = x.to_vec();
    project_row_in_place(&mut y);
    Ok(y)
}

pub(crate) fn project_row_in_place(y: &mut [f64]) {
    let mut best = 0;
    for (i, &v) in y.iter().enumerate() {
        if v > y[best] {
            best = i;
        }
    }
    if !(y[best] > 0.0) {
        y.fill(0.0);
        y[best] = 1.0;
        return;
    }
    let mut sq = 0.0;
    for v in y.iter_mut() {
        if !(*v > 0.0) {
            *v = 0.0;
        }
        sq += *v * *v;
    }
    let norm = sq.sqrt();
    for v in y.iter_mut() {
        *v /= norm;
    }
}

fn project_rows(mut a: Array2<f64>) -> SphereMatrix {
    for mut row in a.rows_mut() {
        project_row_in_place(row.as_slice_mut().expect("standard layout"));
    }
    SphereMatrix::from_trusted(a)
}

/// One conditional power iteration: the maximizer of `tr(U^T V U')` over the
/// non-negative sphere, obtained by projecting each row of `V U`.
pub fn power_step(u: &SphereMatrix, v: &QuadraticFormMatrix) -> Result<SphereMatrix> {
    if v.m() != u.m() {
        return Err(Error::DimensionMismatch(format!(
            "V is {m}x{m} but U has {r} rows",
            m = v.m(),
            r = u.m()
        )));
    }
    Ok(project_rows(matmul(v.view(), u.view())))
}

/// `tr(U^T A U)`.
pub fn quadratic_trace(a: ArrayView2<'_, f64>, u: ArrayView2<'_, f64>) -> Result<f64> {
    if a.nrows() != u.nrows() || a.ncols() != u.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?} but U has {} rows",
            a.dim(),
            u.nrows()
        )));
    }
    let au = matmul(a, u);
    Ok(au.iter().zip(u.iter()).map(|(x, y)| x * y).sum())
}

fn column_sums(u: ArrayView2<'_, f64>) -> Vec<f64> {
    u.sum_axis(Axis(0)).to_vec()
}

/// `g(alpha, W, U) = (1 - alpha) tr(U^T W U) - alpha tr(U^T 1 1^T U)`, with the
/// second trace evaluated as the squared norm of the column sums of `U`.
pub fn objective_g(w: &SimilarityMatrix, u: ArrayView2<'_, f64>, alpha: f64) -> Result<f64> {
    let wuu = quadratic_trace(w.view(), u)?;
    let s = column_sums(u);
    let ones = s.iter().map(|v| v * v).sum::<f64>();
    Ok((1.0 - alpha) * wuu - alpha * ones)
}

/// `g(alpha, W, U) - g(alpha, W, U_prev)` evaluated in factored form,
/// `(1 - alpha) tr((U - U_prev)^T W (U + U_prev)) - alpha <s - s_prev, s + s_prev>`
/// with `s` the column sums. This avoids the cancellation of subtracting two
/// nearly equal objective values, and is exactly zero when `U == U_prev`.
pub fn objective_g_change(
    w: &SimilarityMatrix,
    u: ArrayView2<'_, f64>,
    u_prev: ArrayView2<'_, f64>,
    alpha: f64,
) -> Result<f64> {
    if u.dim() != u_prev.dim() {
        return Err(Error::DimensionMismatch(format!(
            "U is {:?} but U_prev is {:?}",
            u.dim(),
            u_prev.dim()
        )));
    }
    if u == u_prev {
        return Ok(0.0);
    }
    let diff = &u - &u_prev;
    let sum = &u + &u_prev;
    let first = quadratic_trace_pair(w.view(), diff.view(), sum.view())?;
    let ds = column_sums(diff.view());
    let ss = column_sums(sum.view());
    let second: f64 = ds.iter().zip(&ss).map(|(a, b)| a * b).sum();
    Ok((1.0 - alpha) * first - alpha * second)
}

/// `tr(X^T A Y)`.
fn quadratic_trace_pair(
    a: ArrayView2<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
) -> Result<f64> {
    if a.nrows() != x.nrows() || a.ncols() != y.nrows() {
        return Err(Error::DimensionMismatch("tr(X^T A Y)".into()));
    }
    let ay = matmul(a, y);
    Ok(ay.iter().zip(x.iter()).map(|(p, q)| p * q).sum())
}

/// `f(beta, W, U) = ||W - beta U U^T||_F^2`.
pub fn objective_f(w: &SimilarityMatrix, u: ArrayView2<'_, f64>, beta: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive, got {beta}"
        )));
    }
    if u.nrows() != w.m() {
        return Err(Error::DimensionMismatch(format!(
            "W is {m}x{m} but U has {r} rows",
            m = w.m(),
            r = u.nrows()
        )));
    }
    let uut = matmul(u, u.t());
    Ok(w.as_array()
        .iter()
        .zip(uut.iter())
        .map(|(a, b)| {
            let r = a - beta * b;
            r * r
        })
        .sum())
}

/// The `alpha` for which maximizing `g` over binary row-stochastic matrices
/// is equivalent to minimizing `f(beta, .)`: `beta^2 / (beta^2 + 2 beta)`.
pub fn alpha_from_beta(beta: f64) -> Result<f64> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be positive and finite, got {beta}"
        )));
    }
    Ok(beta / (beta + 2.0))
}
