//! Dense linear-algebra helpers shared by the solver and weight techniques.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub(crate) fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn to_ndarray(a: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Largest eigenvalue of a symmetric positive-semidefinite matrix by power
/// iteration with a deterministic start. Returns 0 for the zero matrix.
pub(crate) fn largest_symmetric_eigenvalue(g: &Array2<f64>) -> f64 {
    let m = g.ncols();
    debug_assert_eq!(g.nrows(), m);
    if m == 0 {
        return 0.0;
    }
    let mut v = Array1::from_elem(m, 1.0 / (m as f64).sqrt());
    let mut eig = 0.0f64;
    for _ in 0..500 {
        let w = g.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm <= f64::MIN_POSITIVE {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - eig).abs() <= 1e-12 * next.abs().max(1.0) {
            return next;
        }
        eig = next;
    }
    eig
}

pub(crate) struct CholeskyFactor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl CholeskyFactor {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        nalgebra::Cholesky::new(m)
            .map(|chol| CholeskyFactor { chol })
            .ok_or_else(|| Error::Numeric("Cholesky factorization failed".into()))
    }

    pub fn solve_in_place(&self, b: &mut DVector<f64>) {
        self.chol.solve_mut(b);
    }
}

/// Thin SVD of the column-centered matrix. Returns the singular values in
/// descending order and the right singular vectors as p×r loading columns,
/// truncated to the numerical rank.
pub(crate) fn centered_svd(x: &Array2<f64>) -> Result<(Array1<f64>, Array2<f64>)> {
    let (n, p) = (x.nrows(), x.ncols());
    let means = x.mean_axis(ndarray::Axis(0)).expect("nonempty matrix");
    let mut centered = x.clone();
    for mut row in centered.rows_mut() {
        row -= &means;
    }
    let svd = to_nalgebra(&centered).svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Numeric("SVD did not produce right singular vectors".into()))?;
    let s = svd.singular_values;
    debug_assert!(s.iter().zip(s.iter().skip(1)).all(|(a, b)| a >= b));
    let cutoff = s.max() * (n.max(p) as f64) * f64::EPSILON;
    let rank = s.iter().filter(|&&sv| sv > cutoff).count();
    if rank == 0 {
        return Err(Error::Numeric(
            "matrix has rank 0 after centering (all columns constant)".into(),
        ));
    }
    let singular = Array1::from_iter(s.iter().take(rank).copied());
    let loadings = Array2::from_shape_fn((p, rank), |(j, k)| v_t[(k, j)]);
    Ok((singular, loadings))
}

/// Thin QR of a tall matrix: Q is n×d with orthonormal columns, R is d×d.
pub(crate) fn thin_qr(t: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
    let qr = to_nalgebra(t).qr();
    let q = qr.q();
    let r = qr.r();
    (to_ndarray(&q), to_ndarray(&r))
}
