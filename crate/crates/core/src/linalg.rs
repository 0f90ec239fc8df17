//! Small dense linear-algebra helpers shared by the space, operator and solver code.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

pub(crate) fn cholesky(m: &Matrix, what: &str) -> Result<Cholesky<f64, Dyn>> {
    if !is_symmetric(m, 1e-10) {
        return Err(Error::NotPositiveDefinite(format!("{what} is not symmetric")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
}

pub(crate) fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Eigenvalues of the symmetric pencil `a x = lambda b x`, `b` given by its Cholesky factor,
/// sorted ascending.
pub(crate) fn pencil_eigenvalues(a: &Matrix, b: &Cholesky<f64, Dyn>) -> Vector {
    let l = b.l();
    let n = a.nrows();
    // C = L^{-1} A L^{-T}
    let mut linv_a = a.clone();
    l.solve_lower_triangular_mut(&mut linv_a);
    let mut c = linv_a.transpose();
    l.solve_lower_triangular_mut(&mut c);
    let c = (&c + c.transpose()) * 0.5;
    let mut eig = c.symmetric_eigen().eigenvalues;
    let slice = eig.as_mut_slice();
    slice.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    debug_assert_eq!(eig.len(), n);
    eig
}

/// `v^T` as a dynamic `1 x n` matrix.
pub(crate) fn row_matrix(v: &Vector) -> Matrix {
    Matrix::from_row_slice(1, v.len(), v.as_slice())
}

pub(crate) fn quad_form(m: &Matrix, v: &Vector) -> f64 {
    v.dot(&(m * v))
}

pub(crate) fn uniform_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> Vector {
    Vector::from_fn(dim, |_, _| scale * rng.random_range(-1.0..=1.0))
}

pub(crate) fn check_dim(what: &'static str, expected: usize, v: &Vector) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}
