//! Small dense-matrix helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute asymmetry `max |M_ij − M_ji|`.
pub fn asymmetry(m: &Matrix) -> f64 {
    (m - m.transpose()).amax()
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &Matrix) -> f64 {
    if m.is_empty() {
        return f64::INFINITY;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn frobenius_diff(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm()
}

fn norm_1(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.abs().sum()).fold(0.0, f64::max)
}

/// Inverse with a 1-norm condition estimate; fails on singular or badly
/// conditioned input.
pub fn inverse(m: &Matrix, context: &str) -> Result<Matrix> {
    let inv = m.clone().try_inverse().ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: f64::INFINITY,
    })?;
    let condition = norm_1(m) * norm_1(&inv);
    if !condition.is_finite() || condition > 1e14 {
        return Err(Error::Singular {
            context: context.to_string(),
            condition,
        });
    }
    Ok(inv)
}

/// Splits a `(n+m)×(n+m)` matrix into `(ZZ, Zu, uZ, uu)` blocks.
pub fn split_blocks(k: &Matrix, n: usize) -> (Matrix, Matrix, Matrix, Matrix) {
    let total = k.nrows();
    let m = total - n;
    (
        k.view((0, 0), (n, n)).into_owned(),
        k.view((0, n), (n, m)).into_owned(),
        k.view((n, 0), (m, n)).into_owned(),
        k.view((n, n), (m, m)).into_owned(),
    )
}

/// Inverse of [`split_blocks`].
pub fn join_blocks(zz: &Matrix, zu: &Matrix, uz: &Matrix, uu: &Matrix) -> Matrix {
    let n = zz.nrows();
    let m = uu.nrows();
    let mut k = Matrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(zz);
    k.view_mut((0, n), (n, m)).copy_from(zu);
    k.view_mut((n, 0), (m, n)).copy_from(uz);
    k.view_mut((n, n), (m, m)).copy_from(uu);
    k
}

/// `χ = (Z; u)`.
pub fn stack(z: &Vector, u: &Vector) -> Vector {
    let mut chi = Vector::zeros(z.len() + u.len());
    chi.rows_mut(0, z.len()).copy_from(z);
    chi.rows_mut(z.len(), u.len()).copy_from(u);
    chi
}

/// `½ xᵀ M x`.
pub fn half_quadratic(m: &Matrix, x: &Vector) -> f64 {
    0.5 * x.dot(&(m * x))
}

pub fn check_square(m: &Matrix, operand: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(operand, "square", format!("{}x{}", m.nrows(), m.ncols())));
    }
    Ok(())
}

pub fn check_len(v: &Vector, len: usize, operand: &str) -> Result<()> {
    if v.len() != len {
        return Err(Error::dim(operand, len, v.len()));
    }
    Ok(())
}

pub fn check_shape(m: &Matrix, rows: usize, cols: usize, operand: &str) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::dim(
            operand,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}
