//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute asymmetry tolerance, scaled by the largest entry magnitude.
pub const SYMMETRY_TOL: f64 = 1e-9;
/// Eigenvalues down to this value still count as positive semidefinite.
pub const PSD_TOL: f64 = -1e-9;

pub fn check_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::dim(
            name,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

pub fn check_len(name: &str, v: &Vector, len: usize) -> Result<()> {
    if v.len() != len {
        return Err(Error::dim(name, len, v.len()));
    }
    Ok(())
}

pub fn check_finite(name: &str, m: &Mat) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{name} has non-finite entries")))
    }
}

pub fn asymmetry(m: &Mat) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn check_symmetric(name: &str, m: &Mat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dim(
            name,
            "square matrix",
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    let scale = m.amax().max(1.0);
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotSymmetric {
            name: name.to_string(),
            asymmetry: asym,
        });
    }
    Ok(())
}

pub fn min_eigenvalue(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Symmetric and positive semidefinite within [`PSD_TOL`].
pub fn check_psd(name: &str, m: &Mat) -> Result<()> {
    check_symmetric(name, m)?;
    let min = min_eigenvalue(m);
    if min < PSD_TOL * m.amax().max(1.0) {
        return Err(Error::NotPositiveSemidefinite {
            name: name.to_string(),
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Symmetric and positive definite (Cholesky succeeds).
pub fn check_pd(name: &str, m: &Mat) -> Result<()> {
    check_symmetric(name, m)?;
    if symmetrize(m).cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            name: name.to_string(),
        });
    }
    Ok(())
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Solves `W X = rhs` for symmetric positive definite `W` via Cholesky.
pub fn spd_solve(context: &str, w: &Mat, rhs: &Mat) -> Result<Mat> {
    let chol = symmetrize(w)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{context}: matrix is not positive definite")))?;
    Ok(chol.solve(rhs))
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn spd_inverse(context: &str, w: &Mat) -> Result<Mat> {
    let chol = symmetrize(w)
        .cholesky()
        .ok_or_else(|| Error::Singular(format!("{context}: matrix is not positive definite")))?;
    Ok(chol.inverse())
}

/// Symmetric factor `L` with `L L^T = m` for a PSD `m`; negative rounding
/// eigenvalues are clamped to zero.
pub fn psd_factor(m: &Mat) -> Mat {
    let eig = symmetrize(m).symmetric_eigen();
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * Mat::from_diagonal(&sqrt_vals)
}

pub fn quad_form(m: &Mat, x: &Vector) -> f64 {
    x.dot(&(m * x))
}

/// Trace of `a * b` without forming the product.
pub fn trace_product(a: &Mat, b: &Mat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// `|a - b|_max / max(|b|_max, floor)`.
pub fn relative_error(a: &Mat, b: &Mat, floor: f64) -> f64 {
    let diff = (a - b).amax();
    diff / b.amax().max(floor)
}
