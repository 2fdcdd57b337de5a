//! Central finite differences, used as the independent oracle for every
//! analytic derivative in the crate.

use crate::error::Result;
use crate::linalg::Mat;

use super::Tensor4;

/// Default step for gradient checks.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Entrywise central differences `(f(M + h e_kl) - f(M - h e_kl)) / 2h`.
///
/// Panics if `h` is not positive.
pub fn fd_gradient<F, E>(mut f: F, m: &Mat, h: f64) -> std::result::Result<Mat, E>
where
    F: FnMut(&Mat) -> std::result::Result<f64, E>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut grad = Mat::zeros(m.nrows(), m.ncols());
    let mut probe = m.clone();
    for k in 0..m.nrows() {
        for l in 0..m.ncols() {
            let base = m[(k, l)];
            probe[(k, l)] = base + h;
            let plus = f(&probe)?;
            probe[(k, l)] = base - h;
            let minus = f(&probe)?;
            probe[(k, l)] = base;
            grad[(k, l)] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// Central-difference Jacobian of a matrix-valued map, in [`Tensor4`] layout.
pub fn fd_jacobian<F>(mut f: F, m: &Mat, h: f64) -> Result<Tensor4>
where
    F: FnMut(&Mat) -> Result<Mat>,
{
    assert!(h > 0.0, "finite-difference step must be positive");
    let (p, q) = m.shape();
    let mut probe = m.clone();
    let mut slices = Vec::with_capacity(p * q);
    for k in 0..p {
        for l in 0..q {
            let base = m[(k, l)];
            probe[(k, l)] = base + h;
            let plus = f(&probe)?;
            probe[(k, l)] = base - h;
            let minus = f(&probe)?;
            probe[(k, l)] = base;
            slices.push((plus - minus) / (2.0 * h));
        }
    }
    let (rows, cols) = slices[0].shape();
    Tensor4::from_slices(rows, cols, p, q, |k, l| Ok(slices[k * q + l].clone()))
}
