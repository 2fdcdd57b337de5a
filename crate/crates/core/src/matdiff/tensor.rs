use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};

/// Dense 4D derivative tensor `D_X f ∈ R^{(m×n)×(p×q)}`.
///
/// Entry `(i, j, k, l)` holds `∂f_ij / ∂X_kl`. The outer pair `(i, j)`
/// indexes the `m×n` shape of `f`; each outer entry owns a `p×q` inner block
/// shaped like `X`. Storage is row-major over `(i, j, k, l)`, so the flat
/// offset is `((i·n + j)·p + k)·q + l` and every inner block is a contiguous
/// row-major run of `p·q` values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    /// Panics if any dimension is zero.
    pub fn zeros(m: usize, n: usize, p: usize, q: usize) -> Self {
        assert!(
            m > 0 && n > 0 && p > 0 && q > 0,
            "Tensor4 dimensions must be positive, got ({m}, {n}, {p}, {q})"
        );
        Self {
            dims: [m, n, p, q],
            data: vec![0.0; m * n * p * q],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param("Tensor4 dims", "must be positive"));
        }
        let len: usize = dims.iter().product();
        if data.len() != len {
            return Err(Error::dim("Tensor4 data", len, data.len()));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Tensor4 entries".into()));
        }
        Ok(Self { dims, data })
    }

    /// Assembles a tensor from its parameter slices: `slice(k, l)` is the
    /// `m×n` matrix `∂f/∂X_kl`.
    pub fn from_slices<F>(m: usize, n: usize, p: usize, q: usize, mut slice: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<Mat>,
    {
        let mut out = Self::zeros(m, n, p, q);
        for k in 0..p {
            for l in 0..q {
                let s = slice(k, l)?;
                out.set_slice(k, l, &s)?;
            }
        }
        Ok(out)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn outer_shape(&self) -> (usize, usize) {
        (self.dims[0], self.dims[1])
    }

    pub fn inner_shape(&self) -> (usize, usize) {
        (self.dims[2], self.dims[3])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    fn block_len(&self) -> usize {
        self.dims[2] * self.dims[3]
    }

    fn offset(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        let [_, n, p, q] = self.dims;
        ((i * n + j) * p + k) * q + l
    }

    pub fn get(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        self.data[self.offset(i, j, k, l)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, l: usize, value: f64) {
        let off = self.offset(i, j, k, l);
        self.data[off] = value;
    }

    fn block_slice(&self, i: usize, j: usize) -> &[f64] {
        let start = self.offset(i, j, 0, 0);
        &self.data[start..start + self.block_len()]
    }

    fn block_slice_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let start = self.offset(i, j, 0, 0);
        let len = self.block_len();
        &mut self.data[start..start + len]
    }

    /// Inner block `∂f_ij / ∂X` as a `p×q` matrix.
    pub fn block(&self, i: usize, j: usize) -> Mat {
        let (p, q) = self.inner_shape();
        Mat::from_row_slice(p, q, self.block_slice(i, j))
    }

    pub fn set_block(&mut self, i: usize, j: usize, block: &Mat) -> Result<()> {
        let (p, q) = self.inner_shape();
        if block.shape() != (p, q) {
            return Err(Error::dim("Tensor4 block", format!("{p}x{q}"), format!("{:?}", block.shape())));
        }
        let dst = self.block_slice_mut(i, j);
        for k in 0..p {
            for l in 0..q {
                dst[k * q + l] = block[(k, l)];
            }
        }
        Ok(())
    }

    /// Parameter slice `∂f / ∂X_kl` as an `m×n` matrix.
    pub fn slice(&self, k: usize, l: usize) -> Mat {
        let (m, n) = self.outer_shape();
        Mat::from_fn(m, n, |i, j| self.get(i, j, k, l))
    }

    pub fn set_slice(&mut self, k: usize, l: usize, slice: &Mat) -> Result<()> {
        let (m, n) = self.outer_shape();
        if slice.shape() != (m, n) {
            return Err(Error::dim("Tensor4 slice", format!("{m}x{n}"), format!("{:?}", slice.shape())));
        }
        for i in 0..m {
            for j in 0..n {
                self.set(i, j, k, l, slice[(i, j)]);
            }
        }
        Ok(())
    }

    /// Derivative of `fᵀ`: block `(i, j)` of the result is block `(j, i)`.
    pub fn transpose_outer(&self) -> Self {
        let [m, n, p, q] = self.dims;
        let mut out = Self::zeros(n, m, p, q);
        for i in 0..m {
            for j in 0..n {
                out.block_slice_mut(j, i).copy_from_slice(self.block_slice(i, j));
            }
        }
        out
    }

    /// `(U + Uᵀ) / 2` over the outer axes; requires a square outer shape.
    pub fn symmetrize_outer(&self) -> Self {
        let [m, n, _, _] = self.dims;
        assert_eq!(m, n, "symmetrize_outer needs a square outer shape");
        let mut out = self.clone();
        for i in 0..m {
            for j in (i + 1)..n {
                let (a, b) = (self.block_slice(i, j), self.block_slice(j, i));
                let avg: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                out.block_slice_mut(i, j).copy_from_slice(&avg);
                out.block_slice_mut(j, i).copy_from_slice(&avg);
            }
        }
        out
    }

    /// `Σ_ij x_i x_j U_ij,:`, i.e. the derivative of `xᵀ f x` for constant `x`.
    pub fn quadratic_form(&self, x: &Vector) -> Mat {
        let [m, n, p, q] = self.dims;
        assert!(x.len() == m && x.len() == n, "quadratic_form dimension mismatch");
        let mut acc = vec![0.0; p * q];
        for i in 0..m {
            for j in 0..n {
                let w = x[i] * x[j];
                if w != 0.0 {
                    for (a, b) in acc.iter_mut().zip(self.block_slice(i, j)) {
                        *a += w * b;
                    }
                }
            }
        }
        Mat::from_row_slice(p, q, &acc)
    }

    /// `Σ_ij S_ji U_ij,:`, i.e. the derivative of `tr(S f)` for constant `S`.
    pub fn trace_with(&self, s: &Mat) -> Mat {
        let [m, n, p, q] = self.dims;
        assert!(s.nrows() == n && s.ncols() == m, "trace_with dimension mismatch");
        let mut acc = vec![0.0; p * q];
        for i in 0..m {
            for j in 0..n {
                let w = s[(j, i)];
                if w != 0.0 {
                    for (a, b) in acc.iter_mut().zip(self.block_slice(i, j)) {
                        *a += w * b;
                    }
                }
            }
        }
        Mat::from_row_slice(p, q, &acc)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims, other.dims, "Tensor4 shape mismatch");
        Self {
            dims: self.dims,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

impl Add for &Tensor4 {
    type Output = Tensor4;
    fn add(self, rhs: &Tensor4) -> Tensor4 {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Tensor4 {
    type Output = Tensor4;
    fn sub(self, rhs: &Tensor4) -> Tensor4 {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl AddAssign<&Tensor4> for Tensor4 {
    fn add_assign(&mut self, rhs: &Tensor4) {
        assert_eq!(self.dims, rhs.dims, "Tensor4 shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl Mul<f64> for &Tensor4 {
    type Output = Tensor4;
    fn mul(self, rhs: f64) -> Tensor4 {
        Tensor4 {
            dims: self.dims,
            data: self.data.iter().map(|v| v * rhs).collect(),
        }
    }
}

impl Neg for &Tensor4 {
    type Output = Tensor4;
    fn neg(self) -> Tensor4 {
        self * -1.0
    }
}

/// `W = U ⋆ V` for a tensor `U ∈ R^{(m×r)×(p×q)}` and a matrix
/// `V ∈ R^{r×n}`: `W_ij,: = Σ_s U_is,: V_sj`.
pub fn star_left(u: &Tensor4, v: &Mat) -> Result<Tensor4> {
    let [m, r, p, q] = u.dims;
    if v.nrows() != r {
        return Err(Error::dim("star_left inner dimension", r, v.nrows()));
    }
    let n = v.ncols();
    let blk = p * q;
    let mut out = Tensor4::zeros(m, n, p, q);
    for i in 0..m {
        for s in 0..r {
            let src = u.block_slice(i, s);
            if src.iter().all(|&x| x == 0.0) {
                continue;
            }
            for j in 0..n {
                let w = v[(s, j)];
                if w == 0.0 {
                    continue;
                }
                let start = (i * n + j) * blk;
                for (d, x) in out.data[start..start + blk].iter_mut().zip(src) {
                    *d += w * x;
                }
            }
        }
    }
    Ok(out)
}

/// `W = U ⋆ V` for a matrix `U ∈ R^{m×r}` and a tensor
/// `V ∈ R^{(r×n)×(p×q)}`: `W_ij,: = Σ_s U_is V_sj,:`.
pub fn star_right(u: &Mat, v: &Tensor4) -> Result<Tensor4> {
    let [r, n, p, q] = v.dims;
    if u.ncols() != r {
        return Err(Error::dim("star_right inner dimension", r, u.ncols()));
    }
    let m = u.nrows();
    let blk = p * q;
    let mut out = Tensor4::zeros(m, n, p, q);
    for i in 0..m {
        for s in 0..r {
            let w = u[(i, s)];
            if w == 0.0 {
                continue;
            }
            let src = &v.data[s * n * blk..(s + 1) * n * blk];
            let dst = &mut out.data[i * n * blk..(i + 1) * n * blk];
            for (d, x) in dst.iter_mut().zip(src) {
                *d += w * x;
            }
        }
    }
    Ok(out)
}

/// `D_X X` for `X ∈ R^{p×q}`: entry `(i, j, k, l)` is 1 iff `i = k` and `j = l`.
pub fn d_identity(p: usize, q: usize) -> Tensor4 {
    let mut out = Tensor4::zeros(p, q, p, q);
    for i in 0..p {
        for j in 0..q {
            out.set(i, j, i, j, 1.0);
        }
    }
    out
}

/// Derivative of `W⁻¹` given `dW = D_X W`.
///
/// Each parameter slice is `-W⁻¹ (∂W/∂X_kl) W⁻¹`; the slices are then
/// scattered back into the block layout.
pub fn d_inverse(w: &Mat, dw: &Tensor4) -> Result<Tensor4> {
    let r = w.nrows();
    if w.ncols() != r {
        return Err(Error::dim("d_inverse W", "square matrix", format!("{}x{}", r, w.ncols())));
    }
    let [m, n, p, q] = dw.dims;
    if m != r || n != r {
        return Err(Error::dim("d_inverse dW outer shape", format!("{r}x{r}"), format!("{m}x{n}")));
    }
    let w_inv = w
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("d_inverse: W is not invertible".into()))?;
    Tensor4::from_slices(r, r, p, q, |k, l| Ok(-(&w_inv * dw.slice(k, l) * &w_inv)))
}
