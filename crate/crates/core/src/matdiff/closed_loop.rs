use crate::error::Result;
use crate::lqg::{FollowerType, GameSpec};

use super::Tensor4;

/// Derivatives of `Ã = A + B_F M A` and `B̃ = B_L + B_F M B_L` with respect
/// to `M`. Both are constant in `M`.
///
/// `∂Ã_ij/∂M_kl = B_F[i,k] · A[l,j]`, so block `(i, j)` is the outer product
/// of row `i` of `B_F` with column `j` of `A`; the identity tensor
/// `D_M M` is never materialized.
pub fn d_closed_loop(spec: &GameSpec, ftype: &FollowerType) -> Result<(Tensor4, Tensor4)> {
    ftype.check_compatible(spec)?;
    let b_f = &ftype.b_follower;
    Ok((
        sandwich_identity(b_f, &spec.a),
        sandwich_identity(b_f, &spec.b_leader),
    ))
}

/// `U ⋆ D_M M ⋆ V` for `U ∈ R^{m×p}`, `M ∈ R^{p×q}`, `V ∈ R^{q×n}`.
fn sandwich_identity(u: &crate::linalg::Mat, v: &crate::linalg::Mat) -> Tensor4 {
    let (m, p) = u.shape();
    let (q, n) = v.shape();
    let mut out = Tensor4::zeros(m, n, p, q);
    for i in 0..m {
        for k in 0..p {
            let uik = u[(i, k)];
            if uik == 0.0 {
                continue;
            }
            for j in 0..n {
                for l in 0..q {
                    out.set(i, j, k, l, uik * v[(l, j)]);
                }
            }
        }
    }
    out
}
