use crate::error::Result;
use crate::linalg::{spd_inverse, Mat};
use crate::lqg::{closed_loop_matrices, model_solution, FollowerType, GameSpec, ResponseParam, RiccatiSolution};

use super::{d_closed_loop, d_inverse, star_left, star_right, Tensor4};

/// Riccati solution under `M` together with its derivatives with respect
/// to `M`.
#[derive(Debug, Clone)]
pub struct RiccatiDerivative {
    pub solution: RiccatiSolution,
    /// `∂P_t/∂M` for `t = 0..T`, each of shape `(n×n)×(r_F×n)`.
    pub dp: Vec<Tensor4>,
    /// `∂res_t/∂M` for `t = 0..T`, each `r_F×n`.
    pub dres: Vec<Mat>,
}

/// Differentiates the backward Riccati recursion with respect to `M`.
///
/// With `G = B̃ᵀ P' Ã` and `W = R_L + B̃ᵀ P' B̃` the update reads
/// `P = Q_L + Ãᵀ P' Ã - Gᵀ W⁻¹ G`, and every product is expanded with the
/// star product rule:
///
/// ```text
/// D(Ãᵀ P' Ã) = DÃᵀ ⋆ (P'Ã) + Ãᵀ ⋆ DP' ⋆ Ã + (ÃᵀP') ⋆ DÃ
/// DG         = DB̃ᵀ ⋆ (P'Ã) + B̃ᵀ ⋆ DP' ⋆ Ã + (B̃ᵀP') ⋆ DÃ
/// DW         = DB̃ᵀ ⋆ (P'B̃) + B̃ᵀ ⋆ DP' ⋆ B̃ + (B̃ᵀP') ⋆ DB̃
/// D(GᵀW⁻¹G)  = DGᵀ ⋆ (W⁻¹G) + Gᵀ ⋆ DW⁻¹ ⋆ G + (GᵀW⁻¹) ⋆ DG
/// ```
///
/// `∂P_T/∂M = 0`; each `∂P_t/∂M` is symmetrized over its outer axes like the
/// primal `P_t`.
pub fn d_riccati(spec: &GameSpec, ftype: &FollowerType, m: &ResponseParam) -> Result<RiccatiDerivative> {
    let (a_t, b_t) = closed_loop_matrices(spec, ftype, m)?;
    let solution = model_solution(spec, ftype, m)?;
    let (da, db) = d_closed_loop(spec, ftype)?;
    let da_t = da.transpose_outer();
    let db_t = db.transpose_outer();
    let a_tt = a_t.transpose();
    let b_tt = b_t.transpose();

    let n = spec.state_dim();
    let (p_dim, q_dim) = (ftype.control_dim(), n);
    let horizon = spec.horizon;

    let mut dp = vec![Tensor4::zeros(n, n, p_dim, q_dim); horizon + 1];
    for t in (0..horizon).rev() {
        let p_next = &solution.p[t + 1];
        let dp_next = &dp[t + 1];

        let p_a = p_next * &a_t;
        let p_b = p_next * &b_t;
        let at_p = &a_tt * p_next;
        let bt_p = &b_tt * p_next;

        let at_dp = star_right(&a_tt, dp_next)?;
        let bt_dp = star_right(&b_tt, dp_next)?;

        let mut d_quad = star_left(&da_t, &p_a)?;
        d_quad += &star_left(&at_dp, &a_t)?;
        d_quad += &star_right(&at_p, &da)?;

        let g = &bt_p * &a_t;
        let mut d_g = star_left(&db_t, &p_a)?;
        d_g += &star_left(&bt_dp, &a_t)?;
        d_g += &star_right(&bt_p, &da)?;

        let w = &spec.r_leader + &bt_p * &b_t;
        let mut d_w = star_left(&db_t, &p_b)?;
        d_w += &star_left(&bt_dp, &b_t)?;
        d_w += &star_right(&bt_p, &db)?;

        let w_inv = spd_inverse("R_L + B̃ᵀ P B̃", &w)?;
        let d_w_inv = d_inverse(&w, &d_w)?;
        let w_inv_g = &w_inv * &g;
        let gt = g.transpose();
        let gt_w_inv = &gt * &w_inv;

        let mut d_gain_term = star_left(&d_g.transpose_outer(), &w_inv_g)?;
        d_gain_term += &star_left(&star_right(&gt, &d_w_inv)?, &g)?;
        d_gain_term += &star_right(&gt_w_inv, &d_g)?;

        dp[t] = (&d_quad - &d_gain_term).symmetrize_outer();
    }

    let mut dres = vec![Mat::zeros(p_dim, q_dim); horizon + 1];
    for t in (0..horizon).rev() {
        dres[t] = &dres[t + 1] + dp[t + 1].trace_with(&spec.sigma);
    }

    Ok(RiccatiDerivative { solution, dp, dres })
}

/// Gradient of `x_0ᵀ P_0 x_0 + res_0` with respect to `M`.
pub fn d_expected_cost(spec: &GameSpec, ftype: &FollowerType, m: &ResponseParam) -> Result<Mat> {
    let d = d_riccati(spec, ftype, m)?;
    Ok(d.dp[0].quadratic_form(&spec.x0) + &d.dres[0])
}
