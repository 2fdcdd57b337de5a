use crate::error::{Error, Result};
use crate::linalg::{
    check_shape, quad_form, spd_solve, symmetrize, trace_product, Mat,
};

use super::{closed_loop_matrices, FollowerType, GameSpec, ResponseParam, RiccatiSolution};

/// Finite-horizon discrete Riccati recursion for the model dynamics
/// `x_{t+1} = Ã x_t + B̃ u_t + w_t`.
///
/// `P_T = Q_Lf` and, for `t = T-1..0`,
/// `P_t = Q_L + Ãᵀ P_{t+1} Ã - Ãᵀ P_{t+1} B̃ (R_L + B̃ᵀ P_{t+1} B̃)⁻¹ B̃ᵀ P_{t+1} Ã`
/// with gain `K_t = (R_L + B̃ᵀ P_{t+1} B̃)⁻¹ B̃ᵀ P_{t+1} Ã`. Each `P_t` is
/// symmetrized after the update.
pub fn solve_riccati(
    a_tilde: &Mat,
    b_tilde: &Mat,
    q_leader: &Mat,
    r_leader: &Mat,
    q_terminal: &Mat,
    horizon: usize,
    sigma: &Mat,
) -> Result<RiccatiSolution> {
    let n = a_tilde.nrows();
    let r = b_tilde.ncols();
    check_shape("Ã", a_tilde, n, n)?;
    check_shape("B̃", b_tilde, n, r)?;
    check_shape("Q_L", q_leader, n, n)?;
    check_shape("R_L", r_leader, r, r)?;
    check_shape("Q_Lf", q_terminal, n, n)?;
    check_shape("Sigma", sigma, n, n)?;
    if horizon == 0 {
        return Err(Error::param("T", "horizon must be at least 1"));
    }

    let mut p = vec![Mat::zeros(n, n); horizon + 1];
    let mut k = vec![Mat::zeros(r, n); horizon];
    p[horizon] = symmetrize(q_terminal);
    for t in (0..horizon).rev() {
        let p_next = &p[t + 1];
        let bt_p = b_tilde.transpose() * p_next;
        let w = r_leader + &bt_p * b_tilde;
        let g = &bt_p * a_tilde;
        let gain = spd_solve("R_L + B̃ᵀ P B̃", &w, &g)?;
        let p_t = q_leader + a_tilde.transpose() * p_next * a_tilde - g.transpose() * &gain;
        p[t] = symmetrize(&p_t);
        k[t] = gain;
    }
    let res = accumulate_residues(&p, sigma)?;
    Ok(RiccatiSolution { p, k, res })
}

/// Noise residues `res_t = Σ_{j=t+1}^{T} tr(Σ P_j)`, `res_T = 0`.
pub fn accumulate_residues(p: &[Mat], sigma: &Mat) -> Result<Vec<f64>> {
    if p.is_empty() {
        return Err(Error::param("P", "need at least P_T"));
    }
    let n = sigma.nrows();
    for (t, pt) in p.iter().enumerate() {
        check_shape(&format!("P_{t}"), pt, n, n)?;
    }
    let horizon = p.len() - 1;
    let mut res = vec![0.0; horizon + 1];
    for t in (0..horizon).rev() {
        res[t] = res[t + 1] + trace_product(sigma, &p[t + 1]);
    }
    Ok(res)
}

/// Riccati solution of the leader's model game under response `M`.
pub fn model_solution(
    spec: &GameSpec,
    ftype: &FollowerType,
    m: &ResponseParam,
) -> Result<RiccatiSolution> {
    let (a_tilde, b_tilde) = closed_loop_matrices(spec, ftype, m)?;
    solve_riccati(
        &a_tilde,
        &b_tilde,
        &spec.q_leader,
        &spec.r_leader,
        &spec.q_terminal,
        spec.horizon,
        &spec.sigma,
    )
}

/// Leader's optimal expected guidance cost `x_0ᵀ P_0 x_0 + res_0` under `M`.
pub fn expected_cost(spec: &GameSpec, ftype: &FollowerType, m: &ResponseParam) -> Result<f64> {
    let sol = model_solution(spec, ftype, m)?;
    Ok(quad_form(&sol.p[0], &spec.x0) + sol.res[0])
}
