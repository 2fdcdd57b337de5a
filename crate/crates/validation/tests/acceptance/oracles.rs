//! Independent reference computations used by the acceptance run. None of
//! these call the library routines they are compared against.

use rand::Rng;
use stackmeta_core::linalg::{Mat, Vector};
use stackmeta_core::lqg::{FollowerType, GameSpec};

fn uniform<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.random_range(-scale..=scale))
}

/// `L Lᵀ / n + floor I` with `L` uniform in `[-1, 1]`.
fn psd<R: Rng>(rng: &mut R, n: usize, floor: f64) -> Mat {
    let l = uniform(rng, n, n, 1.0);
    &l * l.transpose() / n as f64 + Mat::identity(n, n) * floor
}

/// Random small game: `n ≤ 4`, leader and follower controls of size ≤ 2,
/// horizon ≤ 6.
pub fn random_instance<R: Rng>(rng: &mut R) -> (GameSpec, FollowerType) {
    let n = rng.random_range(1..=4);
    let rl = rng.random_range(1..=2);
    let rf = rng.random_range(1..=2);
    let horizon = rng.random_range(1..=6);
    let a = uniform(rng, n, n, 0.5) + Mat::identity(n, n) * 0.5;
    let spec = GameSpec::new(
        a,
        uniform(rng, n, rl, 1.0),
        psd(rng, n, 0.0) * 0.1,
        psd(rng, n, 0.1),
        psd(rng, rl, 0.2),
        psd(rng, n, 0.1),
        horizon,
        Vector::from_fn(n, |_, _| rng.random_range(-2.0..=2.0)),
    )
    .expect("valid random game");
    let follower = FollowerType::new(0, uniform(rng, n, rf, 1.0), psd(rng, n, 0.0), psd(rng, rf, 0.2))
        .expect("valid random follower");
    (spec, follower)
}

/// One-step follower cost without the constant noise term.
pub fn follower_cost(f: &FollowerType, drift: &Vector, u: &Vector) -> f64 {
    let next = drift + &f.b_follower * u;
    next.dot(&(&f.q_follower * &next)) + u.dot(&(&f.r_follower * u))
}

/// Derivative-free minimization by cyclic coordinate search, each step an
/// exact parabolic fit through three function values.
pub fn minimize_follower_cost(f: &FollowerType, drift: &Vector) -> Vector {
    let r = f.b_follower.ncols();
    let mut u = Vector::zeros(r);
    for _ in 0..100_000 {
        let mut largest = 0.0f64;
        for i in 0..r {
            let probe = |d: f64| {
                let mut v = u.clone();
                v[i] += d;
                follower_cost(f, drift, &v)
            };
            let (lo, mid, hi) = (probe(-1.0), probe(0.0), probe(1.0));
            let curvature = hi - 2.0 * mid + lo;
            let step = (lo - hi) / (2.0 * curvature);
            u[i] += step;
            largest = largest.max(step.abs());
        }
        if largest < 1e-14 {
            break;
        }
    }
    u
}

/// Riccati recursion in Joseph form, `P_t = Q + Kᵀ R K + A_clᵀ P_{t+1} A_cl`,
/// under closed-loop matrices built from `m`.
pub struct Reference {
    pub p: Vec<Mat>,
    pub k: Vec<Mat>,
    pub cost: f64,
    pub a_tilde: Mat,
    pub b_tilde: Mat,
}

pub fn reference_solution(spec: &GameSpec, f: &FollowerType, m: &Mat) -> Reference {
    let bfm = &f.b_follower * m;
    let a_tilde = &spec.a + &bfm * &spec.a;
    let b_tilde = &spec.b_leader + &bfm * &spec.b_leader;
    let t_end = spec.horizon;
    let mut p = vec![spec.q_terminal.clone(); t_end + 1];
    let mut k = vec![Mat::zeros(b_tilde.ncols(), a_tilde.nrows()); t_end];
    for t in (0..t_end).rev() {
        let next = &p[t + 1];
        let w = &spec.r_leader + b_tilde.transpose() * next * &b_tilde;
        let gain = w.try_inverse().expect("R_L + B̃ᵀPB̃ invertible") * b_tilde.transpose() * next * &a_tilde;
        let acl = &a_tilde - &b_tilde * &gain;
        p[t] = &spec.q_leader + gain.transpose() * &spec.r_leader * &gain + acl.transpose() * next * &acl;
        k[t] = gain;
    }
    let noise: f64 = p[1..].iter().map(|pj| (&spec.sigma * pj).trace()).sum();
    let cost = spec.x0.dot(&(&p[0] * &spec.x0)) + noise;
    Reference { p, k, cost, a_tilde, b_tilde }
}

/// Adjoint form of `∂J/∂M`: with the optimal gains held fixed (envelope
/// argument) and second moments `Λ_{t+1} = A_cl Λ_t A_clᵀ + Σ`,
/// `∂J/∂M = 2 Σ_t B_Fᵀ P_{t+1} A_cl,t Λ_t (A - B_L K_t)ᵀ`.
pub fn adjoint_cost_gradient(spec: &GameSpec, f: &FollowerType, m: &Mat) -> Mat {
    let r = reference_solution(spec, f, m);
    let mut lambda = &spec.x0 * spec.x0.transpose();
    let mut grad = Mat::zeros(m.nrows(), m.ncols());
    for t in 0..spec.horizon {
        let acl = &r.a_tilde - &r.b_tilde * &r.k[t];
        let open = &spec.a - &spec.b_leader * &r.k[t];
        grad += f.b_follower.transpose() * &r.p[t + 1] * &acl * &lambda * open.transpose() * 2.0;
        lambda = &acl * &lambda * acl.transpose() + &spec.sigma;
    }
    grad
}

/// Central differences of a scalar function of a matrix.
pub fn central_difference(mut f: impl FnMut(&Mat) -> f64, m: &Mat, h: f64) -> Mat {
    let mut g = Mat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let mut plus = m.clone();
            let mut minus = m.clone();
            plus[(i, j)] += h;
            minus[(i, j)] -= h;
            g[(i, j)] = (f(&plus) - f(&minus)) / (2.0 * h);
        }
    }
    g
}

pub fn relative(a: &Mat, b: &Mat) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}
