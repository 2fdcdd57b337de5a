//! Matrix calculus for the parametric Riccati recursion.
//!
//! Derivatives of matrix-valued maps `f: R^{p×q} → R^{m×n}` are stored as
//! [`Tensor4`] values in the direct block layout: outer index `(i, j)` picks
//! `f_ij`, and the inner `p×q` block holds `∂f_ij/∂X`. The star products
//! [`star_left`] / [`star_right`] multiply a plain matrix against the outer
//! axes, which gives the product rule `D(YZ) = DY ⋆ Z + Y ⋆ DZ`.
//!
//! [`d_riccati`] differentiates the backward recursion with respect to the
//! response parameter `M`, starting from `∂P_T/∂M = 0`.

mod closed_loop;
pub mod fd;
mod riccati;
mod tensor;

pub use closed_loop::d_closed_loop;
pub use fd::{fd_gradient, fd_jacobian, DEFAULT_FD_STEP};
pub use riccati::{d_expected_cost, d_riccati, RiccatiDerivative};
pub use tensor::{d_identity, d_inverse, star_left, star_right, Tensor4};
