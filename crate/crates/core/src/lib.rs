//! Stackelberg meta-learning for guided cooperative control of linear-Gaussian
//! systems.
//!
//! A leader agent plans with a linear model `u^F = M (A x + B_L u^L)` of a
//! myopic follower. The model enters a finite-horizon LQG problem whose optimal
//! cost is differentiable in `M`; the leader meta-learns `M` across follower
//! types with a bilevel gradient scheme and adapts it to each type.
//!
//! Module map:
//!
//! - [`lqg`]: game data model, the true follower best response and the
//!   parametric Riccati solver.
//! - [`matdiff`]: 4D derivative tensors, star multiplication and the backward
//!   derivative recursion of the Riccati solution with respect to `M`.
//! - [`meta`]: response datasets, task losses, inner/outer loops and
//!   per-type adaptation.
//! - [`sim`]: closed-loop rollouts against the true follower, Monte-Carlo
//!   cost estimation and the experiment suites.
//! - [`io`]: configuration, RNG streams, model artifacts and CSV output.
//! - [`diagnostics`]: finite-difference checks of all analytic derivatives.

pub mod diagnostics;
pub mod error;
pub mod io;
pub mod linalg;
pub mod lqg;
pub mod matdiff;
pub mod meta;
pub mod sim;

pub use error::{Error, Result};
