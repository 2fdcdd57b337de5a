use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of meta-training, inner solves and adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Inner (and adaptation) gradient step.
    pub alpha: f64,
    /// Meta step.
    pub beta: f64,
    /// Weight of the response fitting cost.
    pub gamma: f64,
    /// Inner proximity weight `λ‖Z - M‖²`.
    pub lambda: f64,
    /// Adaptation proximity weight `η‖M - M_meta‖²`.
    pub eta: f64,
    /// Ratio of near-trajectory to uniform samples.
    pub kappa: f64,
    /// Samples per dataset draw.
    pub samples: usize,
    pub max_iter: usize,
    pub max_gd: usize,
    /// Inner stop threshold on the Frobenius norm of the gradient.
    pub eps: f64,
    pub batch_size: usize,
    /// Master seed. Run configurations set it from their top-level seed.
    #[serde(skip)]
    pub seed: u64,
    /// Uniform sampling box for every state coordinate.
    pub state_range: [f64; 2],
    /// Uniform sampling box for every leader control coordinate.
    pub control_range: [f64; 2],
    /// Std-dev of near-trajectory perturbations.
    pub sigma_nbhd: f64,
    /// `‖Z‖_F` above this aborts with a divergence error.
    pub divergence_bound: f64,
    /// `M_0` entries are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 1e-3,
            beta: 1e-3,
            gamma: 5.0,
            lambda: 100.0,
            eta: 100.0,
            kappa: 2.0,
            samples: 6,
            max_iter: 100,
            max_gd: 50,
            eps: 1e-4,
            batch_size: 5,
            seed: 0,
            state_range: [-10.0, 10.0],
            control_range: [-5.0, 5.0],
            sigma_nbhd: 0.5,
            divergence_bound: 1e6,
            init_scale: 0.1,
        }
    }
}

fn check_range(name: &str, r: [f64; 2]) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
        return Err(Error::param(name, format!("empty or non-finite range {r:?}")));
    }
    Ok(())
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [("alpha", self.alpha), ("beta", self.beta), ("eps", self.eps)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        let non_negative = [
            ("gamma", self.gamma),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("kappa", self.kappa),
            ("sigma_nbhd", self.sigma_nbhd),
            ("init_scale", self.init_scale),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be non-negative, got {v}")));
            }
        }
        if self.samples == 0 {
            return Err(Error::param("samples", "must be at least 1"));
        }
        if self.kappa > 0.0 && self.samples < 2 {
            return Err(Error::param("samples", "need at least 2 samples when kappa > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be at least 1"));
        }
        if !(self.divergence_bound > 0.0) {
            return Err(Error::param("divergence_bound", "must be positive"));
        }
        check_range("state_range", self.state_range)?;
        check_range("control_range", self.control_range)?;
        Ok(())
    }
}
