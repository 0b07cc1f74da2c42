//! Solver configuration, training state and per-iteration metrics.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::TransportCost;

/// Stopping rule for the inner ascent, applied to the Euclidean norm of the
/// projected gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum InnerTolerance {
    /// A fixed gradient-norm threshold.
    Fixed { grad_tol: f64 },
    /// Derived per call from the current state: with
    /// `μ = max(γ − L_ξξ, mu_floor)` and `L_θξ` the policy/feature cross
    /// curvature, the target gap `ε = μ / ((L_θξ² + 1) √T)` becomes the
    /// gradient threshold `√(2 μ ε)`.
    Adaptive { mu_floor: f64 },
}

impl Default for InnerTolerance {
    fn default() -> Self {
        Self::Adaptive { mu_floor: 1e-3 }
    }
}

/// Everything the outer and inner loops need besides data and cost params.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DroConfig {
    /// Wasserstein radius ρ.
    pub rho: f64,
    pub cost: TransportCost,
    /// Outer iterations T.
    pub iterations: usize,
    /// Inner ascent step cap K.
    pub max_inner: usize,
    /// Inner ascent step size η.
    pub inner_step: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub tolerance: InnerTolerance,
    pub gamma_min: f64,
    pub gamma_max: f64,
    /// Slack kept above the curvature bound when clamping γ.
    pub gamma_margin: f64,
    /// Keep γ above `L_ξξ(θ) + gamma_margin`. Without it only `gamma_min`
    /// bounds γ from below.
    pub curvature_clamp: bool,
    /// Also start the ascent from the best point on the clamped rays through
    /// the base along `±θ`.
    pub path_search: bool,
    pub seed: u64,
}

impl Default for DroConfig {
    fn default() -> Self {
        Self {
            rho: 0.1,
            cost: TransportCost::frozen_labels(),
            iterations: 20_000,
            max_inner: 20,
            inner_step: 0.1,
            alpha0: 1.0,
            beta0: 1.0,
            tolerance: InnerTolerance::default(),
            gamma_min: 0.0,
            gamma_max: 1e3,
            gamma_margin: 1e-2,
            curvature_clamp: true,
            path_search: true,
            seed: 0,
        }
    }
}

impl DroConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return bad("rho must be a finite non-negative number");
        }
        if self.max_inner < 1 {
            return bad("max_inner (K) must be at least 1");
        }
        for (name, v) in [("inner_step", self.inner_step), ("alpha0", self.alpha0), ("beta0", self.beta0)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite")));
            }
        }
        match self.tolerance {
            InnerTolerance::Fixed { grad_tol } if !(grad_tol > 0.0) => return bad("grad_tol must be positive"),
            InnerTolerance::Adaptive { mu_floor } if !(mu_floor > 0.0) => return bad("mu_floor must be positive"),
            _ => {}
        }
        if !(self.gamma_min >= 0.0) || !(self.gamma_min <= self.gamma_max) || !self.gamma_max.is_finite() {
            return bad("need 0 <= gamma_min <= gamma_max < inf");
        }
        if !(self.gamma_margin >= 0.0) {
            return bad("gamma_margin must be non-negative");
        }
        Ok(())
    }
}

/// Policy coefficients (intercept last) and the dual multiplier γ.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrainState {
    pub theta: Vec<f64>,
    pub gamma: f64,
    pub t: usize,
}

impl TrainState {
    /// All-zero coefficients for a `dim`-feature policy.
    pub fn zeros(dim: usize, gamma: f64) -> Self {
        Self { theta: vec![0.0; dim + 1], gamma, t: 0 }
    }

    pub fn from_parts(coefficients: &[f64], intercept: f64, gamma: f64) -> Self {
        let mut theta = coefficients.to_vec();
        theta.push(intercept);
        Self { theta, gamma, t: 0 }
    }

    /// Feature dimension `s`.
    pub fn dim(&self) -> usize {
        self.theta.len().saturating_sub(1)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.theta[..self.dim()]
    }

    pub fn intercept(&self) -> f64 {
        self.theta.last().copied().unwrap_or(0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.gamma.is_finite() && self.theta.iter().all(|v| v.is_finite())
    }
}

/// What one outer iteration saw.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IterationRecord {
    pub t: usize,
    /// γ after the update.
    pub gamma: f64,
    /// `h` at the adversarial point, before the update.
    pub h_value: f64,
    pub grad_theta_norm_sq: f64,
    pub grad_gamma_sq: f64,
    pub inner_steps: usize,
    /// Transport distance moved by the adversary.
    pub distance: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RunMetrics {
    pub records: Vec<IterationRecord>,
    /// Filled in by callers that own a clock.
    pub train_seconds: Option<f64>,
    pub eval_seconds: Option<f64>,
}

impl RunMetrics {
    pub fn total_inner_steps(&self) -> usize {
        self.records.iter().map(|r| r.inner_steps).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        DroConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = DroConfig::default();
        let cases = [
            DroConfig { rho: -0.1, ..base.clone() },
            DroConfig { max_inner: 0, ..base.clone() },
            DroConfig { inner_step: 0.0, ..base.clone() },
            DroConfig { alpha0: -1.0, ..base.clone() },
            DroConfig { tolerance: InnerTolerance::Fixed { grad_tol: 0.0 }, ..base.clone() },
            DroConfig { gamma_min: 2.0, gamma_max: 1.0, ..base.clone() },
            DroConfig { gamma_min: -1.0, ..base.clone() },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn state_layout_puts_intercept_last() {
        let s = TrainState::from_parts(&[1.0, 2.0], 0.5, 3.0);
        assert_eq!(s.dim(), 2);
        assert_eq!(s.coefficients(), &[1.0, 2.0]);
        assert_eq!(s.intercept(), 0.5);
        assert_eq!(TrainState::zeros(0, 1.0).theta, vec![0.0]);
    }
}
