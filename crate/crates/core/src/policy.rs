//! Linear order policy `z = θᵀx + θ₀` and the newsvendor cost.
//!
//! The kinked cost `c_b (y − z)⁺ + c_h (z − y)⁺` is what we evaluate policies
//! on. Training uses the C¹ version that replaces the kink on `(y − δ, y + δ)`
//! by the quadratic `a₁z² + a₂z + a₃` matching value and slope at both ends.
//! Writing `u = z − y`, the quadratic is
//!
//! ```text
//! (c_b + c_h) u² / (4δ) + (c_h − c_b) u / 2 + (c_b + c_h) δ / 4
//! ```
//!
//! which is how it is evaluated here: the expanded coefficients cancel badly
//! once `|y| ≫ δ`.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::TrainState;
use crate::error::{Error, Result};
use crate::linalg;
use crate::sample::Sample;

/// Unit back-order and holding costs plus the smoothing half-width δ.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NewsvendorParams {
    pub backorder: f64,
    pub holding: f64,
    pub delta: f64,
}

impl NewsvendorParams {
    pub fn new(backorder: f64, holding: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("backorder cost", backorder), ("holding cost", holding), ("delta", delta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self { backorder, holding, delta })
    }

    /// The critical ratio `c_b / (c_b + c_h)`.
    pub fn critical_ratio(&self) -> f64 {
        self.backorder / (self.backorder + self.holding)
    }

    /// Same costs with `δ = 0.1 · sd(y)` (falling back to 0.1 when the labels
    /// have no spread).
    pub fn with_default_delta(self, labels: impl IntoIterator<Item = f64>) -> Result<Self> {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for y in labels {
            n += 1;
            let d = y - mean;
            mean += d / n as f64;
            m2 += d * (y - mean);
        }
        let sd = if n > 1 { libm::sqrt(m2 / (n - 1) as f64) } else { 0.0 };
        let delta = if sd > 0.0 { 0.1 * sd } else { 0.1 };
        Self::new(self.backorder, self.holding, delta)
    }
}

/// Expanded quadratic coefficients of the smoothing patch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCoeffs {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl SmoothCoeffs {
    pub fn eval(&self, z: f64) -> f64 {
        (self.a1 * z + self.a2) * z + self.a3
    }

    pub fn slope(&self, z: f64) -> f64 {
        2.0 * self.a1 * z + self.a2
    }
}

/// `θᵀx + θ₀`.
pub fn policy_eval(state: &TrainState, x: &[f64]) -> Result<f64> {
    if x.len() != state.dim() {
        return Err(Error::DimensionMismatch { expected: state.dim(), found: x.len() });
    }
    Ok(linalg::dot(state.coefficients(), x) + state.intercept())
}

pub fn cost_kinked(z: f64, y: f64, p: &NewsvendorParams) -> f64 {
    p.backorder * (y - z).max(0.0) + p.holding * (z - y).max(0.0)
}

pub fn smooth_coeffs(y: f64, p: &NewsvendorParams) -> SmoothCoeffs {
    let (cb, ch, d) = (p.backorder, p.holding, p.delta);
    SmoothCoeffs {
        a1: (cb + ch) / (4.0 * d),
        a2: -(cb * (y + d) + ch * (y - d)) / (2.0 * d),
        a3: cb * d + (cb * (y + 3.0 * d) + ch * (y - d)) * (y - d) / (4.0 * d),
    }
}

#[inline]
fn smoothed_value(u: f64, p: &NewsvendorParams) -> f64 {
    let (cb, ch, d) = (p.backorder, p.holding, p.delta);
    if u <= -d {
        -cb * u
    } else if u >= d {
        ch * u
    } else {
        (cb + ch) * u * u / (4.0 * d) + 0.5 * (ch - cb) * u + 0.25 * (cb + ch) * d
    }
}

#[inline]
pub(crate) fn smoothed_slope(u: f64, p: &NewsvendorParams) -> f64 {
    let (cb, ch, d) = (p.backorder, p.holding, p.delta);
    if u <= -d {
        -cb
    } else if u >= d {
        ch
    } else {
        (cb + ch) * u / (2.0 * d) + 0.5 * (ch - cb)
    }
}

/// Smoothed cost of ordering `z` against demand `y`.
pub fn cost_smoothed(z: f64, y: f64, p: &NewsvendorParams) -> f64 {
    smoothed_value(z - y, p)
}

/// Derivative of [`cost_smoothed`] in `z`.
pub fn cost_smoothed_dz(z: f64, y: f64, p: &NewsvendorParams) -> f64 {
    smoothed_slope(z - y, p)
}

/// `∇_θ c = c'(z) · (x, 1)`.
pub fn grad_theta_cost(state: &TrainState, sample: &Sample, p: &NewsvendorParams) -> Result<Vec<f64>> {
    let slope = cost_smoothed_dz(policy_eval(state, &sample.x)?, sample.y, p);
    let mut g: Vec<f64> = sample.x.iter().map(|v| slope * v).collect();
    g.push(slope);
    Ok(g)
}

/// `∇_x c = c'(z) · θ` (intercept excluded).
pub fn grad_x_cost(state: &TrainState, sample: &Sample, p: &NewsvendorParams) -> Result<Vec<f64>> {
    let slope = cost_smoothed_dz(policy_eval(state, &sample.x)?, sample.y, p);
    Ok(state.coefficients().iter().map(|t| slope * t).collect())
}

/// `∂c/∂y = −c'(z)`.
pub fn grad_y_cost(state: &TrainState, sample: &Sample, p: &NewsvendorParams) -> Result<f64> {
    Ok(-cost_smoothed_dz(policy_eval(state, &sample.x)?, sample.y, p))
}

/// Curvature bound `(c_b + c_h) ‖θ‖² / (2δ)` of the smoothed cost composed
/// with the policy, as a function of the features.
pub fn lipschitz_xx(state: &TrainState, p: &NewsvendorParams) -> f64 {
    (p.backorder + p.holding) * linalg::norm_sq(state.coefficients()) / (2.0 * p.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn params() -> NewsvendorParams {
        NewsvendorParams::new(1.0, 0.2, 0.1).unwrap()
    }

    #[test]
    fn policy_examples() {
        assert_eq!(policy_eval(&TrainState::zeros(3, 1.0), &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let s = TrainState::from_parts(&[1.0, 2.0], 0.5, 1.0);
        assert_eq!(policy_eval(&s, &[1.0, 1.0]).unwrap(), 3.5);
        let e1 = TrainState::from_parts(&[1.0, 0.0, 0.0], 0.0, 1.0);
        assert_eq!(policy_eval(&e1, &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert!(policy_eval(&s, &[1.0]).is_err());
    }

    #[test]
    fn kinked_examples() {
        let p = params();
        assert_eq!(cost_kinked(1.0, 1.0, &p), 0.0);
        assert!((cost_kinked(0.5, 1.0, &p) - 0.5).abs() < 1e-15);
        assert!((cost_kinked(1.5, 1.0, &p) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn coefficient_examples() {
        let p = params();
        let c = smooth_coeffs(1.0, &p);
        assert!((c.a1 - 3.0).abs() < 1e-12);
        assert!((c.a2 + 6.4).abs() < 1e-12);
        assert!((c.a3 - 3.43).abs() < 1e-12);
        assert!((c.eval(0.9) - 0.1).abs() < 1e-12);
        assert!((c.slope(1.1) - 0.2).abs() < 1e-12);
    }

    /// Solve the four boundary conditions (value and slope at both ends of the
    /// band) for the quadratic directly and compare with the closed form.
    #[test]
    fn coefficients_solve_boundary_conditions() {
        for &(cb, ch, d, y) in &[(1.0, 0.2, 0.1, 1.0), (3.0, 0.7, 0.4, -2.5), (0.5, 2.0, 0.05, 10.0)] {
            let p = NewsvendorParams::new(cb, ch, d).unwrap();
            // Slopes: 2 a1 (y−δ) + a2 = −cb and 2 a1 (y+δ) + a2 = ch.
            let a1 = (ch + cb) / (4.0 * d);
            let a2 = -cb - 2.0 * a1 * (y - d);
            // Value at y−δ equals cb δ.
            let a3 = cb * d - a1 * (y - d) * (y - d) - a2 * (y - d);
            let c = smooth_coeffs(y, &p);
            assert!((c.a1 - a1).abs() < 1e-9 * a1.abs().max(1.0));
            assert!((c.a2 - a2).abs() < 1e-9 * a2.abs().max(1.0));
            assert!((c.a3 - a3).abs() < 1e-9 * a3.abs().max(1.0));
            // The remaining condition (value at y+δ) must follow.
            assert!((c.eval(y + d) - ch * d).abs() < 1e-9 * c.a3.abs().max(1.0));
        }
    }

    #[test]
    fn smoothed_examples() {
        let p = params();
        assert!((cost_smoothed(0.9, 1.0, &p) - cost_kinked(0.9, 1.0, &p)).abs() < 1e-15);
        assert!((cost_smoothed(1.0, 1.0, &p) - 0.03).abs() < 1e-15);
        assert_eq!(cost_smoothed(7.0, 1.0, &p), 0.2 * 6.0);
        let c = smooth_coeffs(1.0, &p);
        for z in [0.91, 0.95, 1.0, 1.04, 1.09] {
            assert!((cost_smoothed(z, 1.0, &p) - c.eval(z)).abs() < 1e-12);
            assert!((cost_smoothed_dz(z, 1.0, &p) - c.slope(z)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_examples() {
        let p = params();
        let s = TrainState::from_parts(&[0.1, -0.2], 0.0, 1.0);
        let deep_left = Sample::new(vec![1.0, 2.0], 50.0);
        assert_eq!(grad_theta_cost(&s, &deep_left, &p).unwrap(), vec![-1.0, -2.0, -1.0]);
        let zero = TrainState::zeros(2, 1.0);
        assert_eq!(grad_x_cost(&zero, &deep_left, &p).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn lipschitz_examples() {
        let p = params();
        assert_eq!(lipschitz_xx(&TrainState::zeros(2, 1.0), &p), 0.0);
        let unit = TrainState::from_parts(&[0.6, 0.8], 5.0, 1.0);
        assert!((lipschitz_xx(&unit, &p) - 6.0).abs() < 1e-12);
        let doubled = TrainState::from_parts(&[1.2, 1.6], 5.0, 1.0);
        assert!((lipschitz_xx(&doubled, &p) - 4.0 * lipschitz_xx(&unit, &p)).abs() < 1e-12);
    }

    #[test]
    fn default_delta_tracks_label_spread() {
        let p = params().with_default_delta([1.0, 2.0, 3.0]).unwrap();
        assert!((p.delta - 0.1).abs() < 1e-15);
        assert_eq!(params().with_default_delta([4.0]).unwrap().delta, 0.1);
    }

    proptest! {
        #[test]
        fn smoothed_error_bounded_by_quarter_band(
            cb in 0.05..5.0f64, ch in 0.05..5.0f64, d in 0.01..2.0f64, y in -50.0..50.0f64, u in -3.0..3.0f64,
        ) {
            let p = NewsvendorParams::new(cb, ch, d).unwrap();
            let z = y + u * d;
            let gap = cost_smoothed(z, y, &p) - cost_kinked(z, y, &p);
            prop_assert!(gap >= -1e-12);
            prop_assert!(gap <= (cb + ch) * d / 4.0 + 1e-12);
        }

        #[test]
        fn gradients_match_central_differences(
            coef in proptest::collection::vec(-2.0..2.0f64, 3), icpt in -1.0..1.0f64,
            x in proptest::collection::vec(-1.0..1.0f64, 3), y in -3.0..3.0f64,
        ) {
            let p = params();
            let s = TrainState::from_parts(&coef, icpt, 1.0);
            let z = policy_eval(&s, &x).unwrap();
            // Stay clear of the band edges, where the second derivative jumps.
            prop_assume!(((z - y).abs() - p.delta).abs() > 1e-3);
            let h = 1e-6;
            let sample = Sample::new(x.clone(), y);
            let gt = grad_theta_cost(&s, &sample, &p).unwrap();
            for j in 0..=3 {
                let mut up = s.clone();
                let mut dn = s.clone();
                up.theta[j] += h;
                dn.theta[j] -= h;
                let fd = (cost_smoothed(policy_eval(&up, &x).unwrap(), y, &p)
                    - cost_smoothed(policy_eval(&dn, &x).unwrap(), y, &p)) / (2.0 * h);
                prop_assert!((fd - gt[j]).abs() <= 1e-5 * gt[j].abs().max(1.0));
            }
            let gx = grad_x_cost(&s, &sample, &p).unwrap();
            for j in 0..3 {
                let mut up = x.clone();
                let mut dn = x.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (cost_smoothed(policy_eval(&s, &up).unwrap(), y, &p)
                    - cost_smoothed(policy_eval(&s, &dn).unwrap(), y, &p)) / (2.0 * h);
                prop_assert!((fd - gx[j]).abs() <= 1e-5 * gx[j].abs().max(1.0));
            }
        }

        #[test]
        fn smoothed_is_convex(
            cb in 0.05..5.0f64, ch in 0.05..5.0f64, d in 0.01..2.0f64, y in -5.0..5.0f64,
            a in -8.0..8.0f64, b in -8.0..8.0f64, w in 0.0..1.0f64,
        ) {
            let p = NewsvendorParams::new(cb, ch, d).unwrap();
            let mid = w * a + (1.0 - w) * b;
            let lhs = cost_smoothed(mid, y, &p);
            let rhs = w * cost_smoothed(a, y, &p) + (1.0 - w) * cost_smoothed(b, y, &p);
            prop_assert!(lhs <= rhs + 1e-12);
        }
    }
}
