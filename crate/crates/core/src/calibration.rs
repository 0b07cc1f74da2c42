//! Wasserstein radius from a coverage confidence level, and the inverse map.
//!
//! With `N` samples and support diameter `D`, the ball of radius `ρ` around
//! the empirical distribution contains the true one with probability at
//! least
//!
//! ```text
//! 1 − exp(−N ρ² / (2 (1 + D²)))    D ≥ 1
//! 1 − exp(−N ρ² / (4 D²))          D < 1
//! ```
//!
//! as long as `ρ < D`. Solving for `ρ` at probability `q` gives the radius.

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{support_diameter, Dataset, SupportBox, TransportCost};

/// A probability strictly inside `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self(q))
        } else {
            Err(Error::InvalidConfidence(q))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// A radius together with whether it violates `ρ < D`, in which case the
/// coverage guarantee no longer applies (the value is still usable).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedRadius {
    pub rho: f64,
    pub exceeds_diameter: bool,
}

fn exponent_scale(diameter: f64) -> f64 {
    if diameter >= 1.0 {
        2.0 * (1.0 + diameter * diameter)
    } else {
        4.0 * diameter * diameter
    }
}

/// Smallest radius whose coverage bound reaches `q` with `n` samples.
pub fn radius_for_confidence(n: usize, q: Confidence, diameter: f64) -> Result<CalibratedRadius> {
    if n == 0 {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    if !(diameter > 0.0) || !diameter.is_finite() {
        return Err(Error::DegenerateSupport);
    }
    // −ln(1 − q), accurate for small q.
    let tail = -libm::log1p(-q.get());
    let rho = libm::sqrt(tail * exponent_scale(diameter) / n as f64);
    Ok(CalibratedRadius { rho, exceeds_diameter: rho >= diameter })
}

/// Lower bound on the probability that the true distribution lies within `rho`
/// of the `n`-sample empirical distribution. Requires `rho < diameter`.
pub fn coverage_probability(n: usize, rho: f64, diameter: f64) -> Result<f64> {
    if !(diameter > 0.0) || !diameter.is_finite() {
        return Err(Error::DegenerateSupport);
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidConfig("rho must be non-negative".into()));
    }
    if rho >= diameter {
        return Err(Error::RadiusExceedsDiameter { rho, diameter });
    }
    Ok(-libm::expm1(-(n as f64) * rho * rho / exponent_scale(diameter)))
}

/// Transport-cost diameter of the data bounding box.
pub fn estimate_diameter(data: &Dataset, cost: TransportCost) -> Result<f64> {
    if data.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: data.len() });
    }
    support_diameter(&SupportBox::from_data(data, 1.0)?, cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::Sample;
    use alloc::vec;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn q(v: f64) -> Confidence {
        Confidence::new(v).unwrap()
    }

    #[test]
    fn radius_examples() {
        let r = radius_for_confidence(100, q(1e-300), 1.0).unwrap();
        assert!(r.rho < 1e-140);
        let r = radius_for_confidence(100, q(0.95), 1.0).unwrap();
        assert!((r.rho - 0.34616).abs() < 5e-6, "{}", r.rho);
        assert!(!r.exceeds_diameter);
        let r = radius_for_confidence(100, q(0.95), 0.5).unwrap();
        assert!((r.rho - 0.17308).abs() < 5e-6, "{}", r.rho);
        let r = radius_for_confidence(2, q(0.99), 0.5).unwrap();
        assert!(r.exceeds_diameter);
        assert!(radius_for_confidence(0, q(0.5), 1.0).is_err());
    }

    #[test]
    fn coverage_examples() {
        assert_eq!(coverage_probability(100, 0.0, 1.0).unwrap(), 0.0);
        assert!((coverage_probability(100, 0.34616, 1.0).unwrap() - 0.95).abs() < 1e-4);
        assert!(coverage_probability(1_000_000, 0.1, 1.0).unwrap() > 1.0 - 1e-12);
        assert!(matches!(coverage_probability(10, 1.0, 1.0), Err(Error::RadiusExceedsDiameter { .. })));
    }

    #[test]
    fn confidence_bounds() {
        for bad in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(Confidence::new(bad).is_err());
        }
    }

    #[test]
    fn diameter_examples() {
        let inf = TransportCost::frozen_labels();
        let two = Dataset::new(1, vec![Sample::new(vec![0.0], 1.0), Sample::new(vec![1.0], 4.0)]).unwrap();
        assert_eq!(estimate_diameter(&two, inf).unwrap(), 1.0);
        let square: Vec<Sample> =
            [[0.0, 0.0], [1.0, 0.0], [0.3, 1.0], [0.5, 0.5]].iter().map(|x| Sample::new(x.to_vec(), 0.0)).collect();
        let d = estimate_diameter(&Dataset::new(2, square).unwrap(), inf).unwrap();
        assert!((d - 2f64.sqrt()).abs() < 1e-15);
        let dup = Dataset::new(1, vec![Sample::new(vec![0.3], 1.0); 2]).unwrap();
        assert_eq!(estimate_diameter(&dup, inf), Err(Error::DegenerateSupport));
        let one = Dataset::new(1, vec![Sample::new(vec![0.3], 1.0)]).unwrap();
        assert!(matches!(estimate_diameter(&one, inf), Err(Error::TooFewSamples { .. })));
    }

    proptest! {
        #[test]
        fn coverage_inverts_radius(n in 1usize..100_000, qv in 0.01..0.999f64, d in 0.05..20.0f64) {
            let r = radius_for_confidence(n, q(qv), d).unwrap();
            prop_assume!(!r.exceeds_diameter);
            let back = coverage_probability(n, r.rho, d).unwrap();
            prop_assert!((back - qv).abs() <= 1e-10);
        }

        #[test]
        fn radius_monotone(n in 1usize..10_000, qv in 0.01..0.98f64, d in 0.05..20.0f64) {
            let r = radius_for_confidence(n, q(qv), d).unwrap().rho;
            prop_assert!(radius_for_confidence(n + 1, q(qv), d).unwrap().rho < r);
            prop_assert!(radius_for_confidence(n, q(qv + 0.01), d).unwrap().rho > r);
        }
    }
}
