//! Samples, datasets, the support box and the transport cost
//! `d(ξ, ξ') = ‖x − x'‖₂ + κ |y − y'|`.

use alloc::format;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// One feature/label observation `ξ = (x, y)`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn is_finite(&self) -> bool {
        self.y.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// An ordered collection of samples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl Dataset {
    /// Builds a dataset, checking dimensions and finiteness. Empty datasets are
    /// allowed here; training entry points reject them.
    pub fn new(dim: usize, samples: Vec<Sample>) -> Result<Self> {
        for s in &samples {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: s.dim() });
            }
            if !s.is_finite() {
                return Err(Error::NonFinite("dataset sample"));
            }
        }
        Ok(Self { samples, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn get(&self, i: usize) -> Option<&Sample> {
        self.samples.get(i)
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.y)
    }

    pub fn into_samples(self) -> Vec<Sample> {
        self.samples
    }

    /// The subset at the given indices, in that order.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self { samples: idx.iter().map(|&i| self.samples[i].clone()).collect(), dim: self.dim }
    }

    pub(crate) fn require_nonempty(&self) -> Result<()> {
        if self.samples.is_empty() {
            Err(Error::EmptyDataset)
        } else {
            Ok(())
        }
    }
}

/// Weight on label transport. `κ = ∞` freezes labels: mass may only move
/// along the feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "KappaRepr", into = "KappaRepr"))]
pub struct TransportCost {
    kappa: f64,
}

/// Serialized as `{"kappa": null}` for frozen labels, since JSON has no
/// infinity.
#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct KappaRepr {
    #[serde(default)]
    kappa: Option<f64>,
}

#[cfg(feature = "serde")]
impl From<TransportCost> for KappaRepr {
    fn from(c: TransportCost) -> Self {
        Self { kappa: if c.labels_frozen() { None } else { Some(c.kappa) } }
    }
}

#[cfg(feature = "serde")]
impl TryFrom<KappaRepr> for TransportCost {
    type Error = Error;

    fn try_from(r: KappaRepr) -> Result<Self> {
        r.kappa.map_or(Ok(Self::frozen_labels()), Self::new)
    }
}

impl TransportCost {
    /// `kappa` may be `f64::INFINITY`.
    pub fn new(kappa: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self { kappa })
    }

    pub const fn frozen_labels() -> Self {
        Self { kappa: f64::INFINITY }
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn labels_frozen(&self) -> bool {
        self.kappa.is_infinite()
    }
}

impl Default for TransportCost {
    fn default() -> Self {
        Self::frozen_labels()
    }
}

/// Axis-aligned compact support `Ξ = [x_lo, x_hi] × [y_lo, y_hi]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SupportBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl SupportBox {
    pub fn new(x_lo: Vec<f64>, x_hi: Vec<f64>, y_lo: f64, y_hi: f64) -> Result<Self> {
        if x_lo.len() != x_hi.len() {
            return Err(Error::DimensionMismatch { expected: x_lo.len(), found: x_hi.len() });
        }
        let ok = x_lo.iter().zip(&x_hi).all(|(l, h)| l.is_finite() && h.is_finite() && l <= h)
            && y_lo.is_finite()
            && y_hi.is_finite()
            && y_lo <= y_hi;
        if !ok {
            return Err(Error::InvalidSupport(format!("bounds must be finite with lo <= hi")));
        }
        Ok(Self { x_lo, x_hi, y_lo, y_hi })
    }

    /// The unit cube `[0,1]^dim` in features with the given label range.
    pub fn unit(dim: usize, y_lo: f64, y_hi: f64) -> Result<Self> {
        Self::new(alloc::vec![0.0; dim], alloc::vec![1.0; dim], y_lo, y_hi)
    }

    /// Bounding box of the data, each side scaled about its midpoint by
    /// `inflate` (1.0 keeps the tight bounding box).
    pub fn from_data(data: &Dataset, inflate: f64) -> Result<Self> {
        data.require_nonempty()?;
        if !(inflate >= 1.0) || !inflate.is_finite() {
            return Err(Error::InvalidConfig(format!("inflate factor must be >= 1, got {inflate}")));
        }
        let d = data.dim();
        let first = &data.samples()[0];
        let mut x_lo = first.x.clone();
        let mut x_hi = first.x.clone();
        let (mut y_lo, mut y_hi) = (first.y, first.y);
        for s in data.samples() {
            for j in 0..d {
                x_lo[j] = x_lo[j].min(s.x[j]);
                x_hi[j] = x_hi[j].max(s.x[j]);
            }
            y_lo = y_lo.min(s.y);
            y_hi = y_hi.max(s.y);
        }
        let grow = |lo: &mut f64, hi: &mut f64| {
            let mid = 0.5 * (*lo + *hi);
            let half = 0.5 * (*hi - *lo) * inflate;
            *lo = mid - half;
            *hi = mid + half;
        };
        for j in 0..d {
            grow(&mut x_lo[j], &mut x_hi[j]);
        }
        grow(&mut y_lo, &mut y_hi);
        Self::new(x_lo, x_hi, y_lo, y_hi)
    }

    pub fn dim(&self) -> usize {
        self.x_lo.len()
    }

    pub fn contains(&self, p: &Sample) -> bool {
        p.dim() == self.dim()
            && p.x.iter().zip(self.x_lo.iter().zip(&self.x_hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
            && self.y_lo <= p.y
            && p.y <= self.y_hi
    }

    /// Largest `‖(x, 1)‖₂` over the box, used for curvature estimates of the
    /// linear policy with intercept.
    pub fn max_augmented_norm(&self) -> f64 {
        let sq: f64 = self
            .x_lo
            .iter()
            .zip(&self.x_hi)
            .map(|(l, h)| {
                let m = libm::fabs(*l).max(libm::fabs(*h));
                m * m
            })
            .sum();
        libm::sqrt(sq + 1.0)
    }

    /// Clamps feature coordinates only.
    pub(crate) fn clamp_features(&self, x: &mut [f64]) {
        for ((v, l), h) in x.iter_mut().zip(&self.x_lo).zip(&self.x_hi) {
            *v = v.clamp(*l, *h);
        }
    }
}

/// `‖x_a − x_b‖₂ + κ |y_a − y_b|`; infinite when labels differ under `κ = ∞`.
pub fn transport_distance(a: &Sample, b: &Sample, cost: TransportCost) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let dx = linalg::dist(&a.x, &b.x);
    let dy = libm::fabs(a.y - b.y);
    if dy == 0.0 {
        return Ok(dx);
    }
    Ok(dx + cost.kappa() * dy)
}

/// Coordinatewise clamp into the box (labels included).
pub fn project_to_support(p: &Sample, support: &SupportBox) -> Sample {
    let mut x = p.x.clone();
    support.clamp_features(&mut x);
    Sample { x, y: p.y.clamp(support.y_lo, support.y_hi) }
}

/// Transport-cost diameter of the box. With frozen labels the label extent
/// does not count, since mass never moves along labels.
pub fn support_diameter(support: &SupportBox, cost: TransportCost) -> Result<f64> {
    let dx = linalg::dist(&support.x_lo, &support.x_hi);
    let diameter = if cost.labels_frozen() { dx } else { dx + cost.kappa() * (support.y_hi - support.y_lo) };
    if diameter > 0.0 && diameter.is_finite() {
        Ok(diameter)
    } else {
        Err(Error::DegenerateSupport)
    }
}
