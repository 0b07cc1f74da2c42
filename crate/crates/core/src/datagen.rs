//! Synthetic newsvendor instances with linear demand `y = θᵀx + θ₀ + ε`,
//! `ε ~ N(0, σ²)`, and uniform or Gaussian features.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::policy::{cost_kinked, NewsvendorParams};
use crate::rng::{self, Domain};
use crate::sample::{Dataset, Sample};
use crate::special::normal_quantile;

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum FeatureDist {
    /// Independent `U[0, 1]` coordinates.
    #[default]
    Uniform,
    /// Multivariate normal. Defaults: mean `0.5` in every coordinate and
    /// covariance `0.5^|i−j|` (row-major when given).
    Gaussian {
        #[cfg_attr(feature = "serde", serde(default))]
        mean: Option<Vec<f64>>,
        #[cfg_attr(feature = "serde", serde(default))]
        covariance: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GenSpec {
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Noise standard deviation.
    pub sigma: f64,
    /// True coefficients with the intercept last. When absent each
    /// coefficient is drawn once from `U(0, 1) / dim` and the intercept is 1.
    pub theta_true: Option<Vec<f64>>,
    pub features: FeatureDist,
    pub seed: u64,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self { dim: 10, n_train: 50, n_test: 10_000, sigma: 1.0, theta_true: None, features: FeatureDist::Uniform, seed: 0 }
    }
}

impl GenSpec {
    /// The true coefficients (intercept last), drawing the defaults if unset.
    pub fn resolved_theta(&self) -> Result<Vec<f64>> {
        match &self.theta_true {
            Some(t) if t.len() != self.dim + 1 => Err(Error::DimensionMismatch { expected: self.dim + 1, found: t.len() }),
            Some(t) => Ok(t.clone()),
            None => {
                let mut r = rng::substream(self.seed, Domain::TrueCoefficients, 0);
                let scale = 1.0 / self.dim.max(1) as f64;
                let mut t: Vec<f64> = (0..self.dim).map(|_| r.random::<f64>() * scale).collect();
                t.push(1.0);
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Features {
    Uniform,
    Gaussian { mean: Vec<f64>, chol: Vec<f64> },
}

/// A resolved generator: coefficients, noise level and feature sampler.
#[derive(Debug, Clone)]
pub struct Model {
    theta: Vec<f64>,
    sigma: f64,
    features: Features,
}

impl Model {
    pub fn new(spec: &GenSpec) -> Result<Self> {
        if !(spec.sigma >= 0.0) || !spec.sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("sigma must be finite and non-negative, got {}", spec.sigma)));
        }
        let d = spec.dim;
        let theta = spec.resolved_theta()?;
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("true coefficients"));
        }
        let features = match &spec.features {
            FeatureDist::Uniform => Features::Uniform,
            FeatureDist::Gaussian { mean, covariance } => {
                let mean = mean.clone().unwrap_or_else(|| vec![0.5; d]);
                if mean.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: mean.len() });
                }
                let cov = covariance.clone().unwrap_or_else(|| {
                    let mut c = vec![0.0; d * d];
                    for i in 0..d {
                        for j in 0..d {
                            c[i * d + j] = libm::pow(0.5, (i as f64 - j as f64).abs());
                        }
                    }
                    c
                });
                Features::Gaussian { mean, chol: linalg::cholesky_psd(&cov, d)? }
            }
        };
        Ok(Self { theta, sigma: spec.sigma, features })
    }

    pub fn dim(&self) -> usize {
        self.theta.len() - 1
    }

    /// True coefficients, intercept last.
    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Noise-free demand `θᵀx + θ₀`.
    pub fn mean_demand(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        linalg::dot(&self.theta[..d], x) + self.theta[d]
    }

    fn draw_features<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        match &self.features {
            Features::Uniform => (0..d).map(|_| rng.random::<f64>()).collect(),
            Features::Gaussian { mean, chol } => {
                let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
                (0..d).map(|i| mean[i] + linalg::dot(&chol[i * d..i * d + i + 1], &z[..=i])).collect()
            }
        }
    }

    /// Draws a sample and returns it with its noise term.
    pub fn draw_with_noise<R: Rng + ?Sized>(&self, rng: &mut R) -> (Sample, f64) {
        let x = self.draw_features(rng);
        let z: f64 = StandardNormal.sample(rng);
        let eps = self.sigma * z;
        let y = self.mean_demand(&x) + eps;
        (Sample::new(x, y), eps)
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        self.draw_with_noise(rng).0
    }
}

/// Train and test sets. Sample `i` of each set comes from its own substream,
/// and the two sets use different domains.
pub fn generate(spec: &GenSpec) -> Result<(Dataset, Dataset)> {
    let model = Model::new(spec)?;
    let draw_set = |domain: Domain, n: usize| {
        let samples = (0..n).map(|i| model.draw(&mut rng::substream(spec.seed, domain, i as u64))).collect();
        Dataset::new(spec.dim, samples)
    };
    Ok((draw_set(Domain::TrainData, spec.n_train)?, draw_set(Domain::TestData, spec.n_test)?))
}

/// Monte-Carlo estimate of the expected kinked cost of the conditional
/// quantile policy `z(x) = θᵀx + θ₀ + σ Φ⁻¹(c_b / (c_b + c_h))`, the best any
/// policy can do under Gaussian noise.
pub fn truth_optimal_cost(spec: &GenSpec, p: &NewsvendorParams, n_mc: usize) -> Result<f64> {
    if n_mc == 0 {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    let model = Model::new(spec)?;
    let offset = spec.sigma * normal_quantile(p.critical_ratio());
    let mut total = 0.0;
    for i in 0..n_mc {
        let s = model.draw(&mut rng::substream(spec.seed, Domain::MonteCarlo, i as u64));
        total += cost_kinked(model.mean_demand(&s.x) + offset, s.y, p);
    }
    Ok(total / n_mc as f64)
}
