//! Wasserstein distributionally robust contextual optimization by adversarial
//! data augmentation.
//!
//! The solver repeatedly bootstraps one sample from a nominal distribution,
//! pushes it towards the worst case inside the transport budget with projected
//! gradient ascent, and then takes one stochastic gradient step on the policy
//! coefficients and on the dual multiplier of the transport constraint.
//!
//! ```text
//! inf_{θ, γ>0}  E_Q [ sup_{ξ'∈Ξ} c(f(θ;x'); y') − γ d(ξ', ξ) + γρ ]
//! ```
//!
//! The crate is `no_std` (it only needs `alloc`). File formats, the command
//! line and the experiment harness live in the `dasgd` companion crate.
//!
//! Module map:
//!
//! - [`sample`]: samples, datasets, support box and the transport cost.
//! - [`config`]: solver configuration, training state and run metrics.
//! - [`policy`]: linear order policy and the kinked / smoothed newsvendor cost.
//! - [`inner`]: the adversarial inner maximization and its grid oracle.
//! - [`dasgd`]: the outer stochastic gradient loop and its sample sources.
//! - [`calibration`]: radius selection from a coverage confidence level.
//! - [`baselines`]: empirical risk minimization and the SAA quantile.
//! - [`datagen`]: synthetic linear-demand newsvendor instances.
//! - [`online`]: streaming training with regret against a fixed comparator.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod calibration;
pub mod config;
pub mod dasgd;
pub mod datagen;
pub mod error;
pub mod inner;
pub mod linalg;
pub mod online;
pub mod policy;
pub mod rng;
pub mod sample;
pub mod special;

pub use baselines::{erm_train, evaluate_policy, saa_quantile, ErmConfig};
pub use calibration::{coverage_probability, estimate_diameter, radius_for_confidence, CalibratedRadius, Confidence};
pub use config::{DroConfig, InnerTolerance, IterationRecord, RunMetrics, TrainState};
pub use dasgd::{clamp_gamma, default_steps, train, Bootstrap, GeneratorSource, SampleSource, StepSchedule, StreamSource};
pub use datagen::{generate, truth_optimal_cost, FeatureDist, GenSpec};
pub use error::{Error, Result};
pub use inner::{h_eval, oracle_grid_max, perturb, PerturbResult};
pub use online::{run_online, RegretStep, RegretTrace};
pub use policy::{
    cost_kinked, cost_smoothed, cost_smoothed_dz, grad_theta_cost, grad_x_cost, lipschitz_xx, policy_eval, smooth_coeffs,
    NewsvendorParams, SmoothCoeffs,
};
pub use sample::{project_to_support, support_diameter, transport_distance, Dataset, Sample, SupportBox, TransportCost};
