//! The outer loop: draw a sample, perturb it adversarially, then take one
//! gradient step on the policy and one on the dual multiplier.
//!
//! ```text
//! θ ← θ − α ∇_θ c(f(θ; x̂*); ŷ*)
//! γ ← clamp(γ − β (ρ − d(ξ̂*, ξ)))
//! ```
//!
//! The clamp keeps γ above the curvature bound of the smoothed cost (so the
//! penalty always dominates the local curvature of the inner problem) and
//! inside `[gamma_min, gamma_max]`.

use alloc::vec::Vec;

use rand::Rng;

use crate::config::{DroConfig, IterationRecord, RunMetrics, TrainState};
use crate::datagen::GenSpec;
use crate::error::{Error, Result};
use crate::inner::{self, PerturbResult};
use crate::linalg;
use crate::policy::{self, NewsvendorParams};
use crate::rng::{self, Domain};
use crate::sample::{transport_distance, Dataset, Sample, SupportBox};

/// Where the `t`-th training sample comes from.
pub trait SampleSource {
    /// Draws the sample for outer iteration `t`; `None` once exhausted.
    fn draw(&mut self, t: usize) -> Option<Sample>;
}

/// Uniform draws with replacement from a fixed dataset. Draw `t` uses its own
/// substream, so it depends only on `(seed, t)`.
#[derive(Debug, Clone)]
pub struct Bootstrap<'a> {
    data: &'a Dataset,
    seed: u64,
}

impl<'a> Bootstrap<'a> {
    pub fn new(data: &'a Dataset, seed: u64) -> Result<Self> {
        data.require_nonempty()?;
        Ok(Self { data, seed })
    }
}

impl SampleSource for Bootstrap<'_> {
    fn draw(&mut self, t: usize) -> Option<Sample> {
        let i = rng::substream(self.seed, Domain::Bootstrap, t as u64).random_range(0..self.data.len());
        self.data.get(i).cloned()
    }
}

/// Consumes an external sequence in arrival order (online mode).
#[derive(Debug, Clone)]
pub struct StreamSource<I> {
    inner: I,
}

impl<I: Iterator<Item = Sample>> StreamSource<I> {
    pub fn new(inner: I) -> Self {
        Self { inner }
    }
}

impl<I: Iterator<Item = Sample>> SampleSource for StreamSource<I> {
    fn draw(&mut self, _t: usize) -> Option<Sample> {
        self.inner.next()
    }
}

/// Fresh draws from the synthetic linear-demand model, never exhausted.
#[derive(Debug, Clone)]
pub struct GeneratorSource {
    model: crate::datagen::Model,
    seed: u64,
}

impl GeneratorSource {
    /// Draws use `seed` rather than `spec.seed`, so a generator can share the
    /// model of a dataset while staying independent of it.
    pub fn new(spec: &GenSpec, seed: u64) -> Result<Self> {
        Ok(Self { model: crate::datagen::Model::new(spec)?, seed })
    }
}

impl SampleSource for GeneratorSource {
    fn draw(&mut self, t: usize) -> Option<Sample> {
        let mut r = rng::substream(self.seed, Domain::Generator, t as u64);
        Some(self.model.draw(&mut r))
    }
}

/// Constant-over-run step sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub alpha: f64,
    pub beta: f64,
}

/// `α = α₀/√T`, `β = β₀/√T`.
pub fn default_steps(cfg: &DroConfig) -> StepSchedule {
    let root = libm::sqrt(cfg.iterations.max(1) as f64);
    StepSchedule { alpha: cfg.alpha0 / root, beta: cfg.beta0 / root }
}

/// Projects γ onto `[max(gamma_min, L_ξξ(θ) + margin), gamma_max]` (or
/// `[gamma_min, gamma_max]` without the curvature clamp); the upper bound wins
/// if the two cross.
pub fn clamp_gamma(gamma: f64, state: &TrainState, cfg: &DroConfig, p: &NewsvendorParams) -> f64 {
    let floor = if cfg.curvature_clamp {
        cfg.gamma_min.max(policy::lipschitz_xx(state, p) + cfg.gamma_margin)
    } else {
        cfg.gamma_min
    };
    gamma.max(floor).min(cfg.gamma_max)
}

/// Zero coefficients with γ one unit above its lower clamp.
pub fn initial_state(dim: usize, cfg: &DroConfig, p: &NewsvendorParams) -> TrainState {
    let mut s = TrainState::zeros(dim, 0.0);
    s.gamma = clamp_gamma(clamp_gamma(0.0, &s, cfg, p) + 1.0, &s, cfg, p);
    s
}

/// Least-squares fit of `y` on `(x, 1)` as a starting point; γ as in
/// [`initial_state`].
pub fn least_squares_start(data: &Dataset, cfg: &DroConfig, p: &NewsvendorParams) -> Result<TrainState> {
    data.require_nonempty()?;
    let m = data.dim() + 1;
    let mut gram = alloc::vec![0.0; m * m];
    let mut rhs = alloc::vec![0.0; m];
    let mut row = alloc::vec![1.0; m];
    for s in data.samples() {
        row[..m - 1].copy_from_slice(&s.x);
        for i in 0..m {
            rhs[i] += row[i] * s.y;
            for j in 0..m {
                gram[i * m + j] += row[i] * row[j];
            }
        }
    }
    let scale = (0..m).map(|i| gram[i * m + i]).fold(0.0, f64::max).max(1.0);
    let theta = linalg::solve_ridge(&gram, &rhs, m, 1e-8 * scale)?;
    let mut s = TrainState { theta, gamma: 0.0, t: 0 };
    s.gamma = clamp_gamma(clamp_gamma(0.0, &s, cfg, p) + 1.0, &s, cfg, p);
    Ok(s)
}

/// One solver instance; [`DaSgd::step`] is a single outer iteration.
#[derive(Debug, Clone)]
pub struct DaSgd<'a> {
    pub state: TrainState,
    cfg: &'a DroConfig,
    support: &'a SupportBox,
    params: &'a NewsvendorParams,
    steps: StepSchedule,
}

impl<'a> DaSgd<'a> {
    pub fn new(
        cfg: &'a DroConfig,
        support: &'a SupportBox,
        params: &'a NewsvendorParams,
        init: TrainState,
    ) -> Result<Self> {
        cfg.validate()?;
        if support.dim() != init.dim() {
            return Err(Error::DimensionMismatch { expected: init.dim(), found: support.dim() });
        }
        if !init.is_finite() {
            return Err(Error::NonFinite("initial state"));
        }
        Ok(Self { state: init, cfg, support, params, steps: default_steps(cfg) })
    }

    pub fn with_steps(mut self, steps: StepSchedule) -> Self {
        self.steps = steps;
        self
    }

    pub fn config(&self) -> &DroConfig {
        self.cfg
    }

    /// Worst-case perturbation of `sample` under the current state.
    pub fn perturb(&self, sample: &Sample) -> Result<PerturbResult> {
        inner::perturb(&self.state, sample, self.cfg, self.support, self.params)
    }

    /// Updates the state with an already computed perturbation of `sample`.
    pub fn update(&mut self, sample: &Sample, adv: &PerturbResult) -> Result<IterationRecord> {
        let grad_theta = policy::grad_theta_cost(&self.state, &adv.xi_star, self.params)?;
        let distance = transport_distance(&adv.xi_star, sample, self.cfg.cost)?;
        let grad_gamma = self.cfg.rho - distance;
        for (t, g) in self.state.theta.iter_mut().zip(&grad_theta) {
            *t -= self.steps.alpha * g;
        }
        let raw = self.state.gamma - self.steps.beta * grad_gamma;
        self.state.gamma = clamp_gamma(raw, &self.state, self.cfg, self.params);
        if !self.state.is_finite() {
            return Err(Error::NonFinite("training state"));
        }
        let record = IterationRecord {
            t: self.state.t,
            gamma: self.state.gamma,
            h_value: adv.h_value,
            grad_theta_norm_sq: linalg::norm_sq(&grad_theta),
            grad_gamma_sq: grad_gamma * grad_gamma,
            inner_steps: adv.steps,
            distance,
        };
        self.state.t += 1;
        Ok(record)
    }

    pub fn step(&mut self, sample: &Sample) -> Result<IterationRecord> {
        let adv = self.perturb(sample)?;
        self.update(sample, &adv)
    }
}

/// Runs exactly `cfg.iterations` outer iterations.
pub fn train<S: SampleSource + ?Sized>(
    source: &mut S,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
    init: TrainState,
) -> Result<(TrainState, RunMetrics)> {
    train_observed(source, cfg, support, p, init, |_, _| {})
}

/// [`train`] with a callback after every iteration, e.g. to stream a trace or
/// compute diagnostics at each iterate.
pub fn train_observed<S, F>(
    source: &mut S,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
    init: TrainState,
    mut observe: F,
) -> Result<(TrainState, RunMetrics)>
where
    S: SampleSource + ?Sized,
    F: FnMut(&IterationRecord, &TrainState),
{
    let mut solver = DaSgd::new(cfg, support, p, init)?;
    let mut records = Vec::with_capacity(cfg.iterations);
    for t in 0..cfg.iterations {
        let sample = source.draw(t).ok_or(Error::SourceExhausted { drawn: t, needed: cfg.iterations })?;
        if sample.dim() != support.dim() {
            return Err(Error::DimensionMismatch { expected: support.dim(), found: sample.dim() });
        }
        let record = solver.step(&sample)?;
        observe(&record, &solver.state);
        records.push(record);
    }
    Ok((solver.state, RunMetrics { records, train_seconds: None, eval_seconds: None }))
}

/// Empirical dual objective `H(θ, γ) = mean_i sup_ξ' h(θ, γ; ξ_i, ξ')` over a
/// dataset, using the same inner solver as training.
pub fn dual_objective(
    state: &TrainState,
    data: &Dataset,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
) -> Result<f64> {
    data.require_nonempty()?;
    let mut total = 0.0;
    for s in data.samples() {
        total += inner::perturb(state, s, cfg, support, p)?.h_value;
    }
    Ok(total / data.len() as f64)
}

/// Squared norms of the full-batch gradient of the empirical dual objective:
/// `∇_θ H = mean_i c'(z_i*) (x_i*, 1)` and, for γ, the projected gradient
/// `(γ − clamp(γ − β ∇_γ H)) / β` with `∇_γ H = ρ − mean_i d(ξ_i*, ξ_i)`, which
/// vanishes when the clamp is active and pushing against it.
pub fn full_gradient_sq(
    state: &TrainState,
    data: &Dataset,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
    beta: f64,
) -> Result<(f64, f64)> {
    data.require_nonempty()?;
    let mut g_theta = alloc::vec![0.0; state.theta.len()];
    let mut mean_d = 0.0;
    for s in data.samples() {
        let adv = inner::perturb(state, s, cfg, support, p)?;
        let g = policy::grad_theta_cost(state, &adv.xi_star, p)?;
        for (a, b) in g_theta.iter_mut().zip(&g) {
            *a += b;
        }
        mean_d += transport_distance(&adv.xi_star, s, cfg.cost)?;
    }
    let n = data.len() as f64;
    let theta_sq = linalg::norm_sq(&g_theta) / (n * n);
    let grad_gamma = cfg.rho - mean_d / n;
    let mapped = (state.gamma - clamp_gamma(state.gamma - beta * grad_gamma, state, cfg, p)) / beta;
    Ok((theta_sq, mapped * mapped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::InnerTolerance;
    use alloc::vec;

    fn params() -> NewsvendorParams {
        NewsvendorParams::new(1.0, 0.2, 0.1).unwrap()
    }

    #[test]
    fn step_schedule_examples() {
        let c = DroConfig { alpha0: 1.0, beta0: 1.0, iterations: 10_000, ..Default::default() };
        assert!((default_steps(&c).alpha - 0.01).abs() < 1e-15);
        assert_eq!(default_steps(&DroConfig { iterations: 1, ..c.clone() }).alpha, 1.0);
        let a = default_steps(&DroConfig { iterations: 500, ..c.clone() }).alpha;
        let b = default_steps(&DroConfig { iterations: 1000, ..c.clone() }).alpha;
        assert!((a / b - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn clamp_examples() {
        let p = params();
        let c = DroConfig { gamma_min: 0.0, gamma_max: 50.0, gamma_margin: 1e-2, ..Default::default() };
        let s = TrainState::from_parts(&[1.0], 0.0, 0.0);
        let l = policy::lipschitz_xx(&s, &p);
        assert!((l - 6.0).abs() < 1e-12);
        assert_eq!(clamp_gamma(1.0, &s, &c, &p), l + 1e-2);
        assert_eq!(clamp_gamma(20.0, &s, &c, &p), 20.0);
        assert_eq!(clamp_gamma(80.0, &s, &c, &p), 50.0);
    }

    #[test]
    fn zero_iterations_return_init() {
        let p = params();
        let data = Dataset::new(1, vec![Sample::new(vec![0.5], 1.0)]).unwrap();
        let support = SupportBox::unit(1, 0.0, 2.0).unwrap();
        let c = DroConfig { iterations: 0, ..Default::default() };
        let init = initial_state(1, &c, &p);
        let (s, m) = train(&mut Bootstrap::new(&data, 0).unwrap(), &c, &support, &p, init.clone()).unwrap();
        assert_eq!(s, init);
        assert!(m.records.is_empty());
    }

    #[test]
    fn single_point_converges_to_demand() {
        // The smoothed cost is minimized at u = (c_b − c_h) δ / (c_b + c_h)
        // above the demand; δ = 0.05 puts that within 0.05 of y = 1.
        let p = NewsvendorParams::new(1.0, 0.2, 0.05).unwrap();
        let minimizer = 1.0 + (1.0 - 0.2) * 0.05 / 1.2;
        let data = Dataset::new(1, vec![Sample::new(vec![0.5], 1.0)]).unwrap();
        let support = SupportBox::unit(1, 0.0, 2.0).unwrap();
        let c = DroConfig {
            rho: 0.0,
            iterations: 5000,
            alpha0: 0.5,
            gamma_min: 100.0,
            gamma_max: 100.0,
            tolerance: InnerTolerance::Fixed { grad_tol: 1e-8 },
            ..Default::default()
        };
        let init = initial_state(1, &c, &p);
        let (s, m) = train(&mut Bootstrap::new(&data, 3).unwrap(), &c, &support, &p, init).unwrap();
        assert_eq!(m.records.len(), 5000);
        let z = policy::policy_eval(&s, &[0.5]).unwrap();
        assert!((z - 1.0).abs() < 0.05, "order {z}");
        assert!((z - minimizer).abs() < 0.01, "order {z}");
        assert!(m.records.iter().all(|r| r.distance == 0.0 && r.gamma == 100.0));
    }

    #[test]
    fn stream_exhaustion_is_an_error() {
        let p = params();
        let support = SupportBox::unit(1, 0.0, 2.0).unwrap();
        let c = DroConfig { iterations: 3, ..Default::default() };
        let mut src = StreamSource::new(vec![Sample::new(vec![0.5], 1.0)].into_iter());
        let err = train(&mut src, &c, &support, &p, initial_state(1, &c, &p)).unwrap_err();
        assert_eq!(err, Error::SourceExhausted { drawn: 1, needed: 3 });
    }

    #[test]
    fn least_squares_start_recovers_a_line() {
        let p = params();
        let samples = (0..5).map(|i| Sample::new(vec![i as f64], 2.0 * i as f64 + 1.0)).collect();
        let data = Dataset::new(1, samples).unwrap();
        let s = least_squares_start(&data, &DroConfig::default(), &p).unwrap();
        assert!((s.theta[0] - 2.0).abs() < 1e-6 && (s.theta[1] - 1.0).abs() < 1e-6);
        assert!(s.gamma >= policy::lipschitz_xx(&s, &p));
    }

    #[test]
    fn bootstrap_draws_depend_only_on_seed_and_index() {
        let samples = (0..10).map(|i| Sample::new(vec![i as f64], 0.0)).collect();
        let data = Dataset::new(1, samples).unwrap();
        let mut a = Bootstrap::new(&data, 9).unwrap();
        let mut b = Bootstrap::new(&data, 9).unwrap();
        let forward: Vec<_> = (0..20).map(|t| a.draw(t)).collect();
        let backward: Vec<_> = (0..20).rev().map(|t| b.draw(t)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert!(Bootstrap::new(&Dataset::new(1, vec![]).unwrap(), 0).is_err());
    }
}
