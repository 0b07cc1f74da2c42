//! Non-robust comparators: empirical risk minimization of the kinked cost
//! with the same linear policy, optionally L1-regularized, and the
//! featureless sample quantile.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::config::TrainState;
use crate::error::{Error, Result};
use crate::policy::{cost_kinked, policy_eval, NewsvendorParams};
use crate::rng::{self, Domain};
use crate::sample::Dataset;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ErmConfig {
    /// Weight on `‖θ‖₁` (intercept excluded); 0 for plain ERM.
    pub l1_weight: f64,
    /// Subgradient iterations; `None` means `20 · n · (s + 1)`.
    pub iterations: Option<usize>,
    /// Step size is `step_scale · sd(y) / √t`.
    pub step_scale: f64,
    /// Seeds fold assignment when the L1 weight is chosen by cross-validation.
    pub seed: u64,
}

impl Default for ErmConfig {
    fn default() -> Self {
        Self { l1_weight: 0.0, iterations: None, step_scale: 1.0, seed: 0 }
    }
}

fn sorted(ys: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = ys.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn label_spread(data: &Dataset) -> f64 {
    let n = data.len() as f64;
    let mean = data.labels().sum::<f64>() / n;
    let var = data.labels().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = libm::sqrt(var);
    if sd > 0.0 {
        sd
    } else {
        1.0
    }
}

/// Minimizes `mean_i c(θᵀx_i + θ₀, y_i) + λ ‖θ‖₁` by full-batch proximal
/// subgradient descent with steps `c/√t`, starting from zero coefficients and
/// the median label as intercept. Returns the average of the second half of
/// the iterates.
pub fn erm_train(data: &Dataset, p: &NewsvendorParams, cfg: &ErmConfig) -> Result<TrainState> {
    data.require_nonempty()?;
    if !(cfg.l1_weight >= 0.0) || !(cfg.step_scale > 0.0) {
        return Err(Error::InvalidConfig("need l1_weight >= 0 and step_scale > 0".into()));
    }
    let d = data.dim();
    let n = data.len();
    let iterations = cfg.iterations.unwrap_or(20 * n * (d + 1)).max(1);
    let step0 = cfg.step_scale * label_spread(data);

    let labels = sorted(data.labels());
    let mut state = TrainState::zeros(d, 0.0);
    state.theta[d] = labels[(n - 1) / 2];

    let tail_start = iterations / 2;
    let mut avg = vec![0.0; d + 1];
    let mut grad = vec![0.0; d + 1];
    for t in 1..=iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        for s in data.samples() {
            let z = policy_eval(&state, &s.x)?;
            let slope = if z < s.y {
                -p.backorder
            } else if z > s.y {
                p.holding
            } else {
                0.0
            };
            if slope != 0.0 {
                for j in 0..d {
                    grad[j] += slope * s.x[j];
                }
                grad[d] += slope;
            }
        }
        let step = step0 / libm::sqrt(t as f64);
        for j in 0..=d {
            state.theta[j] -= step * grad[j] / n as f64;
        }
        if cfg.l1_weight > 0.0 {
            let shrink = step * cfg.l1_weight;
            for v in &mut state.theta[..d] {
                *v = v.signum() * (libm::fabs(*v) - shrink).max(0.0);
            }
        }
        if t > tail_start {
            for (a, v) in avg.iter_mut().zip(&state.theta) {
                *a += v;
            }
        }
    }
    let count = (iterations - tail_start) as f64;
    state.theta = avg.into_iter().map(|v| v / count).collect();
    state.t = iterations;
    if !state.is_finite() {
        return Err(Error::NonFinite("ERM iterate"));
    }
    Ok(state)
}

/// Chooses the L1 weight by k-fold cross-validation on the kinked cost
/// (`k = min(5, n)`, folds seeded by `cfg.seed`), then refits on all data.
pub fn erm_train_cv(data: &Dataset, p: &NewsvendorParams, cfg: &ErmConfig, weights: &[f64]) -> Result<(f64, TrainState)> {
    data.require_nonempty()?;
    let Some(&first) = weights.first() else {
        return Err(Error::InvalidConfig("at least one L1 weight is required".into()));
    };
    let n = data.len();
    let folds = n.min(5);
    let mut chosen = first;
    if folds >= 2 && weights.len() > 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::substream(cfg.seed, Domain::Erm, 0));
        let mut best = f64::INFINITY;
        for &w in weights {
            let mut total = 0.0;
            for f in 0..folds {
                let (held, kept): (Vec<usize>, Vec<usize>) =
                    order.iter().enumerate().map(|(i, &j)| (i % folds == f, j)).fold((vec![], vec![]), |mut acc, (h, j)| {
                        if h {
                            acc.0.push(j)
                        } else {
                            acc.1.push(j)
                        }
                        acc
                    });
                let fit = erm_train(&data.select(&kept), p, &ErmConfig { l1_weight: w, ..cfg.clone() })?;
                total += evaluate_policy(&fit, &data.select(&held), p)? * held.len() as f64;
            }
            if total < best {
                best = total;
                chosen = w;
            }
        }
    }
    let fit = erm_train(data, p, &ErmConfig { l1_weight: chosen, ..cfg.clone() })?;
    Ok((chosen, fit))
}

/// Empirical `c_b / (c_b + c_h)` quantile with lower interpolation: the
/// `⌈r n⌉`-th smallest label.
pub fn saa_quantile(ys: &[f64], p: &NewsvendorParams) -> Result<f64> {
    if ys.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let v = sorted(ys.iter().copied());
    let n = v.len();
    // Guard against r·n landing a rounding error above an integer.
    let rank = libm::ceil(p.critical_ratio() * n as f64 - 1e-9) as usize;
    Ok(v[rank.clamp(1, n) - 1])
}

/// Mean kinked cost of the policy over a test set.
pub fn evaluate_policy(state: &TrainState, test: &Dataset, p: &NewsvendorParams) -> Result<f64> {
    test.require_nonempty()?;
    let mut total = 0.0;
    for s in test.samples() {
        total += cost_kinked(policy_eval(state, &s.x)?, s.y, p);
    }
    Ok(total / test.len() as f64)
}

/// `‖θ‖₁` without the intercept.
pub fn l1_norm(state: &TrainState) -> f64 {
    state.coefficients().iter().map(|v| libm::fabs(*v)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate, GenSpec};
    use crate::sample::Sample;

    fn params() -> NewsvendorParams {
        NewsvendorParams::new(1.0, 0.2, 0.1).unwrap()
    }

    fn labels_only(ys: &[f64]) -> Dataset {
        Dataset::new(0, ys.iter().map(|&y| Sample::new(vec![], y)).collect()).unwrap()
    }

    #[test]
    fn quantile_examples() {
        let p = params();
        assert_eq!(saa_quantile(&[3.0, 1.0, 5.0, 2.0, 4.0], &p).unwrap(), 5.0);
        assert_eq!(saa_quantile(&[7.5], &p).unwrap(), 7.5);
        let sym = NewsvendorParams::new(1.0, 1.0, 0.1).unwrap();
        assert_eq!(saa_quantile(&[9.0, 1.0, 4.0, 2.0, 3.0], &sym).unwrap(), 3.0);
        // r·n = 5 exactly: the lower end of the minimizing interval.
        assert_eq!(saa_quantile(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &p).unwrap(), 5.0);
        assert_eq!(saa_quantile(&[], &p), Err(Error::EmptyDataset));
    }

    #[test]
    fn single_point_erm_orders_the_demand() {
        let s = erm_train(&labels_only(&[2.5]), &params(), &ErmConfig::default()).unwrap();
        assert_eq!(s.intercept(), 2.5);
    }

    #[test]
    fn symmetric_costs_give_the_median() {
        let sym = NewsvendorParams::new(1.0, 1.0, 0.1).unwrap();
        let ys = [0.3, 2.0, -1.0, 4.0, 1.1, 0.7, 3.3];
        let s = erm_train(&labels_only(&ys), &sym, &ErmConfig::default()).unwrap();
        assert!((s.intercept() - 1.1).abs() < 0.2, "{}", s.intercept());
    }

    #[test]
    fn evaluation_examples() {
        let p = params();
        let test = Dataset::new(1, vec![Sample::new(vec![1.0], 2.0), Sample::new(vec![2.0], 4.0)]).unwrap();
        let perfect = TrainState::from_parts(&[2.0], 0.0, 1.0);
        assert_eq!(evaluate_policy(&perfect, &test, &p).unwrap(), 0.0);
        // Constant order 3: back-order 1 on the second, holding 1 on the first.
        let constant = TrainState::from_parts(&[0.0], 3.0, 1.0);
        assert!((evaluate_policy(&constant, &test, &p).unwrap() - (0.2 + 1.0) / 2.0).abs() < 1e-15);
        let swapped = Dataset::new(1, test.samples().iter().rev().cloned().collect()).unwrap();
        assert_eq!(evaluate_policy(&constant, &swapped, &p).unwrap(), evaluate_policy(&constant, &test, &p).unwrap());
    }

    #[test]
    fn l1_weight_shrinks_coefficients() {
        let p = params();
        let spec = GenSpec { dim: 5, n_train: 40, n_test: 1, sigma: 0.5, seed: 4, ..Default::default() };
        let (train, _) = generate(&spec).unwrap();
        let mut last = f64::INFINITY;
        for w in [0.0, 0.01, 0.05, 0.2, 1.0] {
            let s = erm_train(&train, &p, &ErmConfig { l1_weight: w, ..Default::default() }).unwrap();
            let norm = l1_norm(&s);
            assert!(norm <= last + 1e-3, "weight {w}: {norm} > {last}");
            last = norm;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn cross_validation_picks_a_listed_weight() {
        let p = params();
        let spec = GenSpec { dim: 3, n_train: 20, n_test: 1, seed: 2, ..Default::default() };
        let (train, _) = generate(&spec).unwrap();
        let grid = [0.0, 0.1, 1.0];
        let (w, s) = erm_train_cv(&train, &p, &ErmConfig::default(), &grid).unwrap();
        assert!(grid.contains(&w));
        assert!(s.is_finite());
        assert!(erm_train_cv(&train, &p, &ErmConfig::default(), &[]).is_err());
    }
}
