//! Online learning on a stream, with regret against a fixed comparator:
//!
//! ```text
//! Regret_T = Σ_t h(θ_t, γ_t; ξ_t, ξ_t*) − h(θ*, γ*; ξ_t, ξ*)
//! ```
//!
//! where each side is evaluated at its own worst-case perturbation of `ξ_t`.

use alloc::vec::Vec;

use crate::config::{DroConfig, TrainState};
use crate::dasgd::{DaSgd, SampleSource};
use crate::error::{Error, Result};
use crate::inner;
use crate::policy::NewsvendorParams;
use crate::sample::SupportBox;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretStep {
    /// 1-based step count.
    pub t: usize,
    pub term: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    pub steps: Vec<RegretStep>,
}

impl RegretTrace {
    /// Cumulative regret after `t` steps.
    pub fn at(&self, t: usize) -> Option<f64> {
        t.checked_sub(1).and_then(|i| self.steps.get(i)).map(|s| s.cumulative)
    }
}

/// Runs `cfg.iterations` steps on `source`. With `frozen` the learner never
/// updates, so starting it at the comparator yields zero regret throughout.
pub fn run_online<S: SampleSource + ?Sized>(
    source: &mut S,
    cfg: &DroConfig,
    support: &SupportBox,
    p: &NewsvendorParams,
    init: TrainState,
    comparator: &TrainState,
    frozen: bool,
) -> Result<(TrainState, RegretTrace)> {
    if comparator.dim() != init.dim() {
        return Err(Error::DimensionMismatch { expected: init.dim(), found: comparator.dim() });
    }
    if !comparator.is_finite() {
        return Err(Error::NonFinite("comparator"));
    }
    let mut learner = DaSgd::new(cfg, support, p, init)?;
    let mut steps = Vec::with_capacity(cfg.iterations);
    let mut cumulative = 0.0;
    for t in 0..cfg.iterations {
        let sample = source.draw(t).ok_or(Error::SourceExhausted { drawn: t, needed: cfg.iterations })?;
        if sample.dim() != support.dim() {
            return Err(Error::DimensionMismatch { expected: support.dim(), found: sample.dim() });
        }
        let mine = learner.perturb(&sample)?;
        let theirs = inner::perturb(comparator, &sample, cfg, support, p)?;
        let term = mine.h_value - theirs.h_value;
        cumulative += term;
        steps.push(RegretStep { t: t + 1, term, cumulative });
        if !frozen {
            learner.update(&sample, &mine)?;
        }
    }
    Ok((learner.state, RegretTrace { steps }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dasgd::{initial_state, GeneratorSource, StreamSource};
    use crate::datagen::GenSpec;
    use crate::sample::Sample;
    use alloc::vec;

    fn setup() -> (DroConfig, SupportBox, NewsvendorParams, GenSpec) {
        let spec = GenSpec { dim: 2, sigma: 0.5, ..Default::default() };
        let cfg = DroConfig { rho: 0.1, iterations: 300, ..Default::default() };
        let support = SupportBox::unit(2, -2.0, 5.0).unwrap();
        (cfg, support, NewsvendorParams::new(1.0, 0.2, 0.1).unwrap(), spec)
    }

    #[test]
    fn frozen_comparator_has_zero_regret() {
        let (cfg, support, p, spec) = setup();
        let star = TrainState::from_parts(&[0.1, 0.2], 1.3, 7.0);
        let mut src = GeneratorSource::new(&spec, 5).unwrap();
        let (end, trace) = run_online(&mut src, &cfg, &support, &p, star.clone(), &star, true).unwrap();
        assert_eq!(end, star);
        assert_eq!(trace.steps.len(), cfg.iterations);
        assert!(trace.steps.iter().all(|s| s.term == 0.0 && s.cumulative == 0.0));
    }

    #[test]
    fn trace_accumulates_terms() {
        let (cfg, support, p, spec) = setup();
        let star = TrainState::from_parts(&[0.1, 0.2], 1.3, 7.0);
        let mut src = GeneratorSource::new(&spec, 5).unwrap();
        let init = initial_state(2, &cfg, &p);
        let (_, trace) = run_online(&mut src, &cfg, &support, &p, init, &star, false).unwrap();
        let mut sum = 0.0;
        for (i, s) in trace.steps.iter().enumerate() {
            sum += s.term;
            assert_eq!(s.t, i + 1);
            assert_eq!(s.cumulative, sum);
        }
        assert_eq!(trace.at(300), Some(sum));
        assert_eq!(trace.at(0), None);
    }

    #[test]
    fn short_stream_and_bad_comparator() {
        let (cfg, support, p, _) = setup();
        let star = TrainState::from_parts(&[0.0, 0.0], 1.0, 7.0);
        let mut short = StreamSource::new(vec![Sample::new(vec![0.5, 0.5], 1.0)].into_iter());
        let err = run_online(&mut short, &cfg, &support, &p, star.clone(), &star, false).unwrap_err();
        assert!(matches!(err, Error::SourceExhausted { drawn: 1, .. }));
        let wrong = TrainState::from_parts(&[0.0], 1.0, 7.0);
        let mut src = StreamSource::new(core::iter::empty());
        assert!(run_online(&mut src, &cfg, &support, &p, star, &wrong, false).is_err());
    }
}
