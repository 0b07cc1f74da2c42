//! Online mode: a stream from the synthetic generator, regret against a
//! comparator fitted offline on a held-out sample of the same model.

use std::path::Path;

use dasgd_core::dasgd::initial_state;
use dasgd_core::{
    generate, project_to_support, run_online, train, Bootstrap, Dataset, DroConfig, GenSpec, GeneratorSource,
    NewsvendorParams, RegretTrace, Sample, SampleSource, SupportBox, TrainState,
};
use serde::{Deserialize, Serialize};

use crate::config::{Method, OnlineConfig};
use crate::error::{CliError, Result};
use crate::io::{self, ModelFile};

/// Keeps stream samples inside the support box. Only features are clipped
/// when labels cannot move, since a label outside the box is then harmless.
pub struct Clipped<'a, S> {
    inner: S,
    support: &'a SupportBox,
    labels_too: bool,
}

impl<'a, S> Clipped<'a, S> {
    pub fn new(inner: S, support: &'a SupportBox, labels_too: bool) -> Self {
        Self { inner, support, labels_too }
    }
}

impl<S: SampleSource> SampleSource for Clipped<'_, S> {
    fn draw(&mut self, t: usize) -> Option<Sample> {
        let s = self.inner.draw(t)?;
        let p = project_to_support(&s, self.support);
        Some(if self.labels_too { p } else { Sample::new(p.x, s.y) })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegretRow {
    pub t: usize,
    pub term: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlineOutput {
    pub comparator: ModelFile,
    pub learner: TrainState,
    pub trace: RegretTrace,
}

/// Held-out sample, cost parameters and support box of an online run.
pub fn held_out_setup(cfg: &OnlineConfig) -> Result<(Dataset, NewsvendorParams, SupportBox)> {
    let spec = GenSpec { n_train: cfg.held_out, n_test: 0, ..cfg.generator.clone() };
    let (held, _) = generate(&spec)?;
    let params = cfg.costs.params(&held)?;
    let support = cfg.support.resolve(&held)?;
    Ok((held, params, support))
}

/// Runs the stream. `comparator` overrides fitting one from the config.
pub fn run(cfg: &OnlineConfig, comparator: Option<ModelFile>) -> Result<OnlineOutput> {
    cfg.validate()?;
    let (held, params, support) = held_out_setup(cfg)?;
    let solver = &cfg.solver;
    let comparator = match (comparator, &cfg.comparator) {
        (Some(m), _) => {
            if m.theta.len() != cfg.generator.dim + 1 {
                return Err(CliError::Config(format!(
                    "comparator has {} coefficients, the stream needs {}",
                    m.theta.len(),
                    cfg.generator.dim + 1
                )));
            }
            m
        }
        (None, Some(c)) => {
            let offline = DroConfig { iterations: c.iterations, seed: c.seed, ..solver.clone() };
            let mut source = Bootstrap::new(&held, c.seed)?;
            let init = initial_state(held.dim(), &offline, &params);
            let (state, _) = train(&mut source, &offline, &support, &params, init)?;
            ModelFile {
                method: Method::Dasgd,
                theta: state.theta,
                gamma: state.gamma,
                rho: Some(solver.rho),
                l1_weight: None,
                params,
                iterations: state.t,
            }
        }
        (None, None) => return Err(CliError::Config("no comparator: pass a comparator file or set `comparator` in the config".into())),
    };
    let star = comparator.state();
    let init = if cfg.frozen { star.clone() } else { initial_state(held.dim(), solver, &params) };
    let mut stream = Clipped::new(GeneratorSource::new(&cfg.generator, cfg.stream_seed)?, &support, !solver.cost.labels_frozen());
    let (learner, trace) = run_online(&mut stream, solver, &support, &params, init, &star, cfg.frozen)?;
    Ok(OnlineOutput { comparator, learner, trace })
}

pub fn regret_rows(trace: &RegretTrace) -> Vec<RegretRow> {
    trace.steps.iter().map(|s| RegretRow { t: s.t, term: s.term, cumulative: s.cumulative }).collect()
}

pub fn write_online(dir: &Path, out: &OnlineOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    io::write_rows_with_header(&dir.join("regret.csv"), &["t", "term", "cumulative"], &regret_rows(&out.trace))?;
    io::write_json(&dir.join("comparator.json"), &out.comparator)
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
