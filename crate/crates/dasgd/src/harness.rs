//! Experiment grid: every `(s, n, σ)` cell is repeated with fresh data, and
//! every method is fitted on the same train/test split of a repeat.
//!
//! Outputs:
//!
//! - `trials.csv`: one row per method and repeat; deterministic in the seed.
//! - `summary.csv`: mean and sample variance of the cost per cell and method,
//!   with the Monte-Carlo cost of the true conditional quantile policy.
//! - `timings.csv`: wall-clock seconds per trial, kept apart because they
//!   are the only output that changes between identical runs.

use std::path::Path;
use std::time::Instant;

use dasgd_core::dasgd::{initial_state, least_squares_start, train_observed};
use dasgd_core::rng::{child_seed, Domain};
use dasgd_core::{
    baselines, evaluate_policy, generate, saa_quantile, truth_optimal_cost, Bootstrap, Dataset, DroConfig, ErmConfig,
    GenSpec, IterationRecord, NewsvendorParams, TrainState,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{CostConfig, ExperimentConfig, Method, MethodSettings, SupportConfig};
use crate::error::{CliError, Result};
use crate::io;

/// A fitted policy with the settings it was fitted under.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub method: Method,
    pub state: TrainState,
    pub params: NewsvendorParams,
    pub rho: Option<f64>,
    pub l1_weight: Option<f64>,
    /// Inner ascent steps summed over the run (robust solver only).
    pub inner_steps: Option<usize>,
    pub train_seconds: f64,
}

/// Fits `method` on `train`. `observe` sees every robust-solver iteration.
pub fn fit_method(
    method: Method,
    train: &Dataset,
    settings: &MethodSettings,
    costs: &CostConfig,
    support: &SupportConfig,
    seed: u64,
    mut observe: impl FnMut(&IterationRecord),
) -> Result<Fit> {
    let params = costs.params(train)?;
    let mut fit = Fit { method, state: TrainState::zeros(train.dim(), 0.0), params, rho: None, l1_weight: None, inner_steps: None, train_seconds: 0.0 };
    match method {
        Method::Dasgd => {
            let s = &settings.dasgd;
            let support = support.resolve(train)?;
            let rho = s.radius.resolve(train, s.solver.cost)?;
            let cfg = DroConfig { rho, seed, ..s.solver.clone() };
            let clock = Instant::now();
            let init = if s.warm_start { least_squares_start(train, &cfg, &params)? } else { initial_state(train.dim(), &cfg, &params) };
            let mut source = Bootstrap::new(train, seed)?;
            let (state, metrics) = train_observed(&mut source, &cfg, &support, &params, init, |r, _| observe(r))?;
            fit.train_seconds = clock.elapsed().as_secs_f64();
            fit.state = state;
            fit.rho = Some(rho);
            fit.inner_steps = Some(metrics.total_inner_steps());
        }
        Method::Erm => {
            let clock = Instant::now();
            fit.state = baselines::erm_train(train, &params, &settings.erm)?;
            fit.train_seconds = clock.elapsed().as_secs_f64();
        }
        Method::ErmL1 => {
            let cfg = ErmConfig { seed, ..settings.erm_l1.erm.clone() };
            let clock = Instant::now();
            let (w, state) = baselines::erm_train_cv(train, &params, &cfg, &settings.erm_l1.l1_grid)?;
            fit.train_seconds = clock.elapsed().as_secs_f64();
            fit.state = state;
            fit.l1_weight = Some(w);
        }
        Method::Saa => {
            let clock = Instant::now();
            let labels: Vec<f64> = train.labels().collect();
            let q = saa_quantile(&labels, &params)?;
            fit.state = TrainState::from_parts(&vec![0.0; train.dim()], q, 0.0);
            fit.train_seconds = clock.elapsed().as_secs_f64();
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub method: Method,
    pub s: usize,
    pub n: usize,
    pub sigma: f64,
    pub repeat: usize,
    pub out_of_sample_cost: Option<f64>,
    pub rho: Option<f64>,
    pub final_gamma: Option<f64>,
    pub l1_weight: Option<f64>,
    pub inner_steps: Option<usize>,
    /// SHA-256 of the train and test CSV bytes, shared by all methods of a repeat.
    pub data_hash: String,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub method: Method,
    pub s: usize,
    pub n: usize,
    pub sigma: f64,
    pub repeat: usize,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: Method,
    pub s: usize,
    pub n: usize,
    pub sigma: f64,
    pub trials: usize,
    pub failures: usize,
    pub mean_cost: Option<f64>,
    /// Sample variance (divisor `trials − failures − 1`).
    pub var_cost: Option<f64>,
    pub oracle_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentOutput {
    pub trials: Vec<TrialRecord>,
    pub timings: Vec<TimingRecord>,
    pub summary: Vec<SummaryRow>,
}

fn model_seed(master: u64, s: usize) -> u64 {
    child_seed(master, Domain::TrueCoefficients, s as u64)
}

/// Depends on the cell's values rather than its position in the grid, so
/// adding cells leaves existing ones unchanged.
pub fn trial_seed(master: u64, s: usize, n: usize, sigma: f64, repeat: usize) -> u64 {
    [s as u64, n as u64, sigma.to_bits(), repeat as u64].into_iter().fold(master, |h, v| child_seed(h, Domain::Trial, v))
}

/// True coefficients shared by every cell of dimension `s`.
pub fn cell_theta(master: u64, s: usize) -> Result<Vec<f64>> {
    Ok(GenSpec { dim: s, seed: model_seed(master, s), ..Default::default() }.resolved_theta()?)
}

pub fn data_hash(train: &Dataset, test: &Dataset) -> String {
    let mut h = Sha256::new();
    h.update(io::dataset_bytes(train));
    h.update(b"--\n");
    h.update(io::dataset_bytes(test));
    hex::encode(h.finalize())
}

/// Mean and sample variance; the variance needs two values.
pub fn mean_var(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = (xs.len() > 1).then(|| xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0));
    (Some(mean), var)
}

struct Job {
    s: usize,
    n: usize,
    sigma: f64,
    repeat: usize,
}

fn run_trial(cfg: &ExperimentConfig, theta: &[f64], job: &Job) -> Vec<(TrialRecord, TimingRecord)> {
    let seed = trial_seed(cfg.seed, job.s, job.n, job.sigma, job.repeat);
    let spec = GenSpec {
        dim: job.s,
        n_train: job.n,
        n_test: cfg.n_test,
        sigma: job.sigma,
        theta_true: Some(theta.to_vec()),
        features: cfg.features.clone(),
        seed,
    };
    let record = |method, hash: &str| TrialRecord {
        method,
        s: job.s,
        n: job.n,
        sigma: job.sigma,
        repeat: job.repeat,
        out_of_sample_cost: None,
        rho: None,
        final_gamma: None,
        l1_weight: None,
        inner_steps: None,
        data_hash: hash.to_string(),
        error: None,
    };
    let timing = |method| TimingRecord { method, s: job.s, n: job.n, sigma: job.sigma, repeat: job.repeat, train_seconds: 0.0, eval_seconds: 0.0 };

    let (train, test) = match generate(&spec) {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| (TrialRecord { error: Some(format!("data generation: {e}")), ..record(m, "") }, timing(m)))
                .collect()
        }
    };
    let hash = data_hash(&train, &test);
    cfg.methods
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let mut rec = record(m, &hash);
            let mut time = timing(m);
            let method_seed = child_seed(seed, Domain::Bootstrap, k as u64);
            let outcome = fit_method(m, &train, &cfg.settings, &cfg.costs, &cfg.support, method_seed, |_| {}).and_then(|fit| {
                let clock = Instant::now();
                let cost = evaluate_policy(&fit.state, &test, &fit.params)?;
                Ok((fit, cost, clock.elapsed().as_secs_f64()))
            });
            match outcome {
                Ok((fit, cost, eval_seconds)) => {
                    rec.out_of_sample_cost = Some(cost);
                    rec.rho = fit.rho;
                    rec.final_gamma = (m == Method::Dasgd).then_some(fit.state.gamma);
                    rec.l1_weight = fit.l1_weight;
                    rec.inner_steps = fit.inner_steps;
                    time.train_seconds = fit.train_seconds;
                    time.eval_seconds = eval_seconds;
                }
                Err(e) => rec.error = Some(e.to_string()),
            }
            (rec, time)
        })
        .collect()
}

fn method_rank(cfg: &ExperimentConfig, m: Method) -> usize {
    cfg.methods.iter().position(|&x| x == m).unwrap_or(usize::MAX)
}

/// Runs the grid on a worker pool; records come back sorted by cell, repeat
/// and method order, independent of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
    let thetas: Vec<(usize, Vec<f64>)> = cfg.dims.iter().map(|&s| Ok((s, cell_theta(cfg.seed, s)?))).collect::<Result<_>>()?;
    let theta_of = |s: usize| &thetas.iter().find(|(d, _)| *d == s).expect("every dimension has coefficients").1;

    let mut jobs = Vec::new();
    for &s in &cfg.dims {
        for &n in &cfg.sizes {
            for &sigma in &cfg.sigmas {
                for repeat in 0..cfg.repeats {
                    jobs.push(Job { s, n, sigma, repeat });
                }
            }
        }
    }

    let (mut trials, mut timings): (Vec<_>, Vec<_>) =
        pool.install(|| jobs.par_iter().flat_map_iter(|job| run_trial(cfg, theta_of(job.s), job)).collect::<Vec<_>>()).into_iter().unzip();
    let key = |m: Method, s: usize, n: usize, sigma: f64, r: usize| (s, n, sigma.to_bits(), r, method_rank(cfg, m));
    trials.sort_by_key(|t: &TrialRecord| key(t.method, t.s, t.n, t.sigma, t.repeat));
    timings.sort_by_key(|t: &TimingRecord| key(t.method, t.s, t.n, t.sigma, t.repeat));

    let oracle = |s: usize, n: usize, sigma: f64| -> Result<Option<f64>> {
        if cfg.oracle_samples == 0 {
            return Ok(None);
        }
        let p = NewsvendorParams::new(cfg.costs.backorder, cfg.costs.holding, cfg.costs.delta.unwrap_or(1.0))?;
        let spec = GenSpec {
            dim: s,
            sigma,
            theta_true: Some(theta_of(s).clone()),
            features: cfg.features.clone(),
            seed: child_seed(trial_seed(cfg.seed, s, n, sigma, 0), Domain::MonteCarlo, 0),
            ..Default::default()
        };
        Ok(Some(truth_optimal_cost(&spec, &p, cfg.oracle_samples)?))
    };
    let mut cells = Vec::new();
    for &s in &cfg.dims {
        for &n in &cfg.sizes {
            for &sigma in &cfg.sigmas {
                cells.push((s, n, sigma));
            }
        }
    }
    let oracles: Vec<Option<f64>> = pool.install(|| cells.par_iter().map(|&(s, n, sigma)| oracle(s, n, sigma)).collect::<Result<_>>())?;

    let mut summary = Vec::new();
    for (&(s, n, sigma), oracle_cost) in cells.iter().zip(oracles) {
        for &method in &cfg.methods {
            let rows: Vec<&TrialRecord> =
                trials.iter().filter(|t| t.method == method && t.s == s && t.n == n && t.sigma.to_bits() == sigma.to_bits()).collect();
            let costs: Vec<f64> = rows.iter().filter_map(|t| t.out_of_sample_cost).collect();
            let (mean_cost, var_cost) = mean_var(&costs);
            summary.push(SummaryRow {
                method,
                s,
                n,
                sigma,
                trials: rows.len(),
                failures: rows.len() - costs.len(),
                mean_cost,
                var_cost,
                oracle_cost,
            });
        }
    }
    Ok(ExperimentOutput { trials, timings, summary })
}

pub fn write_experiment(dir: &Path, out: &ExperimentOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    io::write_rows(&dir.join("trials.csv"), &out.trials)?;
    io::write_rows(&dir.join("summary.csv"), &out.summary)?;
    io::write_rows(&dir.join("timings.csv"), &out.timings)
}
