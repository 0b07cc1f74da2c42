//! Wall-clock study: mean train and evaluation time per `(method, s, n, T)`
//! cell, pooled over repeats and noise levels. Runs are sequential so they do
//! not compete for cores.
//!
//! `timing.csv` holds the seconds; `timing_work.csv` holds the matching
//! deterministic work counts and costs.

use std::path::Path;
use std::time::Instant;

use dasgd_core::rng::{child_seed, Domain};
use dasgd_core::{evaluate_policy, generate, GenSpec};
use serde::{Deserialize, Serialize};

use crate::config::{MethodSettings, TimingConfig};
use crate::error::{CliError, Result};
use crate::harness::{cell_theta, fit_method, trial_seed};
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub method: crate::config::Method,
    pub s: usize,
    pub n: usize,
    pub iterations: usize,
    pub runs: usize,
    pub mean_train_seconds: f64,
    pub mean_eval_seconds: f64,
    pub mean_total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkRow {
    pub method: crate::config::Method,
    pub s: usize,
    pub n: usize,
    pub iterations: usize,
    pub runs: usize,
    /// Inner ascent steps per run (robust solver only).
    pub mean_inner_steps: Option<f64>,
    pub mean_cost: f64,
}

pub const TIMING_HEADER: [&str; 8] =
    ["method", "s", "n", "iterations", "runs", "mean_train_seconds", "mean_eval_seconds", "mean_total_seconds"];
pub const WORK_HEADER: [&str; 7] = ["method", "s", "n", "iterations", "runs", "mean_inner_steps", "mean_cost"];

pub fn timing_study(cfg: &TimingConfig) -> Result<(Vec<TimingRow>, Vec<WorkRow>)> {
    cfg.validate()?;
    let mut timing = Vec::new();
    let mut work = Vec::new();
    for &method in &cfg.methods {
        for &s in &cfg.dims {
            let theta = cell_theta(cfg.seed, s)?;
            for &n in &cfg.sizes {
                for &iterations in &cfg.iterations {
                    let mut settings: MethodSettings = cfg.settings.clone();
                    settings.dasgd.solver.iterations = iterations;
                    let (mut train_s, mut eval_s, mut steps, mut cost, mut runs) = (0.0, 0.0, 0usize, 0.0, 0usize);
                    let mut robust = false;
                    for &sigma in &cfg.sigmas {
                        for r in 0..cfg.repeats {
                            let seed = trial_seed(cfg.seed, s, n, sigma, r);
                            let spec = GenSpec {
                                dim: s,
                                n_train: n,
                                n_test: cfg.n_test,
                                sigma,
                                theta_true: Some(theta.clone()),
                                seed,
                                ..Default::default()
                            };
                            let (train, test) = generate(&spec)?;
                            let run_seed = child_seed(seed, Domain::Bootstrap, 0);
                            let fit = fit_method(method, &train, &settings, &cfg.costs, &cfg.support, run_seed, |_| {})?;
                            let clock = Instant::now();
                            cost += evaluate_policy(&fit.state, &test, &fit.params)?;
                            eval_s += clock.elapsed().as_secs_f64();
                            train_s += fit.train_seconds;
                            if let Some(k) = fit.inner_steps {
                                steps += k;
                                robust = true;
                            }
                            runs += 1;
                        }
                    }
                    let m = runs as f64;
                    timing.push(TimingRow {
                        method,
                        s,
                        n,
                        iterations,
                        runs,
                        mean_train_seconds: train_s / m,
                        mean_eval_seconds: eval_s / m,
                        mean_total_seconds: (train_s + eval_s) / m,
                    });
                    work.push(WorkRow {
                        method,
                        s,
                        n,
                        iterations,
                        runs,
                        mean_inner_steps: robust.then(|| steps as f64 / m),
                        mean_cost: cost / m,
                    });
                }
            }
        }
    }
    Ok((timing, work))
}

pub fn write_timing(dir: &Path, timing: &[TimingRow], work: &[WorkRow]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    io::write_rows_with_header(&dir.join("timing.csv"), &TIMING_HEADER, timing)?;
    io::write_rows_with_header(&dir.join("timing_work.csv"), &WORK_HEADER, work)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Method;

    #[test]
    fn empty_method_list_gives_empty_tables() {
        let cfg = TimingConfig { methods: vec![], ..Default::default() };
        assert_eq!(timing_study(&cfg).unwrap(), (vec![], vec![]));
    }

    #[test]
    fn one_row_per_cell() {
        let mut cfg = TimingConfig {
            methods: vec![Method::Dasgd, Method::Saa],
            dims: vec![2],
            sizes: vec![5, 9],
            iterations: vec![50, 100],
            repeats: 2,
            n_test: 20,
            ..Default::default()
        };
        cfg.sigmas = vec![0.5, 1.0];
        let (t, w) = timing_study(&cfg).unwrap();
        assert_eq!(t.len(), 2 * 2 * 2);
        assert!(t.iter().all(|r| r.runs == 4 && r.mean_total_seconds >= r.mean_train_seconds));
        assert!(w.iter().all(|r| r.mean_inner_steps.is_some() == (r.method == Method::Dasgd)));
        let (_, again) = timing_study(&cfg).unwrap();
        assert_eq!(w, again);
    }
}
