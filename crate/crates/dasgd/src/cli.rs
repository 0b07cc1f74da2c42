use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dasgd_core::{evaluate_policy, generate, GenSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Method, OnlineConfig, Radius, TimingConfig, TrainConfig};
use crate::error::{CliError, Result};
use crate::harness::{fit_method, run_experiment, write_experiment};
use crate::io::{self, ModelFile, TraceRow};
use crate::{online, timing};

#[derive(Debug, Parser)]
#[command(name = "dasgd", version, about = "Distributionally robust contextual newsvendor policies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic train/test split from the linear demand model.
    Generate(GenerateArgs),
    /// Fit one method on a dataset file and write the model as JSON.
    Train(TrainArgs),
    /// Out-of-sample cost of a saved model on a dataset file.
    Evaluate(EvaluateArgs),
    /// Run the method comparison grid.
    Experiment(ExperimentArgs),
    /// Stream training with regret against a fixed comparator.
    Online(OnlineArgs),
    /// Wall-clock study of the solvers.
    Timing(TimingArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator settings as JSON; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Receives train.csv, test.csv and generator.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub method: Option<Method>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fixed Wasserstein radius instead of the calibrated one.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Outer iterations of the robust solver.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration CSV trace of the robust solver.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// One-row CSV with the result; printed to stdout either way.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sigmas: Option<Vec<f64>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long)]
    pub n_test: Option<usize>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Coverage level of the calibrated radius.
    #[arg(long)]
    pub confidence: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OnlineArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model JSON to use as the comparator instead of fitting one.
    #[arg(long)]
    pub comparator: Option<PathBuf>,
    /// Stream length.
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub stream_seed: Option<u64>,
    /// Hold the learner at the comparator.
    #[arg(long)]
    pub frozen: bool,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TimingArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub methods: Option<Vec<Method>>,
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub iterations: Option<Vec<usize>>,
    #[arg(long)]
    pub repeats: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRow {
    pub method: Method,
    pub n: usize,
    pub out_of_sample_cost: f64,
}

fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    path.map_or_else(|| Ok(T::default()), io::read_json)
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate_cmd(a),
        Command::Train(a) => train_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
        Command::Online(a) => online_cmd(a),
        Command::Timing(a) => timing_cmd(a),
    }
}

fn generate_cmd(a: GenerateArgs) -> Result<()> {
    let mut spec: GenSpec = load(a.config.as_deref())?;
    set(&mut spec.dim, a.dim);
    set(&mut spec.n_train, a.n_train);
    set(&mut spec.n_test, a.n_test);
    set(&mut spec.sigma, a.sigma);
    set(&mut spec.seed, a.seed);
    spec.theta_true = Some(spec.resolved_theta()?);
    let (train, test) = generate(&spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(CliError::io(&a.out_dir))?;
    io::write_dataset(&a.out_dir.join("train.csv"), &train)?;
    io::write_dataset(&a.out_dir.join("test.csv"), &test)?;
    io::write_json(&a.out_dir.join("generator.json"), &spec)
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let mut cfg: TrainConfig = load(a.config.as_deref())?;
    set(&mut cfg.method, a.method);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.settings.dasgd.solver.iterations, a.iterations);
    if let Some(rho) = a.rho {
        cfg.settings.dasgd.radius = Radius::Fixed { rho };
    }
    cfg.validate()?;
    let data = io::read_dataset(&a.data)?;

    let mut trace = match &a.trace {
        Some(p) => Some((csv::Writer::from_writer(BufWriter::new(File::create(p).map_err(CliError::io(p))?)), p)),
        None => None,
    };
    let mut trace_err = None;
    let fit = fit_method(cfg.method, &data, &cfg.settings, &cfg.costs, &cfg.support, cfg.seed, |r| {
        if let (Some((w, _)), None) = (trace.as_mut(), &trace_err) {
            trace_err = w.serialize(TraceRow::from(r)).err();
        }
    })?;
    if let Some((mut w, p)) = trace {
        if let Some(e) = trace_err {
            return Err(CliError::csv(p)(e));
        }
        w.flush().map_err(CliError::io(p))?;
    }
    let model = ModelFile {
        method: fit.method,
        theta: fit.state.theta,
        gamma: fit.state.gamma,
        rho: fit.rho,
        l1_weight: fit.l1_weight,
        params: fit.params,
        iterations: fit.state.t,
    };
    io::write_json(&a.out, &model)?;
    eprintln!("trained {} in {:.3} s", model.method, fit.train_seconds);
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let model: ModelFile = io::read_json(&a.model)?;
    let data = io::read_dataset(&a.data)?;
    if model.theta.len() != data.dim() + 1 {
        return Err(CliError::Config(format!("model expects {} features, data has {}", model.theta.len() - 1, data.dim())));
    }
    let row = EvaluationRow { method: model.method, n: data.len(), out_of_sample_cost: evaluate_policy(&model.state(), &data, &model.params)? };
    println!("{}", row.out_of_sample_cost);
    if let Some(out) = &a.out {
        io::write_rows(out, &[row])?;
    }
    Ok(())
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    let mut cfg: ExperimentConfig = load(a.config.as_deref())?;
    set(&mut cfg.dims, a.dims);
    set(&mut cfg.sizes, a.sizes);
    set(&mut cfg.sigmas, a.sigmas);
    set(&mut cfg.repeats, a.repeats);
    set(&mut cfg.methods, a.methods);
    set(&mut cfg.n_test, a.n_test);
    set(&mut cfg.settings.dasgd.solver.iterations, a.iterations);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.output_dir, a.output_dir);
    if a.threads.is_some() {
        cfg.threads = a.threads;
    }
    if let Some(confidence) = a.confidence {
        cfg.settings.dasgd.radius = Radius::Calibrated { confidence };
    }
    let out = run_experiment(&cfg)?;
    write_experiment(&cfg.output_dir, &out)?;
    let failed = out.trials.iter().filter(|t| t.error.is_some()).count();
    eprintln!("{} trials written to {} ({failed} failed)", out.trials.len(), cfg.output_dir.display());
    Ok(())
}

fn online_cmd(a: OnlineArgs) -> Result<()> {
    let mut cfg: OnlineConfig = load(a.config.as_deref())?;
    set(&mut cfg.solver.iterations, a.iterations);
    set(&mut cfg.stream_seed, a.stream_seed);
    set(&mut cfg.output_dir, a.output_dir);
    cfg.frozen |= a.frozen;
    let comparator = a.comparator.as_deref().map(io::read_json::<ModelFile>).transpose()?;
    let out = online::run(&cfg, comparator)?;
    online::write_online(&cfg.output_dir, &out)?;
    if let Some(last) = out.trace.steps.last() {
        eprintln!("cumulative regret after {} steps: {}", last.t, last.cumulative);
    }
    Ok(())
}

fn timing_cmd(a: TimingArgs) -> Result<()> {
    let mut cfg: TimingConfig = load(a.config.as_deref())?;
    set(&mut cfg.methods, a.methods);
    set(&mut cfg.dims, a.dims);
    set(&mut cfg.sizes, a.sizes);
    set(&mut cfg.iterations, a.iterations);
    set(&mut cfg.repeats, a.repeats);
    set(&mut cfg.seed, a.seed);
    set(&mut cfg.output_dir, a.output_dir);
    let (t, w) = timing::timing_study(&cfg)?;
    timing::write_timing(&cfg.output_dir, &t, &w)
}
