//! JSON configuration for every subcommand. Unknown keys are rejected so that
//! typos surface as configuration errors instead of silent defaults.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use dasgd_core::{
    calibration, Confidence, Dataset, DroConfig, ErmConfig, FeatureDist, GenSpec, NewsvendorParams, SupportBox, TransportCost,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The robust solver.
    Dasgd,
    /// Plain empirical risk minimization of the kinked cost.
    Erm,
    /// L1-regularized ERM with the weight picked by cross-validation.
    ErmL1,
    /// Featureless sample quantile.
    Saa,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Dasgd, Method::Erm, Method::ErmL1, Method::Saa];

    pub fn name(self) -> &'static str {
        match self {
            Method::Dasgd => "dasgd",
            Method::Erm => "erm",
            Method::ErmL1 => "erm_l1",
            Method::Saa => "saa",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected one of dasgd, erm, erm_l1, saa)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConfig {
    pub backorder: f64,
    pub holding: f64,
    /// Smoothing half-width; `None` means a tenth of the training labels' sd.
    pub delta: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        Self { backorder: 1.0, holding: 0.2, delta: None }
    }
}

impl CostConfig {
    pub fn params(&self, train: &Dataset) -> Result<NewsvendorParams> {
        match self.delta {
            Some(d) => Ok(NewsvendorParams::new(self.backorder, self.holding, d)?),
            None => Ok(NewsvendorParams::new(self.backorder, self.holding, 1.0)?.with_default_delta(train.labels())?),
        }
    }

    fn validate(&self) -> Result<()> {
        NewsvendorParams::new(self.backorder, self.holding, self.delta.unwrap_or(1.0))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SupportConfig {
    /// Bounding box of the training data, scaled about its centre.
    Data {
        #[serde(default = "one")]
        inflate: f64,
    },
    Box { x_lo: Vec<f64>, x_hi: Vec<f64>, y_lo: f64, y_hi: f64 },
}

fn one() -> f64 {
    1.0
}

impl Default for SupportConfig {
    fn default() -> Self {
        SupportConfig::Data { inflate: 1.0 }
    }
}

impl SupportConfig {
    pub fn resolve(&self, train: &Dataset) -> Result<SupportBox> {
        let b = match self {
            SupportConfig::Data { inflate } => SupportBox::from_data(train, *inflate)?,
            SupportConfig::Box { x_lo, x_hi, y_lo, y_hi } => SupportBox::new(x_lo.clone(), x_hi.clone(), *y_lo, *y_hi)?,
        };
        if b.dim() != train.dim() {
            return Err(CliError::Config(format!("support box has dimension {}, data has {}", b.dim(), train.dim())));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Radius {
    /// Radius whose coverage bound reaches `confidence` for the training size,
    /// with the diameter estimated from the training data.
    Calibrated { confidence: f64 },
    Fixed { rho: f64 },
}

impl Default for Radius {
    fn default() -> Self {
        Radius::Calibrated { confidence: 0.95 }
    }
}

impl Radius {
    pub fn resolve(&self, train: &Dataset, cost: TransportCost) -> Result<f64> {
        match *self {
            Radius::Fixed { rho } => Ok(rho),
            Radius::Calibrated { confidence } => {
                let q = Confidence::new(confidence)?;
                let d = calibration::estimate_diameter(train, cost)?;
                Ok(calibration::radius_for_confidence(train.len(), q, d)?.rho)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Radius::Fixed { rho } if !(rho >= 0.0) || !rho.is_finite() => {
                Err(CliError::Config(format!("fixed radius must be finite and non-negative, got {rho}")))
            }
            Radius::Calibrated { confidence } => Confidence::new(confidence).map(|_| ()).map_err(Into::into),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct DasgdSettings {
    /// Solver settings; `rho` is replaced by the resolved radius and `seed` by
    /// the per-run seed.
    pub solver: DroConfig,
    pub radius: Radius,
    /// Start from the least-squares fit instead of zero coefficients.
    pub warm_start: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErmL1Settings {
    pub erm: ErmConfig,
    /// Candidate L1 weights for cross-validation.
    pub l1_grid: Vec<f64>,
}

impl Default for ErmL1Settings {
    fn default() -> Self {
        Self { erm: ErmConfig::default(), l1_grid: vec![0.0, 1e-3, 1e-2, 0.03, 0.1, 0.3, 1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MethodSettings {
    pub dasgd: DasgdSettings,
    pub erm: ErmConfig,
    pub erm_l1: ErmL1Settings,
}

impl MethodSettings {
    fn validate(&self) -> Result<()> {
        self.dasgd.solver.validate()?;
        self.dasgd.radius.validate()?;
        if self.erm_l1.l1_grid.is_empty() || self.erm_l1.l1_grid.iter().any(|w| !(*w >= 0.0)) {
            return Err(CliError::Config("l1_grid must be a nonempty list of non-negative weights".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    pub repeats: usize,
    pub methods: Vec<Method>,
    pub settings: MethodSettings,
    pub costs: CostConfig,
    pub support: SupportConfig,
    pub features: FeatureDist,
    pub n_test: usize,
    /// Monte-Carlo draws for the oracle cost in `summary.csv`; 0 skips it.
    pub oracle_samples: usize,
    pub seed: u64,
    /// Worker threads; `None` uses every core.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dims: vec![10, 50],
            sizes: vec![10, 50, 100],
            sigmas: vec![0.5, 1.0],
            repeats: 20,
            methods: Method::ALL.to_vec(),
            settings: MethodSettings::default(),
            costs: CostConfig::default(),
            support: SupportConfig::default(),
            features: FeatureDist::Uniform,
            n_test: 10_000,
            oracle_samples: 100_000,
            seed: 0,
            threads: None,
            output_dir: PathBuf::from("results"),
        }
    }
}

fn check_grid(dims: &[usize], sizes: &[usize], sigmas: &[f64], repeats: usize) -> Result<()> {
    let bad = |m: &str| Err(CliError::Config(m.into()));
    if dims.is_empty() || sizes.is_empty() || sigmas.is_empty() {
        return bad("dims, sizes and sigmas must be nonempty");
    }
    if dims.contains(&0) {
        return bad("dimensions must be at least 1");
    }
    if sizes.iter().any(|&n| n < 2) {
        return bad("training sizes must be at least 2");
    }
    if sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return bad("sigmas must be finite and non-negative");
    }
    if repeats == 0 {
        return bad("repeats must be at least 1");
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.dims, &self.sizes, &self.sigmas, self.repeats)?;
        if self.methods.is_empty() {
            return Err(CliError::Config("methods must be nonempty".into()));
        }
        if self.n_test == 0 {
            return Err(CliError::Config("n_test must be at least 1".into()));
        }
        if self.threads == Some(0) {
            return Err(CliError::Config("threads must be at least 1".into()));
        }
        self.costs.validate()?;
        self.settings.validate()
    }
}

/// Settings for `train`, which fits one method on a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub method: Method,
    pub settings: MethodSettings,
    pub costs: CostConfig,
    pub support: SupportConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            method: Method::Dasgd,
            settings: MethodSettings::default(),
            costs: CostConfig::default(),
            support: SupportConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.costs.validate()?;
        self.settings.validate()
    }
}

/// How the online comparator is fitted: a long offline run on the held-out
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparatorConfig {
    pub iterations: usize,
    /// Seeds the bootstrap draws of the offline run.
    pub seed: u64,
}

impl Default for ComparatorConfig {
    fn default() -> Self {
        Self { iterations: 200_000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OnlineConfig {
    /// Model of the stream. Its `seed` draws the held-out sample; `n_train`
    /// and `n_test` are ignored.
    pub generator: GenSpec,
    /// Size of the held-out sample that fixes the support box, the default
    /// smoothing width and the fitted comparator.
    pub held_out: usize,
    /// `iterations` is the stream length.
    pub solver: DroConfig,
    pub costs: CostConfig,
    pub support: SupportConfig,
    /// `None` requires a comparator file on the command line.
    pub comparator: Option<ComparatorConfig>,
    /// Start the learner at the comparator and never update it.
    pub frozen: bool,
    pub stream_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for OnlineConfig {
    fn default() -> Self {
        Self {
            generator: GenSpec { dim: 5, sigma: 0.5, ..Default::default() },
            held_out: 2000,
            solver: DroConfig { iterations: 16_000, ..Default::default() },
            costs: CostConfig::default(),
            support: SupportConfig::Data { inflate: 1.5 },
            comparator: Some(ComparatorConfig::default()),
            frozen: false,
            stream_seed: 100,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl OnlineConfig {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.costs.validate()?;
        if self.generator.dim == 0 {
            return Err(CliError::Config("generator dimension must be at least 1".into()));
        }
        if self.held_out < 2 {
            return Err(CliError::Config("held_out must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimingConfig {
    pub methods: Vec<Method>,
    pub dims: Vec<usize>,
    pub sizes: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// Outer iteration budgets, each overriding the solver's.
    pub iterations: Vec<usize>,
    pub repeats: usize,
    pub settings: MethodSettings,
    pub costs: CostConfig,
    pub support: SupportConfig,
    pub n_test: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Dasgd],
            dims: vec![50],
            sizes: vec![10, 500],
            sigmas: vec![1.0],
            iterations: vec![DroConfig::default().iterations],
            repeats: 3,
            settings: MethodSettings::default(),
            costs: CostConfig::default(),
            support: SupportConfig::default(),
            n_test: 1000,
            seed: 0,
            output_dir: PathBuf::from("results"),
        }
    }
}

impl TimingConfig {
    pub fn validate(&self) -> Result<()> {
        check_grid(&self.dims, &self.sizes, &self.sigmas, self.repeats)?;
        if self.iterations.is_empty() {
            return Err(CliError::Config("iterations must be nonempty".into()));
        }
        if self.n_test == 0 {
            return Err(CliError::Config("n_test must be at least 1".into()));
        }
        self.costs.validate()?;
        self.settings.validate()
    }
}
