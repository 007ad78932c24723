//! Experiment configuration. Every field has a default, so an empty JSON
//! object is a valid config and reproduces the reference parameter set.

use crate::error::{HarnessError, Stage};
use algoins::claims::{ClaimCostModel, SamplingMode};
use algoins::classifier::{DatasetSchema, ForestGrid};
use algoins::generalize::QualityMetric;
use algoins::interpret::Shape;
use algoins::pricing::FormulationKind;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub contract: ContractConfig,
    pub costs: CostSettings,
    /// Confidence levels used by the formulation table.
    pub betas: Vec<f64>,
    /// Threshold grid for threshold sweeps and best-CVaR searches.
    pub tau_grid: Vec<f64>,
    pub base: BaseRun,
    pub robust: RobustSettings,
    pub cost_sweep: CostSweep,
    pub interpret: InterpretSettings,
    pub generalize: GeneralizeSettings,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub schema: DatasetSchema,
    pub train_fraction: f64,
    /// Seed for the train/test split, cross-validation and forest. The
    /// classifier is trained once; `seeds` only drive the claim simulation.
    pub model_seed: u64,
    pub cv_folds: usize,
    pub grid: ForestGrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContractConfig {
    /// Patients served per contract (N).
    pub patients: usize,
    /// Simulated scenarios (J).
    pub scenarios: usize,
    /// Premium segments (P); all segments share the classifier.
    pub segments: usize,
    /// Premium lower bound l.
    pub lower: f64,
    /// Premium upper bounds H compared by the formulation table.
    pub upper: Vec<f64>,
    pub sampling: SamplingMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub mu: f64,
    pub sigma_mu: f64,
    pub m: f64,
    pub sigma_m: f64,
    #[serde(default)]
    pub rho: f64,
}

impl CostParams {
    pub fn model(&self) -> Result<ClaimCostModel, HarnessError> {
        let fp = algoins::claims::CostDistribution::new(self.mu, self.sigma_mu);
        let fn_ = algoins::claims::CostDistribution::new(self.m, self.sigma_m);
        fp.and_then(|a| fn_.and_then(|b| ClaimCostModel::new(a, b, self.rho)))
            .map_err(|e| HarnessError::new(Stage::Config, e))
    }

    /// Means `(mu, M)` with standard deviations set to `fraction` of each.
    pub fn scaled(mu: f64, m: f64, fraction: f64) -> Self {
        Self {
            mu,
            sigma_mu: fraction * mu,
            m,
            sigma_m: fraction * m,
            rho: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSettings {
    pub low: CostParams,
    pub high: CostParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseRun {
    pub tau: f64,
    pub beta: f64,
    pub upper: f64,
    pub formulation: FormulationKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustSettings {
    pub gamma: f64,
    /// Deviations are `eta * y` for every scenario entry.
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostSweep {
    pub mu_grid: Vec<f64>,
    pub m_grid: Vec<f64>,
    pub taus: Vec<f64>,
    pub sigma_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretSettings {
    pub c_ml: f64,
    /// Human-only exposures; must be supplied by the user (the shipped
    /// config file lists four illustrative values).
    pub c_h: Vec<f64>,
    pub shapes: Vec<Shape>,
    pub theta_grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneralizeSettings {
    pub psi_grid: Vec<f64>,
    pub n_synth: usize,
    pub bandwidth: f64,
    pub metric: QualityMetric,
}

fn grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    let n = ((stop - start) / step).round() as usize;
    (0..=n).map(|k| round6(start + k as f64 * step)).collect()
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut tau_grid = vec![0.01];
        tau_grid.extend(grid(0.05, 0.75, 0.05));
        Self {
            dataset: DatasetConfig::default(),
            contract: ContractConfig::default(),
            costs: CostSettings::default(),
            betas: vec![0.9, 0.95, 0.99],
            tau_grid,
            base: BaseRun::default(),
            robust: RobustSettings::default(),
            cost_sweep: CostSweep::default(),
            interpret: InterpretSettings::default(),
            generalize: GeneralizeSettings::default(),
            seeds: (0..10).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: PathBuf::from("data/breast-cancer-wisconsin.data"),
            schema: DatasetSchema::Original,
            train_fraction: 0.75,
            model_seed: 52,
            cv_folds: 10,
            grid: ForestGrid::default(),
        }
    }
}

impl Default for ContractConfig {
    fn default() -> Self {
        Self {
            patients: 100,
            scenarios: 1000,
            segments: 1,
            lower: 10_000.0,
            upper: vec![10_000.0, 50_000.0],
            sampling: SamplingMode::Weighted,
        }
    }
}

impl Default for CostSettings {
    fn default() -> Self {
        Self {
            low: CostParams {
                mu: 100_000.0,
                sigma_mu: 25_000.0,
                m: 500_000.0,
                sigma_m: 150_000.0,
                rho: 0.0,
            },
            high: CostParams {
                mu: 500_000.0,
                sigma_mu: 150_000.0,
                m: 1_000_000.0,
                sigma_m: 450_000.0,
                rho: 0.0,
            },
        }
    }
}

impl Default for BaseRun {
    fn default() -> Self {
        Self {
            tau: 0.3,
            beta: 0.9,
            upper: 50_000.0,
            formulation: FormulationKind::Nominal,
        }
    }
}

impl Default for RobustSettings {
    fn default() -> Self {
        Self { gamma: 3.0, eta: 0.1 }
    }
}

impl Default for CostSweep {
    fn default() -> Self {
        Self {
            mu_grid: grid(100_000.0, 500_000.0, 100_000.0),
            m_grid: grid(500_000.0, 1_000_000.0, 125_000.0),
            taus: vec![0.3, 0.4],
            sigma_fraction: 0.2,
        }
    }
}

impl Default for InterpretSettings {
    fn default() -> Self {
        Self {
            c_ml: 500_000.0,
            c_h: Vec::new(),
            shapes: Shape::ALL.to_vec(),
            theta_grid: grid(0.0, 1.0, 0.05),
        }
    }
}

impl Default for GeneralizeSettings {
    fn default() -> Self {
        Self {
            psi_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_synth: 2000,
            bandwidth: 0.05,
            metric: QualityMetric::Accuracy,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::new(Stage::Config, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::new(Stage::Config, format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        // Relative dataset paths are taken relative to the config file.
        if cfg.dataset.path.is_relative() {
            if let Some(dir) = path.parent() {
                let candidate = dir.join(&cfg.dataset.path);
                if candidate.exists() {
                    cfg.dataset.path = candidate;
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::new(Stage::Config, msg.to_string()));
        let c = &self.contract;
        if c.patients == 0 || c.scenarios == 0 || c.segments == 0 {
            return bad("contract patients, scenarios and segments must be positive");
        }
        if !c.lower.is_finite()
            || c.upper
                .iter()
                .chain([&self.base.upper])
                .any(|&h| !(h >= c.lower && h.is_finite()))
        {
            return bad("every premium upper bound must be finite and at least the lower bound");
        }
        if self
            .betas
            .iter()
            .chain([&self.base.beta])
            .any(|&b| !(b > 0.0 && b < 1.0))
        {
            return bad("confidence levels must lie in (0, 1)");
        }
        let taus = self
            .tau_grid
            .iter()
            .chain(&self.cost_sweep.taus)
            .chain([&self.base.tau]);
        if taus.into_iter().any(|t| !(0.0..=1.0).contains(t)) {
            return bad("thresholds must lie in [0, 1]");
        }
        if !(self.robust.gamma >= 0.0 && self.robust.gamma.is_finite() && self.robust.eta >= 0.0) {
            return bad("robust gamma and eta must be finite and non-negative");
        }
        if self.seeds.is_empty() {
            return bad("seed list is empty");
        }
        self.costs.low.model()?;
        self.costs.high.model()?;
        Ok(())
    }
}
