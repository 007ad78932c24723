//! End-to-end pipeline: data, classifier, claim simulation, pricing.

use crate::config::{ContractConfig, CostParams, DatasetConfig, ExperimentConfig, RobustSettings};
use crate::error::{HarnessError, Stage};
use crate::report::{mean, std_dev, Param, Params};
use algoins::claims::{generate_scenarios, ContractSpec, ErrorRates, Segment};
use algoins::classifier::{
    metrics_at_threshold, parse_dataset, predict_scores, roc_auc, stratified_split_indices, train_forest, CvScore,
    DatasetSchema, ForestModel, MeanImputer, RawDataset, TabularDataset, ThresholdMetrics,
};
use algoins::pricing::{effective_scenarios, price, FormulationKind, PricingProblem, RobustConfig};
use algoins::riskcore::Confidence;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Reads a dataset file in one of the two Wisconsin layouts. Missing values
/// are kept; they are imputed after the split with training means.
pub fn load_dataset(path: &Path, schema: DatasetSchema) -> Result<RawDataset, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::new(Stage::Data, format!("{}: {e}", path.display())))?;
    parse_dataset(&text, schema).map_err(|e| HarnessError::new(Stage::Data, format!("{}: {e}", path.display())))
}

/// Classifier trained once per configuration, with its test-set scores.
#[derive(Debug, Clone)]
pub struct TrainedClassifier {
    pub model: ForestModel,
    pub cv: Vec<CvScore>,
    pub imputer: MeanImputer,
    pub train: TabularDataset,
    pub test: TabularDataset,
    pub test_scores: Vec<f64>,
    pub auc: f64,
}

impl TrainedClassifier {
    pub fn fit(cfg: &DatasetConfig) -> Result<Self, HarnessError> {
        let raw = load_dataset(&cfg.path, cfg.schema)?;
        Self::fit_raw(&raw, cfg)
    }

    pub fn fit_raw(raw: &RawDataset, cfg: &DatasetConfig) -> Result<Self, HarnessError> {
        let data_err = |e| HarnessError::new(Stage::Data, e);
        let (tr, te) = stratified_split_indices(&raw.labels, cfg.train_fraction, cfg.model_seed).map_err(data_err)?;
        let (raw_train, raw_test) = (raw.subset(&tr), raw.subset(&te));
        let imputer = MeanImputer::fit(&raw_train).map_err(data_err)?;
        let train = imputer.apply(&raw_train).map_err(data_err)?;
        let test = imputer.apply(&raw_test).map_err(data_err)?;
        let train_err = |e| HarnessError::new(Stage::Train, e);
        let trained = train_forest(&train, &cfg.grid, cfg.cv_folds, cfg.model_seed).map_err(train_err)?;
        let test_scores = predict_scores(&trained.model, &test).map_err(train_err)?;
        let auc = roc_auc(&test_scores, test.labels()).map_err(train_err)?;
        Ok(Self {
            model: trained.model,
            cv: trained.cv,
            imputer,
            train,
            test,
            test_scores,
            auc,
        })
    }

    pub fn metrics(&self, tau: f64) -> ThresholdMetrics {
        metrics_at_threshold(&self.test_scores, self.test.labels(), tau).expect("scores and labels align")
    }

    pub fn rates(&self, tau: f64) -> ErrorRates {
        rates_of(&self.metrics(tau))
    }
}

pub fn rates_of(m: &ThresholdMetrics) -> ErrorRates {
    ErrorRates {
        tau: m.tau,
        kappa: m.specificity,
        lambda: m.sensitivity,
    }
}

/// One priced contract: everything that determines the result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceJob {
    pub seed: u64,
    pub rates: ErrorRates,
    pub costs: CostParams,
    pub beta: f64,
    pub upper: f64,
    pub kind: FormulationKind,
}

type JobKey = (u64, [u64; 9], FormulationKind);

impl PriceJob {
    /// Identity of the computation. The threshold itself is left out: two
    /// thresholds with the same error rates price identically.
    fn key(&self) -> JobKey {
        let c = &self.costs;
        (
            self.seed,
            [
                self.rates.kappa.to_bits(),
                self.rates.lambda.to_bits(),
                c.mu.to_bits(),
                c.sigma_mu.to_bits(),
                c.m.to_bits(),
                c.sigma_m.to_bits(),
                c.rho.to_bits(),
                self.beta.to_bits(),
                self.upper.to_bits(),
            ],
            self.kind,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceOutcome {
    pub prices: Vec<f64>,
    pub var: f64,
    pub cvar: f64,
    /// Smallest aggregate (effective) scenario cost in the upper `beta` tail.
    pub tail_floor: f64,
    pub mean_scenario: f64,
    pub iterations: usize,
}

/// Simulates scenarios for a job and solves its pricing program.
pub fn price_job(
    contract: &ContractConfig,
    robust: &RobustSettings,
    job: &PriceJob,
) -> Result<PriceOutcome, HarnessError> {
    let model = job.costs.model()?;
    let spec = ContractSpec {
        patients: contract.patients,
        scenarios: contract.scenarios,
        segments: vec![
            Segment {
                rates: job.rates,
                costs: model,
            };
            contract.segments
        ],
        master_seed: job.seed,
        mode: contract.sampling,
    };
    let y = generate_scenarios(&spec).map_err(|e| HarnessError::new(Stage::Scenarios, e))?;
    let perr = |e| HarnessError::new(Stage::Pricing, format!("seed {}, tau {}: {e}", job.seed, job.rates.tau));
    let beta = Confidence::new(job.beta).map_err(|e| HarnessError::new(Stage::Config, e))?;
    let problem = PricingProblem::uniform(y, beta, contract.lower, job.upper).map_err(perr)?;
    let cfg = RobustConfig::relative(job.kind, robust.gamma, robust.eta, &problem.scenarios);
    let sol = price(&problem, &cfg).map_err(perr)?;
    let eff = effective_scenarios(&problem, &cfg).map_err(perr)?;
    let mut totals: Vec<f64> = (0..eff.scenarios()).map(|j| eff.row(j).iter().sum()).collect();
    totals.sort_by(f64::total_cmp);
    let k = ((job.beta * totals.len() as f64 - 1e-9).ceil() as usize).clamp(1, totals.len());
    Ok(PriceOutcome {
        prices: sol.prices,
        var: sol.var,
        cvar: sol.cvar,
        tail_floor: totals[k - 1],
        mean_scenario: mean(&totals),
        iterations: sol.iterations,
    })
}

/// Prices every job, computing each distinct job once. Output order follows
/// the input, so results do not depend on scheduling.
pub fn price_all(
    contract: &ContractConfig,
    robust: &RobustSettings,
    jobs: &[PriceJob],
) -> Result<Vec<PriceOutcome>, HarnessError> {
    let mut unique: BTreeMap<JobKey, usize> = BTreeMap::new();
    let mut reps: Vec<&PriceJob> = Vec::new();
    let slot: Vec<usize> = jobs
        .iter()
        .map(|j| {
            *unique.entry(j.key()).or_insert_with(|| {
                reps.push(j);
                reps.len() - 1
            })
        })
        .collect();
    let solved: Vec<PriceOutcome> = reps
        .par_iter()
        .map(|j| price_job(contract, robust, j))
        .collect::<Result<_, _>>()?;
    Ok(slot.into_iter().map(|k| solved[k].clone()).collect())
}

/// Per-seed result, written to the JSON artifacts next to each CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub params: Params,
    pub seed: u64,
    pub cvar: f64,
    pub var: f64,
    pub prices: Vec<f64>,
    pub kappa: f64,
    pub lambda: f64,
    pub auc: f64,
    pub tail_floor: f64,
}

/// One aggregated grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub params: Params,
    pub mean_cvar: f64,
    pub std_cvar: f64,
    pub mean_var: f64,
    pub mean_prices: Vec<f64>,
    pub auc: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub seeds: usize,
    /// Smallest tail scenario over all seeds.
    pub min_tail_floor: f64,
}

impl SweepRow {
    pub fn num(&self, key: &str) -> f64 {
        self.params.get(key).and_then(Param::as_f64).unwrap_or(f64::NAN)
    }

    pub fn text(&self, key: &str) -> &str {
        match self.params.get(key) {
            Some(Param::Text(s)) => s,
            _ => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub runs: Vec<RunRecord>,
}

/// A grid point: its parameters, the classifier operating point and the
/// pricing setup shared by all seeds.
#[derive(Debug, Clone)]
pub struct Cell {
    pub params: Params,
    pub metrics: ThresholdMetrics,
    pub costs: CostParams,
    pub beta: f64,
    pub upper: f64,
    pub kind: FormulationKind,
}

/// Prices every cell for every seed and aggregates per cell.
pub fn run_cells(cfg: &ExperimentConfig, auc: f64, cells: &[Cell]) -> Result<SweepResult, HarnessError> {
    let jobs: Vec<PriceJob> = cells
        .iter()
        .flat_map(|c| {
            cfg.seeds.iter().map(move |&seed| PriceJob {
                seed,
                rates: rates_of(&c.metrics),
                costs: c.costs,
                beta: c.beta,
                upper: c.upper,
                kind: c.kind,
            })
        })
        .collect();
    let outcomes = price_all(&cfg.contract, &cfg.robust, &jobs)?;
    let s = cfg.seeds.len();
    let mut rows = Vec::with_capacity(cells.len());
    let mut runs = Vec::with_capacity(jobs.len());
    for (ci, cell) in cells.iter().enumerate() {
        let outs = &outcomes[ci * s..(ci + 1) * s];
        for (o, &seed) in outs.iter().zip(&cfg.seeds) {
            runs.push(RunRecord {
                params: cell.params.clone(),
                seed,
                cvar: o.cvar,
                var: o.var,
                prices: o.prices.clone(),
                kappa: cell.metrics.specificity,
                lambda: cell.metrics.sensitivity,
                auc,
                tail_floor: o.tail_floor,
            });
        }
        let cvars: Vec<f64> = outs.iter().map(|o| o.cvar).collect();
        let p = outs[0].prices.len();
        rows.push(SweepRow {
            params: cell.params.clone(),
            mean_cvar: mean(&cvars),
            std_cvar: std_dev(&cvars),
            mean_var: mean(&outs.iter().map(|o| o.var).collect::<Vec<_>>()),
            mean_prices: (0..p)
                .map(|k| mean(&outs.iter().map(|o| o.prices[k]).collect::<Vec<_>>()))
                .collect(),
            auc,
            kappa: cell.metrics.specificity,
            lambda: cell.metrics.sensitivity,
            seeds: s,
            min_tail_floor: outs.iter().map(|o| o.tail_floor).fold(f64::INFINITY, f64::min),
        });
    }
    Ok(SweepResult { rows, runs })
}

pub fn base_params(tau: f64, beta: f64, upper: f64, kind: FormulationKind, costs: &CostParams) -> Params {
    let mut p = Params::new();
    p.insert("tau".into(), tau.into());
    p.insert("beta".into(), beta.into());
    p.insert("upper".into(), upper.into());
    p.insert("formulation".into(), kind.name().into());
    p.insert("mu".into(), costs.mu.into());
    p.insert("sigma_mu".into(), costs.sigma_mu.into());
    p.insert("m".into(), costs.m.into());
    p.insert("sigma_m".into(), costs.sigma_m.into());
    p
}

/// The single-configuration run: classifier at `base.tau`, low-cost
/// setting, `base.beta`, `base.upper`, `base.formulation`, every seed.
pub fn run_price(cfg: &ExperimentConfig, clf: &TrainedClassifier) -> Result<SweepResult, HarnessError> {
    let b = &cfg.base;
    let costs = cfg.costs.low;
    let cell = Cell {
        params: base_params(b.tau, b.beta, b.upper, b.formulation, &costs),
        metrics: clf.metrics(b.tau),
        costs,
        beta: b.beta,
        upper: b.upper,
        kind: b.formulation,
    };
    run_cells(cfg, clf.auc, &[cell])
}
