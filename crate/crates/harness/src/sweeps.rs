//! Experiment sweeps. Each returns its result plus the exact files it
//! writes, so output bytes can be compared without touching the disk.

use crate::config::{CostParams, ExperimentConfig};
use crate::error::{HarnessError, Stage};
use crate::pipeline::{
    base_params, price_job, rates_of, run_cells, run_price, Cell, PriceJob, SweepResult, SweepRow, TrainedClassifier,
};
use crate::report::{linear_fit, mean, params_table, std_dev, write_text, LinearFit, Param, Params, Table};
use algoins::classifier::ThresholdMetrics;
use algoins::generalize::{cvar_under_shift, median, spearman, FidelityGenerator, ShiftRow, ShiftSettings};
use algoins::interpret::{risk_at, InterpretabilityCurve};
use algoins::pricing::FormulationKind;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

/// Files produced by a command, in write order: `(file name, contents)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    pub files: Vec<(String, String)>,
}

impl Output {
    fn csv(&mut self, name: &str, table: &Table) {
        self.files.push((format!("{name}.csv"), table.to_csv()));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), HarnessError> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::new(Stage::Output, e))?;
        text.push('\n');
        self.files.push((format!("{name}.json"), text));
        Ok(())
    }

    fn sweep(&mut self, name: &str, result: &SweepResult) -> Result<(), HarnessError> {
        self.csv(name, &sweep_table(&result.rows));
        self.json(&format!("{name}_runs"), &result.runs)
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, t)| t.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        for (name, text) in &self.files {
            write_text(&dir.join(name), text)?;
        }
        Ok(())
    }
}

/// Standard sweep CSV: sorted parameters, then
/// `mean_cvar, std_cvar, mean_var, x_1..x_P, auc, kappa, lambda, seeds`.
pub fn sweep_table(rows: &[SweepRow]) -> Table {
    let p = rows.first().map_or(0, |r| r.mean_prices.len());
    let premium_cols: Vec<String> = (1..=p).map(|k| format!("x_{k}")).collect();
    let mut metric_names = vec!["mean_cvar", "std_cvar", "mean_var"];
    metric_names.extend(premium_cols.iter().map(String::as_str));
    metric_names.extend(["auc", "kappa", "lambda", "seeds"]);
    let body: Vec<(Params, Vec<Param>)> = rows
        .iter()
        .map(|r| {
            let mut m: Vec<Param> = vec![r.mean_cvar.into(), r.std_cvar.into(), r.mean_var.into()];
            m.extend(r.mean_prices.iter().map(|&x| Param::Num(x)));
            m.extend([r.auc.into(), r.kappa.into(), r.lambda.into(), (r.seeds as f64).into()]);
            (r.params.clone(), m)
        })
        .collect();
    params_table(&metric_names, &body)
}

fn empty(what: &str) -> HarnessError {
    HarnessError::new(Stage::Config, format!("{what} grid is empty"))
}

/// JSON summary of the single end-to-end run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSummary {
    pub formulation: FormulationKind,
    pub tau: f64,
    pub beta: f64,
    pub auc: f64,
    pub kappa: f64,
    pub lambda: f64,
    pub x: Vec<f64>,
    pub var: f64,
    pub cvar: f64,
    pub std_cvar: f64,
    pub seeds: Vec<u64>,
    pub per_seed_cvar: Vec<f64>,
}

pub fn price_command(cfg: &ExperimentConfig, clf: &TrainedClassifier) -> Result<(PriceSummary, Output), HarnessError> {
    let res = run_price(cfg, clf)?;
    let row = &res.rows[0];
    let summary = PriceSummary {
        formulation: cfg.base.formulation,
        tau: cfg.base.tau,
        beta: cfg.base.beta,
        auc: clf.auc,
        kappa: row.kappa,
        lambda: row.lambda,
        x: row.mean_prices.clone(),
        var: row.mean_var,
        cvar: row.mean_cvar,
        std_cvar: row.std_cvar,
        seeds: cfg.seeds.clone(),
        per_seed_cvar: res.runs.iter().map(|r| r.cvar).collect(),
    };
    let mut out = Output::default();
    out.json("price", &summary)?;
    out.json("price_runs", &res.runs)?;
    Ok((summary, out))
}

/// Mean CVaR against the threshold, for the low and high cost settings.
pub fn sweep_tau(cfg: &ExperimentConfig, clf: &TrainedClassifier) -> Result<(SweepResult, Output), HarnessError> {
    if cfg.tau_grid.is_empty() {
        return Err(empty("tau"));
    }
    let b = &cfg.base;
    let mut cells = Vec::new();
    for (setting, costs) in [("low", cfg.costs.low), ("high", cfg.costs.high)] {
        for &tau in &cfg.tau_grid {
            let mut params = base_params(tau, b.beta, b.upper, b.formulation, &costs);
            params.insert("setting".into(), setting.into());
            cells.push(Cell {
                params,
                metrics: clf.metrics(tau),
                costs,
                beta: b.beta,
                upper: b.upper,
                kind: b.formulation,
            });
        }
    }
    let res = run_cells(cfg, clf.auc, &cells)?;
    let mut out = Output::default();
    out.sweep("sweep_tau", &res)?;
    Ok((res, out))
}

/// Threshold with the smallest mean CVaR among rows of one setting.
pub fn argmin_tau(rows: &[SweepRow], setting: &str) -> Option<f64> {
    rows.iter()
        .filter(|r| r.text("setting") == setting)
        .min_by(|a, b| a.mean_cvar.total_cmp(&b.mean_cvar))
        .map(|r| r.num("tau"))
}

/// Least-squares fit of mean CVaR against one cost mean with the other held
/// fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostFit {
    pub tau: f64,
    /// `"mu"` or `"m"`: the regressor.
    pub variable: String,
    /// Value of the other mean.
    pub fixed: f64,
    pub fit: LinearFit,
}

/// Mean CVaR over a `(mu, M)` grid with standard deviations at a fixed
/// fraction of the means, for each configured threshold.
pub fn sweep_cost_means(
    cfg: &ExperimentConfig,
    clf: &TrainedClassifier,
) -> Result<(SweepResult, Vec<CostFit>, Output), HarnessError> {
    let s = &cfg.cost_sweep;
    if s.mu_grid.is_empty() || s.m_grid.is_empty() || s.taus.is_empty() {
        return Err(empty("cost"));
    }
    let b = &cfg.base;
    let mut cells = Vec::new();
    for &tau in &s.taus {
        for &mu in &s.mu_grid {
            for &m in &s.m_grid {
                let costs = CostParams::scaled(mu, m, s.sigma_fraction);
                cells.push(Cell {
                    params: base_params(tau, b.beta, b.upper, b.formulation, &costs),
                    metrics: clf.metrics(tau),
                    costs,
                    beta: b.beta,
                    upper: b.upper,
                    kind: b.formulation,
                });
            }
        }
    }
    let res = run_cells(cfg, clf.auc, &cells)?;
    let fits = cost_fits(&res.rows, &s.taus, &s.mu_grid, &s.m_grid);
    let mut out = Output::default();
    out.sweep("sweep_cost", &res)?;
    let rows: Vec<Vec<Param>> = fits
        .iter()
        .map(|f| {
            vec![
                f.tau.into(),
                f.variable.as_str().into(),
                f.fixed.into(),
                f.fit.slope.into(),
                f.fit.slope_se.into(),
                f.fit.intercept.into(),
                f.fit.r2.into(),
            ]
        })
        .collect();
    let cols = ["tau", "variable", "fixed", "slope", "slope_se", "intercept", "r2"];
    out.csv(
        "sweep_cost_fits",
        &Table {
            columns: cols.iter().map(|c| c.to_string()).collect(),
            rows,
        },
    );
    Ok((res, fits, out))
}

fn cost_fits(rows: &[SweepRow], taus: &[f64], mus: &[f64], ms: &[f64]) -> Vec<CostFit> {
    let at = |tau: f64, mu: f64, m: f64| {
        rows.iter()
            .find(|r| r.num("tau") == tau && r.num("mu") == mu && r.num("m") == m)
            .map_or(f64::NAN, |r| r.mean_cvar)
    };
    let mut fits = Vec::new();
    for &tau in taus {
        if ms.len() >= 2 {
            for &mu in mus {
                let y: Vec<f64> = ms.iter().map(|&m| at(tau, mu, m)).collect();
                fits.push(CostFit {
                    tau,
                    variable: "m".into(),
                    fixed: mu,
                    fit: linear_fit(ms, &y),
                });
            }
        }
        if mus.len() >= 2 {
            for &m in ms {
                let y: Vec<f64> = mus.iter().map(|&mu| at(tau, mu, m)).collect();
                fits.push(CostFit {
                    tau,
                    variable: "mu".into(),
                    fixed: m,
                    fit: linear_fit(mus, &y),
                });
            }
        }
    }
    fits
}

/// Mean CVaR over premium cap, formulation and confidence level at the base
/// threshold and low cost setting. Writes a long CSV and a wide one laid out
/// as rows `(upper, formulation)` by columns `beta`.
pub fn table2(cfg: &ExperimentConfig, clf: &TrainedClassifier) -> Result<(SweepResult, Output), HarnessError> {
    if cfg.contract.upper.is_empty() || cfg.betas.is_empty() {
        return Err(empty("premium/beta"));
    }
    let tau = cfg.base.tau;
    let costs = cfg.costs.low;
    let metrics = clf.metrics(tau);
    let mut cells = Vec::new();
    for &upper in &cfg.contract.upper {
        for kind in FormulationKind::ALL {
            for &beta in &cfg.betas {
                cells.push(Cell {
                    params: base_params(tau, beta, upper, kind, &costs),
                    metrics,
                    costs,
                    beta,
                    upper,
                    kind,
                });
            }
        }
    }
    let res = run_cells(cfg, clf.auc, &cells)?;
    let mut out = Output::default();
    out.sweep("table2", &res)?;

    let mut columns = vec!["upper".to_string(), "formulation".to_string()];
    columns.extend(cfg.betas.iter().map(|b| format!("beta_{}", crate::report::sig6(*b))));
    let mut rows = Vec::new();
    for &upper in &cfg.contract.upper {
        for kind in FormulationKind::ALL {
            let mut row: Vec<Param> = vec![upper.into(), kind.name().into()];
            for &beta in &cfg.betas {
                let r = res
                    .rows
                    .iter()
                    .find(|r| r.num("upper") == upper && r.text("formulation") == kind.name() && r.num("beta") == beta)
                    .expect("every cell was priced");
                row.push(r.mean_cvar.into());
            }
            rows.push(row);
        }
    }
    out.csv("table2_wide", &Table { columns, rows });
    Ok((res, out))
}

/// Risk exposure along every shape, human-only exposure and interpretability
/// level. Needs no data.
pub fn interpretability_curves(cfg: &ExperimentConfig) -> Result<(Table, Output), HarnessError> {
    let s = &cfg.interpret;
    if s.c_h.is_empty() {
        return Err(HarnessError::new(
            Stage::Config,
            "interpret.c_h is empty; supply the human-only exposures in the config",
        ));
    }
    if s.theta_grid.is_empty() || s.shapes.is_empty() {
        return Err(empty("theta/shape"));
    }
    let cfg_err = |e| HarnessError::new(Stage::Config, e);
    let mut rows = Vec::new();
    for &c_h in &s.c_h {
        for &shape in &s.shapes {
            let curve = InterpretabilityCurve::new(shape, s.c_ml, c_h).map_err(cfg_err)?;
            for &theta in &s.theta_grid {
                let c = risk_at(&curve, theta).map_err(cfg_err)?;
                rows.push(vec![
                    c_h.into(),
                    s.c_ml.into(),
                    shape.name().into(),
                    theta.into(),
                    c.into(),
                ]);
            }
        }
    }
    let table = Table {
        columns: ["c_h", "c_ml", "shape", "theta", "risk"]
            .iter()
            .map(|c| c.to_string())
            .collect(),
        rows,
    };
    let mut out = Output::default();
    out.csv("interpret", &table);
    Ok((table, out))
}

/// Per-`psi` aggregate of the fidelity experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSummary {
    pub psi: f64,
    pub median_gqi: f64,
    pub mean_gqi: f64,
    pub median_best_cvar: f64,
    pub mean_best_cvar: f64,
    pub std_best_cvar: f64,
    pub seeds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralizeReport {
    pub rows: Vec<ShiftSummary>,
    pub runs: Vec<ShiftRow>,
    /// Best mean CVaR over the threshold grid using the real test set.
    pub real_best_cvar: f64,
    pub real_best_tau: f64,
    pub spearman_gqi: f64,
    pub spearman_cvar: f64,
}

/// CVaR and data quality as the synthetic data moves from independent
/// marginals (`psi = 0`) to resampled training rows (`psi = 1`). The real
/// model's operating points on each synthetic set are priced at the base
/// setting.
pub fn generalizability_curve(
    cfg: &ExperimentConfig,
    clf: &TrainedClassifier,
) -> Result<(GeneralizeReport, Output), HarnessError> {
    let g = &cfg.generalize;
    if g.psi_grid.is_empty() || cfg.tau_grid.is_empty() {
        return Err(empty("psi/tau"));
    }
    let b = &cfg.base;
    let costs = cfg.costs.low;
    let gen = FidelityGenerator::fit(&clf.train, g.bandwidth, cfg.dataset.model_seed)
        .map_err(|e| HarnessError::new(Stage::Train, e))?;
    let job = |m: &ThresholdMetrics, seed: u64| PriceJob {
        seed,
        rates: rates_of(m),
        costs,
        beta: b.beta,
        upper: b.upper,
        kind: b.formulation,
    };
    // Many thresholds share error rates; price each distinct job once.
    let cache: Mutex<BTreeMap<(u64, u64, u64), f64>> = Mutex::new(BTreeMap::new());
    let price_cached = |m: &ThresholdMetrics, seed: u64| -> Result<f64, String> {
        let j = job(m, seed);
        let key = (j.seed, j.rates.kappa.to_bits(), j.rates.lambda.to_bits());
        if let Some(&v) = cache.lock().unwrap().get(&key) {
            return Ok(v);
        }
        let cvar = price_job(&cfg.contract, &cfg.robust, &j)
            .map_err(|e| e.to_string())?
            .cvar;
        cache.lock().unwrap().insert(key, cvar);
        Ok(cvar)
    };

    let settings = ShiftSettings {
        psi_grid: g.psi_grid.clone(),
        taus: cfg.tau_grid.clone(),
        n_synth: g.n_synth,
        seeds: cfg.seeds.clone(),
        metric: g.metric,
    };
    let runs = cvar_under_shift(&clf.model, &gen, &clf.test, &settings, price_cached)
        .map_err(|e| HarnessError::new(Stage::Pricing, e))?;

    // Reference: the same search on the real test set.
    let mut real_best = (f64::NAN, f64::INFINITY);
    for &tau in &cfg.tau_grid {
        let m = clf.metrics(tau);
        let cvars = cfg
            .seeds
            .iter()
            .map(|&s| price_cached(&m, s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| HarnessError::new(Stage::Pricing, e))?;
        let c = mean(&cvars);
        if c < real_best.1 {
            real_best = (tau, c);
        }
    }

    let rows: Vec<ShiftSummary> = g
        .psi_grid
        .iter()
        .map(|&psi| {
            let sel: Vec<&ShiftRow> = runs.iter().filter(|r| r.psi == psi).collect();
            let gq: Vec<f64> = sel.iter().map(|r| r.gqi.gqi).collect();
            let bc: Vec<f64> = sel.iter().map(|r| r.best_cvar).collect();
            ShiftSummary {
                psi,
                median_gqi: median(&gq),
                mean_gqi: mean(&gq),
                median_best_cvar: median(&bc),
                mean_best_cvar: mean(&bc),
                std_best_cvar: std_dev(&bc),
                seeds: sel.len(),
            }
        })
        .collect();
    let psis: Vec<f64> = rows.iter().map(|r| r.psi).collect();
    let report = GeneralizeReport {
        spearman_gqi: spearman(&psis, &rows.iter().map(|r| r.median_gqi).collect::<Vec<_>>()),
        spearman_cvar: spearman(&psis, &rows.iter().map(|r| r.median_best_cvar).collect::<Vec<_>>()),
        real_best_cvar: real_best.1,
        real_best_tau: real_best.0,
        rows,
        runs,
    };

    let table = Table {
        columns: [
            "psi",
            "median_gqi",
            "mean_gqi",
            "median_best_cvar",
            "mean_best_cvar",
            "std_best_cvar",
            "seeds",
        ]
        .iter()
        .map(|c| c.to_string())
        .collect(),
        rows: report
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.psi.into(),
                    r.median_gqi.into(),
                    r.mean_gqi.into(),
                    r.median_best_cvar.into(),
                    r.mean_best_cvar.into(),
                    r.std_best_cvar.into(),
                    (r.seeds as f64).into(),
                ]
            })
            .collect(),
    };
    let mut out = Output::default();
    out.csv("generalize", &table);
    out.json("generalize_runs", &report)?;
    Ok((report, out))
}
