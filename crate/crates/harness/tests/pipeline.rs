use algoins::classifier::{DatasetSchema, ThresholdMetrics};
use algoins_harness::config::ExperimentConfig;
use algoins_harness::pipeline::{load_dataset, run_cells, Cell, RunRecord, TrainedClassifier};
use algoins_harness::report::{mean, std_dev};
use algoins_harness::sweeps;
use algoins_harness::Stage;
use std::path::PathBuf;
use std::process::Command;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// Reference setup shrunk so each run takes well under a second.
fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.dataset.path = data("breast-cancer-wisconsin.data");
    cfg.contract.scenarios = 200;
    cfg.contract.patients = 20;
    cfg.seeds = vec![0, 1, 2];
    cfg.tau_grid = vec![0.2, 0.3, 0.4];
    cfg.generalize.n_synth = 300;
    cfg.generalize.psi_grid = vec![0.0, 1.0];
    cfg.interpret.c_h = vec![1_000_000.0];
    cfg
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap()
        .install(f)
}

#[test]
fn original_dataset_counts() {
    let raw = load_dataset(&data("breast-cancer-wisconsin.data"), DatasetSchema::Original).unwrap();
    assert_eq!(raw.len(), 699);
    assert_eq!(raw.feature_names.len(), 9);
    assert_eq!(raw.missing(), 16);
    assert_eq!(raw.labels.iter().filter(|&&l| l == 1).count(), 241);
    let clf = TrainedClassifier::fit_raw(&raw, &small_config().dataset).unwrap();
    assert_eq!(clf.train.len() + clf.test.len(), 699);
    assert!(clf.train.row(0).iter().chain(clf.test.row(0)).all(|v| v.is_finite()));
}

#[test]
fn best_full_sensitivity_threshold_is_point_three() {
    let cfg = ExperimentConfig {
        dataset: small_config().dataset,
        ..Default::default()
    };
    let clf = TrainedClassifier::fit(&cfg.dataset).unwrap();
    assert!(clf.auc >= 0.98);
    let full: Vec<ThresholdMetrics> = cfg
        .tau_grid
        .iter()
        .map(|&t| clf.metrics(t))
        .filter(|m| m.sensitivity == 1.0)
        .collect();
    let best = full.iter().map(|m| m.specificity).fold(0.0, f64::max);
    let at = full.iter().rev().find(|m| m.specificity == best).unwrap();
    assert_eq!(at.tau, 0.3);
    assert!(
        full.iter().filter(|m| m.tau > 0.3).count() == 0,
        "sensitivity drops above 0.3"
    );
}

#[test]
fn diagnostic_dataset_counts() {
    let raw = load_dataset(&data("wdbc.data"), DatasetSchema::Wdbc).unwrap();
    assert_eq!(raw.len(), 569);
    assert_eq!(raw.feature_names.len(), 30);
    assert_eq!(raw.missing(), 0);
    assert_eq!(raw.labels.iter().filter(|&&l| l == 1).count(), 212);
}

#[test]
fn empty_and_missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.data");
    std::fs::write(&empty, "").unwrap();
    let err = load_dataset(&empty, DatasetSchema::Original).unwrap_err();
    assert_eq!(err.stage, Stage::Data);
    let err = load_dataset(&dir.path().join("nope.data"), DatasetSchema::Wdbc).unwrap_err();
    assert_eq!(err.stage, Stage::Data);
    assert!(err.to_string().starts_with("[data]"));
}

#[test]
fn perfect_classifier_prices_to_zero() {
    let cfg = small_config();
    let perfect = ThresholdMetrics {
        tau: 0.5,
        sensitivity: 1.0,
        specificity: 1.0,
        tp: 10,
        fp: 0,
        tn: 10,
        fn_: 0,
    };
    let cell = Cell {
        params: Default::default(),
        metrics: perfect,
        costs: cfg.costs.low,
        beta: 0.9,
        upper: 50_000.0,
        kind: algoins::pricing::FormulationKind::Nominal,
    };
    let res = run_cells(&cfg, 1.0, &[cell]).unwrap();
    assert_eq!(res.rows[0].mean_cvar, 0.0);
    assert!(res.runs.iter().all(|r| r.cvar == 0.0 && r.var == 0.0));
}

#[test]
fn csv_rows_are_recomputable_from_run_records() {
    let cfg = small_config();
    let clf = TrainedClassifier::fit(&cfg.dataset).unwrap();
    let (res, out) = sweeps::sweep_tau(&cfg, &clf).unwrap();
    assert_eq!(res.rows.len(), 2 * cfg.tau_grid.len());
    let runs: Vec<RunRecord> = serde_json::from_str(out.get("sweep_tau_runs.json").unwrap()).unwrap();
    assert_eq!(runs.len(), res.rows.len() * cfg.seeds.len());
    for row in &res.rows {
        let cvars: Vec<f64> = runs.iter().filter(|r| r.params == row.params).map(|r| r.cvar).collect();
        assert_eq!(cvars.len(), cfg.seeds.len());
        assert_eq!(mean(&cvars), row.mean_cvar);
        assert_eq!(std_dev(&cvars), row.std_cvar);
        assert!(row.std_cvar >= 0.0);
    }
    let csv = out.get("sweep_tau.csv").unwrap();
    let header = csv.lines().next().unwrap();
    assert!(
        header.starts_with("beta,formulation,m,mu,setting,sigma_m,sigma_mu,tau,upper,mean_cvar,std_cvar,mean_var,x_1,")
    );
    assert_eq!(csv.lines().count(), 1 + res.rows.len());
}

#[test]
fn single_point_and_empty_grids() {
    let mut cfg = small_config();
    cfg.tau_grid = vec![0.3];
    let clf = TrainedClassifier::fit(&cfg.dataset).unwrap();
    let (res, _) = sweeps::sweep_tau(&cfg, &clf).unwrap();
    assert_eq!(res.rows.iter().filter(|r| r.text("setting") == "low").count(), 1);
    cfg.tau_grid.clear();
    assert_eq!(sweeps::sweep_tau(&cfg, &clf).unwrap_err().stage, Stage::Config);
    cfg.cost_sweep.mu_grid.clear();
    assert_eq!(sweeps::sweep_cost_means(&cfg, &clf).unwrap_err().stage, Stage::Config);
    cfg.interpret.c_h.clear();
    assert_eq!(sweeps::interpretability_curves(&cfg).unwrap_err().stage, Stage::Config);
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cfg = small_config();
    let run = |threads| {
        in_pool(threads, || {
            let clf = TrainedClassifier::fit(&cfg.dataset).unwrap();
            let mut files = sweeps::table2(&cfg, &clf).unwrap().1.files;
            files.extend(sweeps::generalizability_curve(&cfg, &clf).unwrap().1.files);
            files.extend(sweeps::price_command(&cfg, &clf).unwrap().1.files);
            files
        })
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn cli_writes_identical_files_for_any_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    let mut cfg = small_config();
    cfg.tau_grid = vec![0.3, 0.4];
    std::fs::write(&config, serde_json::to_string(&cfg).unwrap()).unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("out{threads}"));
        let status = Command::new(env!("CARGO_BIN_EXE_algoins"))
            .args([
                "sweep-tau",
                "--config",
                config.to_str().unwrap(),
                "--seeds",
                "0..2",
                "--threads",
                threads,
            ])
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("sweep_tau.csv")).unwrap()
    };
    assert_eq!(run("1"), run("2"));
}

#[test]
fn cli_reports_stage_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(&config, r#"{"dataset": {"path": "missing.data"}}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_algoins"))
        .args(["price", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[data]"));

    std::fs::write(&config, r#"{"betas": [2.0]}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_algoins"))
        .args(["table2", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[config]"));

    let out = Command::new(env!("CARGO_BIN_EXE_algoins"))
        .arg("fetch")
        .output()
        .unwrap();
    assert!(out.status.success());
    let urls = String::from_utf8_lossy(&out.stdout);
    assert!(urls.contains("breast-cancer-wisconsin.data") && urls.contains("wdbc.data"));
}
