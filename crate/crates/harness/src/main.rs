use algoins_harness::config::ExperimentConfig;
use algoins_harness::error::{HarnessError, Stage};
use algoins_harness::pipeline::TrainedClassifier;
use algoins_harness::report::sig6;
use algoins_harness::sweeps::{self, Output};
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

const UCI_BASE: &str = "https://archive.ics.uci.edu/ml/machine-learning-databases/breast-cancer-wisconsin";

#[derive(Parser)]
#[command(
    name = "algoins",
    version,
    about = "CVaR-based premium pricing for classifier error claims"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price one contract at the base setting and print a JSON summary.
    Price(Common),
    /// Mean CVaR across the threshold grid for both cost settings.
    SweepTau(Common),
    /// Mean CVaR across the false-positive/false-negative cost means.
    SweepCost(Common),
    /// Premium cap x formulation x confidence level table.
    Table2(Common),
    /// Risk exposure as a function of interpretability.
    Interpret(Common),
    /// CVaR and data quality against synthetic-data fidelity.
    Generalize(Common),
    /// Print where to download the dataset files (no network access).
    Fetch,
}

#[derive(Args)]
struct Common {
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Simulation seeds: a list `0,3,7` or a half-open range `0..10`.
    #[arg(long, value_parser = parse_seeds)]
    seeds: Option<SeedList>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let bad = |e: std::num::ParseIntError| format!("bad seed list '{s}': {e}");
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        (a.trim().parse().map_err(bad)?..b.trim().parse().map_err(bad)?).collect()
    } else {
        s.split(',')
            .map(|t| t.trim().parse().map_err(bad))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed list '{s}' is empty"));
    }
    Ok(SeedList(seeds))
}

fn setup(common: &Common) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seeds) = &common.seeds {
        cfg.seeds = seeds.0.clone();
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::new(Stage::Config, e))?;
    }
    Ok(cfg)
}

fn finish(cfg: &ExperimentConfig, out: &Output) -> Result<(), HarnessError> {
    out.write(&cfg.output_dir)?;
    for (name, _) in &out.files {
        eprintln!("wrote {}", cfg.output_dir.join(name).display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let common = match &cli.command {
        Command::Fetch => {
            println!("{UCI_BASE}/breast-cancer-wisconsin.data");
            println!("{UCI_BASE}/wdbc.data");
            return Ok(());
        }
        Command::Price(c)
        | Command::SweepTau(c)
        | Command::SweepCost(c)
        | Command::Table2(c)
        | Command::Interpret(c)
        | Command::Generalize(c) => c,
    };
    let cfg = setup(common)?;
    if let Command::Interpret(_) = cli.command {
        let (_, out) = sweeps::interpretability_curves(&cfg)?;
        return finish(&cfg, &out);
    }
    let clf = TrainedClassifier::fit(&cfg.dataset)?;
    eprintln!(
        "classifier: {} train / {} test rows, test AUC {}",
        clf.train.len(),
        clf.test.len(),
        sig6(clf.auc)
    );
    let out = match cli.command {
        Command::Price(_) => {
            let (summary, out) = sweeps::price_command(&cfg, &clf)?;
            let text = serde_json::to_string_pretty(&summary).map_err(|e| HarnessError::new(Stage::Output, e))?;
            println!("{text}");
            out
        }
        Command::SweepTau(_) => {
            let (res, out) = sweeps::sweep_tau(&cfg, &clf)?;
            for setting in ["low", "high"] {
                if let Some(t) = sweeps::argmin_tau(&res.rows, setting) {
                    eprintln!("{setting}-cost CVaR minimized at tau = {}", sig6(t));
                }
            }
            out
        }
        Command::SweepCost(_) => sweeps::sweep_cost_means(&cfg, &clf)?.2,
        Command::Table2(_) => {
            let (_, out) = sweeps::table2(&cfg, &clf)?;
            if let Some(wide) = out.get("table2_wide.csv") {
                print!("{wide}");
            }
            out
        }
        Command::Generalize(_) => {
            let (rep, out) = sweeps::generalizability_curve(&cfg, &clf)?;
            eprintln!(
                "spearman(psi, median GQI) = {}, spearman(psi, median best CVaR) = {}",
                sig6(rep.spearman_gqi),
                sig6(rep.spearman_cvar)
            );
            out
        }
        Command::Interpret(_) | Command::Fetch => unreachable!(),
    };
    finish(&cfg, &out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
