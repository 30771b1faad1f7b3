//! Subcommand implementations behind the thin binary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use crate::backtest::{self, BacktestConfig};
use crate::config::{ConfigError, RunConfig};
use crate::features::TensorBuilder;
use crate::market_data::{self, InstrumentId, MarketData};
use crate::milp;
use crate::predictor::PredictorModel;
use crate::synth;

#[derive(Debug, Parser)]
#[command(
    name = "betatrack",
    about = "Index tracking via predicted market sensitivities",
    version
)]
pub struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "betatrack.json")]
    pub config: PathBuf,

    /// Override the worker thread count (default from config; 1 keeps logs
    /// deterministic, results are thread-count-invariant either way).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Override the master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Override the output directory.
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic market and write prices/weights/truth CSVs.
    Synth,
    /// Load and validate the configured panels, print a summary.
    Ingest,
    /// Train one episode's model and write a checkpoint.
    Train(TrainArgs),
    /// Emit per-instrument predictions for one rebalance date.
    Predict(PredictArgs),
    /// Solve one portfolio construction from a predictions CSV.
    Construct(ConstructArgs),
    /// Run the full walk-forward backtest.
    Backtest,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Rebalance date (must be a trading date in the panels).
    #[arg(long)]
    pub rebalance_date: NaiveDate,
    /// Checkpoint output path (default: <output_dir>/model_<date>.json).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub rebalance_date: NaiveDate,
    /// Existing checkpoint to load; trains a fresh model when omitted.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Output CSV (default: <output_dir>/predictions_<date>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConstructArgs {
    #[arg(long)]
    pub rebalance_date: NaiveDate,
    /// Cardinality cap N*.
    #[arg(long)]
    pub n_star: usize,
    /// Predictions CSV (header `date,instrument,alpha,beta,rho`).
    #[arg(long)]
    pub predictions: PathBuf,
    /// Output weights CSV (default: <output_dir>/weights_<date>.csv).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also dump the problem/solution JSON next to the weights.
    #[arg(long)]
    pub dump_json: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Configuration problems: exit status 2.
    #[error(transparent)]
    Config(#[from] ConfigError),

    /// Everything else: exit status 1.
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 1,
        }
    }
}

macro_rules! run_err {
    ($($arg:tt)*) => { CliError::Run(format!($($arg)*)) };
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(&cli.config)?;
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = cli.output_dir {
        cfg.output_dir = dir;
    }
    cfg.propagate_seed();

    let need_inputs = !matches!(cli.command, Command::Synth);
    cfg.validate(need_inputs)?;

    // Worker pool; results are thread-count-invariant by construction.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();

    match cli.command {
        Command::Synth => cmd_synth(&cfg),
        Command::Ingest => cmd_ingest(&cfg),
        Command::Train(args) => cmd_train(&cfg, &args),
        Command::Predict(args) => cmd_predict(&cfg, &args),
        Command::Construct(args) => cmd_construct(&cfg, &args),
        Command::Backtest => cmd_backtest(&cfg),
    }
}

fn ensure_output_dir(cfg: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| run_err!("cannot create output dir {}: {e}", cfg.output_dir.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| run_err!("cannot write {}: {e}", path.display()))
}

fn load_market(cfg: &RunConfig) -> Result<MarketData, CliError> {
    market_data::load_panels(&cfg.prices_path, &cfg.weights_path, &cfg.index_id)
        .map_err(|e| run_err!("panel load failed: {e}"))
}

fn step_for(data: &MarketData, date: NaiveDate) -> Result<usize, CliError> {
    data.calendar
        .step(date)
        .ok_or_else(|| run_err!("{date} is not a trading date in the loaded panels"))
}

fn cmd_synth(cfg: &RunConfig) -> Result<(), CliError> {
    let (data, truth) = synth::generate(&cfg.synth);
    ensure_output_dir(cfg)?;
    let prices_path = cfg.output_dir.join("prices.csv");
    let weights_path = cfg.output_dir.join("weights.csv");
    let truth_path = cfg.output_dir.join("truth.csv");
    market_data::write_prices_csv(create(&prices_path)?, &data)
        .map_err(|e| run_err!("writing prices: {e}"))?;
    market_data::write_weights_csv(create(&weights_path)?, &data)
        .map_err(|e| run_err!("writing weights: {e}"))?;
    synth::write_truth_csv(create(&truth_path)?, &data, &truth)
        .map_err(|e| run_err!("writing truth: {e}"))?;
    println!(
        "wrote {} instruments x {} days to {}, {} and {}",
        cfg.synth.n_instruments,
        cfg.synth.n_days,
        prices_path.display(),
        weights_path.display(),
        truth_path.display()
    );
    Ok(())
}

fn cmd_ingest(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_market(cfg)?;
    let n_steps = data.calendar.len();
    let mut min_members = usize::MAX;
    let mut max_members = 0usize;
    for step in 0..n_steps {
        let n = data.universe.at(step).len();
        min_members = min_members.min(n);
        max_members = max_members.max(n);
    }
    println!(
        "panels ok: {} instruments (incl. index), {} trading dates {}..{}, universe size {}..{}",
        data.instruments.len(),
        n_steps,
        data.calendar.date(0),
        data.calendar.date(n_steps - 1),
        min_members,
        max_members
    );
    Ok(())
}

fn episode_artifacts(
    cfg: &RunConfig,
    data: &MarketData,
    step: usize,
    cardinalities: Vec<usize>,
) -> Result<backtest::EpisodeArtifacts, CliError> {
    let mut bt: BacktestConfig = cfg.backtest.clone();
    bt.cardinalities = cardinalities;
    let mut all: Vec<InstrumentId> = Vec::new();
    for s in 0..data.calendar.len() {
        all.extend(data.universe.at(s).iter().copied());
    }
    all.sort_unstable();
    all.dedup();
    let builder = TensorBuilder::new(&data.prices, data.index_id(), bt.grid.clone(), &all);
    backtest::run_episode(data, &builder, &bt, step).map_err(|e| run_err!("episode failed: {e}"))
}

fn cmd_train(cfg: &RunConfig, args: &TrainArgs) -> Result<(), CliError> {
    let data = load_market(cfg)?;
    let step = step_for(&data, args.rebalance_date)?;
    let artifacts = episode_artifacts(cfg, &data, step, Vec::new())?;
    ensure_output_dir(cfg)?;
    let path = args
        .checkpoint
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(format!("model_{}.json", args.rebalance_date)));
    artifacts
        .model
        .save_json(create(&path)?)
        .map_err(|e| run_err!("writing checkpoint: {e}"))?;
    println!(
        "trained episode at {} ({} train / {} validation records, {} epochs, best val loss {:.6}); checkpoint: {}",
        args.rebalance_date,
        artifacts.n_train_records,
        artifacts.n_validation_records,
        artifacts.model.epochs_run,
        artifacts.model.best_val_loss,
        path.display()
    );
    Ok(())
}

fn cmd_predict(cfg: &RunConfig, args: &PredictArgs) -> Result<(), CliError> {
    let data = load_market(cfg)?;
    let step = step_for(&data, args.rebalance_date)?;
    if step == 0 {
        return Err(run_err!("rebalance date is the first trading date; no history to predict from"));
    }

    let predictions: BTreeMap<String, (f64, f64, f64)> = match &args.model {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| run_err!("cannot open checkpoint {}: {e}", path.display()))?;
            let model = PredictorModel::load_json(file)
                .map_err(|e| run_err!("bad checkpoint {}: {e}", path.display()))?;
            model
                .check_episode(step)
                .map_err(|e| run_err!("checkpoint/date mismatch: {e}"))?;
            let mut all: Vec<InstrumentId> = data.universe.at(step).to_vec();
            all.extend(data.weights.at(step - 1).iter().map(|&(id, _)| id));
            all.sort_unstable();
            all.dedup();
            let builder =
                TensorBuilder::new(&data.prices, data.index_id(), model.grid.clone(), &all);
            let mut out = BTreeMap::new();
            for id in all {
                if let Ok(tensor) = builder.build(id, step - 1) {
                    let est = model.forward(&tensor).map_err(|e| run_err!("forward: {e}"))?;
                    out.insert(
                        data.instruments.name(id).to_string(),
                        (est.alpha, est.beta, est.residual),
                    );
                }
            }
            out
        }
        None => episode_artifacts(cfg, &data, step, Vec::new())?.predictions,
    };

    ensure_output_dir(cfg)?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(format!("predictions_{}.csv", args.rebalance_date)));
    let mut out = create(&path)?;
    writeln!(out, "date,instrument,alpha,beta,rho").map_err(|e| run_err!("write: {e}"))?;
    for (name, (alpha, beta, rho)) in &predictions {
        writeln!(out, "{},{name},{alpha},{beta},{rho}", args.rebalance_date)
            .map_err(|e| run_err!("write: {e}"))?;
    }
    println!("wrote {} predictions to {}", predictions.len(), path.display());
    Ok(())
}

fn read_predictions_csv(path: &Path) -> Result<BTreeMap<String, (f64, f64)>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| run_err!("cannot read {}: {e}", path.display()))?;
    let mut out = BTreeMap::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| run_err!("{}:{}: {e}", path.display(), k + 2))?;
        if record.len() < 4 {
            return Err(run_err!("{}:{}: expected at least 4 fields", path.display(), k + 2));
        }
        let alpha: f64 = record[2]
            .parse()
            .map_err(|e| run_err!("{}:{}: bad alpha: {e}", path.display(), k + 2))?;
        let beta: f64 = record[3]
            .parse()
            .map_err(|e| run_err!("{}:{}: bad beta: {e}", path.display(), k + 2))?;
        out.insert(record[1].to_string(), (alpha, beta));
    }
    Ok(out)
}

fn cmd_construct(cfg: &RunConfig, args: &ConstructArgs) -> Result<(), CliError> {
    let data = load_market(cfg)?;
    let step = step_for(&data, args.rebalance_date)?;
    if step == 0 {
        return Err(run_err!("rebalance date is the first trading date; no prior weights"));
    }
    let by_name = read_predictions_csv(&args.predictions)?;

    let current: Vec<InstrumentId> = data.universe.at(step).to_vec();
    let prior = data.weights.at(step - 1).to_vec();
    let mut predictions = BTreeMap::new();
    let mut pinned = std::collections::BTreeSet::new();
    let mut id_set: Vec<InstrumentId> = current.clone();
    id_set.extend(prior.iter().map(|&(id, _)| id));
    id_set.sort_unstable();
    id_set.dedup();
    for id in id_set {
        match by_name.get(data.instruments.name(id)) {
            Some(&(alpha, beta)) => {
                predictions.insert(id, (alpha, beta));
            }
            None => {
                pinned.insert(id);
            }
        }
    }

    let problem = milp::build_problem(
        &data.instruments,
        &current,
        &prior,
        &predictions,
        &pinned,
        args.n_star,
        &BTreeMap::new(),
        cfg.backtest.milp.equality_band,
    )
    .map_err(|e| run_err!("problem construction failed: {e}"))?;
    let solution = milp::solve(
        &problem,
        &crate::milp::SolveConfig {
            time_limit: cfg
                .backtest
                .milp
                .time_limit_secs
                .map(std::time::Duration::from_secs_f64),
            gap_tolerance: cfg.backtest.milp.gap_tolerance,
            max_nodes: cfg.backtest.milp.max_nodes,
        },
    )
    .map_err(|e| run_err!("solve failed: {e}"))?;

    let issues = milp::validate_solution(&problem, &solution);
    if !issues.is_empty() {
        return Err(run_err!("solution failed validation: {}", issues.join("; ")));
    }

    ensure_output_dir(cfg)?;
    let path = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join(format!("weights_{}.csv", args.rebalance_date)));
    let mut out = create(&path)?;
    writeln!(out, "date,instrument,weight").map_err(|e| run_err!("write: {e}"))?;
    for (inst, &w) in problem.instruments.iter().zip(&solution.weights) {
        // the same threshold that counts a name toward the cardinality cap
        if w > milp::INCLUSION_TOL {
            writeln!(out, "{},{},{w}", args.rebalance_date, inst.name)
                .map_err(|e| run_err!("write: {e}"))?;
        }
    }
    if args.dump_json {
        let p = cfg.output_dir.join(format!("milp_problem_{}.json", args.rebalance_date));
        serde_json::to_writer_pretty(create(&p)?, &problem)
            .map_err(|e| run_err!("writing problem json: {e}"))?;
        let s = cfg.output_dir.join(format!("milp_solution_{}.json", args.rebalance_date));
        serde_json::to_writer_pretty(create(&s)?, &solution)
            .map_err(|e| run_err!("writing solution json: {e}"))?;
    }
    println!(
        "constructed {}-name portfolio (objective {:.6e}, gap {:.2e}, {} nodes): {}",
        solution.support_size(),
        solution.objective,
        solution.stats.gap,
        solution.stats.nodes_explored,
        path.display()
    );
    Ok(())
}

fn cmd_backtest(cfg: &RunConfig) -> Result<(), CliError> {
    let data = load_market(cfg)?;
    let report = backtest::run_backtest(&data, &cfg.backtest)
        .map_err(|e| run_err!("backtest failed: {e}"))?;
    ensure_output_dir(cfg)?;
    let report_path = cfg.output_dir.join("report.json");
    report
        .write_json(create(&report_path)?)
        .map_err(|e| run_err!("writing report: {e}"))?;
    let pe_path = cfg.output_dir.join("pe_by_year.csv");
    report
        .write_pe_by_year_csv(create(&pe_path)?)
        .map_err(|e| run_err!("writing pe csv: {e}"))?;
    let te_path = cfg.output_dir.join("te_by_nstar.csv");
    report
        .write_te_by_nstar_csv(create(&te_path)?)
        .map_err(|e| run_err!("writing te csv: {e}"))?;

    println!("episodes: {}", report.episodes.len());
    for (k, v) in &report.aggregate.pe {
        println!("PE {k}: {v:.6e} ({} records)", report.aggregate.pe_counts[k]);
    }
    for (k, v) in &report.aggregate.te {
        println!("TE {k}: {v:.6e} ({} episodes)", report.aggregate.te_counts[k]);
    }
    for w in report.warnings.iter().take(10) {
        eprintln!("warning: {w}");
    }
    println!(
        "wrote {}, {} and {}",
        report_path.display(),
        pe_path.display(),
        te_path.display()
    );
    Ok(())
}
