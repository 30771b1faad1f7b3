//! Walk-forward protocol: per-rebalance episodes with an idle gap, model
//! retraining, portfolio construction, and evaluation against baselines.
//!
//! Every decision artifact of episode `t_n` (CDF fits, model parameters,
//! MILP inputs, weights) is built from a price view capped at `t_n - 1`;
//! only the evaluation step that realizes returns reads past the rebalance
//! step. Episodes run sequentially and all randomness derives from the
//! configured seed, so identical configs produce identical reports.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use crate::features::cdf::CdfGranularity;
use crate::features::{FeatureGridSpec, TensorBuilder};
use crate::market_data::{InstrumentId, MarketData, ReturnPanel};
use crate::milp::{self, MilpProblem, MilpSolution, SolveConfig};
use crate::predictor::{self, EpisodeTag, PredictorModel, TrainConfig, TrainRecord};
use crate::targets::{
    historical_estimate, make_target, prediction_error, EstimateKind, FactorEstimate,
    HistoricalSampling,
};

pub use report::{AggregateReport, BacktestReport, EpisodeReport, PortfolioOutcome};

/// Block boundaries for one rebalance episode.
///
/// Records in the train and validation blocks need prices only up to
/// `t_n - 1`: a record at `t` consumes prices through `t + horizon +
/// half_window`, and the idle block keeps exactly that span between the
/// last validation record and the rebalance step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EpisodeSchedule {
    pub rebalance_step: usize,
    pub horizon: usize,
    pub half_window: usize,
    pub validation_span: usize,
    pub train_span: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum ScheduleError {
    #[error("block ordering violated: need train_span > validation_span > horizon + half_window >= 1 (got {train_span}, {validation_span}, {horizon} + {half_window})")]
    Ordering { train_span: usize, validation_span: usize, horizon: usize, half_window: usize },

    #[error("rebalance step {rebalance_step} needs {needed} steps of history")]
    TooEarly { rebalance_step: usize, needed: usize },
}

impl EpisodeSchedule {
    pub fn new(
        rebalance_step: usize,
        horizon: usize,
        half_window: usize,
        validation_span: usize,
        train_span: usize,
    ) -> Result<Self, ScheduleError> {
        let gap = horizon + half_window;
        if !(train_span > validation_span && validation_span > gap && gap >= 1) {
            return Err(ScheduleError::Ordering {
                train_span,
                validation_span,
                horizon,
                half_window,
            });
        }
        if rebalance_step < train_span {
            return Err(ScheduleError::TooEarly { rebalance_step, needed: train_span });
        }
        Ok(Self { rebalance_step, horizon, half_window, validation_span, train_span })
    }

    /// Train block: `[t_n - train_span, t_n - validation_span - 1]`.
    pub fn train_steps(&self) -> std::ops::RangeInclusive<usize> {
        self.rebalance_step - self.train_span..=self.rebalance_step - self.validation_span - 1
    }

    /// Validation block: `[t_n - validation_span, t_n - horizon - half_window - 1]`.
    pub fn validation_steps(&self) -> std::ops::RangeInclusive<usize> {
        self.rebalance_step - self.validation_span
            ..=self.rebalance_step - self.horizon - self.half_window - 1
    }

    /// Idle block: `[t_n - horizon - half_window, t_n - 1]`, never used.
    pub fn idle_steps(&self) -> std::ops::RangeInclusive<usize> {
        self.rebalance_step - self.horizon - self.half_window..=self.rebalance_step - 1
    }

    pub fn test_step(&self) -> usize {
        self.rebalance_step
    }

    /// Latest price step a record at `t` consumes.
    pub fn record_price_horizon(&self, t: usize) -> usize {
        t + self.horizon + self.half_window
    }
}

/// MILP solve budget for the backtest.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MilpRunConfig {
    pub time_limit_secs: Option<f64>,
    pub gap_tolerance: f64,
    pub max_nodes: usize,
    pub equality_band: Option<f64>,
}

impl Default for MilpRunConfig {
    fn default() -> Self {
        Self { time_limit_secs: None, gap_tolerance: 0.0, max_nodes: 200_000, equality_band: None }
    }
}

impl MilpRunConfig {
    fn solve_config(&self) -> SolveConfig {
        SolveConfig {
            time_limit: self.time_limit_secs.map(std::time::Duration::from_secs_f64),
            gap_tolerance: self.gap_tolerance,
            max_nodes: self.max_nodes,
        }
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BacktestConfig {
    /// Rebalance period T_A in steps.
    pub horizon: usize,
    /// Theil-Sen half window T_C.
    pub half_window: usize,
    /// Validation span T_D.
    pub validation_span: usize,
    /// Train span T_E.
    pub train_span: usize,
    /// First rebalance step t_0.
    pub start_step: usize,
    pub n_episodes: usize,
    /// Cardinality caps to run the MILP at.
    pub cardinalities: Vec<usize>,
    /// Lookback windows for the historical OLS baseline.
    pub historical_windows: Vec<usize>,
    pub historical_sampling: HistoricalSampling,
    pub grid: FeatureGridSpec,
    pub train: TrainConfig,
    pub cdf_granularity: CdfGranularity,
    pub milp: MilpRunConfig,
    /// Steps of weight lag for the full-replication baseline (0 = diagnostic
    /// zero-lag replication).
    pub full_replication_lag: usize,
    pub seed: u64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            horizon: 21,
            half_window: 2,
            validation_span: 300,
            train_span: 1260,
            start_step: 1560,
            n_episodes: 24,
            cardinalities: vec![30, 100],
            historical_windows: vec![504, 756, 1008, 1260, 1512, 2520],
            historical_sampling: HistoricalSampling::NonOverlapping,
            grid: FeatureGridSpec::default_grid(),
            train: TrainConfig::default(),
            cdf_granularity: CdfGranularity::PerCell,
            milp: MilpRunConfig::default(),
            full_replication_lag: 1,
            seed: 7,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum BacktestError {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),

    #[error("panel covers {have} steps but the run needs {needed}")]
    Coverage { needed: usize, have: usize },

    #[error("episode at step {step}: {source}")]
    Train {
        step: usize,
        #[source]
        source: predictor::PredictorBuildError,
    },

    #[error("episode at step {step}: too few records (train {train}, validation {validation})")]
    TooFewRecords { step: usize, train: usize, validation: usize },

    #[error("no episodes configured")]
    NoEpisodes,
}

/// Mean squared difference between aligned portfolio and index returns.
pub fn tracking_error(portfolio: &[f64], index: &[f64]) -> Result<f64, EmptySeries> {
    if portfolio.is_empty() || portfolio.len() != index.len() {
        return Err(EmptySeries { portfolio: portfolio.len(), index: index.len() });
    }
    let sum: f64 = portfolio
        .iter()
        .zip(index)
        .map(|(p, m)| {
            let d = p - m;
            d * d
        })
        .sum();
    Ok(sum / portfolio.len() as f64)
}

#[derive(Debug, thiserror::Error)]
#[error("series misaligned or empty: portfolio {portfolio}, index {index}")]
pub struct EmptySeries {
    pub portfolio: usize,
    pub index: usize,
}

/// Everything decided at one rebalance, before any future data is read.
/// Byte-identical serialization of this struct is the anti-look-ahead
/// contract: poisoning prices at or after the rebalance step must not
/// change it.
#[derive(Debug, serde::Serialize)]
pub struct EpisodeArtifacts {
    pub rebalance_step: usize,
    pub model: PredictorModel,
    /// Predicted (alpha, beta, residual) per instrument name.
    pub predictions: BTreeMap<String, (f64, f64, f64)>,
    /// Instruments without usable features, pinned to prior weights.
    pub excluded: Vec<String>,
    /// One (problem, solution-or-error) per configured cardinality.
    pub portfolios: BTreeMap<usize, PortfolioArtifact>,
    pub n_train_records: usize,
    pub n_validation_records: usize,
}

#[derive(Debug, serde::Serialize)]
pub struct PortfolioArtifact {
    pub problem: MilpProblem,
    pub solution: Option<MilpSolution>,
    pub error: Option<String>,
}

fn mix_seed(seed: u64, step: usize) -> u64 {
    let mut z = seed ^ (step as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Build one episode's decision artifacts using prices up to `t_n - 1` only.
pub fn run_episode(
    data: &MarketData,
    builder: &TensorBuilder<'_>,
    cfg: &BacktestConfig,
    rebalance_step: usize,
) -> Result<EpisodeArtifacts, BacktestError> {
    let schedule = EpisodeSchedule::new(
        rebalance_step,
        cfg.horizon,
        cfg.half_window,
        cfg.validation_span,
        cfg.train_span,
    )?;
    let index = data.index_id();
    // Look-ahead guard: every read below goes through this capped view.
    let returns = ReturnPanel::capped(&data.prices, rebalance_step - 1);

    let collect = |steps: std::ops::RangeInclusive<usize>| -> (Vec<TrainRecord>, Vec<usize>) {
        let mut records = Vec::new();
        let mut record_steps = Vec::new();
        for t in steps {
            debug_assert!(schedule.record_price_horizon(t) < rebalance_step);
            for &i in data.universe.at(t) {
                let Ok(tensor) = builder.build(i, t - 1) else { continue };
                let Ok(target) =
                    make_target(&returns, index, i, t, cfg.horizon, cfg.half_window)
                else {
                    continue;
                };
                records.push(TrainRecord {
                    inputs: tensor.into_values(),
                    target: [target.alpha, target.beta, target.residual],
                });
                record_steps.push(t);
            }
        }
        (records, record_steps)
    };
    let (train_records, train_steps) = collect(schedule.train_steps());
    let (validation_records, _) = collect(schedule.validation_steps());
    // CDFs are fit on the train block only; reject anything outside it.
    for &t in &train_steps {
        assert!(
            schedule.train_steps().contains(&t),
            "CDF training record at step {t} lies outside the train block of episode {rebalance_step}"
        );
    }
    if train_records.len() < 2 || validation_records.is_empty() {
        return Err(BacktestError::TooFewRecords {
            step: rebalance_step,
            train: train_records.len(),
            validation: validation_records.len(),
        });
    }

    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = mix_seed(cfg.seed, rebalance_step);
    let model = predictor::train(
        &train_records,
        &validation_records,
        &cfg.grid,
        cfg.cdf_granularity,
        &train_cfg,
        EpisodeTag { rebalance_step },
    )
    .map_err(|source| BacktestError::Train { step: rebalance_step, source })?;
    model.check_episode(rebalance_step).expect("model bound to its episode");

    // Predict for the current universe plus any prior holdings that left it.
    let prior_weights: Vec<(InstrumentId, f64)> = data.weights.at(rebalance_step - 1).to_vec();
    let mut score_set: BTreeSet<InstrumentId> =
        data.universe.at(rebalance_step).iter().copied().collect();
    score_set.extend(prior_weights.iter().map(|&(id, _)| id));

    let mut predictions_by_id: BTreeMap<InstrumentId, FactorEstimate> = BTreeMap::new();
    let mut excluded: BTreeSet<InstrumentId> = BTreeSet::new();
    for &i in &score_set {
        match builder.build(i, rebalance_step - 1) {
            Ok(tensor) => {
                let est = model.forward(&tensor).expect("tensor built from the model's grid");
                predictions_by_id.insert(i, est);
            }
            Err(_) => {
                excluded.insert(i);
            }
        }
    }

    let current: Vec<InstrumentId> = data.universe.at(rebalance_step).to_vec();
    let milp_predictions: BTreeMap<InstrumentId, (f64, f64)> =
        predictions_by_id.iter().map(|(&id, est)| (id, (est.alpha, est.beta))).collect();

    let mut portfolios = BTreeMap::new();
    for &cardinality in &cfg.cardinalities {
        let artifact = match milp::build_problem(
            &data.instruments,
            &current,
            &prior_weights,
            &milp_predictions,
            &excluded,
            cardinality,
            &BTreeMap::new(),
            cfg.milp.equality_band,
        ) {
            Ok(problem) => match milp::solve(&problem, &cfg.milp.solve_config()) {
                Ok(solution) => {
                    PortfolioArtifact { problem, solution: Some(solution), error: None }
                }
                Err(e) => {
                    PortfolioArtifact { problem, solution: None, error: Some(e.to_string()) }
                }
            },
            Err(e) => {
                // construction failed before a problem existed; synthesize an
                // empty problem record for the report
                let empty = MilpProblem {
                    instruments: Vec::new(),
                    cardinality,
                    alpha_target: 0.0,
                    beta_target: 0.0,
                    equality_band: cfg.milp.equality_band,
                };
                PortfolioArtifact { problem: empty, solution: None, error: Some(e.to_string()) }
            }
        };
        portfolios.insert(cardinality, artifact);
    }

    let predictions = predictions_by_id
        .iter()
        .map(|(&id, est)| {
            (
                data.instruments.name(id).to_string(),
                (est.alpha, est.beta, est.residual),
            )
        })
        .collect();
    Ok(EpisodeArtifacts {
        rebalance_step,
        model,
        predictions,
        excluded: excluded.iter().map(|&id| data.instruments.name(id).to_string()).collect(),
        portfolios,
        n_train_records: train_records.len(),
        n_validation_records: validation_records.len(),
    })
}

/// Realize a static-weight portfolio's return over the holding period.
/// Instruments missing the end price are liquidated at their last available
/// price and reported.
fn realize_portfolio(
    data: &MarketData,
    holdings: &[(InstrumentId, f64)],
    start: usize,
    horizon: usize,
    warnings: &mut Vec<String>,
) -> f64 {
    let returns = ReturnPanel::new(&data.prices);
    let mut total = 0.0;
    for &(id, w) in holdings {
        if w == 0.0 {
            continue;
        }
        let r = match returns.try_horizon(id, start, horizon) {
            Some(r) => r,
            None => {
                let start_price = data.prices.price(id, start);
                let mut last = None;
                for s in (start + 1..=start + horizon).rev() {
                    if let Some(p) = data.prices.price(id, s) {
                        last = Some((s, p));
                        break;
                    }
                }
                match (start_price, last) {
                    (Some(p0), Some((s, p1))) => {
                        warnings.push(format!(
                            "{} held at step {start} has no price at step {}; liquidated at step {s}",
                            data.instruments.name(id),
                            start + horizon
                        ));
                        p1 / p0 - 1.0
                    }
                    _ => {
                        warnings.push(format!(
                            "{} held at step {start} has no usable prices over the period; return treated as 0",
                            data.instruments.name(id)
                        ));
                        0.0
                    }
                }
            }
        };
        total += w * r;
    }
    total
}

/// Run the full walk-forward backtest.
pub fn run_backtest(data: &MarketData, cfg: &BacktestConfig) -> Result<BacktestReport, BacktestError> {
    if cfg.n_episodes == 0 {
        return Err(BacktestError::NoEpisodes);
    }
    let depth = cfg.grid.history_depth() + 1;
    let first_record = cfg.start_step.saturating_sub(cfg.train_span);
    if cfg.start_step < cfg.train_span || first_record < depth {
        return Err(BacktestError::Coverage {
            needed: cfg.train_span + depth,
            have: cfg.start_step,
        });
    }
    let last_step = cfg.start_step + (cfg.n_episodes - 1) * cfg.horizon + cfg.horizon;
    if last_step >= data.calendar.len() {
        return Err(BacktestError::Coverage { needed: last_step + 1, have: data.calendar.len() });
    }

    let index = data.index_id();
    let mut all_instruments: BTreeSet<InstrumentId> = BTreeSet::new();
    for step in 0..data.calendar.len() {
        all_instruments.extend(data.universe.at(step).iter().copied());
    }
    let instrument_list: Vec<InstrumentId> = all_instruments.into_iter().collect();
    let builder = TensorBuilder::new(&data.prices, index, cfg.grid.clone(), &instrument_list);

    let uncapped = ReturnPanel::new(&data.prices);
    let mut episodes = Vec::with_capacity(cfg.n_episodes);
    let mut warnings = Vec::new();

    for n in 0..cfg.n_episodes {
        let t_n = cfg.start_step + n * cfg.horizon;
        let artifacts = run_episode(data, &builder, cfg, t_n)?;

        // ---- evaluation: the only place future prices are read ----
        let r_market = uncapped
            .try_horizon(index, t_n, cfg.horizon)
            .expect("coverage check guarantees the index horizon return");

        // prediction errors per estimator over the test records
        let capped = ReturnPanel::capped(&data.prices, t_n - 1);
        let mut pe: BTreeMap<String, report::PeCell> = BTreeMap::new();
        let mut record_pe = |name: &str, batch: &[(f64, f64, FactorEstimate)]| {
            if let Ok(value) = prediction_error(batch) {
                pe.insert(
                    name.to_string(),
                    report::PeCell { mean: value, count: batch.len() },
                );
            }
        };

        let mut predictor_batch = Vec::new();
        let mut hist_batches: BTreeMap<usize, Vec<(f64, f64, FactorEstimate)>> = BTreeMap::new();
        for &i in data.universe.at(t_n) {
            let Some(r_i) = uncapped.try_horizon(i, t_n, cfg.horizon) else { continue };
            let name = data.instruments.name(i).to_string();
            if let Some(&(alpha, beta, residual)) = artifacts.predictions.get(&name) {
                predictor_batch.push((
                    r_i,
                    r_market,
                    FactorEstimate { alpha, beta, residual, kind: EstimateKind::Predicted },
                ));
            }
            for &window in &cfg.historical_windows {
                if let Ok(est) = historical_estimate(
                    &capped,
                    index,
                    i,
                    t_n,
                    window,
                    cfg.horizon,
                    cfg.historical_sampling,
                ) {
                    hist_batches.entry(window).or_default().push((r_i, r_market, est));
                }
            }
        }
        record_pe("predictor", &predictor_batch);
        for (window, batch) in &hist_batches {
            record_pe(&format!("historical_{window}"), batch);
        }

        // portfolio outcomes
        let mut portfolios: BTreeMap<String, PortfolioOutcome> = BTreeMap::new();
        for (&cardinality, artifact) in &artifacts.portfolios {
            let key = format!("milp_{cardinality}");
            let outcome = match (&artifact.solution, &artifact.error) {
                (Some(solution), _) => {
                    let holdings: Vec<(InstrumentId, f64)> = artifact
                        .problem
                        .instruments
                        .iter()
                        .zip(&solution.weights)
                        .filter(|&(_, &w)| w > milp::INCLUSION_TOL)
                        .map(|(inst, &w)| {
                            (data.instruments.get(&inst.name).expect("known instrument"), w)
                        })
                        .collect();
                    let r_p =
                        realize_portfolio(data, &holdings, t_n, cfg.horizon, &mut warnings);
                    let d = r_p - r_market;
                    PortfolioOutcome {
                        constructed: true,
                        error: None,
                        portfolio_return: Some(r_p),
                        squared_tracking_diff: Some(d * d),
                        names_held: Some(solution.support_size()),
                        objective: Some(solution.objective),
                        solver: Some(solution.stats.clone()),
                    }
                }
                (None, err) => PortfolioOutcome {
                    constructed: false,
                    error: err.clone(),
                    portfolio_return: None,
                    squared_tracking_diff: None,
                    names_held: None,
                    objective: None,
                    solver: None,
                },
            };
            portfolios.insert(key, outcome);
        }

        // lagged full replication
        let lag_step = t_n - cfg.full_replication_lag;
        let full_holdings = milp::full_replication(data.weights.at(lag_step));
        let r_full = realize_portfolio(data, &full_holdings, t_n, cfg.horizon, &mut warnings);
        let d_full = r_full - r_market;
        portfolios.insert(
            "full_replication".to_string(),
            PortfolioOutcome {
                constructed: true,
                error: None,
                portfolio_return: Some(r_full),
                squared_tracking_diff: Some(d_full * d_full),
                names_held: Some(full_holdings.iter().filter(|&&(_, w)| w > 0.0).count()),
                objective: None,
                solver: None,
            },
        );

        episodes.push(EpisodeReport {
            rebalance_step: t_n,
            rebalance_date: data.calendar.date(t_n),
            n_train_records: artifacts.n_train_records,
            n_validation_records: artifacts.n_validation_records,
            epochs_run: artifacts.model.epochs_run,
            best_validation_loss: artifacts.model.best_val_loss,
            excluded: artifacts.excluded.clone(),
            market_return: r_market,
            pe,
            portfolios,
        });
    }

    let aggregate = report::aggregate(&episodes);
    Ok(BacktestReport { config: cfg.clone(), episodes, aggregate, warnings })
}
