//! Backtest report structures and writers.
//!
//! Aggregates are always derived from the stored per-episode records by
//! [`aggregate`], so the summary cannot drift from the detail.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::{Datelike, NaiveDate};

use crate::milp::SolverStats;

use super::BacktestConfig;

/// Pooled mean squared error cell: `mean` over `count` records.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct PeCell {
    pub mean: f64,
    pub count: usize,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PortfolioOutcome {
    pub constructed: bool,
    pub error: Option<String>,
    pub portfolio_return: Option<f64>,
    pub squared_tracking_diff: Option<f64>,
    pub names_held: Option<usize>,
    pub objective: Option<f64>,
    pub solver: Option<SolverStats>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct EpisodeReport {
    pub rebalance_step: usize,
    pub rebalance_date: NaiveDate,
    pub n_train_records: usize,
    pub n_validation_records: usize,
    pub epochs_run: usize,
    pub best_validation_loss: f64,
    pub excluded: Vec<String>,
    pub market_return: f64,
    /// Per-estimator prediction error over this episode's test records.
    pub pe: BTreeMap<String, PeCell>,
    /// Per-strategy portfolio outcome.
    pub portfolios: BTreeMap<String, PortfolioOutcome>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct AggregateReport {
    /// Pooled prediction error per estimator over all test records.
    pub pe: BTreeMap<String, f64>,
    pub pe_counts: BTreeMap<String, usize>,
    /// Mean squared tracking difference per strategy over constructed
    /// episodes.
    pub te: BTreeMap<String, f64>,
    pub te_counts: BTreeMap<String, usize>,
    pub failed_constructions: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub episodes: Vec<EpisodeReport>,
    pub aggregate: AggregateReport,
    pub warnings: Vec<String>,
}

/// Recompute every aggregate from the per-episode records.
pub fn aggregate(episodes: &[EpisodeReport]) -> AggregateReport {
    let mut pe_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut te_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut failures: BTreeMap<String, usize> = BTreeMap::new();
    for e in episodes {
        for (k, cell) in &e.pe {
            let entry = pe_sums.entry(k.clone()).or_insert((0.0, 0));
            entry.0 += cell.mean * cell.count as f64;
            entry.1 += cell.count;
        }
        for (k, p) in &e.portfolios {
            if let Some(d) = p.squared_tracking_diff {
                let entry = te_sums.entry(k.clone()).or_insert((0.0, 0));
                entry.0 += d;
                entry.1 += 1;
            } else {
                *failures.entry(k.clone()).or_insert(0) += 1;
            }
        }
    }
    AggregateReport {
        pe: pe_sums.iter().map(|(k, (s, n))| (k.clone(), s / *n as f64)).collect(),
        pe_counts: pe_sums.iter().map(|(k, (_, n))| (k.clone(), *n)).collect(),
        te: te_sums.iter().map(|(k, (s, n))| (k.clone(), s / *n as f64)).collect(),
        te_counts: te_sums.iter().map(|(k, (_, n))| (k.clone(), *n)).collect(),
        failed_constructions: failures,
    }
}

impl BacktestReport {
    pub fn write_json<W: Write>(&self, out: W) -> serde_json::Result<()> {
        serde_json::to_writer_pretty(out, self)
    }

    /// Yearly prediction-error table: one row per calendar year, one column
    /// per estimator, pooled within the year.
    pub fn write_pe_by_year_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let estimators: Vec<String> = self.aggregate.pe.keys().cloned().collect();
        write!(out, "year")?;
        for est in &estimators {
            write!(out, ",{est}")?;
        }
        writeln!(out)?;

        let mut by_year: BTreeMap<i32, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
        for e in &self.episodes {
            let year = e.rebalance_date.year();
            for (k, cell) in &e.pe {
                let entry =
                    by_year.entry(year).or_default().entry(k.clone()).or_insert((0.0, 0));
                entry.0 += cell.mean * cell.count as f64;
                entry.1 += cell.count;
            }
        }
        for (year, cells) in &by_year {
            write!(out, "{year}")?;
            for est in &estimators {
                match cells.get(est) {
                    Some((s, n)) if *n > 0 => write!(out, ",{}", s / *n as f64)?,
                    _ => write!(out, ",")?,
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Tracking-error table: one row per cardinality cap, with the
    /// full-replication baseline repeated for comparison.
    pub fn write_te_by_nstar_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "n_star,milp_te,episodes,full_replication_te")?;
        let full = self.aggregate.te.get("full_replication").copied();
        let mut caps: Vec<usize> = self
            .aggregate
            .te
            .keys()
            .filter_map(|k| k.strip_prefix("milp_").and_then(|s| s.parse().ok()))
            .collect();
        caps.sort_unstable();
        for cap in caps {
            let key = format!("milp_{cap}");
            let te = self.aggregate.te.get(&key);
            let n = self.aggregate.te_counts.get(&key).copied().unwrap_or(0);
            match (te, full) {
                (Some(te), Some(f)) => writeln!(out, "{cap},{te},{n},{f}")?,
                (Some(te), None) => writeln!(out, "{cap},{te},{n},")?,
                _ => writeln!(out, "{cap},,{n},")?,
            }
        }
        Ok(())
    }
}
