//! Desk-scale index tracking driven by predicted market sensitivities.
//!
//! The pipeline: ingest daily price/weight panels, generate robust
//! (alpha, beta, residual) regression targets, train a small neural
//! predictor on CDF-transformed rolling statistics, and solve a
//! cardinality-constrained portfolio MILP whose net predicted alpha and
//! beta match the index. A walk-forward backtest with an idle gap between
//! validation and test blocks keeps every decision free of look-ahead.
//!
//! Start with the runnable examples:
//!
//! ```bash
//! cargo run --release --example synthetic_market
//! cargo run --release --example theil_sen_targets
//! cargo run --release --example cdf_transform
//! cargo run --release --example train_predictor
//! cargo run --release --example construct_portfolio
//! cargo run --release --example walk_forward
//! ```

pub mod backtest;
pub mod cli;
pub mod config;
pub mod features;
pub mod market_data;
pub mod milp;
pub mod predictor;
pub mod synth;
pub mod targets;
