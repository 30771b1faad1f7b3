//! Train one episode's predictor on a small synthetic market and compare
//! its outputs with the generator's ground truth.
//!
//! Run with: cargo run --release --example train_predictor

use betatrack::backtest::{run_episode, BacktestConfig, MilpRunConfig};
use betatrack::features::{FeatureGridSpec, TensorBuilder};
use betatrack::predictor::TrainConfig;
use betatrack::synth::{generate, SynthConfig};

fn main() {
    let synth_cfg = SynthConfig {
        n_instruments: 60,
        n_days: 900,
        seed: 3,
        ..SynthConfig::default()
    };
    let (data, truth) = generate(&synth_cfg);

    let cfg = BacktestConfig {
        horizon: 21,
        half_window: 2,
        validation_span: 60,
        train_span: 200,
        start_step: 700,
        n_episodes: 1,
        cardinalities: vec![],
        grid: FeatureGridSpec::default_grid(),
        train: TrainConfig {
            initial_lr: 0.3,
            momentum: 0.9,
            batch_size: 256,
            max_epochs: 60,
            patience: 10,
            ..TrainConfig::default()
        },
        milp: MilpRunConfig::default(),
        seed: 3,
        ..BacktestConfig::default()
    };

    let ids: Vec<_> = data.universe.at(0).to_vec();
    let builder = TensorBuilder::new(&data.prices, data.index_id(), cfg.grid.clone(), &ids);
    let t_n = cfg.start_step;
    println!("training episode at step {t_n} ({})...", data.calendar.date(t_n));
    let artifacts = run_episode(&data, &builder, &cfg, t_n).unwrap();
    println!(
        "{} train / {} validation records, stopped after {} epochs, best validation loss {:.5}",
        artifacts.n_train_records,
        artifacts.n_validation_records,
        artifacts.model.epochs_run,
        artifacts.model.best_val_loss
    );

    println!("\npredicted vs true horizon beta (and alpha) at the rebalance step:");
    println!("{:<6} {:>9} {:>9} {:>11} {:>11}", "name", "pred b", "true b", "pred a", "true a");
    for k in (0..60).step_by(12) {
        let name = format!("S{k:02}");
        let id = data.instruments.get(&name).unwrap();
        let (alpha, beta, _rho) = artifacts.predictions[&name];
        let want = truth.at(id, t_n).unwrap();
        println!(
            "{name:<6} {beta:>9.3} {:>9.3} {alpha:>11.5} {:>11.5}",
            want.beta, want.alpha
        );
    }

    // Checkpoint round-trip: reloading restores bitwise-identical inference.
    let mut buf = Vec::new();
    artifacts.model.save_json(&mut buf).unwrap();
    let reloaded = betatrack::predictor::PredictorModel::load_json(buf.as_slice()).unwrap();
    let id = data.instruments.get("S00").unwrap();
    let tensor = builder.build(id, t_n - 1).unwrap();
    let a = artifacts.model.forward(&tensor).unwrap();
    let b = reloaded.forward(&tensor).unwrap();
    println!(
        "\ncheckpoint round-trip bitwise identical: {}",
        a.beta.to_bits() == b.beta.to_bits() && a.alpha.to_bits() == b.alpha.to_bits()
    );
}
