//! Theil-Sen regression: outlier resistance and supervised target
//! generation from horizon returns.
//!
//! Run with: cargo run --release --example theil_sen_targets

use betatrack::market_data::ReturnPanel;
use betatrack::synth::{generate, MeanRevertingSpec, SynthConfig};
use betatrack::targets::{make_target, theil_sen, RegressionSample};

fn main() {
    // Four collinear points plus one wild outlier: the median of pairwise
    // slopes ignores the outlier entirely.
    let clean: Vec<(f64, f64)> = (0..4).map(|k| (k as f64, 1.5 * k as f64 + 0.3)).collect();
    let mut with_outlier = clean.clone();
    with_outlier.push((4.0, 60.0));
    let (alpha, beta) = theil_sen(&RegressionSample::new(with_outlier).unwrap());
    println!("4 collinear points + outlier at y=60: alpha {alpha:.3}, beta {beta:.3}");

    // Ordinary least squares on the same data for contrast.
    let pts: Vec<(f64, f64)> = (0..4)
        .map(|k| (k as f64, 1.5 * k as f64 + 0.3))
        .chain(std::iter::once((4.0, 60.0)))
        .collect();
    let n = pts.len() as f64;
    let (sx, sy): (f64, f64) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let ols_beta = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    println!("OLS slope on the same points: {ols_beta:.3} (dragged toward the outlier)\n");

    // Targets on a noiseless market recover the generating coefficients.
    let cfg = SynthConfig {
        n_instruments: 20,
        n_days: 300,
        beta: MeanRevertingSpec { kappa: 0.03, shock_std: 0.0 },
        alpha: MeanRevertingSpec { kappa: 0.03, shock_std: 0.0 },
        idio_vol: 0.0,
        n_absorbers: 3,
        horizon: 1,
        seed: 9,
        ..SynthConfig::default()
    };
    let (data, truth) = generate(&cfg);
    let returns = ReturnPanel::new(&data.prices);
    let index = data.index_id();
    println!("noiseless static market, horizon 1: Theil-Sen targets vs ground truth");
    println!("{:<6} {:>10} {:>10} {:>12} {:>12}", "name", "ts beta", "true beta", "ts alpha", "true alpha");
    // (skip the top-cap names, which absorb the daily basket wedge)
    for name in ["S08", "S12", "S15"] {
        let id = data.instruments.get(name).unwrap();
        let est = make_target(&returns, index, id, 150, cfg.horizon, 2).unwrap();
        let want = truth.at(id, 150).unwrap();
        println!(
            "{name:<6} {:>10.6} {:>10.6} {:>12.8} {:>12.8}",
            est.beta, want.beta, est.alpha, want.alpha
        );
    }

    // On the default noisy market the targets are noisy estimates of the
    // moving truth; the predictor's job is to average that noise away.
    let noisy_cfg = SynthConfig { n_instruments: 20, n_days: 400, seed: 9, ..SynthConfig::default() };
    let (data, truth) = generate(&noisy_cfg);
    let returns = ReturnPanel::new(&data.prices);
    let index = data.index_id();
    let id = data.instruments.get("S03").unwrap();
    println!("\nnoisy market, horizon {}: target vs truth for S03", noisy_cfg.horizon);
    for t in [120usize, 180, 240, 300] {
        let est = make_target(&returns, index, id, t, noisy_cfg.horizon, 2).unwrap();
        let want = truth.at(id, t).unwrap();
        println!("  t={t}: ts beta {:>7.3} true beta {:>6.3}", est.beta, want.beta);
    }
}
