//! Generate a synthetic single-factor market and inspect its structure.
//!
//! Run with: cargo run --release --example synthetic_market

use betatrack::market_data::ReturnPanel;
use betatrack::synth::{generate, SynthConfig};

fn main() {
    let cfg = SynthConfig {
        n_instruments: 50,
        n_days: 500,
        seed: 42,
        ..SynthConfig::default()
    };
    println!("generating {} instruments x {} days (seed {})", cfg.n_instruments, cfg.n_days, cfg.seed);
    let (data, truth) = generate(&cfg);

    let index = data.index_id();
    let returns = ReturnPanel::new(&data.prices);

    // The index is a genuine cap-weighted basket: its daily return equals
    // the weight-inner-product of constituent returns.
    let mut worst = 0.0f64;
    for t in 0..data.calendar.len() - 1 {
        let r_m = returns.try_horizon(index, t, 1).unwrap();
        let basket: f64 = data
            .weights
            .at(t)
            .iter()
            .map(|&(id, w)| w * returns.try_horizon(id, t, 1).unwrap())
            .sum();
        worst = worst.max((r_m - basket).abs());
    }
    println!("max |index return - basket return| over all days: {worst:.3e}");

    // Weight profile: cap-weighted with a realistic concentration curve.
    let last = data.calendar.len() - 1;
    let mut weights: Vec<f64> = data.weights.at(last).iter().map(|&(_, w)| w).collect();
    weights.sort_by(|a, b| b.total_cmp(a));
    let top10: f64 = weights.iter().take(10).sum();
    println!(
        "final weights: largest {:.3}%, top-10 {:.1}%, smallest {:.5}%",
        weights[0] * 100.0,
        top10 * 100.0,
        weights.last().unwrap() * 100.0
    );

    // Ground truth closes the factor equation exactly.
    let sample = data.instruments.get("S10").unwrap();
    let t = 200;
    let p = truth.at(sample, t).unwrap();
    let r_i = returns.try_horizon(sample, t, cfg.horizon).unwrap();
    let r_m = returns.try_horizon(index, t, cfg.horizon).unwrap();
    println!(
        "S10 at step {t}: r_i = {r_i:.5}, alpha + beta * r_m + resid = {:.5} (beta {:.3})",
        p.alpha + p.beta * r_m + p.residual,
        p.beta
    );

    // Betas wander: show one instrument's horizon beta through time.
    print!("S10 horizon beta path: ");
    for t in (0..450).step_by(90) {
        print!("{:.2} ", truth.at(sample, t).unwrap().beta);
    }
    println!();
}
