//! The piecewise-linear empirical CDF transform and its inverse.
//!
//! Run with: cargo run --release --example cdf_transform

use betatrack::features::cdf::EmpiricalCdf;

fn main() {
    // A small skewed sample.
    let values = [0.02, 0.05, 0.05, 0.11, 0.3, 0.9, 2.4, 7.1];
    let cdf = EmpiricalCdf::fit(&values).unwrap();
    println!("training values: {values:?}");
    println!("knots (distinct): {:?}", cdf.knots());

    println!("\nforward map (k-th of n distinct values -> k/(n+1)):");
    for v in [0.02, 0.08, 0.3, 1.0, 7.1] {
        println!("  F({v:>5}) = {:.4}", cdf.transform(v));
    }

    println!("\nout-of-range inputs clamp to the boundary ordinates:");
    println!("  F(-100) = {:.4}   F(1e9) = {:.4}", cdf.transform(-100.0), cdf.transform(1e9));

    println!("\nthe inverse is exact on the training values:");
    for &v in &values {
        let back = cdf.inverse(cdf.transform(v));
        println!("  {v:>5} -> {:.4} -> {back:>5}", cdf.transform(v));
    }

    // Transforming the training sample uniformizes it.
    let mut transformed: Vec<f64> = values.iter().map(|&v| cdf.transform(v)).collect();
    transformed.sort_by(f64::total_cmp);
    let n = transformed.len() as f64;
    let worst = transformed
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            let hi = ((k + 1) as f64 / n - u).abs();
            let lo = (k as f64 / n - u).abs();
            hi.max(lo)
        })
        .fold(0.0f64, f64::max);
    println!("\nmax deviation of the transformed sample from uniform: {worst:.4}");
    println!("knot-rule bound 2/(n_distinct+1):                      {:.4}", 2.0 / (cdf.knots().len() as f64 + 1.0));

    // Any sigmoid output in (0, 1) inverts to a finite value inside the
    // training range, which is what makes the predictor's output layer safe.
    println!("\ninverse of extreme probabilities stays in range:");
    println!("  F^-1(1e-9) = {}   F^-1(1 - 1e-9) = {}", cdf.inverse(1e-9), cdf.inverse(1.0 - 1e-9));
}
