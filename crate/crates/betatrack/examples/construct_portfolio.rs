//! Build and solve one partial-replication MILP, then inspect the result.
//!
//! Run with: cargo run --release --example construct_portfolio

use betatrack::milp::{
    build_problem, full_replication, solve, validate_solution, SolveConfig,
};
use betatrack::market_data::Instruments;
use std::collections::{BTreeMap, BTreeSet};

fn main() {
    // Ten instruments with prior index weights and predicted (alpha, beta).
    let mut interner = Instruments::new();
    let names = ["KRW05930", "KRW00660", "KRW73400", "KRW05380", "KRW12330",
                 "KRW51910", "KRW06400", "KRW20150", "KRW03550", "KRW96770"];
    let ids: Vec<_> = names.iter().map(|n| interner.intern(n)).collect();

    let priors = [0.28, 0.16, 0.13, 0.11, 0.09, 0.07, 0.06, 0.05, 0.03, 0.02];
    let betas = [1.05, 1.32, 0.87, 1.10, 0.95, 1.45, 0.78, 1.22, 0.66, 1.58];
    let alphas = [0.001, -0.004, 0.006, 0.002, -0.001, 0.008, -0.003, 0.004, 0.000, -0.006];

    let prior: Vec<_> = ids.iter().copied().zip(priors).collect();
    let predictions: BTreeMap<_, _> =
        ids.iter().copied().zip(alphas.iter().copied().zip(betas.iter().copied())).collect();

    let problem = build_problem(
        &interner,
        &ids,
        &prior,
        &predictions,
        &BTreeSet::new(),
        4, // hold at most 4 names
        &BTreeMap::new(),
        None,
    )
    .unwrap();
    println!(
        "targets: net beta {:.4}, net alpha {:.5} (prior-weighted predictions)",
        problem.beta_target, problem.alpha_target
    );

    let solution = solve(&problem, &SolveConfig::default()).unwrap();
    println!(
        "solved: objective {:.6}, {} nodes, {} LP iterations, gap {:.1e}, proven optimal: {}",
        solution.objective,
        solution.stats.nodes_explored,
        solution.stats.lp_iterations,
        solution.stats.gap,
        solution.stats.proven_optimal
    );

    println!("\n{:<10} {:>8} {:>9} {:>9}", "name", "prior", "weight", "|w-prior|");
    for (k, inst) in problem.instruments.iter().enumerate() {
        if solution.weights[k] > 1e-9 || inst.prior_weight > 0.05 {
            println!(
                "{:<10} {:>8.4} {:>9.4} {:>9.4}",
                inst.name, inst.prior_weight, solution.weights[k], solution.deviations[k]
            );
        }
    }
    println!("names held: {} (cap 4)", solution.support_size());

    let net_beta: f64 = problem
        .instruments
        .iter()
        .zip(&solution.weights)
        .filter_map(|(inst, &w)| inst.beta.map(|b| w * b))
        .sum();
    println!("net predicted beta of the portfolio: {net_beta:.4} (target {:.4})", problem.beta_target);

    let issues = validate_solution(&problem, &solution);
    println!("validation issues: {:?}", if issues.is_empty() { "none".to_string() } else { issues.join("; ") });

    // The lagged full-replication baseline simply reuses the prior weights.
    let baseline = full_replication(&prior);
    println!("\nfull replication holds all {} names at their prior weights", baseline.len());
}
