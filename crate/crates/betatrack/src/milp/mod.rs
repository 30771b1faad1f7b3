//! Cardinality-constrained partial-replication portfolio optimization.
//!
//! The decision weights minimize `(1/|S|) * sum_i z_i + Z` where the `z_i`
//! bound `|w_i - prior_i|` and `Z` bounds every `z_i`, subject to the net
//! predicted beta and alpha of the portfolio matching the prior-weighted
//! index targets, full investment, and at most `N*` names held. Instruments
//! without predictions are pinned at their prior weights; instruments that
//! left the universe are forced to zero but still pay their `z` distance.

mod branch_bound;
pub mod simplex;

pub use branch_bound::{solve, SolveConfig};

use std::collections::{BTreeMap, BTreeSet};

use crate::market_data::{InstrumentId, Instruments};

/// Quantity below which a weight does not count toward the cardinality cap.
pub const INCLUSION_TOL: f64 = 1e-9;

/// How an instrument participates in the optimization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstrumentRole {
    /// Decision weight backed by a prediction.
    Free,
    /// No usable prediction: weight pinned to the prior index weight.
    Pinned,
    /// No longer in the universe: weight forced to zero.
    ForcedZero,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MilpInstrument {
    pub name: String,
    pub role: InstrumentRole,
    /// Index weight one step before the rebalance (0 for new listings).
    pub prior_weight: f64,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Optional per-instrument weight cap.
    pub max_weight: Option<f64>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MilpProblem {
    pub instruments: Vec<MilpInstrument>,
    /// Maximum number of held names, including positive pins.
    pub cardinality: usize,
    pub alpha_target: f64,
    pub beta_target: f64,
    /// Optional +/- band widening the two replication equalities.
    pub equality_band: Option<f64>,
}

impl MilpProblem {
    pub fn n(&self) -> usize {
        self.instruments.len()
    }

    pub fn positive_pins(&self) -> usize {
        self.instruments
            .iter()
            .filter(|i| i.role == InstrumentRole::Pinned && i.prior_weight > INCLUSION_TOL)
            .count()
    }
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverStats {
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    /// Relative optimality gap at termination.
    pub gap: f64,
    pub proven_optimal: bool,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct MilpSolution {
    /// Weights in problem instrument order.
    pub weights: Vec<f64>,
    pub included: Vec<bool>,
    /// Absolute-deviation dummies at the optimum.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    pub objective: f64,
    pub stats: SolverStats,
}

impl MilpSolution {
    pub fn support_size(&self) -> usize {
        self.weights.iter().filter(|&&w| w > INCLUSION_TOL).count()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MilpError {
    #[error("prediction missing for non-excluded instrument {0}")]
    MissingPrediction(String),

    #[error("cardinality cap {cardinality} is below the {pinned} pinned names")]
    CardinalityTooSmall { cardinality: usize, pinned: usize },

    #[error("cardinality cap must be at least 1")]
    ZeroCardinality,

    #[error("problem infeasible; unsatisfiable constraints: {0}")]
    Infeasible(String),

    #[error("time limit reached with no incumbent solution")]
    Timeout,

    #[error("LP solver failure: {0}")]
    Lp(#[from] simplex::LpError),
}

/// Assemble the optimization problem for one rebalance.
///
/// `current` is the universe at the rebalance step, `prior` the index
/// weights one step earlier; the instrument set is their union. Targets
/// are the prior-weighted sums of the predictions over the free names.
#[allow(clippy::too_many_arguments)]
pub fn build_problem(
    instruments: &Instruments,
    current: &[InstrumentId],
    prior: &[(InstrumentId, f64)],
    predictions: &BTreeMap<InstrumentId, (f64, f64)>,
    pinned: &BTreeSet<InstrumentId>,
    cardinality: usize,
    max_weights: &BTreeMap<InstrumentId, f64>,
    equality_band: Option<f64>,
) -> Result<MilpProblem, MilpError> {
    if cardinality == 0 {
        return Err(MilpError::ZeroCardinality);
    }
    let prior_map: BTreeMap<InstrumentId, f64> = prior.iter().copied().collect();
    let current_set: BTreeSet<InstrumentId> = current.iter().copied().collect();
    let mut union: Vec<InstrumentId> = current_set
        .iter()
        .copied()
        .chain(prior_map.keys().copied())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    union.sort_unstable();

    let mut rows = Vec::with_capacity(union.len());
    let mut alpha_target = 0.0;
    let mut beta_target = 0.0;
    for &id in &union {
        let prior_weight = prior_map.get(&id).copied().unwrap_or(0.0);
        let in_current = current_set.contains(&id);
        let role = if !in_current {
            InstrumentRole::ForcedZero
        } else if pinned.contains(&id) {
            InstrumentRole::Pinned
        } else {
            InstrumentRole::Free
        };
        // Departed instruments keep their decision weight forced to zero,
        // but their prediction still enters the replication targets at the
        // prior weight unless they are in the exclusion set.
        let (alpha, beta) = match role {
            InstrumentRole::Free => {
                let &(a, b) = predictions
                    .get(&id)
                    .ok_or_else(|| MilpError::MissingPrediction(instruments.name(id).into()))?;
                alpha_target += prior_weight * a;
                beta_target += prior_weight * b;
                (Some(a), Some(b))
            }
            InstrumentRole::ForcedZero if !pinned.contains(&id) => {
                let &(a, b) = predictions
                    .get(&id)
                    .ok_or_else(|| MilpError::MissingPrediction(instruments.name(id).into()))?;
                alpha_target += prior_weight * a;
                beta_target += prior_weight * b;
                (Some(a), Some(b))
            }
            _ => (None, None),
        };
        rows.push(MilpInstrument {
            name: instruments.name(id).to_string(),
            role,
            prior_weight,
            alpha,
            beta,
            max_weight: max_weights.get(&id).copied(),
        });
    }

    let problem = MilpProblem {
        instruments: rows,
        cardinality,
        alpha_target,
        beta_target,
        equality_band,
    };
    let pins = problem.positive_pins();
    if cardinality < pins {
        return Err(MilpError::CardinalityTooSmall { cardinality, pinned: pins });
    }
    Ok(problem)
}

/// The lagged full-replication baseline: prior index weights verbatim.
pub fn full_replication(prior: &[(InstrumentId, f64)]) -> Vec<(InstrumentId, f64)> {
    prior.to_vec()
}

/// Check every solution invariant; returns human-readable violations.
pub fn validate_solution(problem: &MilpProblem, sol: &MilpSolution) -> Vec<String> {
    let mut issues = Vec::new();
    let n = problem.n();
    if sol.weights.len() != n {
        issues.push(format!("weight vector length {} != {}", sol.weights.len(), n));
        return issues;
    }
    let sum: f64 = sol.weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        issues.push(format!("weights sum to {sum}, not 1"));
    }
    for (k, inst) in problem.instruments.iter().enumerate() {
        let w = sol.weights[k];
        if w < -1e-9 {
            issues.push(format!("{}: negative weight {w}", inst.name));
        }
        match inst.role {
            InstrumentRole::Pinned => {
                if (w - inst.prior_weight).abs() > 1e-12 {
                    issues.push(format!(
                        "{}: pinned weight {w} != prior {}",
                        inst.name, inst.prior_weight
                    ));
                }
            }
            InstrumentRole::ForcedZero => {
                if w.abs() > 1e-12 {
                    issues.push(format!("{}: departed instrument holds weight {w}", inst.name));
                }
            }
            InstrumentRole::Free => {
                if let Some(cap) = inst.max_weight {
                    if w > cap + 1e-9 {
                        issues.push(format!("{}: weight {w} above cap {cap}", inst.name));
                    }
                }
            }
        }
        // dummy-variable binding at optimality
        let dev = (w - inst.prior_weight).abs();
        if (sol.deviations[k] - dev).abs() > 1e-9 {
            issues.push(format!(
                "{}: z = {} but |w - prior| = {dev}",
                inst.name, sol.deviations[k]
            ));
        }
    }
    let zmax = sol.deviations.iter().copied().fold(0.0f64, f64::max);
    if (sol.max_deviation - zmax).abs() > 1e-9 {
        issues.push(format!("Z = {} but max z = {zmax}", sol.max_deviation));
    }
    if sol.support_size() > problem.cardinality {
        issues.push(format!(
            "support {} exceeds cardinality {}",
            sol.support_size(),
            problem.cardinality
        ));
    }
    let band = problem.equality_band.unwrap_or(0.0).max(1e-8);
    let mut beta_net = 0.0;
    let mut alpha_net = 0.0;
    for (k, inst) in problem.instruments.iter().enumerate() {
        if inst.role == InstrumentRole::Free {
            beta_net += sol.weights[k] * inst.beta.unwrap();
            alpha_net += sol.weights[k] * inst.alpha.unwrap();
        }
    }
    if (beta_net - problem.beta_target).abs() > band {
        issues.push(format!(
            "net beta {beta_net} misses target {} by more than {band}",
            problem.beta_target
        ));
    }
    if (alpha_net - problem.alpha_target).abs() > band {
        issues.push(format!(
            "net alpha {alpha_net} misses target {} by more than {band}",
            problem.alpha_target
        ));
    }
    issues
}
