//! Supervised targets and the historical estimation baseline.
//!
//! Targets for one (instrument, step) come from a Theil-Sen fit over the
//! `2*T_C + 1` horizon-return pairs centered on the step; the residual is
//! the center-point regression residual, so the target triple reproduces
//! the center-point return exactly. The historical baseline is plain OLS
//! over horizon returns sampled backward inside a lookback window.

use crate::market_data::{InstrumentId, ReturnPanel};

/// Where a factor estimate came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateKind {
    /// Theil-Sen supervised target.
    Target,
    /// Model prediction.
    Predicted,
    /// Historical OLS baseline (residual fixed at zero).
    Historical,
}

/// An (alpha, beta, residual) triple for one instrument over one horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorEstimate {
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
    pub kind: EstimateKind,
}

impl FactorEstimate {
    /// Reconstructed instrument return given the market return.
    #[inline]
    pub fn reconstruct(&self, r_market: f64) -> f64 {
        self.beta * r_market + self.alpha + self.residual
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TargetError {
    #[error("regression sample needs at least 2 points, got {0}")]
    TooFewPoints(usize),

    #[error("all regressor values equal ({0}); slope is undefined")]
    DegenerateRegressor(f64),

    #[error("target unavailable for instrument #{} at step {step}: missing {side} return at offset {offset}", instrument.0)]
    TargetUnavailable { instrument: InstrumentId, step: usize, offset: usize, side: &'static str },

    #[error("historical estimate unavailable for instrument #{} at step {step}: {got} observations in window {window} (need at least 2)", instrument.0)]
    EstimateUnavailable { instrument: InstrumentId, step: usize, window: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,
}

/// A validated set of (market return, instrument return) pairs.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    points: Vec<(f64, f64)>,
}

impl RegressionSample {
    /// Requires at least two points and at least two distinct x values.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, TargetError> {
        if points.len() < 2 {
            return Err(TargetError::TooFewPoints(points.len()));
        }
        let x0 = points[0].0;
        if points.iter().all(|&(x, _)| x == x0) {
            return Err(TargetError::DegenerateRegressor(x0));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Median of an unsorted list; an even count averages the central pair.
fn median(mut values: Vec<f64>) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len().is_multiple_of(2) {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    }
}

/// Theil-Sen line fit: slope is the median pairwise slope over pairs with
/// distinct x; intercept is the median of per-point intercepts under that
/// slope. Returns `(alpha, beta)`.
pub fn theil_sen(sample: &RegressionSample) -> (f64, f64) {
    let pts = sample.points();
    let mut slopes = Vec::with_capacity(pts.len() * (pts.len() - 1) / 2);
    for j in 0..pts.len() {
        for k in (j + 1)..pts.len() {
            let (xj, yj) = pts[j];
            let (xk, yk) = pts[k];
            if xj != xk {
                slopes.push((yk - yj) / (xk - xj));
            }
        }
    }
    let beta = median(slopes);
    let alpha = median(pts.iter().map(|&(x, y)| y - beta * x).collect());
    (alpha, beta)
}

/// Build the Theil-Sen target triple for instrument `i` at step `t`.
///
/// Uses the horizon-return pairs at offsets `t - half_window ..= t + half_window`;
/// every pair must be present. The residual is the center-point residual,
/// so `alpha + beta * r_m(t) + residual == r_i(t)` exactly.
pub fn make_target(
    returns: &ReturnPanel<'_>,
    index: InstrumentId,
    i: InstrumentId,
    t: usize,
    horizon: usize,
    half_window: usize,
) -> Result<FactorEstimate, TargetError> {
    if t < half_window {
        return Err(TargetError::TargetUnavailable {
            instrument: i,
            step: t,
            offset: 0,
            side: "market",
        });
    }
    let mut points = Vec::with_capacity(2 * half_window + 1);
    for offset in (t - half_window)..=(t + half_window) {
        let x = returns.try_horizon(index, offset, horizon).ok_or(
            TargetError::TargetUnavailable { instrument: i, step: t, offset, side: "market" },
        )?;
        let y = returns.try_horizon(i, offset, horizon).ok_or(
            TargetError::TargetUnavailable { instrument: i, step: t, offset, side: "instrument" },
        )?;
        points.push((x, y));
    }
    let center = points[half_window];
    let sample = RegressionSample::new(points)?;
    let (alpha, beta) = theil_sen(&sample);
    let residual = center.1 - alpha - beta * center.0;
    Ok(FactorEstimate { alpha, beta, residual, kind: EstimateKind::Target })
}

/// How the historical baseline samples horizon returns inside its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoricalSampling {
    /// Horizon returns ending at `t-1, t-1-horizon, t-1-2*horizon, ...`.
    NonOverlapping,
    /// Horizon returns ending at every step down to the window start.
    Overlapping,
}

/// OLS over the sample; returns `(intercept, slope)`.
fn ols(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let sx: f64 = points.iter().map(|p| p.0).sum();
    let sy: f64 = points.iter().map(|p| p.1).sum();
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom <= 1e-10 * n * sxx.abs() {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    Some((intercept, slope))
}

/// Historical OLS estimate of (alpha, beta) for instrument `i` at step `t`,
/// using only horizon returns that end at or before `t - 1` and start no
/// earlier than `t - window`. The residual is zero by convention.
pub fn historical_estimate(
    returns: &ReturnPanel<'_>,
    index: InstrumentId,
    i: InstrumentId,
    t: usize,
    window: usize,
    horizon: usize,
    sampling: HistoricalSampling,
) -> Result<FactorEstimate, TargetError> {
    let mut points = Vec::new();
    let earliest = t.saturating_sub(window);
    match sampling {
        HistoricalSampling::NonOverlapping => {
            let mut end = t.saturating_sub(1);
            while end >= horizon && end - horizon >= earliest {
                let start = end - horizon;
                if let (Some(x), Some(y)) = (
                    returns.try_horizon(index, start, horizon),
                    returns.try_horizon(i, start, horizon),
                ) {
                    points.push((x, y));
                }
                if end < horizon {
                    break;
                }
                match end.checked_sub(horizon) {
                    Some(e) => end = e,
                    None => break,
                }
            }
        }
        HistoricalSampling::Overlapping => {
            let latest_start = match t.checked_sub(1 + horizon) {
                Some(s) => s,
                None => {
                    return Err(TargetError::EstimateUnavailable {
                        instrument: i,
                        step: t,
                        window,
                        got: 0,
                    })
                }
            };
            for start in earliest..=latest_start {
                if let (Some(x), Some(y)) = (
                    returns.try_horizon(index, start, horizon),
                    returns.try_horizon(i, start, horizon),
                ) {
                    points.push((x, y));
                }
            }
        }
    }
    if points.len() < 2 {
        return Err(TargetError::EstimateUnavailable {
            instrument: i,
            step: t,
            window,
            got: points.len(),
        });
    }
    let (alpha, beta) = ols(&points).ok_or(TargetError::DegenerateRegressor(points[0].0))?;
    Ok(FactorEstimate { alpha, beta, residual: 0.0, kind: EstimateKind::Historical })
}

/// Mean squared error of reconstructed returns over a batch of
/// `(instrument return, market return, estimate)` entries.
pub fn prediction_error(batch: &[(f64, f64, FactorEstimate)]) -> Result<f64, TargetError> {
    if batch.is_empty() {
        return Err(TargetError::EmptyBatch);
    }
    let sum: f64 = batch
        .iter()
        .map(|(r_i, r_m, est)| {
            let diff = r_i - est.reconstruct(*r_m);
            diff * diff
        })
        .sum();
    Ok(sum / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{InstrumentId, PricePanel};
    use proptest::prelude::*;

    /// Brute-force Theil-Sen oracle, written independently of the
    /// implementation: enumerate every pair, skip equal-x pairs, take
    /// medians with the mean-of-central-pair rule.
    fn theil_sen_oracle(pts: &[(f64, f64)]) -> (f64, f64) {
        let mut slopes = Vec::new();
        for k in 0..pts.len() {
            for j in 0..k {
                if pts[j].0 != pts[k].0 {
                    slopes.push((pts[k].1 - pts[j].1) / (pts[k].0 - pts[j].0));
                }
            }
        }
        slopes.sort_by(f64::total_cmp);
        let med = |v: &[f64]| -> f64 {
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        };
        let beta = med(&slopes);
        let mut intercepts: Vec<f64> = pts.iter().map(|&(x, y)| y - beta * x).collect();
        intercepts.sort_by(f64::total_cmp);
        (med(&intercepts), beta)
    }

    fn fit(pts: Vec<(f64, f64)>) -> (f64, f64) {
        theil_sen(&RegressionSample::new(pts).unwrap())
    }

    #[test]
    fn collinear_points_recover_line_exactly() {
        let pts: Vec<(f64, f64)> = (0..6).map(|k| (k as f64, 2.0 * k as f64 + 1.0)).collect();
        let (alpha, beta) = fit(pts);
        assert_eq!(beta, 2.0);
        assert_eq!(alpha, 1.0);
    }

    #[test]
    fn outlier_with_four_collinear_points_is_ignored() {
        // 4 collinear points plus one outlier: 6 of the 10 pairwise slopes
        // are exactly 1, so the median slope is unmoved.
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 3.0), (4.0, 40.0)];
        let (oa, ob) = theil_sen_oracle(&pts);
        assert_eq!(ob, 1.0);
        assert_eq!(oa, 0.0);
        let (alpha, beta) = fit(pts);
        assert_eq!(beta, 1.0);
        assert_eq!(alpha, 0.0);
    }

    #[test]
    fn four_point_outlier_sample_matches_oracle() {
        // Here the outlier does shift the median (only 3 of 6 slopes are 1);
        // expected values frozen from the oracle: slopes sorted are
        // [1, 1, 1, 10, 14.5, 28] -> beta 5.5, intercepts sorted
        // [-9, -4.5, 0, 13.5] -> alpha -2.25.
        let pts = vec![(0.0, 0.0), (1.0, 1.0), (2.0, 2.0), (3.0, 30.0)];
        let (oa, ob) = theil_sen_oracle(&pts);
        assert_eq!(ob, 5.5);
        assert_eq!(oa, -2.25);
        let (alpha, beta) = fit(pts);
        assert_eq!(beta, ob);
        assert_eq!(alpha, oa);
    }

    #[test]
    fn duplicate_x_pair_is_skipped() {
        let pts = vec![(0.0, 0.5), (1.0, 1.0), (1.0, 3.0), (2.0, 2.0), (3.0, 3.5)];
        let (oa, ob) = theil_sen_oracle(&pts);
        let (alpha, beta) = fit(pts);
        assert_eq!(beta.to_bits(), ob.to_bits());
        assert!((alpha - oa).abs() < 1e-12);
    }

    #[test]
    fn all_x_equal_is_degenerate() {
        let err = RegressionSample::new(vec![(1.0, 0.0), (1.0, 2.0), (1.0, 5.0)]).unwrap_err();
        assert!(matches!(err, TargetError::DegenerateRegressor(_)));
    }

    #[test]
    fn single_point_is_too_few() {
        let err = RegressionSample::new(vec![(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, TargetError::TooFewPoints(1)));
    }

    proptest! {
        #[test]
        fn matches_oracle_on_random_samples(
            pts in proptest::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 2..12)
        ) {
            prop_assume!(pts.iter().any(|p| p.0 != pts[0].0));
            let (oa, ob) = theil_sen_oracle(&pts);
            let (alpha, beta) = fit(pts);
            prop_assert_eq!(beta.to_bits(), ob.to_bits());
            prop_assert!((alpha - oa).abs() <= 1e-12 * oa.abs().max(1.0));
        }

        #[test]
        fn scale_and_shift_equivariance(
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let pts = vec![(0.0, 0.3), (1.0, 1.1), (2.0, 1.8), (3.0, 3.2), (4.0, 4.1)];
            let (a0, b0) = fit(pts.clone());
            let scaled: Vec<_> = pts.iter().map(|&(x, y)| (x, y * scale)).collect();
            let (a1, b1) = fit(scaled);
            prop_assert!((a1 - a0 * scale).abs() < 1e-12 * scale.max(1.0));
            prop_assert!((b1 - b0 * scale).abs() < 1e-12 * scale.max(1.0));
            let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x, y + shift)).collect();
            let (a2, b2) = fit(shifted);
            prop_assert!((a2 - (a0 + shift)).abs() < 1e-12);
            prop_assert!((b2 - b0).abs() < 1e-12);
        }

        #[test]
        fn breakdown_one_corrupted_point_of_five(corrupt in -1e6f64..1e6, idx in 0usize..5) {
            // 5 collinear points, one y moved arbitrarily: at most 4 of the
            // 10 pairwise slopes are corrupted, so the median is unmoved.
            let mut pts: Vec<(f64, f64)> =
                (0..5).map(|k| (k as f64, 0.5 * k as f64 - 1.0)).collect();
            pts[idx].1 += corrupt;
            let (_, beta) = fit(pts);
            prop_assert_eq!(beta, 0.5);
        }
    }

    /// Prices where the 1-step relation `r_i = alpha + beta * r_m` holds
    /// exactly for every step.
    fn exact_factor_panel(alpha: f64, beta: f64, market: &[f64]) -> PricePanel {
        let mut instrument = vec![100.0];
        for w in market.windows(2) {
            let rm = w[1] / w[0] - 1.0;
            let prev = *instrument.last().unwrap();
            instrument.push(prev * (1.0 + alpha + beta * rm));
        }
        let series = vec![
            market.iter().map(|&p| Some(p)).collect(),
            instrument.into_iter().map(Some).collect(),
        ];
        PricePanel::new(series, market.len())
    }

    const IDX: InstrumentId = InstrumentId(0);
    const INST: InstrumentId = InstrumentId(1);

    #[test]
    fn target_on_noiseless_factor_model_is_exact() {
        let market = [100.0, 101.0, 99.5, 102.0, 103.0, 100.5, 104.0];
        let panel = exact_factor_panel(0.002, 1.3, &market);
        let returns = ReturnPanel::new(&panel);
        let est = make_target(&returns, IDX, INST, 3, 1, 2).unwrap();
        assert!((est.alpha - 0.002).abs() < 1e-12);
        assert!((est.beta - 1.3).abs() < 1e-12);
        assert!(est.residual.abs() < 1e-12);
        assert_eq!(est.kind, EstimateKind::Target);
    }

    #[test]
    fn target_matches_bruteforce_on_noisy_points() {
        // Arbitrary prices; the target must equal the oracle fit over the
        // same five horizon-return pairs, with the center-point residual.
        let series = vec![
            vec![100.0, 102.0, 101.0, 103.0, 104.0, 102.5, 105.0, 106.0]
                .into_iter()
                .map(Some)
                .collect(),
            vec![50.0, 51.5, 50.2, 52.0, 53.1, 51.0, 54.0, 54.5]
                .into_iter()
                .map(Some)
                .collect(),
        ];
        let panel = PricePanel::new(series, 8);
        let returns = ReturnPanel::new(&panel);
        let t = 3;
        let horizon = 2;
        let mut pts = Vec::new();
        for offset in t - 2..=t + 2 {
            pts.push((
                returns.try_horizon(IDX, offset, horizon).unwrap(),
                returns.try_horizon(INST, offset, horizon).unwrap(),
            ));
        }
        let (oa, ob) = theil_sen_oracle(&pts);
        let est = make_target(&returns, IDX, INST, t, horizon, 2).unwrap();
        assert_eq!(est.beta.to_bits(), ob.to_bits());
        assert!((est.alpha - oa).abs() < 1e-12);
        let center = pts[2];
        assert!((est.residual - (center.1 - oa - ob * center.0)).abs() < 1e-12);
    }

    #[test]
    fn missing_market_return_is_target_unavailable() {
        let market = [100.0, 101.0, 99.5, 102.0, 103.0, 100.5, 104.0];
        // Market price knocked out at the right edge of the target window.
        let panel = {
            let mut series = vec![
                market.iter().map(|&p| Some(p)).collect::<Vec<_>>(),
                market.iter().map(|&p| Some(p)).collect::<Vec<_>>(),
            ];
            series[0][6] = None;
            PricePanel::new(series, 7)
        };
        let returns = ReturnPanel::new(&panel);
        let err = make_target(&returns, IDX, INST, 3, 1, 2).unwrap_err();
        assert!(matches!(err, TargetError::TargetUnavailable { side: "market", .. }));
    }

    #[test]
    fn historical_recovers_noiseless_coefficients() {
        let market: Vec<f64> = (0..40)
            .scan(100.0f64, |p, k| {
                *p *= 1.0 + 0.01 * ((k as f64 * 0.7).sin());
                Some(*p)
            })
            .collect();
        let panel = exact_factor_panel(0.001, 0.8, &market);
        let returns = ReturnPanel::new(&panel);
        let est = historical_estimate(
            &returns,
            IDX,
            INST,
            39,
            30,
            1,
            HistoricalSampling::NonOverlapping,
        )
        .unwrap();
        assert!((est.alpha - 0.001).abs() < 1e-12);
        assert!((est.beta - 0.8).abs() < 1e-12);
        assert_eq!(est.residual, 0.0);
    }

    #[test]
    fn window_shorter_than_two_horizons_is_unavailable() {
        let market = [100.0, 101.0, 102.0, 103.0, 104.0, 105.0, 106.0, 107.0, 108.0, 109.0];
        let panel = exact_factor_panel(0.0, 1.0, &market);
        let returns = ReturnPanel::new(&panel);
        let err = historical_estimate(
            &returns,
            IDX,
            INST,
            9,
            4, // window of 4 steps cannot fit two non-overlapping 2-step returns
            2,
            HistoricalSampling::NonOverlapping,
        )
        .unwrap_err();
        assert!(matches!(err, TargetError::EstimateUnavailable { .. }));
    }

    #[test]
    fn historical_matches_normal_equation_oracle() {
        // Deterministic pseudo-random walk; compare against a two-pass
        // normal-equations solve over the same observation set.
        let mut pm = vec![100.0];
        let mut pi = vec![80.0];
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut unit = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for _ in 0..50 {
            let rm = 0.02 * unit();
            let ri = 0.001 + 1.2 * rm + 0.01 * unit();
            pm.push(pm.last().unwrap() * (1.0 + rm));
            pi.push(pi.last().unwrap() * (1.0 + ri));
        }
        let series = vec![
            pm.iter().copied().map(Some).collect(),
            pi.iter().copied().map(Some).collect(),
        ];
        let panel = PricePanel::new(series, pm.len());
        let returns = ReturnPanel::new(&panel);

        let t = 50;
        let window = 49;
        let horizon = 2;
        let mut obs = Vec::new();
        let mut end = t - 1;
        while end >= horizon && end - horizon >= t - window {
            obs.push((
                returns.try_horizon(IDX, end - horizon, horizon).unwrap(),
                returns.try_horizon(INST, end - horizon, horizon).unwrap(),
            ));
            end -= horizon;
        }
        assert_eq!(obs.len(), 24);
        let n = obs.len() as f64;
        let mx = obs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = obs.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = obs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = obs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let beta_oracle = sxy / sxx;
        let alpha_oracle = my - beta_oracle * mx;

        let est = historical_estimate(
            &returns,
            IDX,
            INST,
            t,
            window,
            horizon,
            HistoricalSampling::NonOverlapping,
        )
        .unwrap();
        assert!((est.beta - beta_oracle).abs() < 1e-10);
        assert!((est.alpha - alpha_oracle).abs() < 1e-10);
    }

    #[test]
    fn overlapping_sampling_uses_every_start() {
        let market: Vec<f64> = (0..20)
            .scan(100.0f64, |p, k| {
                *p *= 1.0 + 0.005 * ((k as f64 * 1.3).cos());
                Some(*p)
            })
            .collect();
        let panel = exact_factor_panel(0.0005, 1.1, &market);
        let returns = ReturnPanel::new(&panel);
        // horizon 1 so the per-observation relation is exact
        let est =
            historical_estimate(&returns, IDX, INST, 19, 10, 1, HistoricalSampling::Overlapping)
                .unwrap();
        assert!((est.alpha - 0.0005).abs() < 1e-12);
        assert!((est.beta - 1.1).abs() < 1e-12);
    }

    #[test]
    fn prediction_error_cases() {
        let perfect = FactorEstimate {
            alpha: 0.001,
            beta: 1.2,
            residual: 0.0,
            kind: EstimateKind::Predicted,
        };
        let r_m = 0.02;
        let r_i = perfect.reconstruct(r_m);
        assert_eq!(prediction_error(&[(r_i, r_m, perfect)]).unwrap(), 0.0);

        // single item: r_i 0.02, reconstructed 0.01 -> (0.01)^2
        let est = FactorEstimate {
            alpha: 0.01,
            beta: 0.0,
            residual: 0.0,
            kind: EstimateKind::Predicted,
        };
        let pe = prediction_error(&[(0.02, 0.0, est)]).unwrap();
        assert!((pe - 1.0e-4).abs() < 1e-18);

        // mixed batch of 3 against a hand-computed sum
        let e1 = FactorEstimate { alpha: 0.0, beta: 1.0, residual: 0.0, kind: EstimateKind::Predicted };
        let e2 = FactorEstimate { alpha: 0.01, beta: 0.5, residual: 0.0, kind: EstimateKind::Historical };
        let e3 = FactorEstimate { alpha: -0.005, beta: 2.0, residual: 0.002, kind: EstimateKind::Target };
        let batch = [(0.03, 0.02, e1), (0.00, 0.04, e2), (0.05, 0.01, e3)];
        let hand = ((0.03 - 0.02f64).powi(2)
            + (0.00 - (0.5 * 0.04 + 0.01f64)).powi(2)
            + (0.05 - (2.0 * 0.01 - 0.005 + 0.002f64)).powi(2))
            / 3.0;
        assert!((prediction_error(&batch).unwrap() - hand).abs() < 1e-18);

        assert!(matches!(prediction_error(&[]), Err(TargetError::EmptyBatch)));
    }
}
