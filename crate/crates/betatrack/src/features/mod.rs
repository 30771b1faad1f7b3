//! Input tensors of rolling regression statistics.
//!
//! A tensor cell is one statistic (regression intercept/slope, excess-return
//! mean/stdev, market mean/stdev) computed over one window of daily returns.
//! The grid axes are the window end-date offset `tau` (rows) and the window
//! length (columns); all six statistics share the same grid.
//!
//! Construction for end date `t-1` touches only prices at steps `<= t-1`;
//! cells whose window is not fully covered by history make the whole tensor
//! unavailable rather than producing NaN.

pub mod cdf;

use crate::market_data::{InstrumentId, PricePanel, ReturnPanel};

pub const FEATURE_KIND_COUNT: usize = 6;

/// The six per-window statistics, in tensor order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    /// OLS intercept of instrument daily returns on market daily returns.
    Intercept,
    /// OLS slope of the same regression.
    Slope,
    /// Mean of the instrument's excess daily returns (instrument - market).
    ExcessMean,
    /// Sample stdev of the excess daily returns.
    ExcessStd,
    /// Mean of the market's daily returns.
    MarketMean,
    /// Sample stdev of the market's daily returns.
    MarketStd,
}

pub const FEATURE_KINDS: [FeatureKind; FEATURE_KIND_COUNT] = [
    FeatureKind::Intercept,
    FeatureKind::Slope,
    FeatureKind::ExcessMean,
    FeatureKind::ExcessStd,
    FeatureKind::MarketMean,
    FeatureKind::MarketStd,
];

/// Grid geometry: which window end dates and window lengths to compute.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureGridSpec {
    /// End-date offsets `tau` back from the build date; `tau = 1` means the
    /// window ends at the build date itself.
    pub tau_offsets: Vec<usize>,
    /// Estimation window lengths in steps.
    pub window_lengths: Vec<usize>,
}

impl FeatureGridSpec {
    pub fn new(tau_offsets: Vec<usize>, window_lengths: Vec<usize>) -> Result<Self, FeatureError> {
        if tau_offsets.is_empty() || window_lengths.is_empty() {
            return Err(FeatureError::EmptyGrid);
        }
        if tau_offsets[0] < 1 || !tau_offsets.windows(2).all(|w| w[0] < w[1]) {
            return Err(FeatureError::BadOffsets);
        }
        if window_lengths[0] < 2 || !window_lengths.windows(2).all(|w| w[0] < w[1]) {
            return Err(FeatureError::BadWindows);
        }
        Ok(Self { tau_offsets, window_lengths })
    }

    /// One-week end-date steps across a month, one-month-to-one-year windows.
    pub fn default_grid() -> Self {
        Self::new(vec![1, 6, 11, 16, 21], vec![21, 63, 126, 252]).unwrap()
    }

    pub fn n_rows(&self) -> usize {
        self.tau_offsets.len()
    }

    pub fn n_cols(&self) -> usize {
        self.window_lengths.len()
    }

    /// Flattened tensor length: kinds x rows x cols.
    pub fn n_cells(&self) -> usize {
        FEATURE_KIND_COUNT * self.n_rows() * self.n_cols()
    }

    #[inline]
    pub fn cell_index(&self, kind: usize, row: usize, col: usize) -> usize {
        (kind * self.n_rows() + row) * self.n_cols() + col
    }

    /// Steps of history needed before a build date: the deepest window must
    /// fit, and its first daily return needs the prior day's price.
    pub fn history_depth(&self) -> usize {
        self.tau_offsets.last().unwrap() + self.window_lengths.last().unwrap()
    }
}

/// Flattened kinds x rows x cols grid of statistics for one
/// (instrument, build date) pair. Every entry is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    values: Vec<f64>,
}

impl FeatureTensor {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[cfg(test)]
    pub(crate) fn from_values_for_tests(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn get(&self, spec: &FeatureGridSpec, kind: usize, row: usize, col: usize) -> f64 {
        self.values[spec.cell_index(kind, row, col)]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("feature grid must have at least one offset and one window length")]
    EmptyGrid,

    #[error("tau offsets must be >= 1 and strictly increasing")]
    BadOffsets,

    #[error("window lengths must be >= 2 and strictly increasing")]
    BadWindows,

    #[error("insufficient history for instrument #{} at build step {step}: window of {window} daily returns ending at offset {tau} not covered", instrument.0)]
    InsufficientHistory { instrument: InstrumentId, step: usize, tau: usize, window: usize },
}

/// Prefix sums of one instrument's daily returns against the market's.
///
/// `prefix[k]` aggregates daily-return steps `< k`, so a window sum is one
/// subtraction and never depends on data at or after the window's end.
struct PrefixSums {
    /// sum of instrument daily returns
    sy: Vec<f64>,
    /// sum of squared instrument daily returns
    syy: Vec<f64>,
    /// sum of instrument * market daily returns
    sxy: Vec<f64>,
    /// count of steps where both returns are present
    both: Vec<u32>,
}

fn instrument_prefix(returns: &ReturnPanel<'_>, index: InstrumentId, i: InstrumentId) -> PrefixSums {
    let n = returns.n_steps();
    let mut sy = Vec::with_capacity(n + 1);
    let mut syy = Vec::with_capacity(n + 1);
    let mut sxy = Vec::with_capacity(n + 1);
    let mut both = Vec::with_capacity(n + 1);
    sy.push(0.0);
    syy.push(0.0);
    sxy.push(0.0);
    both.push(0);
    for s in 0..n {
        let y = returns.try_daily(i, s);
        let x = returns.try_daily(index, s);
        let (dy, dyy, dxy, db) = match (x, y) {
            (Some(x), Some(y)) => (y, y * y, x * y, 1),
            _ => (0.0, 0.0, 0.0, 0),
        };
        sy.push(sy[s] + dy);
        syy.push(syy[s] + dyy);
        sxy.push(sxy[s] + dxy);
        both.push(both[s] + db);
    }
    PrefixSums { sy, syy, sxy, both }
}

struct MarketPrefix {
    sx: Vec<f64>,
    sxx: Vec<f64>,
    present: Vec<u32>,
}

fn market_prefix(returns: &ReturnPanel<'_>, index: InstrumentId) -> MarketPrefix {
    let n = returns.n_steps();
    let mut sx = Vec::with_capacity(n + 1);
    let mut sxx = Vec::with_capacity(n + 1);
    let mut present = Vec::with_capacity(n + 1);
    sx.push(0.0);
    sxx.push(0.0);
    present.push(0);
    for s in 0..n {
        let (dx, dxx, dp) = match returns.try_daily(index, s) {
            Some(x) => (x, x * x, 1),
            None => (0.0, 0.0, 0),
        };
        sx.push(sx[s] + dx);
        sxx.push(sxx[s] + dxx);
        present.push(present[s] + dp);
    }
    MarketPrefix { sx, sxx, present }
}

/// Reusable tensor builder over one immutable price panel.
///
/// Per-instrument prefix sums are computed once (in parallel) and shared by
/// every subsequent build, so one tensor costs O(grid cells).
pub struct TensorBuilder<'a> {
    index: InstrumentId,
    spec: FeatureGridSpec,
    market: MarketPrefix,
    per_instrument: Vec<Option<PrefixSums>>,
    _prices: std::marker::PhantomData<&'a PricePanel>,
}

impl<'a> TensorBuilder<'a> {
    pub fn new(
        prices: &'a PricePanel,
        index: InstrumentId,
        spec: FeatureGridSpec,
        instruments: &[InstrumentId],
    ) -> Self {
        use rayon::prelude::*;
        let returns = ReturnPanel::new(prices);
        let market = market_prefix(&returns, index);
        let mut per_instrument: Vec<Option<PrefixSums>> = Vec::new();
        let max_idx = instruments.iter().map(|i| i.idx()).max().map_or(0, |m| m + 1);
        per_instrument.resize_with(max_idx, || None);
        let computed: Vec<(usize, PrefixSums)> = instruments
            .par_iter()
            .map(|&i| (i.idx(), instrument_prefix(&returns, index, i)))
            .collect();
        for (idx, sums) in computed {
            per_instrument[idx] = Some(sums);
        }
        Self { index, spec, market, per_instrument, _prices: std::marker::PhantomData }
    }

    pub fn spec(&self) -> &FeatureGridSpec {
        &self.spec
    }

    pub fn index_id(&self) -> InstrumentId {
        self.index
    }

    /// Build the tensor for instrument `i` with windows ending no later than
    /// `build_step` (the `t-1` of a record at `t`).
    pub fn build(&self, i: InstrumentId, build_step: usize) -> Result<FeatureTensor, FeatureError> {
        let sums = self
            .per_instrument
            .get(i.idx())
            .and_then(Option::as_ref)
            .unwrap_or_else(|| panic!("instrument #{} not registered with TensorBuilder", i.0));
        let spec = &self.spec;
        let mut values = vec![0.0; spec.n_cells()];

        for (row, &tau) in spec.tau_offsets.iter().enumerate() {
            for (col, &win) in spec.window_lengths.iter().enumerate() {
                // Daily-return steps (build_step + 1 - tau - win, build_step + 1 - tau].
                let hi = build_step + 1 - tau; // inclusive; tau >= 1 keeps hi <= build_step
                let missing = || FeatureError::InsufficientHistory {
                    instrument: i,
                    step: build_step,
                    tau,
                    window: win,
                };
                if build_step + 1 < tau || hi < win {
                    return Err(missing());
                }
                let lo = hi - win + 1;
                if lo < 1 {
                    // a daily return at step 0 would need the price at step -1
                    return Err(missing());
                }
                let n = win as f64;
                let a = lo;
                let b = hi + 1;
                if sums.both[b] - sums.both[a] != win as u32
                    || self.market.present[b] - self.market.present[a] != win as u32
                {
                    return Err(missing());
                }
                let sx = self.market.sx[b] - self.market.sx[a];
                let sxx = self.market.sxx[b] - self.market.sxx[a];
                let sy = sums.sy[b] - sums.sy[a];
                let syy = sums.syy[b] - sums.syy[a];
                let sxy = sums.sxy[b] - sums.sxy[a];

                let (intercept, slope) = ols_from_sums(n, sx, sxx, sy, sxy);
                // excess = instrument - market, derived from the same sums
                let se = sy - sx;
                let see = syy - 2.0 * sxy + sxx;
                let excess_mean = se / n;
                let excess_std = sample_std(n, se, see);
                let market_mean = sx / n;
                let market_std = sample_std(n, sx, sxx);

                values[spec.cell_index(0, row, col)] = intercept;
                values[spec.cell_index(1, row, col)] = slope;
                values[spec.cell_index(2, row, col)] = excess_mean;
                values[spec.cell_index(3, row, col)] = excess_std;
                values[spec.cell_index(4, row, col)] = market_mean;
                values[spec.cell_index(5, row, col)] = market_std;
            }
        }
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Ok(FeatureTensor { values })
    }
}

/// OLS of y on x from raw sums. A window with (numerically) zero regressor
/// variance falls back to the minimum-norm solution: slope 0, intercept
/// mean(y).
#[inline]
fn ols_from_sums(n: f64, sx: f64, sxx: f64, sy: f64, sxy: f64) -> (f64, f64) {
    let denom = n * sxx - sx * sx;
    if denom <= 1e-10 * n * sxx.abs() {
        return (sy / n, 0.0);
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (intercept, slope)
}

/// Sample standard deviation from raw sums. Variance that is zero up to
/// cancellation noise (relative to the mean square) collapses to exactly 0.
#[inline]
fn sample_std(n: f64, s: f64, ss: f64) -> f64 {
    let var = (ss - s * s / n) / (n - 1.0);
    if var <= 1e-10 * ss / (n - 1.0) {
        return 0.0;
    }
    var.sqrt()
}
