//! Synthetic single-factor market with known time-varying coefficients.
//!
//! The index return path is exogenous. Instrument daily returns follow the
//! factor model against that path with mean-reverting per-instrument alpha
//! and beta processes, and the few largest constituents absorb the daily
//! aggregation wedge so the cap-weighted basket reproduces the index return
//! exactly. That keeps two things true at once: the index is a genuine
//! weight-inner-product of its constituents, and the recorded coefficients
//! are the exact daily generating coefficients for every non-absorbing
//! instrument.
//!
//! All randomness is a pure function of (seed, stream, step, slot), so any
//! cell is reproducible in isolation and generation parallelizes without
//! changing output.

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use crate::market_data::{
    IndexWeightPanel, InstrumentId, Instruments, MarketData, PricePanel, TradingCalendar,
    UniverseCalendar,
};

/// Mean-reverting recursion parameters: x' = x + kappa * (mu - x) + shock.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct MeanRevertingSpec {
    pub kappa: f64,
    pub shock_std: f64,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SynthConfig {
    pub n_instruments: usize,
    pub n_days: usize,
    /// First trading date; the calendar then skips weekends.
    pub start_date: NaiveDate,
    pub index_id: String,

    /// Beta process; long-run means drawn uniformly from `beta_mu_range`.
    pub beta: MeanRevertingSpec,
    pub beta_mu_range: (f64, f64),

    /// Alpha process (same form, smaller scale); long-run means drawn
    /// normally with stdev `alpha_mu_std`.
    pub alpha: MeanRevertingSpec,
    pub alpha_mu_std: f64,

    /// Index daily-return drift and volatility.
    pub index_drift: f64,
    pub index_vol: f64,
    /// Idiosyncratic daily noise stdev.
    pub idio_vol: f64,

    /// Share counts decay geometrically by this ratio, so initial index
    /// weights span several decades like a cap-weighted benchmark.
    pub cap_decay: f64,
    /// How many of the largest constituents share the daily basket wedge.
    pub n_absorbers: usize,

    /// Horizon (in steps) of the recorded ground-truth coefficients.
    pub horizon: usize,

    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_instruments: 200,
            n_days: 2400,
            start_date: NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(),
            index_id: "INDEX".to_string(),
            beta: MeanRevertingSpec { kappa: 0.03, shock_std: 0.02 },
            beta_mu_range: (0.5, 1.5),
            alpha: MeanRevertingSpec { kappa: 0.03, shock_std: 1.0e-3 },
            alpha_mu_std: 5.0e-4,
            index_drift: 2.0e-4,
            index_vol: 0.015,
            idio_vol: 0.01,
            cap_decay: 0.94,
            n_absorbers: 10,
            horizon: 21,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_instruments == 0 || self.n_days < 2 {
            return Err("need at least one instrument and two days".into());
        }
        for (name, k) in [("beta", self.beta.kappa), ("alpha", self.alpha.kappa)] {
            if !(k > 0.0 && k <= 1.0) {
                return Err(format!("{name} kappa must lie in (0, 1], got {k}"));
            }
        }
        for (name, s) in [
            ("beta shock", self.beta.shock_std),
            ("alpha shock", self.alpha.shock_std),
            ("alpha mu", self.alpha_mu_std),
            ("index vol", self.index_vol),
            ("idio vol", self.idio_vol),
        ] {
            if s < 0.0 {
                return Err(format!("{name} stdev must be >= 0, got {s}"));
            }
        }
        if !(self.cap_decay > 0.0 && self.cap_decay <= 1.0) {
            return Err(format!("cap_decay must lie in (0, 1], got {}", self.cap_decay));
        }
        if self.horizon == 0 || self.horizon >= self.n_days {
            return Err("horizon must be positive and smaller than n_days".into());
        }
        Ok(())
    }
}

/// Exact horizon-coefficient panel: for each (instrument, step) the horizon
/// beta is the mean of the daily betas over the horizon, the horizon alpha
/// is the sum of the daily alphas, and the residual closes the factor
/// equation exactly against the realized returns.
#[derive(Debug, Clone)]
pub struct TruthPanel {
    pub horizon: usize,
    /// `coeffs[instrument][step]` for steps where the horizon fits.
    pub coeffs: Vec<Vec<TruthPoint>>,
}

#[derive(Debug, Clone, Copy)]
pub struct TruthPoint {
    pub alpha: f64,
    pub beta: f64,
    pub residual: f64,
}

impl TruthPanel {
    pub fn at(&self, i: InstrumentId, step: usize) -> Option<TruthPoint> {
        self.coeffs.get(i.idx()).and_then(|v| v.get(step)).copied()
    }
}

/// Counter-based Gaussian source: value = f(seed, stream, step, slot).
#[derive(Debug, Clone, Copy)]
pub struct CellRng {
    seed: u64,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl CellRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    #[inline]
    fn raw(&self, stream: u64, step: u64, slot: u64) -> u64 {
        let mut z = self.seed ^ GOLDEN;
        z = mix(z.wrapping_add(GOLDEN.wrapping_mul(stream.wrapping_add(1))));
        z = mix(z.wrapping_add(GOLDEN.wrapping_mul(step.wrapping_add(1))));
        z = mix(z.wrapping_add(GOLDEN.wrapping_mul(slot.wrapping_add(1))));
        z
    }

    /// Uniform in (0, 1].
    #[inline]
    pub fn uniform(&self, stream: u64, step: u64, slot: u64) -> f64 {
        (((self.raw(stream, step, slot) >> 11) + 1) as f64) / ((1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on two counter cells.
    #[inline]
    pub fn normal(&self, stream: u64, step: u64, slot: u64) -> f64 {
        let u1 = self.uniform(stream, step, slot * 2);
        let u2 = self.uniform(stream, step, slot * 2 + 1);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

const STREAM_MARKET: u64 = u64::MAX;
const STEP_STATIC: u64 = u64::MAX;
const SLOT_BETA: u64 = 0;
const SLOT_ALPHA: u64 = 1;
const SLOT_IDIO: u64 = 2;
const SLOT_BETA_MU: u64 = 0;
const SLOT_ALPHA_MU: u64 = 1;

/// Weekday calendar of `n` dates starting at `start`.
fn trading_dates(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut dates = Vec::with_capacity(n);
    let mut d = start;
    while dates.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            dates.push(d);
        }
        d += Duration::days(1);
    }
    dates
}

/// Generate the market and its ground-truth coefficient panel.
pub fn generate(cfg: &SynthConfig) -> (MarketData, TruthPanel) {
    cfg.validate().expect("invalid synthetic market config");
    let n = cfg.n_instruments;
    let days = cfg.n_days;
    let rng = CellRng::new(cfg.seed);

    let mut instruments = Instruments::new();
    let index = instruments.intern(&cfg.index_id);
    let width = (n.max(2) as f64).log10().ceil() as usize;
    let ids: Vec<InstrumentId> =
        (0..n).map(|k| instruments.intern(&format!("S{k:0width$}"))).collect();

    // Long-run means per instrument.
    let (mu_lo, mu_hi) = cfg.beta_mu_range;
    let beta_mu: Vec<f64> = (0..n)
        .map(|k| mu_lo + (mu_hi - mu_lo) * rng.uniform(k as u64, STEP_STATIC, SLOT_BETA_MU))
        .collect();
    let alpha_mu: Vec<f64> = (0..n)
        .map(|k| cfg.alpha_mu_std * rng.normal(k as u64, STEP_STATIC, SLOT_ALPHA_MU))
        .collect();

    // Fixed share counts; prices start at 100, so initial caps decay
    // geometrically from the first instrument down.
    let shares: Vec<f64> = (0..n).map(|k| cfg.cap_decay.powi(k as i32)).collect();

    let mut beta: Vec<f64> = beta_mu.clone();
    let mut alpha: Vec<f64> = alpha_mu.clone();
    let mut price: Vec<f64> = vec![100.0; n];
    let mut index_price = 100.0;

    let mut price_series: Vec<Vec<Option<f64>>> = vec![Vec::with_capacity(days); n + 1];
    price_series[index.idx()].push(Some(index_price));
    for (k, &p) in price.iter().enumerate() {
        price_series[ids[k].idx()].push(Some(p));
    }

    let mut weight_rows: Vec<Vec<(InstrumentId, f64)>> = Vec::with_capacity(days);
    let cap_weights = |price: &[f64]| -> Vec<f64> {
        let caps: Vec<f64> = price.iter().zip(&shares).map(|(p, s)| p * s).collect();
        let total: f64 = caps.iter().sum();
        caps.into_iter().map(|c| c / total).collect()
    };
    let mut weights = cap_weights(&price);
    weight_rows.push(ids.iter().copied().zip(weights.iter().copied()).collect());

    let mut daily_alpha: Vec<Vec<f64>> = vec![vec![0.0; days]; n];
    let mut daily_beta: Vec<Vec<f64>> = vec![vec![0.0; days]; n];
    for k in 0..n {
        daily_alpha[k][0] = alpha[k];
        daily_beta[k][0] = beta[k];
    }

    for d in 1..days {
        let step = d as u64;
        let f = cfg.index_drift + cfg.index_vol * rng.normal(STREAM_MARKET, step, 0);

        let mut returns = vec![0.0; n];
        for k in 0..n {
            beta[k] += cfg.beta.kappa * (beta_mu[k] - beta[k])
                + cfg.beta.shock_std * rng.normal(k as u64, step, SLOT_BETA);
            alpha[k] += cfg.alpha.kappa * (alpha_mu[k] - alpha[k])
                + cfg.alpha.shock_std * rng.normal(k as u64, step, SLOT_ALPHA);
            daily_beta[k][d] = beta[k];
            daily_alpha[k][d] = alpha[k];
            returns[k] = alpha[k] + beta[k] * f + cfg.idio_vol * rng.normal(k as u64, step, SLOT_IDIO);
        }

        // The largest constituents absorb the wedge between the factor
        // return and the cap-weighted basket of raw returns.
        let basket: f64 = weights.iter().zip(&returns).map(|(w, r)| w * r).sum();
        let wedge = f - basket;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        let absorbers = &order[..cfg.n_absorbers.min(n)];
        let absorber_weight: f64 = absorbers.iter().map(|&k| weights[k]).sum();
        let correction = wedge / absorber_weight;
        for &k in absorbers {
            returns[k] += correction;
        }

        for k in 0..n {
            returns[k] = returns[k].max(-0.95);
            price[k] *= 1.0 + returns[k];
            price_series[ids[k].idx()].push(Some(price[k]));
        }
        index_price *= 1.0 + f;
        price_series[index.idx()].push(Some(index_price));

        weights = cap_weights(&price);
        weight_rows.push(ids.iter().copied().zip(weights.iter().copied()).collect());
    }

    let calendar = TradingCalendar::new(trading_dates(cfg.start_date, days)).unwrap();
    let prices = PricePanel::new(price_series, days);
    let members: Vec<Vec<InstrumentId>> = (0..days).map(|_| ids.clone()).collect();
    let universe = UniverseCalendar::new(members, index);
    let weight_panel = IndexWeightPanel::new(weight_rows);

    let data = MarketData {
        instruments,
        calendar,
        prices,
        universe,
        weights: weight_panel,
    };

    // Exact horizon ground truth from the daily coefficient paths.
    let horizon = cfg.horizon;
    let returns = crate::market_data::ReturnPanel::new(&data.prices);
    let mut coeffs = vec![Vec::new(); n + 1];
    for k in 0..n {
        let id = ids[k];
        let mut points = Vec::with_capacity(days.saturating_sub(horizon));
        for t in 0..days - horizon {
            let beta_sum: f64 = daily_beta[k][t + 1..=t + horizon].iter().sum();
            let beta_h = beta_sum / horizon as f64;
            let alpha_h: f64 = daily_alpha[k][t + 1..=t + horizon].iter().sum();
            let r_i = returns.try_horizon(id, t, horizon).unwrap();
            let r_m = returns.try_horizon(index, t, horizon).unwrap();
            points.push(TruthPoint {
                alpha: alpha_h,
                beta: beta_h,
                residual: r_i - alpha_h - beta_h * r_m,
            });
        }
        coeffs[id.idx()] = points;
    }

    (data, TruthPanel { horizon, coeffs })
}

/// Write the truth panel in `date,instrument,alpha,beta,residual` form.
pub fn write_truth_csv<W: std::io::Write>(
    mut out: W,
    data: &MarketData,
    truth: &TruthPanel,
) -> std::io::Result<()> {
    writeln!(out, "date,instrument,alpha,beta,residual")?;
    for id in data.instruments.ids() {
        if id == data.index_id() {
            continue;
        }
        let points = &truth.coeffs[id.idx()];
        for (t, p) in points.iter().enumerate() {
            writeln!(
                out,
                "{},{},{},{},{}",
                data.calendar.date(t),
                data.instruments.name(id),
                p.alpha,
                p.beta,
                p.residual
            )?;
        }
    }
    Ok(())
}
