//! Daily price and index-weight panels.
//!
//! Everything downstream works on integer time steps into a shared
//! [`TradingCalendar`], never on raw dates. Panels are immutable after
//! loading; the universe at each step is defined by the weight panel
//! (index membership), while the price panel may cover a superset of
//! instruments.
//!
//! Missing prices stay missing: returns that would need an absent price
//! are reported as absent, never imputed.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;

/// Tolerance for "weights sum to one" at load time.
const WEIGHT_SUM_TOL: f64 = 1e-6;

/// Compact instrument handle; resolves to a ticker through [`Instruments`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InstrumentId(pub u32);

impl InstrumentId {
    #[inline]
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Interner mapping tickers to dense [`InstrumentId`]s.
#[derive(Debug, Clone, Default)]
pub struct Instruments {
    names: Vec<String>,
    by_name: HashMap<String, InstrumentId>,
}

impl Instruments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> InstrumentId {
        if let Some(&id) = self.by_name.get(name) {
            return id;
        }
        let id = InstrumentId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.by_name.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<InstrumentId> {
        self.by_name.get(name).copied()
    }

    pub fn name(&self, id: InstrumentId) -> &str {
        &self.names[id.idx()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = InstrumentId> + '_ {
        (0..self.names.len() as u32).map(InstrumentId)
    }
}

/// Strictly increasing list of trading dates with O(1) date <-> step lookup.
#[derive(Debug, Clone)]
pub struct TradingCalendar {
    dates: Vec<NaiveDate>,
    by_date: HashMap<NaiveDate, usize>,
}

impl TradingCalendar {
    pub fn new(dates: Vec<NaiveDate>) -> Result<Self, DataError> {
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(DataError::CalendarOrder { prev: w[0], next: w[1] });
            }
        }
        let by_date = dates.iter().enumerate().map(|(i, &d)| (d, i)).collect();
        Ok(Self { dates, by_date })
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn date(&self, step: usize) -> NaiveDate {
        self.dates[step]
    }

    pub fn step(&self, date: NaiveDate) -> Option<usize> {
        self.by_date.get(&date).copied()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }
}

/// Per-instrument close prices aligned to the calendar. `None` marks
/// pre-listing / post-delisting gaps; inside the listed span every price
/// is present and positive.
#[derive(Debug, Clone)]
pub struct PricePanel {
    /// `series[instrument][step]`
    series: Vec<Vec<Option<f64>>>,
    n_steps: usize,
}

impl PricePanel {
    pub fn new(series: Vec<Vec<Option<f64>>>, n_steps: usize) -> Self {
        Self { series, n_steps }
    }

    #[inline]
    pub fn price(&self, i: InstrumentId, step: usize) -> Option<f64> {
        if step >= self.n_steps {
            return None;
        }
        self.series.get(i.idx()).and_then(|s| s.get(step).copied().flatten())
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_instruments(&self) -> usize {
        self.series.len()
    }

    /// First and last step with a present price, if any.
    pub fn span(&self, i: InstrumentId) -> Option<(usize, usize)> {
        let s = self.series.get(i.idx())?;
        let first = s.iter().position(|p| p.is_some())?;
        let last = s.iter().rposition(|p| p.is_some())?;
        Some((first, last))
    }
}

/// Index membership per step, plus the market index pseudo-instrument.
#[derive(Debug, Clone)]
pub struct UniverseCalendar {
    /// `members[step]`, each sorted by id.
    members: Vec<Vec<InstrumentId>>,
    index_id: InstrumentId,
}

impl UniverseCalendar {
    pub fn new(members: Vec<Vec<InstrumentId>>, index_id: InstrumentId) -> Self {
        Self { members, index_id }
    }

    pub fn at(&self, step: usize) -> &[InstrumentId] {
        &self.members[step]
    }

    pub fn contains(&self, step: usize, i: InstrumentId) -> bool {
        self.members[step].binary_search(&i).is_ok()
    }

    pub fn index_id(&self) -> InstrumentId {
        self.index_id
    }
}

/// Index constituent weights per step. Support equals the universe; each
/// step's weights are non-negative and renormalized to sum to one exactly.
#[derive(Debug, Clone)]
pub struct IndexWeightPanel {
    /// `weights[step]`, each sorted by instrument id.
    weights: Vec<Vec<(InstrumentId, f64)>>,
}

impl IndexWeightPanel {
    pub fn new(weights: Vec<Vec<(InstrumentId, f64)>>) -> Self {
        Self { weights }
    }

    pub fn at(&self, step: usize) -> &[(InstrumentId, f64)] {
        &self.weights[step]
    }

    pub fn weight(&self, step: usize, i: InstrumentId) -> Option<f64> {
        let row = &self.weights[step];
        row.binary_search_by_key(&i, |&(id, _)| id).ok().map(|k| row[k].1)
    }

    pub fn n_steps(&self) -> usize {
        self.weights.len()
    }
}

/// Everything [`load_panels`] produces, bundled.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub instruments: Instruments,
    pub calendar: TradingCalendar,
    pub prices: PricePanel,
    pub universe: UniverseCalendar,
    pub weights: IndexWeightPanel,
}

impl MarketData {
    pub fn index_id(&self) -> InstrumentId {
        self.universe.index_id()
    }
}

/// Horizon returns computed on demand from a price panel.
///
/// An optional step cap turns the panel into a look-ahead-guarded view:
/// any read past the cap panics, because block arithmetic upstream is
/// supposed to make such reads impossible.
#[derive(Debug, Clone, Copy)]
pub struct ReturnPanel<'a> {
    prices: &'a PricePanel,
    max_step: Option<usize>,
}

impl<'a> ReturnPanel<'a> {
    pub fn new(prices: &'a PricePanel) -> Self {
        Self { prices, max_step: None }
    }

    /// View that refuses to read any price at a step greater than `max_step`.
    pub fn capped(prices: &'a PricePanel, max_step: usize) -> Self {
        Self { prices, max_step: Some(max_step) }
    }

    #[inline]
    fn guarded_price(&self, i: InstrumentId, step: usize) -> Option<f64> {
        if let Some(cap) = self.max_step {
            assert!(
                step <= cap,
                "look-ahead guard: price read at step {step} past cap {cap}"
            );
        }
        self.prices.price(i, step)
    }

    /// `p(i, t+T) / p(i, t) - 1`, or `None` if either endpoint is missing.
    #[inline]
    pub fn try_horizon(&self, i: InstrumentId, t: usize, horizon: usize) -> Option<f64> {
        let start = self.guarded_price(i, t)?;
        let end = self.guarded_price(i, t + horizon)?;
        Some(end / start - 1.0)
    }

    /// Like [`Self::try_horizon`] but reports which endpoint is absent.
    pub fn horizon(&self, i: InstrumentId, t: usize, horizon: usize) -> Result<f64, DataError> {
        let start = self.guarded_price(i, t).ok_or(DataError::AbsentReturn {
            instrument: i,
            step: t,
            endpoint: HorizonEndpoint::Start,
        })?;
        let end = self.guarded_price(i, t + horizon).ok_or(DataError::AbsentReturn {
            instrument: i,
            step: t + horizon,
            endpoint: HorizonEndpoint::End,
        })?;
        Ok(end / start - 1.0)
    }

    /// Daily return realized over `[step-1, step]`.
    #[inline]
    pub fn try_daily(&self, i: InstrumentId, step: usize) -> Option<f64> {
        if step == 0 {
            return None;
        }
        self.try_horizon(i, step - 1, 1)
    }

    pub fn n_steps(&self) -> usize {
        self.prices.n_steps()
    }
}

/// Which end of a horizon return was missing a price.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HorizonEndpoint {
    Start,
    End,
}

impl fmt::Display for HorizonEndpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HorizonEndpoint::Start => write!(f, "start"),
            HorizonEndpoint::End => write!(f, "end"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("non-positive price {value} for {instrument} on {date}")]
    NonPositivePrice { instrument: String, date: NaiveDate, value: f64 },

    #[error("negative weight {value} for {instrument} on {date}")]
    NegativeWeight { instrument: String, date: NaiveDate, value: f64 },

    #[error("weights on {date} sum to {sum} (must be 1 within {WEIGHT_SUM_TOL:e})")]
    WeightSum { date: NaiveDate, sum: f64 },

    #[error("duplicate row for {instrument} on {date}")]
    DuplicateRow { instrument: String, date: NaiveDate },

    #[error("date {date} present in {present} panel but not in {missing} panel")]
    DateMismatch { date: NaiveDate, present: &'static str, missing: &'static str },

    #[error("constituent {instrument} has a weight but no price on {date}")]
    MemberWithoutPrice { instrument: String, date: NaiveDate },

    #[error("price series for {instrument} has a gap at {date} inside its listed span")]
    PriceGap { instrument: String, date: NaiveDate },

    #[error("index pseudo-instrument {index} must not appear in the weights panel")]
    IndexInWeights { index: String },

    #[error("index pseudo-instrument {index} has no price series")]
    IndexWithoutPrices { index: String },

    #[error("calendar dates out of order: {prev} then {next}")]
    CalendarOrder { prev: NaiveDate, next: NaiveDate },

    #[error("missing price for instrument #{} at step {step} ({endpoint} endpoint)", instrument.0)]
    AbsentReturn { instrument: InstrumentId, step: usize, endpoint: HorizonEndpoint },
}

struct RawRow {
    date: NaiveDate,
    instrument: String,
    value: f64,
}

fn read_rows(path: &Path, value_col: &str) -> Result<Vec<RawRow>, DataError> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => DataError::Io {
                path: display.clone(),
                source: std::io::Error::other(e.to_string()),
            },
            _ => DataError::Parse { path: display.clone(), line: 0, msg: e.to_string() },
        })?;

    let headers = reader
        .headers()
        .map_err(|e| DataError::Parse { path: display.clone(), line: 1, msg: e.to_string() })?
        .clone();
    let expected = ["date", "instrument", value_col];
    let actual: Vec<&str> = headers.iter().collect();
    if actual != expected {
        return Err(DataError::Parse {
            path: display,
            line: 1,
            msg: format!("expected header {expected:?}, found {actual:?}"),
        });
    }

    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let line = k as u64 + 2;
        let record = record.map_err(|e| DataError::Parse {
            path: display.clone(),
            line,
            msg: e.to_string(),
        })?;
        if record.len() != 3 {
            return Err(DataError::Parse {
                path: display.clone(),
                line,
                msg: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d").map_err(|e| {
            DataError::Parse { path: display.clone(), line, msg: format!("bad date: {e}") }
        })?;
        let value: f64 = record[2].parse().map_err(|e| DataError::Parse {
            path: display.clone(),
            line,
            msg: format!("bad {value_col}: {e}"),
        })?;
        if !value.is_finite() {
            return Err(DataError::Parse {
                path: display.clone(),
                line,
                msg: format!("non-finite {value_col}: {value}"),
            });
        }
        rows.push(RawRow { date, instrument: record[1].to_string(), value });
    }
    Ok(rows)
}

/// Load and cross-validate the price and weight panels.
///
/// The weight panel is authoritative for universe membership; both panels
/// must cover exactly the same trading dates. `index_id` names the index
/// pseudo-instrument, whose levels live in the price panel.
pub fn load_panels(
    prices_path: &Path,
    weights_path: &Path,
    index_id: &str,
) -> Result<MarketData, DataError> {
    let price_rows = read_rows(prices_path, "close")?;
    let weight_rows = read_rows(weights_path, "weight")?;

    for r in &price_rows {
        if r.value <= 0.0 {
            return Err(DataError::NonPositivePrice {
                instrument: r.instrument.clone(),
                date: r.date,
                value: r.value,
            });
        }
    }
    for r in &weight_rows {
        if r.instrument == index_id {
            return Err(DataError::IndexInWeights { index: index_id.to_string() });
        }
        if r.value < 0.0 {
            return Err(DataError::NegativeWeight {
                instrument: r.instrument.clone(),
                date: r.date,
                value: r.value,
            });
        }
    }

    let mut price_dates: Vec<NaiveDate> = price_rows.iter().map(|r| r.date).collect();
    price_dates.sort_unstable();
    price_dates.dedup();
    let mut weight_dates: Vec<NaiveDate> = weight_rows.iter().map(|r| r.date).collect();
    weight_dates.sort_unstable();
    weight_dates.dedup();

    for d in &price_dates {
        if weight_dates.binary_search(d).is_err() {
            return Err(DataError::DateMismatch { date: *d, present: "price", missing: "weight" });
        }
    }
    for d in &weight_dates {
        if price_dates.binary_search(d).is_err() {
            return Err(DataError::DateMismatch { date: *d, present: "weight", missing: "price" });
        }
    }

    let calendar = TradingCalendar::new(price_dates)?;
    let n_steps = calendar.len();

    let mut instruments = Instruments::new();
    // Intern in first-seen order across both files so ids are stable.
    for r in &price_rows {
        instruments.intern(&r.instrument);
    }
    for r in &weight_rows {
        instruments.intern(&r.instrument);
    }
    let index = instruments
        .get(index_id)
        .ok_or_else(|| DataError::IndexWithoutPrices { index: index_id.to_string() })?;

    let mut series = vec![vec![None; n_steps]; instruments.len()];
    for r in &price_rows {
        let id = instruments.get(&r.instrument).unwrap();
        let step = calendar.step(r.date).unwrap();
        let slot = &mut series[id.idx()][step];
        if slot.is_some() {
            return Err(DataError::DuplicateRow { instrument: r.instrument.clone(), date: r.date });
        }
        *slot = Some(r.value);
    }

    // Contiguity inside each instrument's listed span.
    for id in instruments.ids() {
        let s = &series[id.idx()];
        if let (Some(first), Some(last)) =
            (s.iter().position(Option::is_some), s.iter().rposition(Option::is_some))
        {
            for (step, p) in s.iter().enumerate().take(last + 1).skip(first) {
                if p.is_none() {
                    return Err(DataError::PriceGap {
                        instrument: instruments.name(id).to_string(),
                        date: calendar.date(step),
                    });
                }
            }
        }
    }
    let prices = PricePanel::new(series, n_steps);

    let mut per_step: Vec<Vec<(InstrumentId, f64)>> = vec![Vec::new(); n_steps];
    for r in &weight_rows {
        let id = instruments.get(&r.instrument).unwrap();
        let step = calendar.step(r.date).unwrap();
        if per_step[step].iter().any(|&(existing, _)| existing == id) {
            return Err(DataError::DuplicateRow { instrument: r.instrument.clone(), date: r.date });
        }
        per_step[step].push((id, r.value));
    }

    let mut members = Vec::with_capacity(n_steps);
    for (step, row) in per_step.iter_mut().enumerate() {
        row.sort_unstable_by_key(|&(id, _)| id);
        let sum: f64 = row.iter().map(|&(_, w)| w).sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(DataError::WeightSum { date: calendar.date(step), sum });
        }
        // Renormalize so the in-memory invariant holds exactly.
        for entry in row.iter_mut() {
            entry.1 /= sum;
        }
        for &(id, _) in row.iter() {
            if prices.price(id, step).is_none() {
                return Err(DataError::MemberWithoutPrice {
                    instrument: instruments.name(id).to_string(),
                    date: calendar.date(step),
                });
            }
        }
        members.push(row.iter().map(|&(id, _)| id).collect());
    }

    Ok(MarketData {
        universe: UniverseCalendar::new(members, index),
        weights: IndexWeightPanel::new(per_step),
        instruments,
        calendar,
        prices,
    })
}

/// Write the price panel back out in the `date,instrument,close` format.
/// Floats use shortest round-trip formatting, so reloading reproduces the
/// in-memory values bitwise.
pub fn write_prices_csv<W: Write>(
    mut out: W,
    data: &MarketData,
) -> std::io::Result<()> {
    writeln!(out, "date,instrument,close")?;
    for step in 0..data.calendar.len() {
        let date = data.calendar.date(step);
        for id in data.instruments.ids() {
            if let Some(p) = data.prices.price(id, step) {
                writeln!(out, "{date},{},{p}", data.instruments.name(id))?;
            }
        }
    }
    Ok(())
}

/// Write the weight panel back out in the `date,instrument,weight` format.
pub fn write_weights_csv<W: Write>(mut out: W, data: &MarketData) -> std::io::Result<()> {
    writeln!(out, "date,instrument,weight")?;
    for step in 0..data.calendar.len() {
        let date = data.calendar.date(step);
        for &(id, w) in data.weights.at(step) {
            writeln!(out, "{date},{},{w}", data.instruments.name(id))?;
        }
    }
    Ok(())
}
