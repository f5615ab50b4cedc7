//! Daily demand: discretized Gamma distributions, sampling, transaction-file
//! ingestion and the calendar/history features used by the forecaster.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEMAND: u32 = 10;
pub const DEFAULT_WINDOW: usize = 7;

/// How a continuous density is cut into integer demand classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Binning {
    /// Class `i` collects `[i - 0.5, i + 0.5)`.
    #[default]
    Center,
    /// Class `i` collects `[i, i + 1)`.
    Floor,
}

/// Probability mass over integer demand `0..=max_demand`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandDistribution {
    pmf: Vec<f64>,
}

impl DemandDistribution {
    pub fn new(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::domain("a demand pmf needs at least one class"));
        }
        if pmf.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::domain("pmf entries must be finite and non-negative"));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("pmf sums to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    /// All mass on `demand`.
    pub fn point_mass(demand: u32, max_demand: u32) -> Result<Self> {
        if demand > max_demand {
            return Err(Error::domain(format!(
                "demand {demand} is outside 0..={max_demand}"
            )));
        }
        let mut pmf = vec![0.0; max_demand as usize + 1];
        pmf[demand as usize] = 1.0;
        Ok(Self { pmf })
    }

    /// Moment-matched Gamma (shape `mean²/variance`, scale `variance/mean`)
    /// binned onto `0..=max_demand` with centred bins.
    pub fn discretized_gamma(mean: f64, variance: f64, max_demand: u32) -> Result<Self> {
        Self::discretized_gamma_with(mean, variance, max_demand, Binning::Center)
    }

    /// As [`discretized_gamma`](Self::discretized_gamma) with an explicit binning rule.
    /// Mass below the first bin goes to class 0 and the upper tail goes to
    /// class `max_demand`.
    pub fn discretized_gamma_with(
        mean: f64,
        variance: f64,
        max_demand: u32,
        binning: Binning,
    ) -> Result<Self> {
        if !(mean > 0.0 && mean.is_finite()) || !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::domain(format!(
                "gamma demand needs positive mean and variance, got ({mean}, {variance})"
            )));
        }
        let (shape, scale) = gamma_shape_scale(mean, variance);
        let gamma = Gamma::new(shape, 1.0 / scale)
            .map_err(|e| Error::domain(format!("gamma({shape}, {scale}): {e}")))?;
        let offset = match binning {
            Binning::Center => 0.5,
            Binning::Floor => 1.0,
        };
        let n = max_demand as usize;
        let mut pmf = Vec::with_capacity(n + 1);
        let mut lower_cdf = 0.0;
        for i in 0..n {
            let upper = gamma.cdf(i as f64 + offset);
            pmf.push((upper - lower_cdf).max(0.0));
            lower_cdf = upper;
        }
        pmf.push((1.0 - lower_cdf).max(0.0));
        let total: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= total);
        Ok(Self { pmf })
    }

    /// Empirical frequencies of `samples`; values above `max_demand` are an error.
    pub fn empirical(samples: &[u32], max_demand: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::domain("no samples"));
        }
        let mut counts = vec![0usize; max_demand as usize + 1];
        for &d in samples {
            let slot = counts
                .get_mut(d as usize)
                .ok_or_else(|| Error::domain(format!("sample {d} exceeds {max_demand}")))?;
            *slot += 1;
        }
        let n = samples.len() as f64;
        Ok(Self {
            pmf: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, demand: u32) -> f64 {
        self.pmf.get(demand as usize).copied().unwrap_or(0.0)
    }

    pub fn max_demand(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(i, p)| i as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, p)| (i as f64 - m).powi(2) * p)
            .sum()
    }

    /// Inverse-CDF draw using one uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        sample_index(&self.pmf, rng) as u32
    }

    /// Total-variation distance; shorter pmfs are padded with zeros.
    pub fn total_variation(&self, other: &DemandDistribution) -> f64 {
        total_variation(&self.pmf, &other.pmf)
    }
}

pub fn gamma_shape_scale(mean: f64, variance: f64) -> (f64, f64) {
    (mean * mean / variance, variance / mean)
}

pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum a hair below 1; take the last class
    // that carries mass.
    weights
        .iter()
        .rposition(|w| *w > 0.0)
        .unwrap_or(weights.len() - 1)
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    let n = p.len().max(q.len());
    0.5 * (0..n)
        .map(|i| (p.get(i).unwrap_or(&0.0) - q.get(i).unwrap_or(&0.0)).abs())
        .sum::<f64>()
}

/// Daily demand on consecutive calendar days.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DemandSeries {
    dates: Vec<NaiveDate>,
    quantities: Vec<u32>,
}

impl DemandSeries {
    /// A series starting at `start` with one entry per day.
    pub fn from_start(start: NaiveDate, quantities: Vec<u32>) -> Self {
        let dates = (0..quantities.len() as u64)
            .map(|i| start + Days::new(i))
            .collect();
        Self { dates, quantities }
    }

    pub fn new(dates: Vec<NaiveDate>, quantities: Vec<u32>) -> Result<Self> {
        if dates.len() != quantities.len() {
            return Err(Error::Dimension {
                expected: dates.len(),
                actual: quantities.len(),
            });
        }
        for pair in dates.windows(2) {
            if pair[0].succ_opt() != Some(pair[1]) {
                return Err(Error::domain(format!(
                    "dates must be consecutive days, found {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(Self { dates, quantities })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn quantities(&self) -> &[u32] {
        &self.quantities
    }

    pub fn len(&self) -> usize {
        self.quantities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantities.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.quantities.iter().map(|&q| f64::from(q)).sum::<f64>() / self.len() as f64
    }

    pub fn max(&self) -> u32 {
        self.quantities.iter().copied().max().unwrap_or(0)
    }

    pub fn end_date(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }
}

/// Column layout of a delimited transaction file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransactionFormat {
    pub delimiter: char,
    pub date_column: String,
    pub product_column: String,
    pub quantity_column: String,
}

impl Default for TransactionFormat {
    fn default() -> Self {
        Self {
            delimiter: ',',
            date_column: "date".into(),
            product_column: "article".into(),
            quantity_column: "Quantity".into(),
        }
    }
}

impl TransactionFormat {
    fn delimiter_byte(&self) -> Result<u8> {
        u8::try_from(self.delimiter)
            .ok()
            .filter(u8::is_ascii)
            .ok_or_else(|| Error::Config(format!("delimiter {:?} is not ASCII", self.delimiter)))
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    // Accept timestamps by reading only the leading ISO-8601 date.
    let head = raw.get(..10).unwrap_or(raw);
    NaiveDate::parse_from_str(head, "%Y-%m-%d").ok()
}

/// Reads transactions, keeps rows for `product` (case-insensitive), sums
/// quantities per day and zero-fills missing days.
///
/// With `date_range` the series spans exactly that inclusive range;
/// otherwise it spans the first to the last matching day. Refund rows
/// (negative quantities) are netted; a day never goes below zero.
pub fn load_transactions(
    path: impl AsRef<Path>,
    product: &str,
    date_range: Option<(NaiveDate, NaiveDate)>,
    format: &TransactionFormat,
) -> Result<DemandSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(format.delimiter_byte()?)
        .flexible(true)
        .from_reader(file);

    let parse_err = |row: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        row,
        message,
    };
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let date_col = column(&format.date_column)?;
    let product_col = column(&format.product_column)?;
    let qty_col = column(&format.quantity_column)?;

    let wanted = product.trim().to_lowercase();
    let mut daily: BTreeMap<NaiveDate, f64> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_err(line, e.to_string()))?;
        let field = |idx: usize| {
            record
                .get(idx)
                .ok_or_else(|| parse_err(line, format!("missing field {idx}")))
        };
        if field(product_col)?.trim().to_lowercase() != wanted {
            continue;
        }
        let raw_date = field(date_col)?;
        let date = parse_date(raw_date)
            .ok_or_else(|| parse_err(line, format!("unparseable date {raw_date:?}")))?;
        if let Some((from, to)) = date_range {
            if date < from || date > to {
                continue;
            }
        }
        let raw_qty = field(qty_col)?.trim();
        let qty: f64 = raw_qty
            .parse()
            .ok()
            .filter(|q: &f64| q.is_finite() && q.fract() == 0.0)
            .ok_or_else(|| parse_err(line, format!("unparseable quantity {raw_qty:?}")))?;
        *daily.entry(date).or_insert(0.0) += qty;
    }

    let (first, last) = match (date_range, daily.keys().next(), daily.keys().next_back()) {
        (_, None, _) | (_, _, None) => {
            return Err(Error::EmptyResult {
                product: product.to_string(),
                path: path.to_path_buf(),
            })
        }
        (Some((from, to)), _, _) => (from, to),
        (None, Some(&a), Some(&b)) => (a, b),
    };
    let mut quantities = Vec::new();
    let mut day = first;
    while day <= last {
        let q = daily.get(&day).copied().unwrap_or(0.0).max(0.0);
        quantities.push(q as u32);
        day = day
            .succ_opt()
            .ok_or_else(|| Error::domain("date range overflows the calendar"))?;
    }
    Ok(DemandSeries::from_start(first, quantities))
}

/// Writes one row per day in the layout [`load_transactions`] reads.
pub fn write_transactions(
    path: impl AsRef<Path>,
    series: &DemandSeries,
    product: &str,
    format: &TransactionFormat,
) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .delimiter(format.delimiter_byte()?)
        .from_path(path)
        .map_err(|e| Error::io(path, csv_io(e)))?;
    let io = |e: csv::Error| Error::io(path, csv_io(e));
    writer
        .write_record([
            format.date_column.as_str(),
            format.product_column.as_str(),
            format.quantity_column.as_str(),
        ])
        .map_err(io)?;
    for (date, q) in series.dates.iter().zip(&series.quantities) {
        writer
            .write_record([
                date.format("%Y-%m-%d").to_string(),
                product.to_string(),
                q.to_string(),
            ])
            .map_err(io)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

/// Forecaster inputs for one target day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    /// Lagged demands, most recent first, followed by their mean.
    pub numeric: Vec<f64>,
    /// Day-of-week one-hot (Mon..Sun), weekend flag, ISO week / 53, then
    /// sin/cos of day-in-month and sin/cos of day-in-year.
    pub calendar: Vec<f64>,
}

pub const CALENDAR_FEATURES: usize = 7 + 1 + 1 + 2 + 2;

impl FeatureVector {
    pub fn dimension(window: usize) -> usize {
        window + 1 + CALENDAR_FEATURES
    }

    /// Builds features from the `window` demands preceding the target day
    /// (oldest first) and the calendar date of the day before the target.
    pub fn from_recent(recent: &[u32], previous_day: NaiveDate) -> Self {
        let mut numeric: Vec<f64> = recent.iter().rev().map(|&d| f64::from(d)).collect();
        let mean = if recent.is_empty() {
            0.0
        } else {
            numeric.iter().sum::<f64>() / recent.len() as f64
        };
        numeric.push(mean);
        Self {
            numeric,
            calendar: calendar_features(previous_day),
        }
    }

    pub fn concat(&self) -> Vec<f64> {
        let mut v = self.numeric.clone();
        v.extend_from_slice(&self.calendar);
        v
    }
}

pub fn calendar_features(date: NaiveDate) -> Vec<f64> {
    let mut v = vec![0.0; CALENDAR_FEATURES];
    v[date.weekday().num_days_from_monday() as usize] = 1.0;
    v[7] = f64::from(u8::from(matches!(
        date.weekday(),
        Weekday::Sat | Weekday::Sun
    )));
    v[8] = f64::from(date.iso_week().week()) / 53.0;
    let month_angle = 2.0 * PI * f64::from(date.day()) / f64::from(days_in_month(date));
    v[9] = month_angle.sin();
    v[10] = month_angle.cos();
    let year_days = if date.leap_year() { 366.0 } else { 365.0 };
    let year_angle = 2.0 * PI * f64::from(date.ordinal()) / year_days;
    v[11] = year_angle.sin();
    v[12] = year_angle.cos();
    v
}

pub fn days_in_month(date: NaiveDate) -> u32 {
    let (y, m) = (date.year(), date.month());
    let next = if m == 12 {
        NaiveDate::from_ymd_opt(y + 1, 1, 1)
    } else {
        NaiveDate::from_ymd_opt(y, m + 1, 1)
    };
    let first = NaiveDate::from_ymd_opt(y, m, 1);
    match (first, next) {
        (Some(a), Some(b)) => (b - a).num_days() as u32,
        _ => 31,
    }
}

/// Features for predicting day `day_index` of `series` from the `window`
/// preceding days.
pub fn extract_features(
    series: &DemandSeries,
    day_index: usize,
    window: usize,
) -> Result<FeatureVector> {
    if window == 0 {
        return Err(Error::domain("window must be at least 1"));
    }
    if day_index < window || day_index > series.len() {
        return Err(Error::domain(format!(
            "day {day_index} needs {window} days of history in a series of length {}",
            series.len()
        )));
    }
    let recent = &series.quantities[day_index - window..day_index];
    Ok(FeatureVector::from_recent(
        recent,
        series.dates[day_index - 1],
    ))
}

/// Independent draws from `dist` on consecutive days starting at `start`.
pub fn synthesize_history<R: Rng + ?Sized>(
    dist: &DemandDistribution,
    days: usize,
    start: NaiveDate,
    rng: &mut R,
) -> DemandSeries {
    let quantities = (0..days).map(|_| dist.sample(rng)).collect();
    DemandSeries::from_start(start, quantities)
}
