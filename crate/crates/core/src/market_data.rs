//! Minute-bar ingestion and day-grid construction.
//!
//! Bars are bucketed into civil days of an analysis timezone. Each day becomes a
//! 1441-point log-price grid: the previous day's last close followed by the 1440
//! minute closes of the day, so the 1440 one-minute returns are exact first
//! differences of the grid.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use chrono::{
    DateTime, Duration, FixedOffset, LocalResult, NaiveDate, NaiveDateTime, Offset, TimeZone,
    Timelike,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minutes in a civil trading day.
pub const MINUTES_PER_DAY: usize = 1440;
/// Points on a day grid: one boundary price plus one close per minute.
pub const GRID_POINTS: usize = MINUTES_PER_DAY + 1;
/// Default tolerated fraction of forward-filled minutes per day.
pub const DEFAULT_MAX_MISSING_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: invalid bar: {message}")]
    Validation { line: u64, message: String },
    #[error("invalid bar at timestamp {timestamp}: {message}")]
    InvalidBar { timestamp: i64, message: String },
    #[error("invalid period scheme: {0}")]
    Scheme(String),
    #[error("unknown timezone `{0}`")]
    Timezone(String),
    #[error("invalid max-missing fraction {0}; expected a value in [0, 1]")]
    MissingFraction(f64),
    #[error("grid file line {line}: {message}")]
    GridRecord { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// One minute of OHLC prices. `timestamp` is the UTC epoch second at which the minute opens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinuteBar {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
}

impl MinuteBar {
    pub fn new(timestamp: i64, open: f64, high: f64, low: f64, close: f64) -> Result<Self> {
        let bar = Self {
            timestamp,
            open,
            high,
            low,
            close,
        };
        bar.validate().map_err(|message| MarketDataError::InvalidBar { timestamp, message })?;
        Ok(bar)
    }

    /// A bar with all four prices equal, used for forward-filled minutes.
    pub fn flat(timestamp: i64, price: f64) -> Self {
        Self {
            timestamp,
            open: price,
            high: price,
            low: price,
            close: price,
        }
    }

    /// Checks the OHLC invariants, returning a human-readable reason on failure.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.timestamp.rem_euclid(60) != 0 {
            return Err(format!("timestamp {} is not minute-aligned", self.timestamp));
        }
        for (name, value) in [
            ("open", self.open),
            ("high", self.high),
            ("low", self.low),
            ("close", self.close),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(format!("{name} price {value} is not positive"));
            }
        }
        if self.high < self.low {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} exceeds min(open, close) {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} is below max(open, close) {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        Ok(())
    }
}

/// Timezone used to cut the bar stream into civil days.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalysisTz {
    Fixed(FixedOffset),
    Named(chrono_tz::Tz),
}

impl Default for AnalysisTz {
    fn default() -> Self {
        AnalysisTz::Named(chrono_tz::America::New_York)
    }
}

impl AnalysisTz {
    pub fn local(&self, timestamp: i64) -> NaiveDateTime {
        let utc = DateTime::from_timestamp(timestamp, 0)
            .expect("timestamp within chrono range")
            .naive_utc();
        match self {
            AnalysisTz::Fixed(off) => off.from_utc_datetime(&utc).naive_local(),
            AnalysisTz::Named(tz) => tz.from_utc_datetime(&utc).naive_local(),
        }
    }

    /// UTC timestamp of a civil minute. Ambiguous minutes map to their earliest instant;
    /// minutes skipped by a DST jump use the offset in force at local midnight.
    pub fn timestamp_of(&self, local: NaiveDateTime) -> i64 {
        match self {
            AnalysisTz::Fixed(off) => (local - Duration::seconds(off.local_minus_utc() as i64))
                .and_utc()
                .timestamp(),
            AnalysisTz::Named(tz) => match tz.from_local_datetime(&local) {
                LocalResult::Single(t) | LocalResult::Ambiguous(t, _) => t.timestamp(),
                LocalResult::None => {
                    let midnight = local.date().and_hms_opt(0, 0, 0).expect("valid midnight");
                    let offset = match tz.from_local_datetime(&midnight) {
                        LocalResult::Single(t) | LocalResult::Ambiguous(t, _) => {
                            t.offset().fix().local_minus_utc()
                        }
                        LocalResult::None => 0,
                    };
                    (local - Duration::seconds(offset as i64)).and_utc().timestamp()
                }
            },
        }
    }
}

impl FromStr for AnalysisTz {
    type Err = MarketDataError;

    /// Accepts `UTC`, a fixed offset such as `+09:00`, or an IANA zone name.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("utc") || s == "Z" {
            return Ok(AnalysisTz::Fixed(FixedOffset::east_opt(0).expect("zero offset")));
        }
        if s.starts_with('+') || s.starts_with('-') {
            let sign = if s.starts_with('-') { -1 } else { 1 };
            let body = &s[1..];
            let (h, m) = match body.split_once(':') {
                Some((h, m)) => (h, m),
                None if body.len() == 4 => body.split_at(2),
                None => (body, "0"),
            };
            let h: i32 = h.parse().map_err(|_| MarketDataError::Timezone(s.into()))?;
            let m: i32 = m.parse().map_err(|_| MarketDataError::Timezone(s.into()))?;
            return FixedOffset::east_opt(sign * (h * 3600 + m * 60))
                .map(AnalysisTz::Fixed)
                .ok_or_else(|| MarketDataError::Timezone(s.into()));
        }
        s.parse::<chrono_tz::Tz>()
            .map(AnalysisTz::Named)
            .map_err(|_| MarketDataError::Timezone(s.into()))
    }
}

impl fmt::Display for AnalysisTz {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnalysisTz::Fixed(off) => write!(f, "{off}"),
            AnalysisTz::Named(tz) => write!(f, "{}", tz.name()),
        }
    }
}

/// A labelled, inclusive date range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Period {
    pub label: String,
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl Period {
    pub fn new(label: impl Into<String>, start: NaiveDate, end: NaiveDate) -> Self {
        Self {
            label: label.into(),
            start,
            end,
        }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }
}

/// Ordered event-study periods. The first period is the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodScheme {
    periods: Vec<Period>,
    timezone: AnalysisTz,
}

impl PeriodScheme {
    pub fn new(periods: Vec<Period>, timezone: AnalysisTz) -> Result<Self> {
        if periods.is_empty() {
            return Err(MarketDataError::Scheme("no periods defined".into()));
        }
        for p in &periods {
            if p.start > p.end {
                return Err(MarketDataError::Scheme(format!(
                    "period `{}` starts after it ends",
                    p.label
                )));
            }
        }
        for w in periods.windows(2) {
            if w[1].start <= w[0].end {
                return Err(MarketDataError::Scheme(format!(
                    "periods `{}` and `{}` overlap or are out of order",
                    w[0].label, w[1].label
                )));
            }
        }
        let mut labels: Vec<&str> = periods.iter().map(|p| p.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != periods.len() {
            return Err(MarketDataError::Scheme("duplicate period labels".into()));
        }
        Ok(Self { periods, timezone })
    }

    /// Period 0 from 2017-06-01 up to the CME Bitcoin futures launch, then three
    /// roughly two-month periods after it, with New York day boundaries.
    pub fn futures_launch_2017() -> Self {
        let d = |y, m, day| NaiveDate::from_ymd_opt(y, m, day).expect("valid date");
        Self::new(
            vec![
                Period::new("Period 0", d(2017, 6, 1), d(2017, 12, 17)),
                Period::new("Period 1", d(2017, 12, 18), d(2018, 2, 28)),
                Period::new("Period 2", d(2018, 3, 1), d(2018, 4, 30)),
                Period::new("Period 3", d(2018, 5, 1), d(2018, 6, 26)),
            ],
            AnalysisTz::default(),
        )
        .expect("static scheme is valid")
    }

    pub fn periods(&self) -> &[Period] {
        &self.periods
    }

    pub fn baseline(&self) -> &Period {
        &self.periods[0]
    }

    pub fn timezone(&self) -> AnalysisTz {
        self.timezone
    }

    pub fn with_timezone(mut self, timezone: AnalysisTz) -> Self {
        self.timezone = timezone;
        self
    }

    pub fn period_of(&self, date: NaiveDate) -> Option<&Period> {
        self.periods.iter().find(|p| p.contains(date))
    }

    pub fn first_date(&self) -> NaiveDate {
        self.periods[0].start
    }

    pub fn last_date(&self) -> NaiveDate {
        self.periods[self.periods.len() - 1].end
    }
}

/// One civil day of minute data on a 1441-point log-price grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DayGrid {
    pub date: NaiveDate,
    /// `log_prices[0]` is the boundary (previous close); `log_prices[k]` the close of minute k.
    pub log_prices: Vec<f64>,
    pub returns: Vec<f64>,
    pub bars: Vec<MinuteBar>,
    pub missing_count: usize,
    /// Set on the first day of a stream, whose boundary is its own first observed price.
    pub boundary_from_first_price: bool,
}

impl DayGrid {
    pub fn boundary_price(&self) -> f64 {
        self.log_prices[0].exp()
    }

    pub fn close_price(&self) -> f64 {
        self.bars[MINUTES_PER_DAY - 1].close
    }

    /// Close-to-close log return of the day.
    pub fn daily_log_return(&self) -> f64 {
        self.log_prices[MINUTES_PER_DAY] - self.log_prices[0]
    }
}

/// Anything keyed by a calendar date, so it can be split by period.
pub trait Dated {
    fn date(&self) -> NaiveDate;
}

impl Dated for DayGrid {
    fn date(&self) -> NaiveDate {
        self.date
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExclusionReason {
    NoObservations,
    TooManyMissing { missing: usize },
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExclusionReason::NoObservations => write!(f, "no observed bars"),
            ExclusionReason::TooManyMissing { missing } => {
                write!(f, "{missing} of {MINUTES_PER_DAY} minutes missing")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExcludedDay {
    pub date: NaiveDate,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Default)]
pub struct GridBuild {
    pub days: Vec<DayGrid>,
    pub excluded: Vec<ExcludedDay>,
    pub notices: Vec<String>,
}

/// Reads `timestamp,open,high,low,close` rows. Rows must be strictly ascending in time.
pub fn parse_bars<R: Read>(source: R) -> Result<Vec<MinuteBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers().map_err(|e| MarketDataError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let expected = ["timestamp", "open", "high", "low", "close"];
    if headers.len() != expected.len() || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(MarketDataError::Parse {
            line: 1,
            message: format!(
                "expected header `timestamp,open,high,low,close`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut bars: Vec<MinuteBar> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| MarketDataError::Parse {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 5 {
            return Err(MarketDataError::Parse {
                line,
                message: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let timestamp: i64 = record[0].parse().map_err(|_| MarketDataError::Parse {
            line,
            message: format!("bad timestamp `{}`", &record[0]),
        })?;
        let mut prices = [0.0f64; 4];
        for (i, slot) in prices.iter_mut().enumerate() {
            *slot = record[i + 1].parse().map_err(|_| MarketDataError::Parse {
                line,
                message: format!("bad price `{}`", &record[i + 1]),
            })?;
        }
        let bar = MinuteBar {
            timestamp,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
        };
        bar.validate()
            .map_err(|message| MarketDataError::Validation { line, message })?;
        if let Some(prev) = bars.last() {
            if bar.timestamp == prev.timestamp {
                return Err(MarketDataError::Validation {
                    line,
                    message: format!("duplicate timestamp {timestamp}"),
                });
            }
            if bar.timestamp < prev.timestamp {
                return Err(MarketDataError::Validation {
                    line,
                    message: format!("timestamp {timestamp} is out of order"),
                });
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

/// Writes bars in the format accepted by [`parse_bars`].
pub fn write_bars<W: Write>(bars: &[MinuteBar], mut out: W) -> Result<()> {
    writeln!(out, "timestamp,open,high,low,close")?;
    for b in bars {
        writeln!(out, "{},{},{},{},{}", b.timestamp, b.open, b.high, b.low, b.close)?;
    }
    Ok(())
}

fn merge_into(slot: &mut Option<MinuteBar>, bar: MinuteBar) {
    // Civil minutes repeated by a DST fall-back: keep the first open and the last close.
    *slot = Some(match slot.take() {
        None => bar,
        Some(prev) => MinuteBar {
            timestamp: prev.timestamp,
            open: prev.open,
            high: prev.high.max(bar.high),
            low: prev.low.min(bar.low),
            close: bar.close,
        },
    });
}

/// Cuts a sorted bar stream into civil-day grids in the scheme's timezone.
///
/// Absent minutes are forward-filled with flat bars at the last close (zero return).
/// Days with no observed bar, or with more than `max_missing_fraction` of their
/// minutes filled, are excluded and listed in the result.
pub fn build_day_grids(
    bars: &[MinuteBar],
    scheme: &PeriodScheme,
    max_missing_fraction: f64,
) -> Result<GridBuild> {
    if !(0.0..=1.0).contains(&max_missing_fraction) {
        return Err(MarketDataError::MissingFraction(max_missing_fraction));
    }
    let mut out = GridBuild::default();
    if bars.is_empty() {
        out.notices.push("no bars in input; no days constructed".into());
        return Ok(out);
    }
    let tz = scheme.timezone();

    let mut by_day: BTreeMap<NaiveDate, Vec<Option<MinuteBar>>> = BTreeMap::new();
    let mut prev_ts = i64::MIN;
    for bar in bars {
        if bar.timestamp <= prev_ts {
            return Err(MarketDataError::InvalidBar {
                timestamp: bar.timestamp,
                message: "bars are not strictly ascending".into(),
            });
        }
        prev_ts = bar.timestamp;
        bar.validate().map_err(|message| MarketDataError::InvalidBar {
            timestamp: bar.timestamp,
            message,
        })?;
        let local = tz.local(bar.timestamp);
        let slot = (local.hour() * 60 + local.minute()) as usize;
        let day = by_day
            .entry(local.date())
            .or_insert_with(|| vec![None; MINUTES_PER_DAY]);
        merge_into(&mut day[slot], *bar);
    }

    let first = *by_day.keys().next().expect("non-empty");
    let last = *by_day.keys().next_back().expect("non-empty");
    let mut last_close: Option<f64> = None;
    let mut date = first;
    while date <= last {
        match by_day.get(&date) {
            None => out.excluded.push(ExcludedDay {
                date,
                reason: ExclusionReason::NoObservations,
            }),
            Some(slots) => {
                let (grid, close) = grid_for_day(date, slots, last_close, tz);
                last_close = Some(close);
                let missing = grid.missing_count;
                if missing as f64 / MINUTES_PER_DAY as f64 > max_missing_fraction {
                    out.excluded.push(ExcludedDay {
                        date,
                        reason: ExclusionReason::TooManyMissing { missing },
                    });
                } else {
                    if grid.boundary_from_first_price {
                        out.notices.push(format!(
                            "{date}: no prior close; boundary set to first observed price"
                        ));
                    }
                    out.days.push(grid);
                }
            }
        }
        date = date.succ_opt().expect("date in range");
    }
    for ex in &out.excluded {
        out.notices.push(format!("{}: excluded ({})", ex.date, ex.reason));
    }
    Ok(out)
}

fn grid_for_day(
    date: NaiveDate,
    slots: &[Option<MinuteBar>],
    prior_close: Option<f64>,
    tz: AnalysisTz,
) -> (DayGrid, f64) {
    let first_open = slots
        .iter()
        .flatten()
        .next()
        .map(|b| b.open)
        .expect("day has an observed bar");
    let boundary = prior_close.unwrap_or(first_open);
    let midnight = date.and_hms_opt(0, 0, 0).expect("valid midnight");

    let mut log_prices = Vec::with_capacity(GRID_POINTS);
    let mut day_bars = Vec::with_capacity(MINUTES_PER_DAY);
    let mut missing = 0;
    let mut current = boundary;
    log_prices.push(boundary.ln());
    for (minute, slot) in slots.iter().enumerate() {
        let bar = match slot {
            Some(b) => *b,
            None => {
                missing += 1;
                let local = midnight + Duration::minutes(minute as i64);
                MinuteBar::flat(tz.timestamp_of(local), current)
            }
        };
        current = bar.close;
        log_prices.push(current.ln());
        day_bars.push(bar);
    }
    let returns = log_prices.windows(2).map(|w| w[1] - w[0]).collect();
    (
        DayGrid {
            date,
            log_prices,
            returns,
            bars: day_bars,
            missing_count: missing,
            boundary_from_first_price: prior_close.is_none(),
        },
        current,
    )
}

/// Days bucketed by period, in scheme order.
#[derive(Debug, Clone)]
pub struct PeriodAssignment<'a, T> {
    pub periods: Vec<(String, Vec<&'a T>)>,
    pub dropped: usize,
}

impl<'a, T> PeriodAssignment<'a, T> {
    pub fn get(&self, label: &str) -> Option<&[&'a T]> {
        self.periods
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    pub fn baseline(&self) -> &[&'a T] {
        &self.periods[0].1
    }
}

/// Assigns each dated item to the period containing its date; the rest are counted as dropped.
pub fn assign_periods<'a, T: Dated>(items: &'a [T], scheme: &PeriodScheme) -> PeriodAssignment<'a, T> {
    let mut periods: Vec<(String, Vec<&T>)> = scheme
        .periods()
        .iter()
        .map(|p| (p.label.clone(), Vec::new()))
        .collect();
    let mut dropped = 0;
    for item in items {
        match scheme.periods().iter().position(|p| p.contains(item.date())) {
            Some(i) => periods[i].1.push(item),
            None => dropped += 1,
        }
    }
    PeriodAssignment { periods, dropped }
}

/// Formats a float with 17 significant digits, enough to round-trip any f64.
pub fn format_f64_17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One line of the day-grid interchange file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct GridRecord {
    pub date: NaiveDate,
    #[serde(rename = "logPrices")]
    pub log_prices: Vec<f64>,
    #[serde(rename = "missingCount")]
    pub missing_count: usize,
}

/// Writes one JSON object per day: `{"date", "logPrices", "missingCount"}`.
pub fn write_grid_records<W: Write>(days: &[DayGrid], mut out: W) -> Result<()> {
    for day in days {
        write!(out, "{{\"date\":\"{}\",\"logPrices\":[", day.date)?;
        for (i, p) in day.log_prices.iter().enumerate() {
            if i > 0 {
                out.write_all(b",")?;
            }
            out.write_all(format_f64_17(*p).as_bytes())?;
        }
        writeln!(out, "],\"missingCount\":{}}}", day.missing_count)?;
    }
    Ok(())
}

pub fn read_grid_records<R: BufRead>(input: R) -> Result<Vec<GridRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: GridRecord = serde_json::from_str(&line).map_err(|e| MarketDataError::GridRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.log_prices.len() != GRID_POINTS {
            return Err(MarketDataError::GridRecord {
                line: i + 1,
                message: format!("expected {GRID_POINTS} log prices, found {}", rec.log_prices.len()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
