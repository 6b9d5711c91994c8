//! Tick ingestion, 5-minute bracketing with volume-weighted mean prices,
//! session-boundary flags and a seeded synthetic tick generator.
//!
//! A trading day has two sessions, 09:30-11:30 and 13:00-15:00, each cut
//! into 24 five-minute brackets labelled by their end time. A bracket
//! labelled `0935` holds ticks stamped 09:30:01 through 09:35:00.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const BRACKETS_PER_SESSION: usize = 24;
pub const BRACKET_SECS: u32 = 300;
/// Leading brackets of every session that are never forecast targets.
pub const EXEMPT_PER_SESSION: usize = 6;

const MORNING_OPEN: u32 = 9 * 3600 + 30 * 60;
const AFTERNOON_OPEN: u32 = 13 * 3600;
const SESSION_SECS: u32 = 2 * 3600;

const TS_FORMAT: &str = "%Y-%m-%d %H:%M:%S";

/// One raw order-book entry.
#[derive(Debug, Clone, PartialEq)]
pub struct TickRecord {
    pub timestamp: NaiveDateTime,
    pub last_price: f64,
    pub volume: u64,
    pub bid_price: f64,
    pub bid_qty: u64,
    pub ask_price: f64,
    pub ask_qty: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Session {
    Morning,
    Afternoon,
}

impl Session {
    fn open_secs(self) -> u32 {
        match self {
            Session::Morning => MORNING_OPEN,
            Session::Afternoon => AFTERNOON_OPEN,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GapKind {
    None,
    DayGap,
    LunchGap,
}

impl GapKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GapKind::None => "none",
            GapKind::DayGap => "day_gap",
            GapKind::LunchGap => "lunch_gap",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(GapKind::None),
            "day_gap" => Some(GapKind::DayGap),
            "lunch_gap" => Some(GapKind::LunchGap),
            _ => None,
        }
    }
}

/// Position of a timestamp inside the trading calendar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BracketKey {
    pub date: NaiveDate,
    pub session: Session,
    pub slot: usize,
}

impl BracketKey {
    /// Bracket containing `ts`, or `None` outside session hours.
    pub fn of(ts: &NaiveDateTime) -> Option<Self> {
        let secs = ts.time().num_seconds_from_midnight();
        for session in [Session::Morning, Session::Afternoon] {
            let open = session.open_secs();
            if secs > open && secs <= open + SESSION_SECS {
                let slot = ((secs - open).div_ceil(BRACKET_SECS) - 1) as usize;
                return Some(BracketKey {
                    date: ts.date(),
                    session,
                    slot,
                });
            }
        }
        None
    }

    /// End-time label, e.g. `935` for the first morning bracket.
    pub fn label(&self) -> u16 {
        let end = self.session.open_secs() + (self.slot as u32 + 1) * BRACKET_SECS;
        (end / 3600 * 100 + (end % 3600) / 60) as u16
    }

    fn from_label(date: NaiveDate, label: u16) -> Option<Self> {
        let secs = (label as u32 / 100) * 3600 + (label as u32 % 100) * 60;
        let key = BracketKey::of(&date.and_time(NaiveTime::from_num_seconds_from_midnight_opt(secs, 0)?))?;
        (key.label() == label).then_some(key)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bracket {
    pub date: NaiveDate,
    pub label: u16,
    /// Volume-weighted mean price.
    pub y: f64,
    pub tick_count: usize,
    pub session: Session,
    pub is_session_start: bool,
    pub gap_kind: GapKind,
    pub forecast_eligible: bool,
}

impl Bracket {
    pub fn key(&self) -> BracketKey {
        BracketKey::from_label(self.date, self.label).expect("bracket label inside a session")
    }
}

/// Ordered brackets with optional aligned feature vectors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BracketSeries {
    pub brackets: Vec<Bracket>,
    /// Empty until filled by [`crate::features::attach_features`].
    pub features: Vec<FeatureVector>,
}

impl BracketSeries {
    pub fn len(&self) -> usize {
        self.brackets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brackets.is_empty()
    }

    pub fn prices(&self) -> Vec<f64> {
        self.brackets.iter().map(|b| b.y).collect()
    }

    pub fn boundaries(&self) -> Vec<bool> {
        self.brackets.iter().map(|b| b.gap_kind != GapKind::None).collect()
    }

    pub fn session_count(&self) -> usize {
        self.brackets.iter().filter(|b| b.is_session_start).count()
    }

    /// Index of the first bracket of every session.
    pub fn session_starts(&self) -> Vec<usize> {
        self.brackets
            .iter()
            .enumerate()
            .filter_map(|(i, b)| b.is_session_start.then_some(i))
            .collect()
    }

    /// Forecast origins: indices `t` with at least `min_history` prior brackets
    /// whose successor `t + 1` is a forecast-eligible bracket.
    pub fn forecast_origins(&self, min_history: usize) -> Vec<usize> {
        (min_history..self.len().saturating_sub(1))
            .filter(|&t| self.brackets[t + 1].forecast_eligible)
            .collect()
    }

    /// Writes `date,label,y,tick_count,gap,eligible`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["date", "label", "y", "tick_count", "gap", "eligible"])?;
        for b in &self.brackets {
            wr.write_record([
                b.date.to_string(),
                format!("{:04}", b.label),
                b.y.to_string(),
                b.tick_count.to_string(),
                b.gap_kind.as_str().to_string(),
                b.forecast_eligible.to_string(),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads the bracket CSV written by [`BracketSeries::write_csv`].
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut brackets = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let line = i + 2;
            let rec = rec?;
            let err = |msg: &str| Error::Parse {
                line,
                msg: msg.to_string(),
            };
            if rec.len() != 6 {
                return Err(err("expected 6 fields"));
            }
            let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| err("bad date"))?;
            let label: u16 = rec[1].parse().map_err(|_| err("bad label"))?;
            let key = BracketKey::from_label(date, label).ok_or_else(|| err("label outside sessions"))?;
            let y: f64 = rec[2].parse().map_err(|_| err("bad y"))?;
            let tick_count = rec[3].parse().map_err(|_| err("bad tick_count"))?;
            let gap_kind = GapKind::parse(&rec[4]).ok_or_else(|| err("bad gap"))?;
            let forecast_eligible = rec[5].parse().map_err(|_| err("bad eligible"))?;
            brackets.push(Bracket {
                date,
                label,
                y,
                tick_count,
                session: key.session,
                is_session_start: key.slot == 0,
                gap_kind,
                forecast_eligible,
            });
        }
        Ok(BracketSeries {
            brackets,
            features: Vec::new(),
        })
    }
}

/// How the `vol` column of a feed is to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VolumeMode {
    /// Each row carries the volume traded since the previous row.
    #[default]
    PerEntry,
    /// Each row carries the day's running total; first differences are taken.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTicks {
    pub ticks: Vec<TickRecord>,
    /// Rows outside session hours.
    pub dropped: usize,
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: usize) -> Result<T> {
    s.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse {name} from {s:?}"),
    })
}

fn parse_qty(s: &str, name: &str, line: usize) -> Result<u64> {
    let v: i64 = parse_field(s, name, line)?;
    u64::try_from(v).map_err(|_| Error::Parse {
        line,
        msg: format!("{name} is negative ({v})"),
    })
}

fn parse_price(s: &str, name: &str, line: usize) -> Result<f64> {
    let v: f64 = parse_field(s, name, line)?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::Parse {
            line,
            msg: format!("{name} must be positive, got {v}"),
        });
    }
    Ok(v)
}

/// Parses the tick CSV (`ts,last,vol,bp,bq,ap,aq`).
///
/// Rows outside session hours are dropped and counted. Timestamps must be
/// non-decreasing across the whole file.
pub fn parse_ticks<R: Read>(r: R, mode: VolumeMode) -> Result<ParsedTicks> {
    let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers()?.clone();
    let expected = ["ts", "last", "vol", "bp", "bq", "ap", "aq"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected header {}", expected.join(",")),
        });
    }

    let mut ticks = Vec::new();
    let mut dropped = 0;
    let mut prev_ts: Option<NaiveDateTime> = None;
    let mut cum_prev: Option<(NaiveDate, u64)> = None;
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 7 {
            return Err(Error::Parse {
                line,
                msg: format!("expected 7 fields, got {}", rec.len()),
            });
        }
        let timestamp = NaiveDateTime::parse_from_str(&rec[0], TS_FORMAT).map_err(|e| Error::Parse {
            line,
            msg: format!("bad timestamp {:?}: {e}", &rec[0]),
        })?;
        if let Some(p) = prev_ts {
            if timestamp < p {
                return Err(Error::NonMonotone {
                    line,
                    prev: p.to_string(),
                    curr: timestamp.to_string(),
                });
            }
        }
        prev_ts = Some(timestamp);

        let last_price = parse_price(&rec[1], "last", line)?;
        let raw_vol = parse_qty(&rec[2], "vol", line)?;
        let bid_price = parse_price(&rec[3], "bp", line)?;
        let bid_qty = parse_qty(&rec[4], "bq", line)?;
        let ask_price = parse_price(&rec[5], "ap", line)?;
        let ask_qty = parse_qty(&rec[6], "aq", line)?;
        if bid_qty > 0 && ask_qty > 0 && ask_price < bid_price {
            return Err(Error::Parse {
                line,
                msg: format!("crossed quotes: bid {bid_price} > ask {ask_price}"),
            });
        }

        let volume = match mode {
            VolumeMode::PerEntry => raw_vol,
            VolumeMode::Cumulative => {
                let base = match cum_prev {
                    Some((d, c)) if d == timestamp.date() => c,
                    _ => 0,
                };
                cum_prev = Some((timestamp.date(), raw_vol));
                raw_vol.checked_sub(base).ok_or_else(|| Error::Parse {
                    line,
                    msg: format!("cumulative volume decreased from {base} to {raw_vol}"),
                })?
            }
        };

        if BracketKey::of(&timestamp).is_none() {
            dropped += 1;
            continue;
        }
        ticks.push(TickRecord {
            timestamp,
            last_price,
            volume,
            bid_price,
            bid_qty,
            ask_price,
            ask_qty,
        });
    }
    Ok(ParsedTicks { ticks, dropped })
}

/// Writes ticks in the CSV layout read by [`parse_ticks`].
pub fn write_ticks_csv<W: Write>(w: W, ticks: &[TickRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["ts", "last", "vol", "bp", "bq", "ap", "aq"])?;
    for t in ticks {
        wr.write_record([
            t.timestamp.format(TS_FORMAT).to_string(),
            t.last_price.to_string(),
            t.volume.to_string(),
            t.bid_price.to_string(),
            t.bid_qty.to_string(),
            t.ask_price.to_string(),
            t.ask_qty.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Default)]
struct Accum {
    pv: f64,
    vol: u64,
    count: usize,
    price_sum: f64,
}

/// Groups ticks by bracket, preserving time order inside each bracket.
pub fn group_by_bracket(ticks: &[TickRecord]) -> BTreeMap<BracketKey, Vec<&TickRecord>> {
    let mut groups: BTreeMap<BracketKey, Vec<&TickRecord>> = BTreeMap::new();
    for t in ticks {
        if let Some(k) = BracketKey::of(&t.timestamp) {
            groups.entry(k).or_default().push(t);
        }
    }
    groups
}

/// Aggregates sorted ticks into 24 brackets per session.
///
/// A bracket with no volume repeats the previous bracket's price and gets
/// `tick_count = 0`; its ticks are not counted as retained. Every session of
/// every date present must contain at least one tick.
pub fn bracketize(ticks: &[TickRecord]) -> Result<BracketSeries> {
    if ticks.is_empty() {
        return Err(Error::InvalidInput("no ticks".into()));
    }
    if ticks.windows(2).any(|w| w[1].timestamp < w[0].timestamp) {
        return Err(Error::InvalidInput("ticks are not sorted".into()));
    }

    let mut acc: BTreeMap<BracketKey, Accum> = BTreeMap::new();
    for t in ticks {
        let Some(k) = BracketKey::of(&t.timestamp) else {
            continue;
        };
        let a = acc.entry(k).or_default();
        a.pv += t.last_price * t.volume as f64;
        a.vol += t.volume;
        a.count += 1;
        a.price_sum += t.last_price;
    }

    let mut dates: Vec<NaiveDate> = acc.keys().map(|k| k.date).collect();
    dates.dedup();

    let mut brackets = Vec::with_capacity(dates.len() * 2 * BRACKETS_PER_SESSION);
    let mut prev_y: Option<f64> = None;
    for date in dates {
        for session in [Session::Morning, Session::Afternoon] {
            let has_ticks = (0..BRACKETS_PER_SESSION).any(|slot| acc.contains_key(&BracketKey { date, session, slot }));
            if !has_ticks {
                return Err(Error::InvalidInput(format!("{date} {session:?} session has no ticks")));
            }
            for slot in 0..BRACKETS_PER_SESSION {
                let key = BracketKey { date, session, slot };
                let (y, tick_count) = match acc.get(&key) {
                    Some(a) if a.vol > 0 => (a.pv / a.vol as f64, a.count),
                    Some(a) => (prev_y.unwrap_or(a.price_sum / a.count as f64), 0),
                    None => (
                        prev_y.ok_or_else(|| Error::InvalidInput(format!("no price available for {date} {:04}", key.label())))?,
                        0,
                    ),
                };
                prev_y = Some(y);
                let gap_kind = match (slot, session) {
                    (0, Session::Morning) => GapKind::DayGap,
                    (0, Session::Afternoon) => GapKind::LunchGap,
                    _ => GapKind::None,
                };
                brackets.push(Bracket {
                    date,
                    label: key.label(),
                    y,
                    tick_count,
                    session,
                    is_session_start: slot == 0,
                    gap_kind,
                    forecast_eligible: slot >= EXEMPT_PER_SESSION,
                });
            }
        }
    }
    Ok(BracketSeries {
        brackets,
        features: Vec::new(),
    })
}

/// count / mean / std / min / max of one group of differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return Summary {
                count: 0,
                mean: f64::NAN,
                std: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
            };
        }
        let std = if xs.len() < 2 { f64::NAN } else { crate::stats::sample_sd(xs) };
        Summary {
            count: xs.len(),
            mean: crate::stats::mean(xs),
            std,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapStats {
    pub day_gap: Summary,
    pub lunch_gap: Summary,
    pub rest: Summary,
}

/// Splits consecutive VWM differences into day-gap, lunch-gap and
/// within-session groups.
pub fn gap_stats(series: &BracketSeries) -> Result<GapStats> {
    if series.session_count() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: series.session_count(),
        });
    }
    let (mut day, mut lunch, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    for w in series.brackets.windows(2) {
        let diff = w[1].y - w[0].y;
        match w[1].gap_kind {
            GapKind::DayGap => day.push(diff),
            GapKind::LunchGap => lunch.push(diff),
            GapKind::None => rest.push(diff),
        }
    }
    Ok(GapStats {
        day_gap: Summary::of(&day),
        lunch_gap: Summary::of(&lunch),
        rest: Summary::of(&rest),
    })
}

/// Settings for [`synth_ticks`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthParams {
    pub start_date: NaiveDate,
    pub start_price: f64,
    /// Price grid is `1 / ticks_per_point`.
    pub ticks_per_point: u32,
    /// Seconds between consecutive entries.
    pub tick_interval_secs: u32,
    /// Standard deviation of the per-entry price step.
    pub tick_vol: f64,
    /// Standard deviation of the overnight jump.
    pub jump_scale: f64,
    /// Standard deviation of the lunch-break jump.
    pub lunch_jump_scale: f64,
    /// Ask minus bid, in price units.
    pub spread: f64,
    pub mean_volume: f64,
    pub max_qty: u64,
    /// Drift of the next step per unit of order imbalance, in `tick_vol` units.
    pub flow_coupling: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            start_date: NaiveDate::from_ymd_opt(2017, 11, 10).unwrap(),
            start_price: 4000.0,
            ticks_per_point: 5,
            tick_interval_secs: 3,
            tick_vol: 0.4,
            jump_scale: 25.0,
            lunch_jump_scale: 4.0,
            spread: 0.2,
            mean_volume: 6.0,
            max_qty: 30,
            flow_coupling: 0.1,
        }
    }
}

fn next_trading_day(d: NaiveDate) -> NaiveDate {
    let mut n = d + Duration::days(1);
    while matches!(n.weekday(), Weekday::Sat | Weekday::Sun) {
        n += Duration::days(1);
    }
    n
}

/// Deterministic synthetic tick stream: a random-walk price with overnight
/// and lunch jumps, quotes bracketing the last price and random quantities.
pub fn synth_ticks(seed: u64, days: usize, params: &SynthParams) -> Result<Vec<TickRecord>> {
    if days < 1 {
        return Err(Error::InvalidInput("days must be >= 1".into()));
    }
    if !(params.spread > 0.0) {
        return Err(Error::InvalidInput("spread must be positive".into()));
    }
    if !(params.jump_scale > 0.0 && params.lunch_jump_scale > 0.0) {
        return Err(Error::InvalidInput("jump scales must be positive".into()));
    }
    if !(params.tick_vol > 0.0 && params.start_price > 0.0 && params.mean_volume >= 1.0) {
        return Err(Error::InvalidInput("tick_vol, start_price must be positive and mean_volume >= 1".into()));
    }
    if params.ticks_per_point == 0 || params.tick_interval_secs == 0 || params.max_qty == 0 {
        return Err(Error::InvalidInput("ticks_per_point, tick_interval_secs and max_qty must be positive".into()));
    }

    let grid = params.ticks_per_point as f64;
    let spread_ticks = ((params.spread * grid).round() as i64).max(1);
    let floor_price = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = Normal::new(0.0, params.tick_vol).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let overnight = Normal::new(0.0, params.jump_scale).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let lunch = Normal::new(0.0, params.lunch_jump_scale).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let extra_vol = Poisson::new(params.mean_volume - 1.0 + 1e-9).map_err(|e| Error::InvalidInput(e.to_string()))?;

    let mut price = params.start_price;
    let mut date = params.start_date;
    while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
        date = next_trading_day(date);
    }
    let mut ticks = Vec::new();
    let mut oib = 0.0;
    for day in 0..days {
        if day > 0 {
            date = next_trading_day(date);
            price += overnight.sample(&mut rng);
        }
        for session in [Session::Morning, Session::Afternoon] {
            if session == Session::Afternoon {
                price += lunch.sample(&mut rng);
            }
            let open = session.open_secs();
            let mut s = params.tick_interval_secs;
            while s <= SESSION_SECS {
                price += step.sample(&mut rng) + params.flow_coupling * params.tick_vol * oib;
                price = price.max(floor_price);
                let last_k = (price * grid).round() as i64;
                let bid_k = last_k - rng.random_range(0..=spread_ticks);
                let ask_k = bid_k + spread_ticks;
                let bid_qty = rng.random_range(1..=params.max_qty);
                let ask_qty = rng.random_range(1..=params.max_qty);
                oib = (bid_qty as f64 - ask_qty as f64) / (bid_qty + ask_qty) as f64;
                let volume = 1 + extra_vol.sample(&mut rng) as u64;
                let secs = open + s;
                let time = NaiveTime::from_num_seconds_from_midnight_opt(secs, 0).expect("in-day time");
                ticks.push(TickRecord {
                    timestamp: date.and_time(time),
                    last_price: (last_k as f64 / grid).max(1.0 / grid),
                    volume,
                    bid_price: (bid_k as f64 / grid).max(1.0 / grid),
                    bid_qty,
                    ask_price: (ask_k as f64 / grid).max(2.0 / grid),
                    ask_qty,
                });
                s += params.tick_interval_secs;
            }
        }
    }
    Ok(ticks)
}
