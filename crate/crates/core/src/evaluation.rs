//! Forecast accuracy and a sign-of-signal trading backtest.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::market_data::{BracketSeries, Session, BRACKETS_PER_SESSION, EXEMPT_PER_SESSION};
use crate::stats::{mean, sample_sd};

/// Eligible brackets per session.
pub const SESSION_OBS: usize = BRACKETS_PER_SESSION - EXEMPT_PER_SESSION;
pub const TRADING_DAYS: f64 = 252.0;

pub fn mse_mae(forecasts: &[f64], actuals: &[f64]) -> Result<(f64, f64)> {
    if forecasts.len() != actuals.len() {
        return Err(Error::InvalidInput("forecasts and actuals differ in length".into()));
    }
    if forecasts.is_empty() {
        return Err(Error::InsufficientData { needed: 1, have: 0 });
    }
    let n = forecasts.len() as f64;
    let (mut se, mut ae) = (0.0, 0.0);
    for (f, y) in forecasts.iter().zip(actuals) {
        se += (f - y) * (f - y);
        ae += (f - y).abs();
    }
    Ok((se / n, ae / n))
}

/// Sign with `sign(0) = 0`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlMode {
    /// Long or short one unit per bracket by the sign of the forecast move.
    Signal,
    /// Long from the first to the last eligible bracket.
    BuyAndHold,
}

/// Profit and loss of one session.
///
/// `prices` are the session's eligible prices `P_1..P_18`. `forecasts[i]` is
/// the forecast of `P_{i+2}` made at `P_{i+1}`; a missing forecast means no
/// position.
pub fn session_pl(prices: &[f64], forecasts: &[Option<f64>], mode: PlMode) -> Result<f64> {
    if prices.len() < SESSION_OBS {
        return Err(Error::InsufficientData {
            needed: SESSION_OBS,
            have: prices.len(),
        });
    }
    let p = &prices[..SESSION_OBS];
    match mode {
        PlMode::BuyAndHold => Ok((p[SESSION_OBS - 1] - p[0]) / p[0]),
        PlMode::Signal => {
            if forecasts.len() < SESSION_OBS - 1 {
                return Err(Error::InsufficientData {
                    needed: SESSION_OBS - 1,
                    have: forecasts.len(),
                });
            }
            Ok((0..SESSION_OBS - 1)
                .map(|i| match forecasts[i] {
                    Some(f) => sign(f - p[i]) * (p[i + 1] - p[i]) / p[i],
                    None => 0.0,
                })
                .sum())
        }
    }
}

/// `sqrt(252) * mean / sd` of daily PL with the sample standard deviation.
pub fn sharpe(day_pl: &[f64]) -> Result<f64> {
    if day_pl.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            have: day_pl.len(),
        });
    }
    let sd = sample_sd(day_pl);
    if !(sd > 0.0) {
        return Err(Error::UndefinedSharpe);
    }
    Ok(TRADING_DAYS.sqrt() * mean(day_pl) / sd)
}

/// A session's position in the bracket index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SessionSpan {
    pub date: NaiveDate,
    pub session: Session,
    /// Index of the first eligible bracket.
    pub first: usize,
}

/// Spans of all complete sessions of `series`.
pub fn session_spans(series: &BracketSeries) -> Vec<SessionSpan> {
    series
        .session_starts()
        .into_iter()
        .filter(|&s| s + BRACKETS_PER_SESSION <= series.len())
        .map(|s| {
            let b = &series.brackets[s];
            SessionSpan {
                date: b.date,
                session: b.session,
                first: s + EXEMPT_PER_SESSION,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerfReport {
    pub model_code: String,
    pub mse: f64,
    pub mae: f64,
    pub n_forecasts: usize,
    pub day_pl: Vec<(NaiveDate, f64)>,
    /// `None` when undefined (zero spread or fewer than two days).
    pub sr: Option<f64>,
}

impl PerfReport {
    pub fn pl_values(&self) -> Vec<f64> {
        self.day_pl.iter().map(|d| d.1).collect()
    }

    /// Running sum of day PL.
    pub fn cum_pl(&self) -> Vec<(NaiveDate, f64)> {
        let mut acc = 0.0;
        self.day_pl
            .iter()
            .map(|(d, v)| {
                acc += v;
                (*d, acc)
            })
            .collect()
    }
}

/// Scores forecasts indexed by origin over the origin set `origins`.
///
/// MSE and MAE use every origin with a forecast and a realised next price.
/// A day enters the PL series when every trading origin of each of its
/// sessions lies in `origins`.
pub fn evaluate(code: &str, prices: &[f64], forecasts: &[Option<f64>], origins: &[usize], spans: &[SessionSpan], mode: PlMode) -> Result<PerfReport> {
    if forecasts.len() != prices.len() {
        return Err(Error::InvalidInput("forecasts must be indexed like prices".into()));
    }
    let (mut f, mut a) = (Vec::new(), Vec::new());
    for &t in origins {
        if let (Some(v), Some(y)) = (forecasts.get(t).copied().flatten(), prices.get(t + 1)) {
            f.push(v);
            a.push(*y);
        }
    }
    let (mse, mae) = mse_mae(&f, &a)?;

    let in_set: BTreeSet<usize> = origins.iter().copied().collect();
    let mut days: BTreeMap<NaiveDate, (bool, f64)> = BTreeMap::new();
    for span in spans {
        let trades = span.first..span.first + SESSION_OBS - 1;
        let covered = span.first + SESSION_OBS <= prices.len() && trades.clone().all(|t| in_set.contains(&t));
        let entry = days.entry(span.date).or_insert((true, 0.0));
        if !covered {
            entry.0 = false;
            continue;
        }
        let pl = session_pl(&prices[span.first..span.first + SESSION_OBS], &forecasts[trades], mode)?;
        entry.1 += pl;
    }
    let day_pl: Vec<(NaiveDate, f64)> = days.into_iter().filter(|(_, (ok, _))| *ok).map(|(d, (_, v))| (d, v)).collect();
    let values: Vec<f64> = day_pl.iter().map(|d| d.1).collect();
    Ok(PerfReport {
        model_code: code.to_string(),
        mse,
        mae,
        n_forecasts: f.len(),
        sr: sharpe(&values).ok(),
        day_pl,
    })
}

/// Writes `model_code,mse,mae,sr,mean_pl,std_pl,min_pl,max_pl`. An undefined
/// Sharpe ratio is left empty.
pub fn write_report_csv<W: Write>(w: W, reports: &[PerfReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["model_code", "mse", "mae", "sr", "mean_pl", "std_pl", "min_pl", "max_pl"])?;
    for r in reports {
        let pl = r.pl_values();
        let num = |v: f64| if v.is_finite() { v.to_string() } else { String::new() };
        wr.write_record([
            r.model_code.clone(),
            r.mse.to_string(),
            r.mae.to_string(),
            r.sr.map(|v| v.to_string()).unwrap_or_default(),
            num(mean(&pl)),
            num(sample_sd(&pl)),
            num(pl.iter().copied().fold(f64::INFINITY, f64::min)),
            num(pl.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes `date,model_code,cum_pl`.
pub fn write_cum_pl_csv<W: Write>(w: W, reports: &[PerfReport]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "model_code", "cum_pl"])?;
    for r in reports {
        for (d, v) in r.cum_pl() {
            wr.write_record([d.to_string(), r.model_code.clone(), v.to_string()])?;
        }
    }
    wr.flush()?;
    Ok(())
}
