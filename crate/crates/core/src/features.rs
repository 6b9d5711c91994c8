//! Order imbalance (OIB) and order flow imbalance (OFI) per tick, and their
//! per-bracket means and p-scores.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::market_data::{group_by_bracket, BracketKey, BracketSeries, TickRecord};
use crate::stats::{mean, normal_cdf, sample_sd};

/// The 4-dimensional explanatory vector of one bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub oib_mean: f64,
    pub ofi_mean: f64,
    pub oib_pscore: f64,
    pub ofi_pscore: f64,
}

impl FeatureVector {
    /// Used before the first bracket that has any feature values.
    pub const NEUTRAL: FeatureVector = FeatureVector {
        oib_mean: 0.0,
        ofi_mean: 0.0,
        oib_pscore: 0.5,
        ofi_pscore: 0.5,
    };

    /// Entries in the fixed order (OIB mean, OFI mean, OIB p-score, OFI p-score).
    pub fn as_array(&self) -> [f64; 4] {
        [self.oib_mean, self.ofi_mean, self.oib_pscore, self.ofi_pscore]
    }
}

/// `(BQ - AQ) / (BQ + AQ)`.
pub fn oib(tick: &TickRecord) -> Result<f64> {
    let total = tick.bid_qty + tick.ask_qty;
    if total == 0 {
        return Err(Error::UndefinedFeature(format!("OIB at {}: both quote quantities are zero", tick.timestamp)));
    }
    Ok((tick.bid_qty as f64 - tick.ask_qty as f64) / total as f64)
}

/// Signed best-quote contribution between two consecutive entries. The
/// price comparisons are inclusive, so an unchanged price fires both terms
/// on its side.
pub fn ofi(prev: &TickRecord, curr: &TickRecord) -> f64 {
    let ind = |c: bool| if c { 1.0 } else { 0.0 };
    curr.bid_qty as f64 * ind(curr.bid_price >= prev.bid_price) - prev.bid_qty as f64 * ind(curr.bid_price <= prev.bid_price)
        + prev.ask_qty as f64 * ind(curr.ask_price <= prev.ask_price)
        - curr.ask_qty as f64 * ind(curr.ask_price >= prev.ask_price)
}

/// `Phi(mean / sd)` with the sample standard deviation. When `sd` is zero
/// (or undefined for a single value) the limit as `sd -> 0+` is used:
/// 0.5, 1 or 0 for a zero, positive or negative mean.
pub fn pscore(values: &[f64]) -> f64 {
    let m = mean(values);
    let sd = sample_sd(values);
    if sd.is_nan() || sd == 0.0 {
        return if m > 0.0 {
            1.0
        } else if m < 0.0 {
            0.0
        } else {
            0.5
        };
    }
    normal_cdf(m / sd)
}

/// Mean and p-score of the OIB and OFI values of one bracket.
pub fn bracket_features(oib_values: &[f64], ofi_values: &[f64]) -> Result<FeatureVector> {
    if oib_values.is_empty() || ofi_values.is_empty() {
        return Err(Error::UndefinedFeature("bracket has no feature values".into()));
    }
    Ok(FeatureVector {
        oib_mean: mean(oib_values),
        ofi_mean: mean(ofi_values),
        oib_pscore: pscore(oib_values),
        ofi_pscore: pscore(ofi_values),
    })
}

/// Feature vectors aligned with `series`.
///
/// OFI pairs never straddle a session boundary. A bracket without OIB (or
/// OFI) values repeats the previous bracket's entries for that feature.
pub fn compute_features(ticks: &[TickRecord], series: &BracketSeries) -> Result<Vec<FeatureVector>> {
    let groups = group_by_bracket(ticks);
    let mut out = Vec::with_capacity(series.len());
    let mut prev = FeatureVector::NEUTRAL;
    let mut last_tick: Option<(&TickRecord, BracketKey)> = None;

    for b in &series.brackets {
        let key = b.key();
        let mut oibs = Vec::new();
        let mut ofis = Vec::new();
        for t in groups.get(&key).map(Vec::as_slice).unwrap_or_default() {
            if let Ok(v) = oib(t) {
                oibs.push(v);
            }
            if let Some((p, pk)) = last_tick {
                if pk.date == key.date && pk.session == key.session {
                    ofis.push(ofi(p, t));
                }
            }
            last_tick = Some((t, key));
        }

        let mut fv = prev;
        if !oibs.is_empty() {
            fv.oib_mean = mean(&oibs);
            fv.oib_pscore = pscore(&oibs);
        }
        if !ofis.is_empty() {
            fv.ofi_mean = mean(&ofis);
            fv.ofi_pscore = pscore(&ofis);
        }
        out.push(fv);
        prev = fv;
    }
    Ok(out)
}

/// Computes and stores the features on `series`.
pub fn attach_features(series: &mut BracketSeries, ticks: &[TickRecord]) -> Result<()> {
    series.features = compute_features(ticks, series)?;
    Ok(())
}

/// Writes `date,label,oib_mean,ofi_mean,oib_p,ofi_p`.
pub fn write_features_csv<W: Write>(w: W, series: &BracketSeries) -> Result<()> {
    if series.features.len() != series.len() {
        return Err(Error::InvalidInput("features not attached".into()));
    }
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["date", "label", "oib_mean", "ofi_mean", "oib_p", "ofi_p"])?;
    for (b, f) in series.brackets.iter().zip(&series.features) {
        wr.write_record([
            b.date.to_string(),
            format!("{:04}", b.label),
            f.oib_mean.to_string(),
            f.ofi_mean.to_string(),
            f.oib_pscore.to_string(),
            f.ofi_pscore.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the feature CSV and attaches it to `series`, checking alignment.
pub fn read_features_csv<R: Read>(r: R, series: &mut BracketSeries) -> Result<()> {
    let mut rd = csv::Reader::from_reader(r);
    let mut feats = Vec::with_capacity(series.len());
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let err = |msg: String| Error::Parse { line, msg };
        let b = series.brackets.get(i).ok_or_else(|| err("more feature rows than brackets".into()))?;
        if rec.len() != 6 || rec[0] != b.date.to_string() || rec[1] != format!("{:04}", b.label) {
            return Err(err(format!("row does not match bracket {} {:04}", b.date, b.label)));
        }
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| err(format!("bad number {:?}", &rec[j])));
        feats.push(FeatureVector {
            oib_mean: num(2)?,
            ofi_mean: num(3)?,
            oib_pscore: num(4)?,
            ofi_pscore: num(5)?,
        });
    }
    if feats.len() != series.len() {
        return Err(Error::InvalidInput(format!("{} feature rows for {} brackets", feats.len(), series.len())));
    }
    series.features = feats;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{bracketize, synth_ticks, SynthParams};
    use chrono::NaiveDateTime;

    fn quote(bp: f64, bq: u64, ap: f64, aq: u64) -> TickRecord {
        TickRecord {
            timestamp: NaiveDateTime::parse_from_str("2018-01-02 09:31:00", "%Y-%m-%d %H:%M:%S").unwrap(),
            last_price: bp,
            volume: 1,
            bid_price: bp,
            bid_qty: bq,
            ask_price: ap,
            ask_qty: aq,
        }
    }

    #[test]
    fn oib_values() {
        assert_eq!(oib(&quote(10.0, 100, 10.2, 100)).unwrap(), 0.0);
        assert_eq!(oib(&quote(10.0, 150, 10.2, 50)).unwrap(), 0.5);
        assert_eq!(oib(&quote(10.0, 0, 10.2, 80)).unwrap(), -1.0);
        assert!(matches!(oib(&quote(10.0, 0, 10.2, 0)), Err(Error::UndefinedFeature(_))));
    }

    #[test]
    fn ofi_values() {
        let a = quote(10.0, 10, 10.2, 7);
        assert_eq!(ofi(&a, &a), 0.0);
        let b = quote(10.0, 12, 10.2, 7);
        assert_eq!(ofi(&a, &b), 2.0);
        let prev = quote(10.0, 4, 10.2, 9);
        let down = quote(9.8, 6, 10.0, 3);
        assert_eq!(ofi(&prev, &down), 5.0);
    }

    #[test]
    fn pscore_values() {
        assert_eq!(pscore(&[1.0, -1.0]), 0.5);
        // mean 1, sample sd 1
        let v = [0.0, 1.0, 2.0];
        assert!((pscore(&v) - 0.841_344_746_068_543).abs() < 1e-12);
        assert_eq!(pscore(&[2.0, 2.0, 2.0]), 1.0);
        assert_eq!(pscore(&[-2.0, -2.0]), 0.0);
        assert_eq!(pscore(&[0.0]), 0.5);
    }

    #[test]
    fn bracket_features_requires_values() {
        assert!(bracket_features(&[], &[1.0]).is_err());
        let f = bracket_features(&[1.0, -1.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(f.oib_mean, 0.0);
        assert_eq!(f.ofi_mean, 1.0);
    }

    #[test]
    fn features_align_with_brackets() {
        let ticks = synth_ticks(5, 2, &SynthParams::default()).unwrap();
        let mut s = bracketize(&ticks).unwrap();
        attach_features(&mut s, &ticks).unwrap();
        assert_eq!(s.features.len(), s.len());
        for f in &s.features {
            assert!((-1.0..=1.0).contains(&f.oib_mean));
            assert!((0.0..=1.0).contains(&f.oib_pscore) && (0.0..=1.0).contains(&f.ofi_pscore));
        }
        let mut buf = Vec::new();
        write_features_csv(&mut buf, &s).unwrap();
        let mut s2 = s.clone();
        s2.features.clear();
        read_features_csv(buf.as_slice(), &mut s2).unwrap();
        assert_eq!(s2.features, s.features);
    }

    #[test]
    fn first_bracket_of_session_ofi_excludes_previous_session() {
        // A single tick per session: no same-session pair exists, so OFI stays neutral.
        let mut t1 = quote(10.0, 5, 10.2, 5);
        t1.timestamp = NaiveDateTime::parse_from_str("2018-01-02 09:31:00", "%Y-%m-%d %H:%M:%S").unwrap();
        let mut t2 = quote(12.0, 50, 12.2, 1);
        t2.timestamp = NaiveDateTime::parse_from_str("2018-01-02 13:01:00", "%Y-%m-%d %H:%M:%S").unwrap();
        let ticks = vec![t1, t2];
        let s = bracketize(&ticks).unwrap();
        let f = compute_features(&ticks, &s).unwrap();
        assert!(f.iter().all(|v| v.ofi_mean == 0.0 && v.ofi_pscore == 0.5));
    }
}
