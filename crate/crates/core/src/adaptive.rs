//! Adaptive selection over the fixed-model grid.
//!
//! At each origin the candidate set is shrunk to models whose forecast is
//! positive and within a band of the current price, then every candidate is
//! scored by a geometrically decayed sum of piecewise local losses over its
//! recent forecast errors, optionally plus a penalty on moving away from the
//! previous winner.

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::model_zoo::{ForecastTable, ModelSpec};
use crate::stats::{median, nearest_rank};

pub const DEFAULT_LOSS_WINDOW: usize = 48;
pub const DEFAULT_FILTER_BAND: f64 = 0.05;
/// Ratios within this distance of the band edge count as on the edge, so a
/// forecast built as `1.05 * y` is excluded whatever its rounding.
pub const BAND_EDGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorMode {
    /// Loss only.
    Group13,
    /// Loss plus switching penalty.
    Group14,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyType {
    One,
    Two,
    Three,
}

impl PenaltyType {
    pub fn number(self) -> u8 {
        match self {
            PenaltyType::One => 1,
            PenaltyType::Two => 2,
            PenaltyType::Three => 3,
        }
    }

    pub fn from_number(k: u8) -> Result<Self> {
        match k {
            1 => Ok(PenaltyType::One),
            2 => Ok(PenaltyType::Two),
            3 => Ok(PenaltyType::Three),
            _ => Err(Error::Config(format!("penalty type must be 1, 2 or 3, got {k}"))),
        }
    }

    /// `(C3, C4, C5)` as fractions of the best loss.
    pub fn default_fractions(self) -> [f64; 3] {
        match self {
            PenaltyType::One => [1.0 / 10.0, 1.0 / 168.0, 0.0],
            PenaltyType::Two | PenaltyType::Three => [1.0 / 8.0, -1.0 / 72.0, -1.0 / 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectorConfig {
    pub mode: SelectorMode,
    /// Ignored in group-13 mode.
    pub penalty: PenaltyType,
    pub lambda: f64,
    /// Quantile levels for the loss knots, e.g. 0.5 and 0.75.
    pub c1: f64,
    pub c2: f64,
    pub loss_window: usize,
    pub filter_band: f64,
    /// `(C3, C4, C5)` fractions of the best loss.
    pub fractions: [f64; 3],
    /// Forecast-sample index of the first selection.
    pub warm_up: usize,
}

impl SelectorConfig {
    pub fn group13(lambda: f64, c1: f64, c2: f64) -> Self {
        SelectorConfig {
            mode: SelectorMode::Group13,
            penalty: PenaltyType::One,
            lambda,
            c1,
            c2,
            loss_window: DEFAULT_LOSS_WINDOW,
            filter_band: DEFAULT_FILTER_BAND,
            fractions: [0.0; 3],
            warm_up: DEFAULT_LOSS_WINDOW,
        }
    }

    pub fn group14(penalty: PenaltyType, lambda: f64, c1: f64, c2: f64) -> Self {
        SelectorConfig {
            mode: SelectorMode::Group14,
            penalty,
            fractions: penalty.default_fractions(),
            ..Self::group13(lambda, c1, c2)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::Config(format!("lambda must lie in (0, 1], got {}", self.lambda)));
        }
        if !(0.0 < self.c1 && self.c1 < self.c2 && self.c2 <= 1.0) {
            return Err(Error::Config(format!("need 0 < c1 < c2 <= 1, got c1={} c2={}", self.c1, self.c2)));
        }
        if self.loss_window == 0 || self.warm_up == 0 {
            return Err(Error::Config("loss window and warm-up must be at least 1".into()));
        }
        if !(self.filter_band > 0.0) {
            return Err(Error::Config("filter band must be positive".into()));
        }
        if self.fractions.iter().any(|f| !f.is_finite()) {
            return Err(Error::Config("penalty fractions must be finite".into()));
        }
        Ok(())
    }

    /// `MG13_{c1}+{c2}_{lambda}` or `MG14_{c1}+{c2}_type-{k}_{lambda}`, with
    /// quantiles in percent and the decimal point dropped from lambda.
    pub fn code(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SelectorConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pct = |q: f64| format!("{}", (q * 100.0).round() as i64);
        let lambda = format!("{}", self.lambda).replace('.', "");
        match self.mode {
            SelectorMode::Group13 => write!(f, "MG13_{}+{}_{}", pct(self.c1), pct(self.c2), lambda),
            SelectorMode::Group14 => {
                write!(f, "MG14_{}+{}_type-{}_{}", pct(self.c1), pct(self.c2), self.penalty.number(), lambda)
            }
        }
    }
}

/// Models kept at one origin: forecast present, positive and with
/// `|f / y_t - 1| < band` (strict, see [`BAND_EDGE_TOL`]). Returns indices
/// into `forecasts`.
pub fn filter_candidates(forecasts: &[Option<f64>], y_t: f64, band: f64) -> Result<Vec<usize>> {
    if !(y_t > 0.0) {
        return Err(Error::InvalidInput(format!("current price must be positive, got {y_t}")));
    }
    Ok(forecasts
        .iter()
        .enumerate()
        .filter_map(|(h, f)| match f {
            Some(v) if *v > 0.0 && (v / y_t - 1.0).abs() < band - BAND_EDGE_TOL => Some(h),
            _ => None,
        })
        .collect())
}

/// Zero up to `c1`, quadratic up to `c2`, linear beyond, with matching value
/// and slope at both knots.
pub fn local_loss(x: f64, c1: f64, c2: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::InvalidInput(format!("local loss needs a non-negative error, got {x}")));
    }
    if !(0.0 <= c1 && c1 <= c2) {
        return Err(Error::InvalidInput(format!("local loss needs 0 <= c1 <= c2, got {c1}, {c2}")));
    }
    Ok(if x <= c1 {
        0.0
    } else if x <= c2 {
        (x - c1) * (x - c1) / 2.0
    } else {
        (c2 - c1) * x + (c1 * c1 - c2 * c2) / 2.0
    })
}

/// Local losses of every model at one error sample. Missing errors take the
/// cross-sectional median; knots are nearest-rank quantiles of the available
/// absolute errors. All-missing samples contribute nothing.
pub fn sample_losses(errors: &[Option<f64>], c1: f64, c2: f64) -> Vec<f64> {
    let abs: Vec<f64> = errors.iter().flatten().map(|e| e.abs()).collect();
    if abs.is_empty() {
        return vec![0.0; errors.len()];
    }
    let (k1, k2) = (nearest_rank(&abs, c1), nearest_rank(&abs, c2));
    let fill = median(&abs);
    errors
        .iter()
        .map(|e| local_loss(e.map_or(fill, f64::abs), k1, k2).expect("knots ordered and errors non-negative"))
        .collect()
}

/// `sum_j lambda^(newest - j) losses[j]` over the given samples, oldest first.
pub fn global_loss(losses: &[f64], lambda: f64) -> f64 {
    let n = losses.len();
    losses.iter().enumerate().map(|(j, l)| lambda.powi((n - 1 - j) as i32) * l).sum()
}

/// Switching penalty (or reward) for moving from `prev` to `h`.
pub fn penalty(h: &ModelSpec, prev: &ModelSpec, kind: PenaltyType, l_star: f64, fractions: [f64; 3]) -> f64 {
    let [c3, c4, c5] = fractions.map(|f| f * l_star);
    let diff = |a: usize, b: usize| (a as f64 - b as f64).abs();
    let pq = diff(h.p + h.q, prev.p + prev.q);
    let reward = c4 * (48.0 - h.w as f64) + c5 * diff(h.d, prev.d);
    match kind {
        PenaltyType::One => c3 * diff(h.p + h.d + h.q, prev.p + prev.d + prev.q) + c4 * diff(h.w, prev.w),
        PenaltyType::Two => c3 * pq + reward,
        PenaltyType::Three => {
            let same_d = if h.d == prev.d { 1.0 } else { 0.0 };
            c3 * same_d * pq + reward
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRecord {
    /// Forecast-sample index.
    pub k: usize,
    /// Forecast origin (bracket index).
    pub t: usize,
    /// `None` when the candidate set was empty and the random-walk fallback
    /// was used.
    pub spec: Option<ModelSpec>,
    /// Global loss of the winner.
    pub loss: f64,
    /// Loss plus penalty of the winner.
    pub objective: f64,
    pub filter_size: usize,
    pub forecast: f64,
}

impl SelectionRecord {
    pub fn is_fallback(&self) -> bool {
        self.spec.is_none()
    }
}

/// Precomputed per-sample local losses for one knot configuration.
struct LossTable {
    /// `losses[j][h]`
    losses: Vec<Vec<f64>>,
}

impl LossTable {
    fn new(table: &ForecastTable, c1: f64, c2: f64) -> Self {
        let losses = (0..table.origins.len())
            .map(|j| {
                let errs: Vec<Option<f64>> = (0..table.specs.len()).map(|h| table.error(h, j)).collect();
                sample_losses(&errs, c1, c2)
            })
            .collect();
        LossTable { losses }
    }

    fn global(&self, h: usize, k: usize, window: usize, lambda: f64) -> f64 {
        let from = k.saturating_sub(window);
        let hist: Vec<f64> = (from..k).map(|j| self.losses[j][h]).collect();
        global_loss(&hist, lambda)
    }
}

/// Runs the selector over every origin of `table` from the warm-up on.
/// `prices` is indexed by bracket.
pub fn run_selection(table: &ForecastTable, prices: &[f64], config: &SelectorConfig) -> Result<Vec<SelectionRecord>> {
    config.validate()?;
    let lt = LossTable::new(table, config.c1, config.c2);
    let mut prev: Option<ModelSpec> = None;
    let mut out = Vec::new();

    for k in config.warm_up..table.origins.len() {
        let t = table.origins[k];
        let y_t = *prices.get(t).ok_or_else(|| Error::InvalidInput(format!("no price at origin {t}")))?;
        let forecasts: Vec<Option<f64>> = (0..table.specs.len()).map(|h| table.forecast(h, k)).collect();
        let cand = filter_candidates(&forecasts, y_t, config.filter_band)?;
        if cand.is_empty() {
            out.push(SelectionRecord {
                k,
                t,
                spec: None,
                loss: f64::NAN,
                objective: f64::NAN,
                filter_size: 0,
                forecast: y_t,
            });
            continue;
        }

        let losses: Vec<f64> = cand.iter().map(|&h| lt.global(h, k, config.loss_window, config.lambda)).collect();
        let l_star = losses.iter().copied().fold(f64::INFINITY, f64::min);
        let mut best: Option<(f64, f64, usize)> = None;
        for (&h, &loss) in cand.iter().zip(&losses) {
            let spec = &table.specs[h];
            let obj = match (config.mode, &prev) {
                (SelectorMode::Group14, Some(p)) => loss + penalty(spec, p, config.penalty, l_star, config.fractions),
                _ => loss,
            };
            let better = match best {
                None => true,
                Some((bo, _, bh)) => obj < bo || (obj == bo && *spec < table.specs[bh]),
            };
            if better {
                best = Some((obj, loss, h));
            }
        }
        let (objective, loss, h) = best.expect("candidate set not empty");
        let spec = table.specs[h];
        prev = Some(spec);
        out.push(SelectionRecord {
            k,
            t,
            spec: Some(spec),
            loss,
            objective,
            filter_size: cand.len(),
            forecast: forecasts[h].expect("candidates have forecasts"),
        });
    }
    Ok(out)
}

/// Writes `t,group,w,p,d,q,loss,filter_size,forecast`. Fallback rows leave
/// the model fields and loss empty.
pub fn write_selection_csv<W: Write>(w: W, records: &[SelectionRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["t", "group", "w", "p", "d", "q", "loss", "filter_size", "forecast"])?;
    for r in records {
        let (g, win, p, d, q, loss) = match &r.spec {
            Some(s) => (
                s.group.to_string(),
                s.w.to_string(),
                s.p.to_string(),
                s.d.to_string(),
                s.q.to_string(),
                r.loss.to_string(),
            ),
            None => Default::default(),
        };
        wr.write_record([r.t.to_string(), g, win, p, d, q, loss, r.filter_size.to_string(), r.forecast.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads the selection CSV back. Forecast-sample indices are renumbered from 0.
pub fn read_selection_csv<R: std::io::Read>(r: R) -> Result<Vec<SelectionRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let err = |msg: &str| Error::Parse { line, msg: msg.to_string() };
        if rec.len() != 9 {
            return Err(err("expected 9 fields"));
        }
        let int = |j: usize| rec[j].parse::<usize>().map_err(|_| err("bad integer"));
        let num = |j: usize| rec[j].parse::<f64>().map_err(|_| err("bad number"));
        let spec = if rec[1].is_empty() {
            None
        } else {
            let g = u8::try_from(int(1)?).map_err(|_| err("bad group"))?;
            Some(ModelSpec::new(g, int(2)?, int(3)?, int(4)?, int(5)?).map_err(|e| err(&e.to_string()))?)
        };
        let loss = if rec[6].is_empty() { f64::NAN } else { num(6)? };
        out.push(SelectionRecord {
            k: i,
            t: int(0)?,
            spec,
            loss,
            objective: f64::NAN,
            filter_size: int(7)?,
            forecast: num(8)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{Cell, CellStatus};

    #[test]
    fn filter_band_edges() {
        let y = 100.0;
        let f = [Some(106.0), Some(100.0), Some(95.1), Some(94.9), None, Some(-1.0), Some(105.0), Some(104.99)];
        assert_eq!(filter_candidates(&f, y, 0.05).unwrap(), vec![1, 2, 7]);
        assert!(filter_candidates(&f, 0.0, 0.05).is_err());
    }

    #[test]
    fn local_loss_values() {
        assert_eq!(local_loss(0.5, 1.0, 3.0).unwrap(), 0.0);
        assert_eq!(local_loss(2.0, 1.0, 3.0).unwrap(), 0.5);
        assert_eq!(local_loss(4.0, 1.0, 3.0).unwrap(), 4.0);
        assert!(local_loss(-1.0, 1.0, 3.0).is_err());
    }

    #[test]
    fn global_loss_closed_form_and_decay() {
        let e = 1.7;
        let l = local_loss(e, 0.0, f64::INFINITY).unwrap();
        assert!((global_loss(&[l; 48], 1.0) - 48.0 * e * e / 2.0).abs() < 1e-10);
        // With lambda = 0.8 the fourth-newest term carries about half the newest weight.
        let w: Vec<f64> = (0..4).map(|i| 0.8f64.powi(i)).collect();
        assert!((w[3] / w[0] - 0.512).abs() < 1e-12);
        assert!((0.5f64.ln() / 0.8f64.ln() - 3.106).abs() < 1e-3);
    }

    #[test]
    fn penalty_examples() {
        let a = ModelSpec::new(0, 12, 1, 1, 0).unwrap();
        let b = ModelSpec::new(0, 96, 1, 1, 0).unwrap();
        let f1 = PenaltyType::One.default_fractions();
        assert_eq!(penalty(&a, &a, PenaltyType::One, 2.0, f1), 0.0);
        assert!((penalty(&a, &b, PenaltyType::One, 2.0, f1) - 1.0).abs() < 1e-12);
        let f2 = PenaltyType::Two.default_fractions();
        assert!((penalty(&a, &a, PenaltyType::Two, 2.0, f2) - (-2.0 / 72.0 * 36.0)).abs() < 1e-12);
        let c = ModelSpec::new(0, 12, 2, 2, 2).unwrap();
        // Type 3 with a change in d drops the p,q term entirely.
        let t3 = penalty(&c, &a, PenaltyType::Three, 2.0, f2);
        assert!((t3 - (-2.0 / 72.0 * 36.0 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn codes() {
        let c = SelectorConfig::group14(PenaltyType::One, 0.85, 0.5, 0.75);
        assert_eq!(c.code(), "MG14_50+75_type-1_085");
        assert_eq!(SelectorConfig::group13(1.0, 0.5, 0.75).code(), "MG13_50+75_1");
        assert_eq!(SelectorConfig::group14(PenaltyType::Three, 0.8, 0.25, 0.5).code(), "MG14_25+50_type-3_08");
    }

    #[test]
    fn validation() {
        assert!(SelectorConfig::group13(0.0, 0.5, 0.75).validate().is_err());
        assert!(SelectorConfig::group13(1.1, 0.5, 0.75).validate().is_err());
        assert!(SelectorConfig::group13(0.9, 0.75, 0.75).validate().is_err());
        assert!(SelectorConfig::group13(0.9, 0.25, 0.5).validate().is_ok());
    }

    fn toy_table(errors: &[Vec<Option<f64>>], y: f64) -> ForecastTable {
        let specs: Vec<ModelSpec> = (0..errors.len()).map(|i| ModelSpec::new(0, 12 + i, 0, 1, 0).unwrap()).collect();
        let k = errors[0].len();
        let cells = errors
            .iter()
            .flat_map(|row| {
                row.iter().map(|e| Cell {
                    forecast: e.map(|_| y),
                    error: *e,
                    status: if e.is_some() { CellStatus::Ok } else { CellStatus::Failed },
                })
            })
            .collect();
        ForecastTable { specs, origins: (0..k).collect(), cells }
    }

    #[test]
    fn identical_histories_tie_to_first_spec() {
        let row: Vec<Option<f64>> = (0..60).map(|i| Some((i % 7) as f64 - 3.0)).collect();
        let table = toy_table(&[row.clone(), row.clone(), row], 100.0);
        let sel = run_selection(&table, &[100.0; 60], &SelectorConfig::group13(0.9, 0.25, 0.5)).unwrap();
        assert_eq!(sel.len(), 12);
        assert!(sel.iter().all(|r| r.spec == Some(table.specs[0])));
    }

    #[test]
    fn empty_filter_falls_back() {
        let row: Vec<Option<f64>> = vec![None; 50];
        let table = toy_table(&[row], 100.0);
        let sel = run_selection(&table, &[100.0; 50], &SelectorConfig::group13(0.9, 0.25, 0.5)).unwrap();
        assert!(sel.iter().all(|r| r.is_fallback() && r.forecast == 100.0));
    }

    #[test]
    fn missing_errors_take_median() {
        let l = sample_losses(&[Some(1.0), Some(-3.0), None, Some(5.0)], 0.25, 0.5);
        // |e| = {1, 3, 5}; knots 1 and 3; the missing model gets |e| = 3.
        assert_eq!(l, vec![0.0, 2.0, 2.0, 2.0 * 5.0 + (1.0 - 9.0) / 2.0]);
    }

    #[test]
    fn csv_round_trip() {
        let row: Vec<Option<f64>> = (0..52).map(|i| Some(i as f64 * 0.1)).collect();
        let table = toy_table(&[row.clone(), row], 100.0);
        let sel = run_selection(&table, &[100.0; 52], &SelectorConfig::group13(1.0, 0.5, 0.75)).unwrap();
        let mut buf = Vec::new();
        write_selection_csv(&mut buf, &sel).unwrap();
        let back = read_selection_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), sel.len());
        for (a, b) in back.iter().zip(&sel) {
            assert_eq!((a.t, a.spec, a.forecast, a.filter_size), (b.t, b.spec, b.forecast, b.filter_size));
            assert_eq!(a.loss, b.loss);
        }
    }
}
