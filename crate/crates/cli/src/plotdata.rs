//! Long-format `series,x,y` files derived from stage CSVs.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// From `cum_pl.csv`: one series per model code over dates.
    CumulativePl,
    /// From `adf_scan.csv`: p-value series per differencing level.
    AdfScan,
    /// From a selection CSV: selection counts by window, group and `d`.
    SelectionHistogram,
    /// From a test CSV: Bayes factor by period start.
    BfSeries,
}

impl PlotKind {
    pub fn name(self) -> &'static str {
        match self {
            PlotKind::CumulativePl => "cumulative-pl",
            PlotKind::AdfScan => "adf-scan",
            PlotKind::SelectionHistogram => "selection-histogram",
            PlotKind::BfSeries => "bf-series",
        }
    }
}

impl FromStr for PlotKind {
    type Err = PlotError;

    fn from_str(s: &str) -> Result<Self, PlotError> {
        [PlotKind::CumulativePl, PlotKind::AdfScan, PlotKind::SelectionHistogram, PlotKind::BfSeries]
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PlotError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum PlotError {
    #[error("unknown plot kind {0:?}")]
    UnknownKind(String),

    #[error("artifact has no column {0:?}")]
    MissingColumn(&'static str),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn column(headers: &csv::StringRecord, name: &'static str) -> Result<usize, PlotError> {
    headers.iter().position(|h| h == name).ok_or(PlotError::MissingColumn(name))
}

/// Reads a stage CSV and writes the plot-ready form.
pub fn emit_plotdata<R: Read, W: Write>(artifact: R, kind: PlotKind, out: W) -> Result<(), PlotError> {
    let mut rd = csv::Reader::from_reader(artifact);
    let headers = rd.headers()?.clone();
    let mut rows: Vec<[String; 3]> = Vec::new();
    match kind {
        PlotKind::CumulativePl => {
            let (m, d, v) = (column(&headers, "model_code")?, column(&headers, "date")?, column(&headers, "cum_pl")?);
            for rec in rd.records() {
                let rec = rec?;
                rows.push([rec[m].to_string(), rec[d].to_string(), rec[v].to_string()]);
            }
        }
        PlotKind::AdfScan => {
            let (t, d, p) = (column(&headers, "t")?, column(&headers, "d")?, column(&headers, "p_value")?);
            for rec in rd.records() {
                let rec = rec?;
                rows.push([format!("d{}", &rec[d]), rec[t].to_string(), rec[p].to_string()]);
            }
            // Group rows by series, keeping time order inside each.
            rows.sort_by(|a, b| a[0].cmp(&b[0]));
        }
        PlotKind::SelectionHistogram => {
            let cols = [("w", column(&headers, "w")?), ("group", column(&headers, "group")?), ("d", column(&headers, "d")?)];
            let mut counts: BTreeMap<(&str, String), usize> = BTreeMap::new();
            for rec in rd.records() {
                let rec = rec?;
                for (name, j) in cols {
                    let key = if rec[j].is_empty() { "fallback".to_string() } else { rec[j].to_string() };
                    *counts.entry((name, key)).or_default() += 1;
                }
            }
            let mut entries: Vec<_> = counts.into_iter().collect();
            let numeric = |s: &str| s.parse::<u64>().unwrap_or(u64::MAX);
            entries.sort_by(|a, b| (a.0 .0, numeric(&a.0 .1)).cmp(&(b.0 .0, numeric(&b.0 .1))));
            for ((name, key), n) in entries {
                rows.push([name.to_string(), key, n.to_string()]);
            }
        }
        PlotKind::BfSeries => {
            let (t, b) = (column(&headers, "period_start")?, column(&headers, "bayes_factor")?);
            for rec in rd.records() {
                let rec = rec?;
                rows.push(["bayes_factor".to_string(), rec[t].to_string(), rec[b].to_string()]);
            }
        }
    }
    let mut wr = csv::Writer::from_writer(out);
    wr.write_record(["series", "x", "y"])?;
    for r in rows {
        wr.write_record(&r)?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}
