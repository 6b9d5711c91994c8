use std::collections::BTreeSet;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::{fit, forecast_one_step, ModelInput, ModelSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    NotConverged,
    Failed,
}

impl CellStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::NotConverged => "not_converged",
            CellStatus::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(CellStatus::Ok),
            "not_converged" => Some(CellStatus::NotConverged),
            "failed" => Some(CellStatus::Failed),
            _ => None,
        }
    }
}

/// One `(model, origin)` result. Forecast and error are `None` whenever the
/// fit failed or did not converge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub forecast: Option<f64>,
    /// `y_{t+1} - forecast`, when `y_{t+1}` exists.
    pub error: Option<f64>,
    pub status: CellStatus,
}

/// Forecasts of every spec at every origin, stored spec-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    pub specs: Vec<ModelSpec>,
    pub origins: Vec<usize>,
    pub cells: Vec<Cell>,
}

impl ForecastTable {
    pub fn cell(&self, h: usize, k: usize) -> &Cell {
        &self.cells[h * self.origins.len() + k]
    }

    pub fn forecast(&self, h: usize, k: usize) -> Option<f64> {
        self.cell(h, k).forecast
    }

    pub fn error(&self, h: usize, k: usize) -> Option<f64> {
        self.cell(h, k).error
    }

    pub fn spec_index(&self, spec: &ModelSpec) -> Option<usize> {
        self.specs.iter().position(|s| s == spec)
    }

    /// Fraction of cells with a forecast.
    pub fn coverage(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().filter(|c| c.forecast.is_some()).count() as f64 / self.cells.len() as f64
    }

    /// Writes `group,w,p,d,q,t,forecast,error,status`; missing values are empty.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["group", "w", "p", "d", "q", "t", "forecast", "error", "status"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for (h, s) in self.specs.iter().enumerate() {
            for (k, t) in self.origins.iter().enumerate() {
                let c = self.cell(h, k);
                wr.write_record([
                    s.group.to_string(),
                    s.w.to_string(),
                    s.p.to_string(),
                    s.d.to_string(),
                    s.q.to_string(),
                    t.to_string(),
                    opt(c.forecast),
                    opt(c.error),
                    c.status.as_str().to_string(),
                ])?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let err = |msg: &str| Error::Parse { line, msg: msg.to_string() };
            if rec.len() != 9 {
                return Err(err("expected 9 fields"));
            }
            let int = |j: usize| rec[j].parse::<usize>().map_err(|_| err("bad integer"));
            let opt = |j: usize| -> Result<Option<f64>> {
                if rec[j].is_empty() {
                    Ok(None)
                } else {
                    rec[j].parse::<f64>().map(Some).map_err(|_| err("bad number"))
                }
            };
            let group = u8::try_from(int(0)?).map_err(|_| err("bad group"))?;
            let spec = ModelSpec::new(group, int(1)?, int(2)?, int(3)?, int(4)?).map_err(|e| err(&e.to_string()))?;
            let status = CellStatus::parse(&rec[8]).ok_or_else(|| err("bad status"))?;
            rows.push((spec, int(5)?, Cell { forecast: opt(6)?, error: opt(7)?, status }));
        }
        let mut specs: Vec<ModelSpec> = Vec::new();
        for (s, _, _) in &rows {
            if specs.last() != Some(s) {
                specs.push(*s);
            }
        }
        let origins: Vec<usize> = rows.iter().map(|r| r.1).collect::<BTreeSet<_>>().into_iter().collect();
        if specs.len() * origins.len() != rows.len() {
            return Err(Error::InvalidInput("forecast table is not a complete grid".into()));
        }
        for (i, (s, t, _)) in rows.iter().enumerate() {
            if *s != specs[i / origins.len()] || *t != origins[i % origins.len()] {
                return Err(Error::InvalidInput("forecast table rows out of order".into()));
            }
        }
        Ok(ForecastTable {
            specs,
            origins,
            cells: rows.into_iter().map(|r| r.2).collect(),
        })
    }
}

fn run_cell(spec: &ModelSpec, input: &ModelInput, t: usize) -> Result<Cell> {
    let missing = |status| Cell {
        forecast: None,
        error: None,
        status,
    };
    let est = match fit(spec, input, t) {
        Ok(e) => e,
        Err(Error::FitFailed(_)) | Err(Error::Degenerate(_)) => return Ok(missing(CellStatus::Failed)),
        Err(e) => return Err(e),
    };
    if !est.converged() {
        return Ok(missing(CellStatus::NotConverged));
    }
    let f = forecast_one_step(&est, input)?;
    if !f.is_finite() {
        return Ok(missing(CellStatus::Failed));
    }
    Ok(Cell {
        forecast: Some(f),
        error: input.y.get(t + 1).map(|y| y - f),
        status: CellStatus::Ok,
    })
}

/// Refits every spec at every origin and forecasts one step ahead. Cells are
/// independent and evaluated in parallel; output order is fixed.
pub fn run_fixed_grid(input: &ModelInput, specs: &[ModelSpec], origins: &[usize]) -> Result<ForecastTable> {
    let max_w = specs.iter().map(|s| s.w).max().unwrap_or(0);
    if let Some(&t) = origins.iter().find(|&&t| t < max_w || t >= input.len()) {
        return Err(Error::InvalidInput(format!("origin {t} needs {max_w} prior brackets inside a series of {}", input.len())));
    }
    let cells = (0..specs.len() * origins.len())
        .into_par_iter()
        .map(|i| run_cell(&specs[i / origins.len()], input, origins[i % origins.len()]))
        .collect::<Result<Vec<_>>>()?;
    Ok(ForecastTable {
        specs: specs.to_vec(),
        origins: origins.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{bracketize, synth_ticks, SynthParams};

    #[test]
    fn grid_shape_determinism_and_round_trip() {
        let ticks = synth_ticks(2, 3, &SynthParams::default()).unwrap();
        let mut series = bracketize(&ticks).unwrap();
        crate::features::attach_features(&mut series, &ticks).unwrap();
        let input = ModelInput::from_series(&series);
        let specs = vec![
            ModelSpec::new(0, 48, 0, 1, 0).unwrap(),
            ModelSpec::new(3, 24, 1, 1, 1).unwrap(),
            ModelSpec::new(8, 48, 1, 1, 0).unwrap(),
        ];
        let origins: Vec<usize> = series.forecast_origins(48).into_iter().take(10).collect();
        let a = run_fixed_grid(&input, &specs, &origins).unwrap();
        assert_eq!(a.cells.len(), 30);
        let b = run_fixed_grid(&input, &specs, &origins).unwrap();
        assert_eq!(a, b);

        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let back = ForecastTable::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, a);
        for (k, &t) in a.origins.iter().enumerate() {
            if let (Some(f), Some(e)) = (a.forecast(0, k), a.error(0, k)) {
                assert_eq!(e, input.y[t + 1] - f);
            }
        }
    }

    #[test]
    fn origins_validated() {
        let input = ModelInput::from_prices((0..50).map(|i| 100.0 + (i as f64).sin()).collect());
        let specs = [ModelSpec::new(0, 24, 0, 1, 0).unwrap()];
        assert!(run_fixed_grid(&input, &specs, &[10]).is_err());
        assert!(run_fixed_grid(&input, &specs, &[50]).is_err());
        let t = run_fixed_grid(&input, &specs, &[49]).unwrap();
        assert!(t.forecast(0, 0).is_some() && t.error(0, 0).is_none());
    }
}
