//! The fixed-model grid: windowed ARIMAX (groups 0-6) and VARMA (groups
//! 7-12) forecasters refit at every forecast origin.
//!
//! Every fit sees only the `w` brackets ending at the origin `t`, so results
//! cannot depend on later data or on data before the window.

pub mod arimax;
pub mod forecast;
pub mod grid;
mod kalman;
pub mod optim;
pub mod spec;
pub mod transform;
pub mod varma;

pub use arimax::{fit_univariate, ArimaxFit};
pub use forecast::{forecast_levels, forecast_one_step};
pub use grid::{run_fixed_grid, Cell, CellStatus, ForecastTable};
pub use spec::{enumerate_models, ModelKind, ModelSpec};
pub use varma::{fit_multivariate, VarmaFit};

use crate::error::{Error, Result};
use crate::market_data::BracketSeries;

/// Prices, features and session-boundary flags aligned by bracket index.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ModelInput {
    pub y: Vec<f64>,
    /// Empty when no features are available.
    pub x: Vec<[f64; 4]>,
    /// `true` at the first bracket after a day or lunch gap.
    pub boundary: Vec<bool>,
}

impl ModelInput {
    pub fn from_series(series: &BracketSeries) -> Self {
        ModelInput {
            y: series.prices(),
            x: series.features.iter().map(|f| f.as_array()).collect(),
            boundary: series.boundaries(),
        }
    }

    /// A bare price path with no features and no boundaries.
    pub fn from_prices(y: Vec<f64>) -> Self {
        let boundary = vec![false; y.len()];
        ModelInput { y, x: Vec::new(), boundary }
    }

    pub fn with_features(mut self, x: Vec<[f64; 4]>) -> Result<Self> {
        if x.len() != self.y.len() {
            return Err(Error::InvalidInput(format!("{} feature rows for {} prices", x.len(), self.y.len())));
        }
        self.x = x;
        Ok(self)
    }

    pub fn with_boundaries(mut self, boundary: Vec<bool>) -> Result<Self> {
        if boundary.len() != self.y.len() {
            return Err(Error::InvalidInput("boundary flags not aligned with prices".into()));
        }
        self.boundary = boundary;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Feature columns `cols` at bracket `t`.
    pub(crate) fn features_at(&self, t: usize, cols: &[usize]) -> Result<Vec<f64>> {
        if cols.is_empty() {
            return Ok(Vec::new());
        }
        let row = self.x.get(t).ok_or_else(|| Error::UndefinedFeature(format!("no features at bracket {t}")))?;
        let vals: Vec<f64> = cols.iter().map(|&c| row[c]).collect();
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::UndefinedFeature(format!("non-finite feature at bracket {t}")));
        }
        Ok(vals)
    }

    /// The `spec.w` brackets ending at `t`.
    pub(crate) fn window(&self, spec: &ModelSpec, t: usize) -> Result<Window<'_>> {
        if t >= self.y.len() {
            return Err(Error::InvalidInput(format!("origin {t} beyond series of length {}", self.y.len())));
        }
        if t + 1 < spec.w {
            return Err(Error::InsufficientData {
                needed: spec.w,
                have: t + 1,
            });
        }
        let start = t + 1 - spec.w;
        let cols = spec.features();
        let x: Vec<Vec<f64>> = (start..=t).map(|i| self.features_at(i, cols)).collect::<Result<_>>()?;
        Ok(Window {
            start,
            y: &self.y[start..=t],
            x,
            boundary: &self.boundary[start..=t],
        })
    }
}

pub(crate) struct Window<'a> {
    pub start: usize,
    pub y: &'a [f64],
    /// Selected feature columns per bracket.
    pub x: Vec<Vec<f64>>,
    pub boundary: &'a [bool],
}

impl Window<'_> {
    /// Window-local boundary indices whose differenced footprint touches a
    /// sample index in `first..len`.
    pub fn dummies(&self, d: usize, first: usize) -> Vec<usize> {
        (1..self.y.len())
            .filter(|&b| self.boundary[b] && b + d > first)
            .collect()
    }
}

/// Coefficients of `(1 - L)^k`.
pub(crate) fn diff_poly(k: usize) -> Vec<f64> {
    let mut c = vec![1.0];
    for _ in 0..k {
        let mut next = vec![0.0; c.len() + 1];
        for (i, v) in c.iter().enumerate() {
            next[i] += v;
            next[i + 1] -= v;
        }
        c = next;
    }
    c
}

/// Value at index `i` of the `d`-times differenced indicator of a level
/// shift starting at `b`.
pub(crate) fn footprint(b: usize, i: usize, d: usize) -> f64 {
    if i < b {
        return 0.0;
    }
    diff_poly(d - 1).get(i - b).copied().unwrap_or(0.0)
}

/// A fitted model of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamEstimate {
    Univariate(ArimaxFit),
    Multivariate(VarmaFit),
}

impl ParamEstimate {
    pub fn spec(&self) -> &ModelSpec {
        match self {
            ParamEstimate::Univariate(f) => &f.spec,
            ParamEstimate::Multivariate(f) => &f.spec,
        }
    }

    pub fn t(&self) -> usize {
        match self {
            ParamEstimate::Univariate(f) => f.t,
            ParamEstimate::Multivariate(f) => f.t,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            ParamEstimate::Univariate(f) => f.converged,
            ParamEstimate::Multivariate(f) => f.converged,
        }
    }

    pub fn log_likelihood(&self) -> f64 {
        match self {
            ParamEstimate::Univariate(f) => f.log_likelihood,
            ParamEstimate::Multivariate(f) => f.log_likelihood,
        }
    }
}

/// Fits `spec` on the window ending at `t`.
pub fn fit(spec: &ModelSpec, input: &ModelInput, t: usize) -> Result<ParamEstimate> {
    match spec.kind() {
        ModelKind::Univariate => fit_univariate(spec, input, t).map(ParamEstimate::Univariate),
        ModelKind::Multivariate => fit_multivariate(spec, input, t).map(ParamEstimate::Multivariate),
    }
}
