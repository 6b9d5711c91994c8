//! Fixed-lag augmented Dickey-Fuller test and the rolling, iterated-difference
//! scan built on it.
//!
//! The test regression is run in levels, `y_t = mu + phi_1 y_{t-1} + phi_2 y_{t-2} + e_t`,
//! and the statistic is `(phi_1_hat - 1) / se(phi_1_hat)`. P-values come from
//! MacKinnon's (1994) response surface for the constant, no-trend case.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::{difference, normal_cdf};

/// Autoregressive lag used in every test.
pub const ADF_LAG: usize = 2;
/// Shortest series accepted by [`adf_test`].
pub const ADF_MIN_LEN: usize = 10;
/// Windows examined in the exploratory analysis.
pub const PAPER_WINDOWS: [usize; 3] = [12, 48, 96];
pub const SIGNIFICANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdfResult {
    pub t_stat: f64,
    pub p_value: f64,
    /// Observations in the test regression.
    pub n_used: usize,
    pub lag: usize,
}

// Response-surface coefficients for one regressor with a constant.
const TAU_MAX: f64 = 2.74;
const TAU_MIN: f64 = -18.83;
const TAU_STAR: f64 = -1.61;
const TAU_SMALL_P: [f64; 3] = [2.1659, 1.4412, 0.038269];
const TAU_LARGE_P: [f64; 4] = [1.7339, 0.93202, -0.12745, -0.010368];

fn polyval(coefs: &[f64], x: f64) -> f64 {
    coefs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Approximate asymptotic p-value of a Dickey-Fuller t statistic.
pub fn mackinnon_p(tau: f64) -> f64 {
    if tau > TAU_MAX {
        return 1.0;
    }
    if tau < TAU_MIN {
        return 0.0;
    }
    let z = if tau <= TAU_STAR {
        polyval(&TAU_SMALL_P, tau)
    } else {
        polyval(&TAU_LARGE_P, tau)
    };
    normal_cdf(z)
}

/// Finite-sample critical values (1%, 5%, 10%) for the constant case, from
/// MacKinnon's (2010) response surfaces. Shipped for cross-checking the
/// p-value surface.
pub fn critical_values(n_obs: usize) -> [f64; 3] {
    let t = n_obs as f64;
    let surf = |b: [f64; 4]| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t);
    [
        surf([-3.43035, -6.5393, -16.786, -79.433]),
        surf([-2.86154, -2.8903, -4.234, -40.040]),
        surf([-2.56677, -1.5384, -2.809, 0.0]),
    ]
}

/// Runs the fixed-lag ADF regression on `series`.
pub fn adf_test(series: &[f64]) -> Result<AdfResult> {
    let n = series.len();
    if n < ADF_MIN_LEN {
        return Err(Error::InsufficientData {
            needed: ADF_MIN_LEN,
            have: n,
        });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in series".into()));
    }

    // Regress on centred columns; the intercept is implied.
    let rows = n - ADF_LAG;
    let target = &series[ADF_LAG..];
    let lag1 = &series[ADF_LAG - 1..n - 1];
    let lag2 = &series[..n - ADF_LAG];
    let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (my, m1, m2) = (m(target), m(lag1), m(lag2));

    let (mut s11, mut s12, mut s22, mut s1y, mut s2y) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..rows {
        let (a, b, c) = (lag1[i] - m1, lag2[i] - m2, target[i] - my);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        s1y += a * c;
        s2y += b * c;
    }
    let det = s11 * s22 - s12 * s12;
    if s11 <= 0.0 || s22 <= 0.0 || det <= 1e-12 * s11 * s22 {
        return Err(Error::Degenerate("lagged regressors have no independent variation".into()));
    }
    let phi1 = (s22 * s1y - s12 * s2y) / det;
    let phi2 = (s11 * s2y - s12 * s1y) / det;

    let mut rss = 0.0;
    for i in 0..rows {
        let r = (target[i] - my) - phi1 * (lag1[i] - m1) - phi2 * (lag2[i] - m2);
        rss += r * r;
    }
    let dof = rows - (ADF_LAG + 1);
    let s2 = rss / dof as f64;
    if !(s2 > 0.0) {
        return Err(Error::Degenerate("regression fits exactly".into()));
    }
    let se = (s2 * s22 / det).sqrt();
    let t_stat = (phi1 - 1.0) / se;
    Ok(AdfResult {
        t_stat,
        p_value: mackinnon_p(t_stat),
        n_used: rows,
        lag: ADF_LAG,
    })
}

/// Test results at one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub t: usize,
    /// `p_values[d]` is `Some` when difference level `d` was tested and the
    /// regression was not degenerate.
    pub p_values: Vec<Option<f64>>,
    /// Smallest `d` with `p < 0.05`, or `d_max` when none qualifies.
    pub d_star: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RollingAdfScan {
    pub w: usize,
    pub d_max: usize,
    /// Set when `w` is not one of 12, 48, 96.
    pub outside_grid: bool,
    pub points: Vec<ScanPoint>,
}

impl RollingAdfScan {
    /// `p_t(d; w)` for every `t` where it was computed.
    pub fn p_series(&self, d: usize) -> Vec<f64> {
        self.points.iter().filter_map(|p| p.p_values.get(d).copied().flatten()).collect()
    }

    /// Writes `t,w,d,p_value,d_star`, one row per computed test.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["t", "w", "d", "p_value", "d_star"])?;
        for p in &self.points {
            for (d, pv) in p.p_values.iter().enumerate() {
                if let Some(v) = pv {
                    wr.write_record([p.t.to_string(), self.w.to_string(), d.to_string(), v.to_string(), p.d_star.to_string()])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }
}

fn scan_window(window: &[f64], d_max: usize) -> (Vec<Option<f64>>, usize) {
    let mut p_values = vec![None; d_max + 1];
    for (d, slot) in p_values.iter_mut().enumerate() {
        let p = adf_test(&difference(window, d)).ok().map(|r| r.p_value);
        *slot = p;
        if matches!(p, Some(v) if v < SIGNIFICANCE) {
            return (p_values, d);
        }
    }
    (p_values, d_max)
}

/// For every `t >= w`, tests `y[t-w..t]`, differencing and retesting while
/// `p >= 0.05`, up to `d_max` differences.
pub fn rolling_adf(series: &[f64], w: usize, d_max: usize) -> Result<RollingAdfScan> {
    if series.len() <= w + d_max {
        return Err(Error::InsufficientData {
            needed: w + d_max + 1,
            have: series.len(),
        });
    }
    if w < ADF_MIN_LEN + d_max {
        return Err(Error::InvalidInput(format!(
            "window {w} leaves fewer than {ADF_MIN_LEN} points after {d_max} differences"
        )));
    }
    let points = (w..series.len())
        .into_par_iter()
        .map(|t| {
            let (p_values, d_star) = scan_window(&series[t - w..t], d_max);
            ScanPoint { t, p_values, d_star }
        })
        .collect();
    Ok(RollingAdfScan {
        w,
        d_max,
        outside_grid: !PAPER_WINDOWS.contains(&w),
        points,
    })
}
