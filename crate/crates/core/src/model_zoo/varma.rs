use nalgebra::{DMatrix, DVector};

use super::kalman::vma_gls;
use super::optim::{minimize, BfgsOptions};
use super::transform::contract;
use super::{footprint, ModelInput, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::stats::difference;

/// Fitted `S_tau = mu + Gamma S_{tau-1} + dummies + e_tau + Phi e_{tau-1}` on
/// `S = (Delta^d y, x)`, in original units. Coordinate 0 is the price channel.
#[derive(Debug, Clone, PartialEq)]
pub struct VarmaFit {
    pub spec: ModelSpec,
    pub t: usize,
    /// Feature columns of coordinates `1..n`. Columns that are constant over
    /// the window are dropped.
    pub channels: Vec<usize>,
    pub mu: DVector<f64>,
    pub gamma: DMatrix<f64>,
    pub ma: Option<DMatrix<f64>>,
    pub sigma: DMatrix<f64>,
    /// `(bracket index of the boundary, coefficient)` in the price equation.
    pub dummies: Vec<(usize, f64)>,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Filtered `e_t`.
    pub eps_hat: DVector<f64>,
}

impl VarmaFit {
    pub fn dim(&self) -> usize {
        self.mu.len()
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

fn lower_from(params: &[f64], n: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = if i == j { params[k].exp() } else { params[k] };
            k += 1;
        }
    }
    l
}

fn lower_params(l: &DMatrix<f64>) -> Vec<f64> {
    let n = l.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in 0..=i {
            out.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
        }
    }
    out
}

fn is_pd(sigma: &DMatrix<f64>) -> bool {
    let eig = sigma.clone().symmetric_eigen().eigenvalues;
    let max = eig.max();
    max > 0.0 && eig.min() > 1e-10 * max && sigma.iter().all(|v| v.is_finite())
}

/// Maximum likelihood fit of a VARMA(1, q) spec on the window ending at `t`.
///
/// Channels are standardised over the window for the optimiser and mapped
/// back afterwards. Constant, AR matrix and dummies are profiled out by GLS.
/// With `q = 0` the fit is equation-by-equation least squares; with `q = 1`
/// BFGS runs over the MA matrix (norm-contracted) and a log-Cholesky factor
/// of the innovation covariance.
pub fn fit_multivariate(spec: &ModelSpec, input: &ModelInput, t: usize) -> Result<VarmaFit> {
    if spec.kind() != ModelKind::Multivariate {
        return Err(Error::InvalidInput(format!("{spec} is not multivariate")));
    }
    let win = input.window(spec, t)?;
    let d = spec.d;
    let w = win.y.len();
    let z = difference(win.y, d);

    let mut raw: Vec<Vec<f64>> = vec![z];
    let mut channels = Vec::new();
    for (c, &col) in spec.features().iter().enumerate() {
        let series: Vec<f64> = (d..w).map(|i| win.x[i][c]).collect();
        let (m, sd) = mean_sd(&series);
        if sd > 1e-12 * (1.0 + m.abs()) {
            raw.push(series);
            channels.push(col);
        }
    }
    let n = raw.len();
    let scale: Vec<(f64, f64)> = raw.iter().map(|s| mean_sd(s)).collect();
    if !(scale[0].1 > 0.0) {
        return Err(Error::FitFailed(format!("{spec}: differenced prices constant over window")));
    }
    // std[c][i - d] is channel c at window index i
    let std: Vec<Vec<f64>> = raw.iter().zip(&scale).map(|(s, (m, sd))| s.iter().map(|v| (v - m) / sd).collect()).collect();

    let first = d + 1;
    let n_obs = w - first;
    let dummies = win.dummies(d, first);
    let k = n + n * n + dummies.len();
    if n_obs * n <= k + n * (n + 1) {
        return Err(Error::FitFailed(format!("{spec}: {n_obs} observations for {k} regression coefficients")));
    }

    let mut obs = DMatrix::zeros(n_obs * n, 1 + k);
    for (r, i) in (first..w).enumerate() {
        for c in 0..n {
            let row = r * n + c;
            obs[(row, 0)] = std[c][i - d];
            obs[(row, 1 + c)] = 1.0;
            for j in 0..n {
                obs[(row, 1 + n + j * n + c)] = std[j][i - 1 - d];
            }
        }
        for (c, &b) in dummies.iter().enumerate() {
            obs[(r * n, 1 + n + n * n + c)] = footprint(b, i, d);
        }
    }
    let ridge = vec![0.0; k];
    let eye = DMatrix::identity(n, n);

    let ls = vma_gls(&obs, n, &[], &eye, &ridge).ok_or_else(|| Error::FitFailed(format!("{spec}: singular design")))?;
    let mut sigma_ls = DMatrix::zeros(n, n);
    let mut last_resid = DVector::zeros(n);
    for r in 0..n_obs {
        let block = obs.rows(r * n, n);
        let e = block.column(0) - block.columns(1, k) * &ls.theta;
        sigma_ls += &e * e.transpose();
        last_resid = e;
    }
    sigma_ls /= n_obs as f64;
    if !is_pd(&sigma_ls) {
        return Err(Error::FitFailed(format!("{spec}: residual covariance not positive definite")));
    }

    let nf = n_obs as f64;
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let (theta, ma, sigma, eps, ll_std, converged, iterations) = if spec.q == 0 {
        let ll = -0.5 * nf * (n as f64 * ln2pi + sigma_ls.determinant().ln() + n as f64);
        (ls.theta, None, sigma_ls, last_resid, ll, true, 0)
    } else {
        let unpack = |x: &[f64]| {
            let phi = DMatrix::from_column_slice(n, n, &contract(&x[..n * n]));
            let l = lower_from(&x[n * n..], n);
            (phi, &l * l.transpose())
        };
        let objective = |x: &[f64]| {
            let (phi, sigma) = unpack(x);
            match vma_gls(&obs, n, &[phi], &sigma, &ridge) {
                Some(fit) => (fit.logdet + fit.rss) / (2.0 * nf),
                None => f64::INFINITY,
            }
        };
        let l0 = sigma_ls.clone().cholesky().expect("checked positive definite").l();
        let mut x0 = vec![0.0; n * n];
        x0.extend(lower_params(&l0));
        let opt = minimize(objective, &x0, BfgsOptions::default());
        let (phi, sigma) = unpack(&opt.x);
        let fit = vma_gls(&obs, n, &[phi.clone()], &sigma, &ridge).ok_or_else(|| Error::FitFailed(format!("{spec}: filter breakdown")))?;
        if !is_pd(&sigma) {
            return Err(Error::FitFailed(format!("{spec}: innovation covariance not positive definite")));
        }
        let ll = -0.5 * (nf * n as f64 * ln2pi + fit.logdet + fit.rss);
        let eps = fit.last_state.rows(0, n).clone_owned();
        (fit.theta, Some(phi), sigma, eps, ll, opt.converged, opt.iterations)
    };

    // Back to original units.
    let m = DVector::from_iterator(n, scale.iter().map(|s| s.0));
    let dscale = DMatrix::from_diagonal(&DVector::from_iterator(n, scale.iter().map(|s| s.1)));
    let dinv = DMatrix::from_diagonal(&DVector::from_iterator(n, scale.iter().map(|s| 1.0 / s.1)));
    let mu_std = theta.rows(0, n).clone_owned();
    let gamma_std = DMatrix::from_column_slice(n, n, theta.rows(n, n * n).as_slice());
    let gamma = &dscale * gamma_std * &dinv;
    let mu = &m + &dscale * mu_std - &gamma * &m;
    let log_jacobian: f64 = scale.iter().map(|s| s.1.ln()).sum();

    Ok(VarmaFit {
        spec: *spec,
        t,
        channels,
        mu,
        gamma,
        ma: ma.map(|phi| &dscale * phi * &dinv),
        sigma: &dscale * sigma * &dscale,
        dummies: dummies
            .iter()
            .enumerate()
            .map(|(c, &b)| (win.start + b, scale[0].1 * theta[n + n * n + c]))
            .collect(),
        log_likelihood: ll_std - nf * log_jacobian,
        converged,
        iterations,
        n_obs,
        eps_hat: &dscale * eps,
    })
}
