use nalgebra::DMatrix;

use super::kalman::vma_gls;
use super::optim::{minimize, BfgsOptions};
use super::transform::{pacf_to_ar, pacf_to_ma};
use super::{footprint, ModelInput, ModelKind, ModelSpec};
use crate::error::{Error, Result};
use crate::stats::difference;

/// Ridge on the feature loadings, so a constant or all-zero feature column
/// still gives a unique solution.
pub const FEATURE_RIDGE: f64 = 1e-8;

/// Fitted `Gamma(L) (1 - L)^d y_tau = mu + beta' x_{tau-1} + dummies + Phi(L) e_tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArimaxFit {
    pub spec: ModelSpec,
    pub t: usize,
    pub mu: f64,
    /// `gamma_i` of `1 - sum gamma_i L^i`.
    pub ar: Vec<f64>,
    /// `phi_j` of `1 + sum phi_j L^j`.
    pub ma: Vec<f64>,
    /// `(feature column, loading)`.
    pub beta: Vec<(usize, f64)>,
    /// `(bracket index of the boundary, coefficient)`.
    pub dummies: Vec<(usize, f64)>,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub n_obs: usize,
    /// Filtered `e_t, e_{t-1}, ..., e_{t-q+1}`.
    pub eps_hat: Vec<f64>,
}

/// Maximum likelihood fit of a univariate spec on the window ending at `t`.
///
/// The likelihood conditions on the first `p` differenced values and is exact
/// in the MA part. Constant, loadings and dummies are profiled out by GLS and
/// the variance is concentrated, leaving `p + q` transformed coefficients for
/// BFGS.
pub fn fit_univariate(spec: &ModelSpec, input: &ModelInput, t: usize) -> Result<ArimaxFit> {
    if spec.kind() != ModelKind::Univariate {
        return Err(Error::InvalidInput(format!("{spec} is not univariate")));
    }
    let win = input.window(spec, t)?;
    let (p, d, q) = (spec.p, spec.d, spec.q);
    let w = win.y.len();
    let z = difference(win.y, d);
    let z_at = |i: usize| z[i - d];

    let first = d + p;
    let n_obs = w - first;
    let n_feat = spec.features().len();
    let dummies = win.dummies(d, first);
    let k = 1 + n_feat + dummies.len();
    if n_obs <= k + p + q {
        return Err(Error::FitFailed(format!("{spec}: {n_obs} observations for {} parameters", k + p + q + 1)));
    }

    let mut base = DMatrix::zeros(n_obs, 1 + k);
    for (r, i) in (first..w).enumerate() {
        base[(r, 0)] = z_at(i);
        base[(r, 1)] = 1.0;
        for (c, v) in win.x[i - 1].iter().enumerate() {
            base[(r, 2 + c)] = *v;
        }
        for (c, &b) in dummies.iter().enumerate() {
            base[(r, 2 + n_feat + c)] = footprint(b, i, d);
        }
    }
    let mut ridge = vec![0.0; k];
    ridge[1..1 + n_feat].fill(FEATURE_RIDGE);
    let unit = DMatrix::identity(1, 1);

    let evaluate = |theta: &[f64]| {
        let gamma = pacf_to_ar(&theta[..p]);
        let ma: Vec<DMatrix<f64>> = pacf_to_ma(&theta[p..]).into_iter().map(|v| DMatrix::from_element(1, 1, v)).collect();
        let mut obs = base.clone();
        for (r, i) in (first..w).enumerate() {
            obs[(r, 0)] -= gamma.iter().enumerate().map(|(j, g)| g * z_at(i - j - 1)).sum::<f64>();
        }
        vma_gls(&obs, 1, &ma, &unit, &ridge).map(|fit| (gamma, ma, fit))
    };
    let objective = |theta: &[f64]| match evaluate(theta) {
        Some((_, _, fit)) => {
            let s2 = fit.rss / n_obs as f64;
            if s2 > 0.0 {
                0.5 * (s2.ln() + fit.logdet / n_obs as f64)
            } else {
                f64::INFINITY
            }
        }
        None => f64::INFINITY,
    };

    let opt = minimize(objective, &vec![0.0; p + q], BfgsOptions::default());
    let (gamma, ma, fit) = evaluate(&opt.x).ok_or_else(|| Error::FitFailed(format!("{spec}: singular design")))?;
    let sigma2 = fit.rss / n_obs as f64;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::FitFailed(format!("{spec}: zero innovation variance")));
    }
    let nf = n_obs as f64;
    let log_likelihood = -0.5 * nf * ((2.0 * std::f64::consts::PI).ln() + 1.0 + sigma2.ln()) - 0.5 * fit.logdet;

    Ok(ArimaxFit {
        spec: *spec,
        t,
        mu: fit.theta[0],
        ar: gamma,
        ma: ma.iter().map(|m| m[(0, 0)]).collect(),
        beta: spec.features().iter().enumerate().map(|(c, &col)| (col, fit.theta[1 + c])).collect(),
        dummies: dummies.iter().enumerate().map(|(c, &b)| (win.start + b, fit.theta[1 + n_feat + c])).collect(),
        sigma2,
        log_likelihood,
        converged: opt.converged,
        iterations: opt.iterations,
        n_obs,
        eps_hat: fit.last_state.iter().take(q).copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn arima110(seed: u64, n: usize, phi: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut z = 0.0;
        let mut y = 100.0;
        let mut out = Vec::with_capacity(n);
        for i in 0..n + 50 {
            let e: f64 = StandardNormal.sample(&mut rng);
            z = phi * z + e;
            y += z;
            if i >= 50 {
                out.push(y);
            }
        }
        out
    }

    #[test]
    fn random_walk_drift_is_mean_difference() {
        let y = arima110(3, 60, 0.0);
        let input = ModelInput::from_prices(y.clone());
        let spec = ModelSpec::new(0, 24, 0, 1, 0).unwrap();
        let fit = fit_univariate(&spec, &input, 40).unwrap();
        let dy = difference(&y[17..=40], 1);
        let mean = dy.iter().sum::<f64>() / dy.len() as f64;
        assert!((fit.mu - mean).abs() < 1e-12);
        assert!(fit.converged);
        assert_eq!(fit.n_obs, 23);
    }

    #[test]
    fn recovers_ar_coefficient() {
        let spec = ModelSpec::new(0, 500, 1, 1, 0).unwrap();
        let hits = (0..20)
            .filter(|&s| {
                let input = ModelInput::from_prices(arima110(s, 500, 0.6));
                let fit = fit_univariate(&spec, &input, 499).unwrap();
                (fit.ar[0] - 0.6).abs() < 0.1
            })
            .count();
        assert!(hits >= 18, "{hits}/20");
    }

    #[test]
    fn recovers_ma_coefficient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut prev = 0.0;
        let mut y = vec![50.0];
        for _ in 0..600 {
            let e: f64 = StandardNormal.sample(&mut rng);
            let last = *y.last().unwrap();
            y.push(last + e - 0.4 * prev);
            prev = e;
        }
        let spec = ModelSpec::new(0, 600, 0, 1, 1).unwrap();
        let fit = fit_univariate(&spec, &ModelInput::from_prices(y), 600).unwrap();
        assert!(fit.converged);
        assert!((fit.ma[0] + 0.4).abs() < 0.1, "{:?}", fit.ma);
        assert!((fit.sigma2 - 1.0).abs() < 0.15);
    }

    #[test]
    fn window_exactness() {
        let y = arima110(8, 140, 0.3);
        let spec = ModelSpec::new(0, 48, 1, 1, 1).unwrap();
        let a = fit_univariate(&spec, &ModelInput::from_prices(y.clone()), 120).unwrap();
        let mut other = y.clone();
        other[..73].iter_mut().for_each(|v| *v = -5.0);
        other[121..].iter_mut().for_each(|v| *v = 1e6);
        let b = fit_univariate(&spec, &ModelInput::from_prices(other), 120).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn boundary_dummy_absorbs_jump() {
        let mut y = arima110(4, 60, 0.0);
        let mut flags = vec![false; 60];
        flags[40] = true;
        for v in &mut y[40..] {
            *v += 500.0;
        }
        let input = ModelInput::from_prices(y.clone()).with_boundaries(flags).unwrap();
        let spec = ModelSpec::new(0, 24, 0, 1, 0).unwrap();
        let fit = fit_univariate(&spec, &input, 50).unwrap();
        assert_eq!(fit.dummies.len(), 1);
        assert_eq!(fit.dummies[0].0, 40);
        // mu is the mean over the undummied differences.
        let dy: Vec<f64> = (28..=50).filter(|&i| i != 40).map(|i| y[i] - y[i - 1]).collect();
        assert!((fit.mu - dy.iter().sum::<f64>() / dy.len() as f64).abs() < 1e-10);
    }

    #[test]
    fn zero_feature_gives_zero_loading() {
        let y = arima110(6, 100, 0.2);
        let input = ModelInput::from_prices(y).with_features(vec![[0.0; 4]; 100]).unwrap();
        let s1 = ModelSpec::new(1, 48, 1, 1, 1).unwrap();
        let s0 = ModelSpec::new(0, 48, 1, 1, 1).unwrap();
        let f1 = fit_univariate(&s1, &input, 90).unwrap();
        let f0 = fit_univariate(&s0, &input, 90).unwrap();
        assert_eq!(f1.beta, vec![(0, 0.0)]);
        assert!((f1.mu - f0.mu).abs() < 1e-9 && (f1.ar[0] - f0.ar[0]).abs() < 1e-9);
    }

    #[test]
    fn rejects_flat_window() {
        let input = ModelInput::from_prices(vec![7.0; 30]);
        let spec = ModelSpec::new(0, 12, 0, 1, 0).unwrap();
        assert!(matches!(fit_univariate(&spec, &input, 20), Err(Error::FitFailed(_))));
    }
}
