//! One-step forecasts `y_{t+1|t}`.
//!
//! [`forecast_one_step`] forecasts the differenced value and integrates it.
//! [`forecast_levels`] expands `Gamma(L) (1 - L)^d` and applies it to price
//! levels directly. The two agree up to rounding.

use super::{diff_poly, footprint, ModelInput, ParamEstimate};
use crate::error::{Error, Result};

/// Own-lag AR coefficients on the differenced price and everything else in
/// the conditional mean of the differenced price at `t + 1`.
fn decompose(est: &ParamEstimate, input: &ModelInput) -> Result<(Vec<f64>, f64)> {
    let t = est.t();
    let d = est.spec().d;
    match est {
        ParamEstimate::Univariate(f) => {
            let cols: Vec<usize> = f.beta.iter().map(|b| b.0).collect();
            let x = input.features_at(t, &cols)?;
            let mut rest = f.mu;
            rest += f.beta.iter().zip(&x).map(|(b, v)| b.1 * v).sum::<f64>();
            rest += f.dummies.iter().map(|(b, c)| c * footprint(*b, t + 1, d)).sum::<f64>();
            rest += f.ma.iter().zip(&f.eps_hat).map(|(m, e)| m * e).sum::<f64>();
            Ok((f.ar.clone(), rest))
        }
        ParamEstimate::Multivariate(f) => {
            let x = input.features_at(t, &f.channels)?;
            let mut rest = f.mu[0];
            rest += x.iter().enumerate().map(|(j, v)| f.gamma[(0, j + 1)] * v).sum::<f64>();
            rest += f.dummies.iter().map(|(b, c)| c * footprint(*b, t + 1, d)).sum::<f64>();
            if let Some(phi) = &f.ma {
                rest += (phi * &f.eps_hat)[0];
            }
            Ok((vec![f.gamma[(0, 0)]], rest))
        }
    }
}

fn check_history(est: &ParamEstimate, input: &ModelInput, lags: usize) -> Result<()> {
    let t = est.t();
    if t >= input.len() || t + 1 < lags {
        return Err(Error::InsufficientData {
            needed: lags,
            have: input.len().min(t + 1),
        });
    }
    Ok(())
}

/// Forecasts `Delta^d y_{t+1}` and adds back the integration terms.
pub fn forecast_one_step(est: &ParamEstimate, input: &ModelInput) -> Result<f64> {
    let (ar, rest) = decompose(est, input)?;
    let (t, d) = (est.t(), est.spec().d);
    check_history(est, input, ar.len() + d)?;
    let c = diff_poly(d);
    let dz = |j: usize| c.iter().enumerate().map(|(i, ci)| ci * input.y[j - i]).sum::<f64>();
    let z_next = rest + ar.iter().enumerate().map(|(k, g)| g * dz(t - k)).sum::<f64>();
    Ok(z_next - c.iter().enumerate().skip(1).map(|(k, ck)| ck * input.y[t + 1 - k]).sum::<f64>())
}

/// Forecasts the level through the expanded lag polynomial.
pub fn forecast_levels(est: &ParamEstimate, input: &ModelInput) -> Result<f64> {
    let (ar, rest) = decompose(est, input)?;
    let (t, d) = (est.t(), est.spec().d);
    check_history(est, input, ar.len() + d)?;
    let mut gamma = vec![1.0];
    gamma.extend(ar.iter().map(|g| -g));
    let c = diff_poly(d);
    let mut a = vec![0.0; gamma.len() + c.len() - 1];
    for (i, g) in gamma.iter().enumerate() {
        for (j, cj) in c.iter().enumerate() {
            a[i + j] += g * cj;
        }
    }
    Ok(rest - a.iter().enumerate().skip(1).map(|(k, ak)| ak * input.y[t + 1 - k]).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_zoo::{fit, ArimaxFit, ModelSpec};

    fn hand_fit(spec: ModelSpec, t: usize) -> ArimaxFit {
        ArimaxFit {
            spec,
            t,
            mu: 0.0,
            ar: vec![0.0; spec.p],
            ma: vec![0.0; spec.q],
            beta: spec.features().iter().map(|&c| (c, 0.0)).collect(),
            dummies: vec![],
            sigma2: 1.0,
            log_likelihood: 0.0,
            converged: true,
            iterations: 0,
            n_obs: 0,
            eps_hat: vec![0.0; spec.q],
        }
    }

    #[test]
    fn random_walk_forecast_is_last_price() {
        let input = ModelInput::from_prices(vec![1.0, 4.0, 2.5]);
        let est = ParamEstimate::Univariate(hand_fit(ModelSpec::new(0, 3, 0, 1, 0).unwrap(), 2));
        assert_eq!(forecast_one_step(&est, &input).unwrap(), 2.5);
        assert_eq!(forecast_levels(&est, &input).unwrap(), 2.5);
    }

    #[test]
    fn arimax_111_by_hand() {
        let input = ModelInput::from_prices(vec![10.0, 10.4, 10.1])
            .with_features(vec![[0.0; 4], [0.0; 4], [0.3, -2.0, 0.6, 0.4]])
            .unwrap();
        let mut f = hand_fit(ModelSpec::new(3, 4, 1, 1, 1).unwrap(), 2);
        f.mu = 0.05;
        f.ar = vec![0.3];
        f.ma = vec![-0.2];
        f.eps_hat = vec![0.15];
        f.beta = vec![(0, 0.5), (1, 0.01)];
        let est = ParamEstimate::Univariate(f);
        // mu + (1 + g) y_t - g y_{t-1} + phi e_t + beta'x_t
        let hand = 0.05 + 1.3 * 10.1 - 0.3 * 10.4 + (-0.2 * 0.15) + (0.5 * 0.3 + 0.01 * -2.0);
        assert!((forecast_one_step(&est, &input).unwrap() - hand).abs() < 1e-12);
        assert!((forecast_levels(&est, &input).unwrap() - hand).abs() < 1e-12);
    }

    #[test]
    fn second_difference_by_hand() {
        let input = ModelInput::from_prices(vec![5.0, 6.0, 8.0]);
        let mut f = hand_fit(ModelSpec::new(0, 4, 0, 2, 0).unwrap(), 2);
        f.mu = 0.5;
        let est = ParamEstimate::Univariate(f);
        // y_{t+1} = 2 y_t - y_{t-1} + mu
        assert!((forecast_one_step(&est, &input).unwrap() - 10.5).abs() < 1e-12);
        assert!((forecast_levels(&est, &input).unwrap() - 10.5).abs() < 1e-12);
    }

    #[test]
    fn missing_feature_is_error() {
        let input = ModelInput::from_prices(vec![1.0, 2.0, 3.0]);
        let est = ParamEstimate::Univariate(hand_fit(ModelSpec::new(1, 3, 0, 1, 0).unwrap(), 2));
        assert!(matches!(forecast_one_step(&est, &input), Err(Error::UndefinedFeature(_))));
    }

    #[test]
    fn paths_agree_on_fitted_models() {
        let mut y = vec![4000.0];
        let mut x = vec![[0.0; 4]];
        for i in 1..200 {
            let v = (i as f64 * 0.7).sin() * 2.0 + (i as f64 * 0.13).cos();
            y.push(y[i - 1] + v);
            x.push([(i as f64 * 0.3).sin(), (i as f64 * 1.1).cos() * 5.0, 0.5 + 0.1 * (i as f64).sin(), 0.4]);
        }
        let input = ModelInput::from_prices(y).with_features(x).unwrap();
        for spec in [
            ModelSpec::new(3, 48, 2, 2, 1).unwrap(),
            ModelSpec::new(6, 24, 1, 1, 2).unwrap(),
            ModelSpec::new(9, 96, 1, 2, 1).unwrap(),
            ModelSpec::new(11, 48, 1, 1, 0).unwrap(),
        ] {
            let est = fit(&spec, &input, 150).unwrap();
            let a = forecast_one_step(&est, &input).unwrap();
            let b = forecast_levels(&est, &input).unwrap();
            assert!((a - b).abs() < 1e-10, "{spec}: {a} vs {b}");
        }
    }
}
