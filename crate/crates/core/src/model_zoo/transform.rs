//! Unconstrained parameterisations of ARMA polynomials.
//!
//! AR coefficients `c` describe `1 - sum c_i L^i`; MA coefficients `m`
//! describe `1 + sum m_i L^i`.

/// Partial autocorrelations `tanh(theta)` mapped through the Durbin-Levinson
/// recursion. The result is always stationary.
pub fn pacf_to_ar(theta: &[f64]) -> Vec<f64> {
    let mut c: Vec<f64> = Vec::with_capacity(theta.len());
    for (k, th) in theta.iter().enumerate() {
        let r = th.tanh();
        let prev = c.clone();
        for j in 0..k {
            c[j] = prev[j] - r * prev[k - 1 - j];
        }
        c.push(r);
    }
    c
}

/// Inverse of [`pacf_to_ar`]; `None` outside the stationary region.
pub fn ar_to_pacf(coefs: &[f64]) -> Option<Vec<f64>> {
    let mut c = coefs.to_vec();
    let mut theta = vec![0.0; c.len()];
    for k in (0..c.len()).rev() {
        let r = c[k];
        if !(r.abs() < 1.0) {
            return None;
        }
        theta[k] = r.atanh();
        let denom = 1.0 - r * r;
        let prev = c.clone();
        for j in 0..k {
            c[j] = (prev[j] + r * prev[k - 1 - j]) / denom;
        }
        c.truncate(k);
    }
    Some(theta)
}

/// Invertible MA coefficients.
pub fn pacf_to_ma(theta: &[f64]) -> Vec<f64> {
    pacf_to_ar(theta).into_iter().map(|v| -v).collect()
}

pub fn ma_to_pacf(coefs: &[f64]) -> Option<Vec<f64>> {
    let neg: Vec<f64> = coefs.iter().map(|v| -v).collect();
    ar_to_pacf(&neg)
}

/// `A / (1 + ||A||_F)`: a matrix with Frobenius norm, hence spectral radius,
/// below one.
pub fn contract(a: &[f64]) -> Vec<f64> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    a.iter().map(|v| v / (1.0 + norm)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn stationary(c: &[f64]) -> bool {
        match c {
            [] => true,
            [a] => a.abs() < 1.0,
            [a, b] => a + b < 1.0 && b - a < 1.0 && b.abs() < 1.0,
            _ => unreachable!(),
        }
    }

    #[test]
    fn zero_maps_to_zero() {
        assert_eq!(pacf_to_ar(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(pacf_to_ma(&[0.0]), vec![-0.0]);
    }

    #[test]
    fn order_two_by_hand() {
        // r1 = 0.5, r2 = 0.2: c2 = 0.2, c1 = 0.5 - 0.2 * 0.5 = 0.4
        let c = pacf_to_ar(&[0.5f64.atanh(), 0.2f64.atanh()]);
        assert!((c[0] - 0.4).abs() < 1e-15 && (c[1] - 0.2).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn always_stationary(theta in prop::collection::vec(-8.0f64..8.0, 0..=2)) {
            let c = pacf_to_ar(&theta);
            prop_assert!(stationary(&c), "{:?}", c);
            let m: Vec<f64> = pacf_to_ma(&theta).iter().map(|v| -v).collect();
            prop_assert!(stationary(&m));
        }

        #[test]
        fn round_trip(theta in prop::collection::vec(-3.0f64..3.0, 0..=4)) {
            let back = ar_to_pacf(&pacf_to_ar(&theta)).unwrap();
            for (a, b) in theta.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-8);
            }
            let back = ma_to_pacf(&pacf_to_ma(&theta)).unwrap();
            for (a, b) in theta.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-8);
            }
        }

        #[test]
        fn contraction_below_one(a in prop::collection::vec(-1e3f64..1e3, 1..9)) {
            let c = contract(&a);
            prop_assert!(c.iter().map(|v| v * v).sum::<f64>() < 1.0);
        }
    }

    #[test]
    fn nonstationary_has_no_pacf() {
        assert!(ar_to_pacf(&[1.0]).is_none());
        assert!(ar_to_pacf(&[0.5, 0.6]).is_none());
    }
}
