//! Exact Gaussian likelihood of a regression with VMA(q) errors.
//!
//! Observations are `y_tau = W_tau theta + u_tau` with
//! `u_tau = e_tau + Phi_1 e_{tau-1} + ... + Phi_q e_{tau-q}` and
//! `e ~ N(0, Sigma)`. Presample innovations are drawn from their marginal
//! distribution. The filter gains do not depend on the data, so one pass
//! whitens the response and every design column, after which `theta` is the
//! GLS solution.

use nalgebra::{DMatrix, DVector};

pub(crate) struct GlsFit {
    pub theta: DVector<f64>,
    /// Sum of `log det F_tau`.
    pub logdet: f64,
    /// Whitened residual sum of squares at `theta`.
    pub rss: f64,
    /// Filtered `(e_T, e_{T-1}, ..., e_{T-q})` of the residual series.
    pub last_state: DVector<f64>,
}

/// `obs` stacks one `n`-row block per observation: column 0 is the response,
/// the rest the design. `ridge[j]` is added to the normal matrix diagonal of
/// design column `j`.
pub(crate) fn vma_gls(obs: &DMatrix<f64>, n: usize, ma: &[DMatrix<f64>], sigma: &DMatrix<f64>, ridge: &[f64]) -> Option<GlsFit> {
    let cols = obs.ncols();
    let k = cols - 1;
    let n_obs = obs.nrows() / n;
    let q = ma.len();
    let m = n * (q + 1);

    let mut z = DMatrix::zeros(n, m);
    z.view_mut((0, 0), (n, n)).fill_with_identity();
    for (j, phi) in ma.iter().enumerate() {
        z.view_mut((0, n * (j + 1)), (n, n)).copy_from(phi);
    }
    let mut p = DMatrix::zeros(m, m);
    for j in 0..=q {
        p.view_mut((n * j, n * j), (n, n)).copy_from(sigma);
    }
    let mut a = DMatrix::<f64>::zeros(m, cols);
    let mut cross = DMatrix::<f64>::zeros(cols, cols);
    let mut logdet = 0.0;
    let mut last = DMatrix::zeros(m, cols);

    for tau in 0..n_obs {
        let v = obs.rows(tau * n, n) - &z * &a;
        let zp = &z * &p;
        let f = &zp * z.transpose();
        let chol = f.clone().cholesky()?;
        logdet += 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let vw = chol.l().solve_lower_triangular(&v)?;
        cross += vw.transpose() * &vw;

        // gain = P Z' F^-1
        let gain = chol.solve(&zp).transpose();
        let a_f = &a + &gain * &v;
        let p_f = &p - &gain * &zp;
        if tau + 1 == n_obs {
            last = a_f;
            break;
        }
        // Shift the innovation blocks down and draw a fresh one.
        a.fill(0.0);
        a.view_mut((n, 0), (m - n, cols)).copy_from(&a_f.view((0, 0), (m - n, cols)));
        p.fill(0.0);
        p.view_mut((n, n), (m - n, m - n)).copy_from(&p_f.view((0, 0), (m - n, m - n)));
        p.view_mut((0, 0), (n, n)).copy_from(sigma);
        p = (&p + p.transpose()) * 0.5;
    }

    let normal = cross.view((1, 1), (k, k)).clone_owned();
    let rhs = cross.view((1, 0), (k, 1)).column(0).clone_owned();
    let mut reg = normal.clone();
    for (j, r) in ridge.iter().enumerate() {
        reg[(j, j)] += r;
    }
    let theta = if k == 0 { DVector::zeros(0) } else { reg.cholesky()?.solve(&rhs) };
    let rss = (cross[(0, 0)] - 2.0 * theta.dot(&rhs) + theta.dot(&(&normal * &theta))).max(0.0);
    let last_state = if k == 0 {
        last.column(0).clone_owned()
    } else {
        last.column(0) - last.columns(1, k) * &theta
    };
    Some(GlsFit {
        theta,
        logdet,
        rss,
        last_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Dense oracle: GLS with the explicit MA(1) covariance matrix.
    fn dense_ma1(y: &[f64], x: &[f64], phi: f64) -> (f64, f64, f64) {
        let n = y.len();
        let omega = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0 + phi * phi
            } else if i.abs_diff(j) == 1 {
                phi
            } else {
                0.0
            }
        });
        let chol = omega.clone().cholesky().unwrap();
        let design = DMatrix::from_fn(n, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
        let yv = DVector::from_column_slice(y);
        let wi_x = chol.solve(&design);
        let beta = (design.transpose() * &wi_x).cholesky().unwrap().solve(&(design.transpose() * chol.solve(&yv)));
        let r = &yv - &design * &beta;
        let rss = r.dot(&chol.solve(&r));
        (beta[1], rss, omega.determinant().ln())
    }

    #[test]
    fn matches_dense_gls() {
        let y = [1.0, 0.3, -0.7, 2.2, 1.1, 0.0, -1.4, 0.8, 0.5, 1.9];
        let x = [0.2, -0.1, 0.4, 1.0, 0.3, -0.6, 0.1, 0.9, -0.2, 0.0];
        let phi = 0.45;
        let obs = DMatrix::from_fn(10, 3, |i, j| match j {
            0 => y[i],
            1 => 1.0,
            _ => x[i],
        });
        let fit = vma_gls(&obs, 1, &[DMatrix::from_element(1, 1, phi)], &DMatrix::identity(1, 1), &[0.0, 0.0]).unwrap();
        let (beta, rss, logdet) = dense_ma1(&y, &x, phi);
        assert!((fit.theta[1] - beta).abs() < 1e-10);
        assert!((fit.rss - rss).abs() < 1e-10);
        assert!((fit.logdet - logdet).abs() < 1e-10);
    }

    #[test]
    fn white_noise_is_ols() {
        let obs = DMatrix::from_row_slice(4, 2, &[1.0, 1.0, 2.0, 1.0, 4.0, 1.0, 5.0, 1.0]);
        let fit = vma_gls(&obs, 1, &[], &DMatrix::identity(1, 1), &[0.0]).unwrap();
        assert!((fit.theta[0] - 3.0).abs() < 1e-12);
        assert!((fit.rss - 10.0).abs() < 1e-12);
        assert_eq!(fit.logdet, 0.0);
        assert!((fit.last_state[0] - 2.0).abs() < 1e-12);
    }
}
