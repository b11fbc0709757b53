//! Negative log-likelihoods and their gradients in terms of the linear
//! predictor. Shared by the solver, the KKT checks and the tests.

use ndarray::{Array2, ArrayView2};

use super::GlmFamily;

/// `log(1 + e^eta)` without overflow.
pub(crate) fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

pub(crate) fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Softmax of one row of scores, written into `out`.
pub(crate) fn softmax_into(scores: &[f64], out: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &s) in out.iter_mut().zip(scores) {
        *o = (s - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Encoded response as the solver sees it.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Target<'a> {
    Real(&'a [f64]),
    /// Binary 0/1 for binomial, class codes for multinomial.
    Labels(&'a [usize]),
}

/// Mean weighted negative log-likelihood, `eta` is `n × K`.
/// Weights are assumed normalized to sum to `n`.
pub(crate) fn nll_from_eta(family: GlmFamily, y: Target<'_>, w: &[f64], eta: ArrayView2<f64>) -> f64 {
    let n = eta.nrows();
    let mut total = 0.0;
    match (family, y) {
        (GlmFamily::Gaussian, Target::Real(y)) => {
            for i in 0..n {
                let r = y[i] - eta[[i, 0]];
                total += w[i] * 0.5 * r * r;
            }
        }
        (GlmFamily::Binomial, Target::Labels(y)) => {
            for i in 0..n {
                let e = eta[[i, 0]];
                total += w[i] * (softplus(e) - y[i] as f64 * e);
            }
        }
        (GlmFamily::Multinomial { .. }, Target::Labels(y)) => {
            for i in 0..n {
                let row = eta.row(i);
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lse = max + row.iter().map(|&s| (s - max).exp()).sum::<f64>().ln();
                total += w[i] * (lse - row[y[i]]);
            }
        }
        _ => unreachable!("family and target kind are validated before fitting"),
    }
    total / n as f64
}

/// Derivative of the per-observation loss with respect to each linear
/// predictor (before weighting and the 1/n factor).
pub(crate) fn eta_gradient(family: GlmFamily, y: Target<'_>, eta: ArrayView2<f64>) -> Array2<f64> {
    let (n, k) = eta.dim();
    let mut g = Array2::zeros((n, k));
    match (family, y) {
        (GlmFamily::Gaussian, Target::Real(y)) => {
            for i in 0..n {
                g[[i, 0]] = eta[[i, 0]] - y[i];
            }
        }
        (GlmFamily::Binomial, Target::Labels(y)) => {
            for i in 0..n {
                g[[i, 0]] = logistic(eta[[i, 0]]) - y[i] as f64;
            }
        }
        (GlmFamily::Multinomial { .. }, Target::Labels(y)) => {
            let mut p = vec![0.0; k];
            for i in 0..n {
                let row: Vec<f64> = eta.row(i).to_vec();
                softmax_into(&row, &mut p);
                for c in 0..k {
                    g[[i, c]] = p[c] - if y[i] == c { 1.0 } else { 0.0 };
                }
            }
        }
        _ => unreachable!("family and target kind are validated before fitting"),
    }
    g
}

/// Linear predictors `intercepts + x coefs^T` for original-scale parameters
/// (`coefs` is `K × p`).
pub(crate) fn linear_predictor(
    x: ArrayView2<f64>,
    intercepts: &[f64],
    coefs: ArrayView2<f64>,
) -> Array2<f64> {
    let mut eta = x.dot(&coefs.t());
    for mut row in eta.rows_mut() {
        for (v, b0) in row.iter_mut().zip(intercepts) {
            *v += b0;
        }
    }
    eta
}

/// Gradient of the mean negative log-likelihood with respect to the
/// intercepts and coefficients, on the scale of `x`.
pub(crate) fn parameter_gradient(
    family: GlmFamily,
    y: Target<'_>,
    w: &[f64],
    x: ArrayView2<f64>,
    eta: ArrayView2<f64>,
) -> (Vec<f64>, Array2<f64>) {
    let n = x.nrows() as f64;
    let mut g = eta_gradient(family, y, eta);
    for (mut row, wi) in g.rows_mut().into_iter().zip(w) {
        row.mapv_inplace(|v| v * wi / n);
    }
    let grad_b0 = g.sum_axis(ndarray::Axis(0)).to_vec();
    let grad_beta = g.t().dot(&x);
    (grad_b0, grad_beta)
}
