//! Cyclic coordinate descent on the standardized design.
//!
//! Every family reduces to repeated penalized weighted least-squares solves:
//! the gaussian family needs one per penalty value, binomial and multinomial
//! re-linearize the log-likelihood around the current fit (IRLS) until the
//! coefficients stop moving.

use ndarray::{Array2, ArrayView2};

use super::objective::{logistic, nll_from_eta, softmax_into, Target};
use super::{GlmFamily, GlmOptions, INTERCEPT_CLIP, PROB_CLIP};
use crate::data::Standardizer;

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0, "threshold must be nonnegative");
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Column-major copy of the centered (and optionally scaled) features.
pub(crate) struct Design {
    pub n: usize,
    pub p: usize,
    cols: Vec<f64>,
}

impl Design {
    pub fn new(x: ArrayView2<f64>, stats: &Standardizer) -> Self {
        let (n, p) = x.dim();
        let mut cols = Vec::with_capacity(n * p);
        for j in 0..p {
            let (mean, scale) = (stats.means[j], stats.scales[j]);
            for i in 0..n {
                let v = x[[i, j]] - mean;
                cols.push(if scale > 0.0 { v / scale } else { v });
            }
        }
        Design { n, p, cols }
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j * self.n..(j + 1) * self.n]
    }

    /// `sum_i w_i x_ij r_i / n`, the one inner product every update uses.
    #[inline]
    fn weighted_dot(&self, j: usize, w: &[f64], r: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((x, w), r) in self.col(j).iter().zip(w).zip(r) {
            acc += w * x * r;
        }
        acc / self.n as f64
    }

    fn add_column(&self, j: usize, scale: f64, out: &mut [f64]) {
        for (o, x) in out.iter_mut().zip(self.col(j)) {
            *o += scale * x;
        }
    }

    /// `b0 + X beta` for one output.
    fn predictor(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.n];
        for (j, &b) in beta.iter().enumerate() {
            if b != 0.0 {
                self.add_column(j, b, &mut eta);
            }
        }
        eta
    }
}

/// Fitting problem after validation: design, target and normalized weights.
pub(crate) struct Problem<'a> {
    pub design: Design,
    pub family: GlmFamily,
    pub target: Target<'a>,
    /// Observation weights summing to `n`.
    pub weights: Vec<f64>,
}

/// Solutions on the standardized scale, one per penalty value.
pub(crate) struct PathSolution {
    pub intercepts: Vec<Vec<f64>>,
    pub coefficients: Vec<Vec<Vec<f64>>>,
    pub converged: Vec<bool>,
    pub saturated: bool,
}

struct Params {
    b0: Vec<f64>,
    beta: Vec<Vec<f64>>,
}

impl Params {
    fn max_change(&self, other: &Params) -> f64 {
        let mut d: f64 = 0.0;
        for (a, b) in self.b0.iter().zip(&other.b0) {
            d = d.max((a - b).abs());
        }
        for (ra, rb) in self.beta.iter().zip(&other.beta) {
            for (a, b) in ra.iter().zip(rb) {
                d = d.max((a - b).abs());
            }
        }
        d
    }

    fn midpoint(&self, other: &Params) -> Params {
        Params {
            b0: self.b0.iter().zip(&other.b0).map(|(a, b)| 0.5 * (a + b)).collect(),
            beta: self
                .beta
                .iter()
                .zip(&other.beta)
                .map(|(ra, rb)| ra.iter().zip(rb).map(|(a, b)| 0.5 * (a + b)).collect())
                .collect(),
        }
    }

    fn clone_params(&self) -> Params {
        Params {
            b0: self.b0.clone(),
            beta: self.beta.clone(),
        }
    }
}

/// Coordinate descent for
/// `(1/2n) sum_i w_i (z_i - b0 - x_i beta)^2 + lambda |beta|_1`.
///
/// Full sweeps over every column work on the residual. Between them, sweeps
/// restricted to the active set work on gradients kept current through the
/// active block of the weighted Gram matrix, so an update costs O(|active|)
/// rather than O(n). Stops once a full sweep moves no parameter by more than
/// `tol`. Each sweep spends one unit of `budget`; returns false if the budget
/// ran out first.
#[allow(clippy::too_many_arguments)]
fn solve_wls(
    design: &Design,
    w: &[f64],
    z: &[f64],
    lambda: f64,
    b0: &mut f64,
    beta: &mut [f64],
    tol: f64,
    budget: &mut usize,
) -> bool {
    let n = design.n as f64;
    let wsum: f64 = w.iter().sum();
    if wsum <= 0.0 {
        return true;
    }
    let xwx: Vec<f64> = (0..design.p)
        .map(|j| {
            design
                .col(j)
                .iter()
                .zip(w)
                .map(|(x, w)| w * x * x)
                .sum::<f64>()
                / n
        })
        .collect();
    let residual = |b0: f64, beta: &[f64]| -> Vec<f64> {
        design
            .predictor(b0, beta)
            .iter()
            .zip(z)
            .map(|(eta, z)| z - eta)
            .collect()
    };
    let mut r = residual(*b0, beta);

    #[cfg(debug_assertions)]
    let surrogate = |r: &[f64], beta: &[f64]| {
        r.iter().zip(w).map(|(r, w)| w * r * r).sum::<f64>() / (2.0 * n)
            + lambda * beta.iter().map(|b| b.abs()).sum::<f64>()
    };
    #[cfg(debug_assertions)]
    let mut previous = surrogate(&r, beta);
    #[cfg(debug_assertions)]
    let mut check = |r: &[f64], beta: &[f64]| {
        let current = surrogate(r, beta);
        debug_assert!(
            current <= previous + 1e-10 * previous.abs().max(1.0),
            "coordinate descent increased the objective: {previous} -> {current}"
        );
        previous = current;
    };

    loop {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut max_delta: f64 = 0.0;
        for j in 0..design.p {
            if xwx[j] == 0.0 {
                continue;
            }
            let old = beta[j];
            let grad = design.weighted_dot(j, w, &r);
            let new = soft_threshold(grad + xwx[j] * old, lambda) / xwx[j];
            if new != old {
                design.add_column(j, old - new, &mut r);
                beta[j] = new;
                max_delta = max_delta.max((new - old).abs());
            }
        }
        let shift = r.iter().zip(w).map(|(r, w)| r * w).sum::<f64>() / wsum;
        if shift != 0.0 {
            *b0 += shift;
            for ri in r.iter_mut() {
                *ri -= shift;
            }
            max_delta = max_delta.max(shift.abs());
        }
        #[cfg(debug_assertions)]
        check(&r, beta);
        if max_delta < tol {
            return true;
        }

        let active: Vec<usize> = (0..design.p).filter(|&j| beta[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        let finished = active_sweeps(design, w, &xwx, &active, lambda, b0, beta, &r, tol, budget);
        r = residual(*b0, beta);
        #[cfg(debug_assertions)]
        check(&r, beta);
        if !finished {
            return false;
        }
    }
}

/// Sweeps over `active` only, on gradients `g_a = sum_i w_i x_ia r_i / n`
/// updated through the Gram block instead of the residual. Returns false if
/// the budget ran out.
#[allow(clippy::too_many_arguments)]
fn active_sweeps(
    design: &Design,
    w: &[f64],
    xwx: &[f64],
    active: &[usize],
    lambda: f64,
    b0: &mut f64,
    beta: &mut [f64],
    r: &[f64],
    tol: f64,
    budget: &mut usize,
) -> bool {
    let n = design.n as f64;
    let k = active.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(a, b)| a * b).sum::<f64>();
    let wx: Vec<Vec<f64>> = active
        .iter()
        .map(|&j| design.col(j).iter().zip(w).map(|(x, w)| x * w).collect())
        .collect();
    let means: Vec<f64> = wx.iter().map(|v| v.iter().sum::<f64>() / n).collect();
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let v = dot(&wx[a], design.col(active[b])) / n;
            gram[a * k + b] = v;
            gram[b * k + a] = v;
        }
    }
    let mut grad: Vec<f64> = wx.iter().map(|v| dot(v, r) / n).collect();
    let mut grad0 = dot(w, r) / n;
    let mean_w = w.iter().sum::<f64>() / n;
    loop {
        if *budget == 0 {
            return false;
        }
        *budget -= 1;
        let mut max_delta: f64 = 0.0;
        for a in 0..k {
            let j = active[a];
            let old = beta[j];
            let new = soft_threshold(grad[a] + xwx[j] * old, lambda) / xwx[j];
            let delta = new - old;
            if delta == 0.0 {
                continue;
            }
            #[cfg(debug_assertions)]
            {
                let change = -grad[a] * delta + 0.5 * xwx[j] * delta * delta + lambda * (new.abs() - old.abs());
                let size = (grad[a] * delta).abs() + xwx[j] * delta * delta + lambda * (new.abs() + old.abs());
                debug_assert!(change <= 1e-10 * size, "coordinate update increased the objective by {change}");
            }
            beta[j] = new;
            let row = &gram[a * k..(a + 1) * k];
            for (g, gab) in grad.iter_mut().zip(row) {
                *g -= delta * gab;
            }
            grad0 -= delta * means[a];
            max_delta = max_delta.max(delta.abs());
        }
        let shift = grad0 / mean_w;
        if shift != 0.0 {
            *b0 += shift;
            for (g, m) in grad.iter_mut().zip(&means) {
                *g -= shift * m;
            }
            grad0 = 0.0;
            max_delta = max_delta.max(shift.abs());
        }
        if max_delta < tol {
            return true;
        }
    }
}

impl Problem<'_> {
    pub fn n_outputs(&self) -> usize {
        match self.family {
            GlmFamily::Multinomial { n_classes } => n_classes,
            _ => 1,
        }
    }

    /// Classes with positive total weight (multinomial), ascending.
    fn present_classes(&self) -> Vec<usize> {
        let k = self.n_outputs();
        let mut mass = vec![0.0; k];
        if let Target::Labels(y) = self.target {
            for (&c, w) in y.iter().zip(&self.weights) {
                mass[c] += w;
            }
        }
        (0..k).filter(|&c| mass[c] > 0.0).collect()
    }

    /// Intercept-only solution and the smallest penalty that keeps every
    /// coefficient at zero. Returns `None` for the penalty when the response
    /// has a single class.
    pub fn null_model(&self) -> (Vec<f64>, Option<f64>) {
        let n = self.design.n as f64;
        let w = &self.weights;
        match (self.family, self.target) {
            (GlmFamily::Gaussian, Target::Real(y)) => {
                let mean = y.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / n;
                let r: Vec<f64> = y.iter().map(|y| y - mean).collect();
                (vec![mean], Some(self.max_abs_gradient(&r)))
            }
            (GlmFamily::Binomial, Target::Labels(y)) => {
                let pbar = y.iter().zip(w).map(|(&y, w)| y as f64 * w).sum::<f64>() / n;
                if pbar <= 0.0 || pbar >= 1.0 {
                    let b0 = if pbar >= 1.0 { INTERCEPT_CLIP } else { -INTERCEPT_CLIP };
                    return (vec![b0], None);
                }
                let b0 = (pbar / (1.0 - pbar)).ln().clamp(-INTERCEPT_CLIP, INTERCEPT_CLIP);
                let r: Vec<f64> = y.iter().map(|&y| y as f64 - pbar).collect();
                (vec![b0], Some(self.max_abs_gradient(&r)))
            }
            (GlmFamily::Multinomial { n_classes }, Target::Labels(y)) => {
                let present = self.present_classes();
                let mut freq = vec![0.0; n_classes];
                for (&c, w) in y.iter().zip(w) {
                    freq[c] += w / n;
                }
                let mean_log =
                    present.iter().map(|&c| freq[c].ln()).sum::<f64>() / present.len() as f64;
                let mut b0 = vec![0.0; n_classes];
                for &c in &present {
                    b0[c] = (freq[c].ln() - mean_log).clamp(-INTERCEPT_CLIP, INTERCEPT_CLIP);
                }
                fill_absent(&mut b0, &present);
                if present.len() < 2 {
                    return (b0, None);
                }
                let mut lambda_max: f64 = 0.0;
                for &c in &present {
                    let r: Vec<f64> = y
                        .iter()
                        .map(|&yi| (yi == c) as u8 as f64 - freq[c])
                        .collect();
                    lambda_max = lambda_max.max(self.max_abs_gradient(&r));
                }
                (b0, Some(lambda_max))
            }
            _ => unreachable!("family and target kind are validated before fitting"),
        }
    }

    fn max_abs_gradient(&self, r: &[f64]) -> f64 {
        (0..self.design.p)
            .map(|j| self.design.weighted_dot(j, &self.weights, r).abs())
            .fold(0.0, f64::max)
    }

    fn eta_matrix(&self, params: &Params) -> Array2<f64> {
        let k = params.b0.len();
        let mut eta = Array2::zeros((self.design.n, k));
        for c in 0..k {
            let col = self.design.predictor(params.b0[c], &params.beta[c]);
            for (i, v) in col.into_iter().enumerate() {
                eta[[i, c]] = v;
            }
        }
        eta
    }

    fn penalized_objective(&self, params: &Params, lambda: f64, outputs: &[usize]) -> f64 {
        let eta = self.eta_matrix(params);
        let l1: f64 = outputs
            .iter()
            .map(|&c| params.beta[c].iter().map(|b| b.abs()).sum::<f64>())
            .sum();
        nll_from_eta(self.family, self.target, &self.weights, eta.view()) + lambda * l1
    }

    pub fn solve_path(&self, lambdas: &[f64], opts: &GlmOptions) -> PathSolution {
        let k = self.n_outputs();
        let p = self.design.p;
        let (null_b0, lambda_max) = self.null_model();
        let mut out = PathSolution {
            intercepts: Vec::with_capacity(lambdas.len()),
            coefficients: Vec::with_capacity(lambdas.len()),
            converged: Vec::with_capacity(lambdas.len()),
            saturated: false,
        };

        let Some(lambda_max) = lambda_max else {
            out.saturated = true;
            for _ in lambdas {
                out.intercepts.push(null_b0.clone());
                out.coefficients.push(vec![vec![0.0; p]; k]);
                out.converged.push(true);
            }
            return out;
        };

        let mut params = Params {
            b0: null_b0.clone(),
            beta: vec![vec![0.0; p]; k],
        };
        for &lambda in lambdas {
            let converged = if lambda >= lambda_max * (1.0 - 1e-10) {
                params = Params {
                    b0: null_b0.clone(),
                    beta: vec![vec![0.0; p]; k],
                };
                true
            } else {
                let mut budget = opts.max_iter;
                match self.family {
                    GlmFamily::Gaussian => self.fit_gaussian(lambda, &mut params, opts, &mut budget),
                    GlmFamily::Binomial => self.fit_binomial(lambda, &mut params, opts, &mut budget),
                    GlmFamily::Multinomial { .. } => {
                        self.fit_multinomial(lambda, &mut params, opts, &mut budget)
                    }
                }
            };
            if !converged {
                log::warn!("coordinate descent hit max_iter={} at lambda={lambda}", opts.max_iter);
            }
            out.intercepts.push(params.b0.clone());
            out.coefficients.push(params.beta.clone());
            out.converged.push(converged);
        }
        out
    }

    fn fit_gaussian(&self, lambda: f64, params: &mut Params, opts: &GlmOptions, budget: &mut usize) -> bool {
        let Target::Real(y) = self.target else { unreachable!() };
        solve_wls(
            &self.design,
            &self.weights,
            y,
            lambda,
            &mut params.b0[0],
            &mut params.beta[0],
            opts.tol,
            budget,
        )
    }

    fn fit_binomial(&self, lambda: f64, params: &mut Params, opts: &GlmOptions, budget: &mut usize) -> bool {
        let Target::Labels(y) = self.target else { unreachable!() };
        let n = self.design.n;
        let mut objective = self.penalized_objective(params, lambda, &[0]);
        let mut irls_w = vec![0.0; n];
        let mut z = vec![0.0; n];
        loop {
            let eta = self.design.predictor(params.b0[0], &params.beta[0]);
            for i in 0..n {
                let prob = logistic(eta[i]).clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                let v = prob * (1.0 - prob);
                irls_w[i] = self.weights[i] * v;
                z[i] = eta[i] + (y[i] as f64 - prob) / v;
            }
            let previous = params.clone_params();
            let inner_ok = solve_wls(
                &self.design,
                &irls_w,
                &z,
                lambda,
                &mut params.b0[0],
                &mut params.beta[0],
                opts.tol,
                budget,
            );
            params.b0[0] = params.b0[0].clamp(-INTERCEPT_CLIP, INTERCEPT_CLIP);
            objective = self.backtrack(params, &previous, objective, lambda, &[0]);
            if !inner_ok {
                return false;
            }
            if params.max_change(&previous) < opts.tol {
                return true;
            }
            if *budget == 0 {
                return false;
            }
        }
    }

    fn fit_multinomial(&self, lambda: f64, params: &mut Params, opts: &GlmOptions, budget: &mut usize) -> bool {
        let Target::Labels(y) = self.target else { unreachable!() };
        let n = self.design.n;
        let present = self.present_classes();
        let mut eta: Vec<Vec<f64>> = (0..params.b0.len())
            .map(|c| self.design.predictor(params.b0[c], &params.beta[c]))
            .collect();
        let mut objective = self.penalized_objective(params, lambda, &present);
        let mut irls_w = vec![0.0; n];
        let mut z = vec![0.0; n];
        let mut scores = vec![0.0; present.len()];
        let mut probs = vec![0.0; present.len()];
        loop {
            let previous = params.clone_params();
            for (slot, &c) in present.iter().enumerate() {
                for i in 0..n {
                    for (s, &cc) in scores.iter_mut().zip(&present) {
                        *s = eta[cc][i];
                    }
                    softmax_into(&scores, &mut probs);
                    let prob = probs[slot].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                    let v = prob * (1.0 - prob);
                    irls_w[i] = self.weights[i] * v;
                    let yc = (y[i] == c) as u8 as f64;
                    z[i] = eta[c][i] + (yc - prob) / v;
                }
                let inner_ok = solve_wls(
                    &self.design,
                    &irls_w,
                    &z,
                    lambda,
                    &mut params.b0[c],
                    &mut params.beta[c],
                    opts.tol,
                    budget,
                );
                eta[c] = self.design.predictor(params.b0[c], &params.beta[c]);
                if !inner_ok {
                    return false;
                }
            }
            let mean_b0 = present.iter().map(|&c| params.b0[c]).sum::<f64>() / present.len() as f64;
            for &c in &present {
                params.b0[c] = (params.b0[c] - mean_b0).clamp(-INTERCEPT_CLIP, INTERCEPT_CLIP);
            }
            fill_absent(&mut params.b0, &present);
            objective = self.backtrack(params, &previous, objective, lambda, &present);
            for (c, eta_c) in eta.iter_mut().enumerate() {
                *eta_c = self.design.predictor(params.b0[c], &params.beta[c]);
            }
            if params.max_change(&previous) < opts.tol {
                return true;
            }
            if *budget == 0 {
                return false;
            }
        }
    }

    /// Step halving towards `previous` while the true penalized objective is
    /// worse than before the IRLS step. Returns the accepted objective.
    fn backtrack(&self, params: &mut Params, previous: &Params, before: f64, lambda: f64, outputs: &[usize]) -> f64 {
        let mut current = self.penalized_objective(params, lambda, outputs);
        let mut halvings = 0;
        while current > before + 1e-12 * before.abs().max(1.0) && halvings < 30 {
            *params = previous.midpoint(params);
            current = self.penalized_objective(params, lambda, outputs);
            halvings += 1;
        }
        current
    }
}

/// Classes with no training weight sit far below the smallest fitted
/// intercept so their probabilities are negligible.
fn fill_absent(b0: &mut [f64], present: &[usize]) {
    if present.len() == b0.len() {
        return;
    }
    let floor = present.iter().map(|&c| b0[c]).fold(f64::INFINITY, f64::min);
    let floor = if floor.is_finite() { floor } else { 0.0 };
    for (c, v) in b0.iter_mut().enumerate() {
        if !present.contains(&c) {
            *v = floor - INTERCEPT_CLIP;
        }
    }
}
