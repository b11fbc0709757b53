//! Lasso-penalized generalized linear models fitted along a regularization
//! path by cyclic coordinate descent.
//!
//! The fitted problem is
//!
//! ```text
//! min_{b0, beta}  (1/n) sum_i w_i * loss(b0 + beta^T x_i, y_i) + lambda * |beta|_1
//! ```
//!
//! with the squared-error loss `0.5 (y - eta)^2` (gaussian), the logistic
//! loss `log(1 + e^eta) - y eta` (binomial) and the softmax cross-entropy with
//! one coefficient vector per class (multinomial). The intercepts are never
//! penalized. Features are standardized internally with the fit's own rows and
//! the coefficients are reported on the original scale.

mod objective;
mod solver;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Response, Standardizer};
use crate::error::{Error, Result};
use objective::Target;
pub use solver::soft_threshold;

/// Probabilities used in IRLS weights are kept inside `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-5;
/// Bound on the absolute value of any intercept.
pub const INTERCEPT_CLIP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlmFamily {
    Gaussian,
    /// Two classes; class 1 is the modelled event.
    Binomial,
    Multinomial { n_classes: usize },
}

impl GlmFamily {
    /// Gaussian for real responses, binomial for two classes, multinomial otherwise.
    pub fn for_response(response: &Response) -> GlmFamily {
        match response {
            Response::Real(_) => GlmFamily::Gaussian,
            Response::Classes { n_classes: 2, .. } => GlmFamily::Binomial,
            Response::Classes { n_classes, .. } => GlmFamily::Multinomial {
                n_classes: *n_classes,
            },
        }
    }

    /// Number of linear predictors: one, or one per class.
    pub fn n_outputs(self) -> usize {
        match self {
            GlmFamily::Multinomial { n_classes } => n_classes,
            _ => 1,
        }
    }

    pub fn n_classes(self) -> Option<usize> {
        match self {
            GlmFamily::Gaussian => None,
            GlmFamily::Binomial => Some(2),
            GlmFamily::Multinomial { n_classes } => Some(n_classes),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GlmFamily::Gaussian => "gaussian",
            GlmFamily::Binomial => "binomial",
            GlmFamily::Multinomial { .. } => "multinomial",
        }
    }

    pub fn check_response(self, response: &Response) -> Result<()> {
        match (self, response) {
            (GlmFamily::Gaussian, Response::Real(_)) => Ok(()),
            (GlmFamily::Binomial, Response::Classes { n_classes: 2, .. }) => Ok(()),
            (GlmFamily::Multinomial { n_classes }, Response::Classes { n_classes: c, .. })
                if n_classes == *c && n_classes >= 2 =>
            {
                Ok(())
            }
            _ => Err(Error::input(format!(
                "{} family does not match the response ({})",
                self.name(),
                match response.n_classes() {
                    None => "real-valued".to_string(),
                    Some(c) => format!("{c} classes"),
                }
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmOptions {
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    /// Coordinate sweeps allowed per penalty value.
    pub max_iter: usize,
    /// Scale columns to unit variance (they are always centered).
    pub standardize: bool,
}

impl Default for GlmOptions {
    fn default() -> Self {
        GlmOptions {
            tol: 1e-7,
            max_iter: 100_000,
            standardize: true,
        }
    }
}

pub const DEFAULT_N_LAMBDA: usize = 100;

/// 0.01 when there are more rows than features, 0.05 otherwise.
pub fn default_lambda_min_ratio(n: usize, p: usize) -> f64 {
    if n > p {
        0.01
    } else {
        0.05
    }
}

/// Penalties as fractions of the largest useful penalty: `n_lambda` values
/// log-spaced from 1 down to `min_ratio`.
pub fn lambda_fractions(n_lambda: usize, min_ratio: f64) -> Result<Vec<f64>> {
    if n_lambda == 0 {
        return Err(Error::input("n_lambda must be at least 1"));
    }
    if !(min_ratio > 0.0 && min_ratio < 1.0) {
        return Err(Error::input(format!(
            "lambda_min_ratio must lie in (0, 1), got {min_ratio}"
        )));
    }
    if n_lambda == 1 {
        return Ok(vec![1.0]);
    }
    let last = (n_lambda - 1) as f64;
    Ok((0..n_lambda)
        .map(|k| if k == 0 { 1.0 } else { min_ratio.powf(k as f64 / last) })
        .collect())
}

/// Outcome of [`compute_lambda_path`].
#[derive(Debug, Clone, PartialEq)]
pub enum LambdaPath {
    Regular(Vec<f64>),
    /// Classification input with a single observed class; no path exists.
    SingleClass { class: usize },
}

/// Decreasing penalty sequence starting at `lambda_max`, the smallest penalty
/// with an all-zero solution. `features` are used as given (callers pass
/// standardized columns). A gaussian response with `lambda_max == 0` yields
/// the single-point path `[0]`.
pub fn compute_lambda_path(
    features: ArrayView2<f64>,
    response: &Response,
    family: GlmFamily,
    n_lambda: usize,
    lambda_min_ratio: f64,
) -> Result<LambdaPath> {
    let fractions = lambda_fractions(n_lambda, lambda_min_ratio)?;
    let stats = Standardizer::center_only(features, None)?;
    let problem = build_problem(features, response, family, None, &stats)?;
    match problem.null_model().1 {
        None => {
            let class = response
                .as_labels()
                .and_then(|l| l.first().copied())
                .unwrap_or_default();
            Ok(LambdaPath::SingleClass { class })
        }
        Some(lambda_max) => Ok(LambdaPath::Regular(scale_fractions(lambda_max, &fractions))),
    }
}

fn scale_fractions(lambda_max: f64, fractions: &[f64]) -> Vec<f64> {
    if lambda_max > 0.0 {
        fractions.iter().map(|f| lambda_max * f).collect()
    } else {
        vec![0.0]
    }
}

fn build_problem<'a>(
    x: ArrayView2<f64>,
    response: &'a Response,
    family: GlmFamily,
    weights: Option<&[f64]>,
    stats: &Standardizer,
) -> Result<solver::Problem<'a>> {
    family.check_response(response)?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::input("cannot fit a model on zero rows"));
    }
    if response.len() != n {
        return Err(Error::input(format!(
            "{n} feature rows but {} responses",
            response.len()
        )));
    }
    let weights = match weights {
        None => vec![1.0; n],
        Some(w) => {
            if w.len() != n {
                return Err(Error::input("observation weight count does not match row count"));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::input("observation weights must be finite and nonnegative"));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::input("observation weights sum to zero"));
            }
            w.iter().map(|v| v * n as f64 / total).collect()
        }
    };
    let target = match response {
        Response::Real(y) => Target::Real(y),
        Response::Classes { labels, .. } => Target::Labels(labels),
    };
    Ok(solver::Problem {
        design: solver::Design::new(x, stats),
        family,
        target,
        weights,
    })
}

/// A fitted regularization path.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub family: GlmFamily,
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    /// Per penalty: one intercept per output.
    pub intercepts: Vec<Vec<f64>>,
    /// Per penalty: `outputs × p`, original feature scale.
    pub coefficients: Vec<Array2<f64>>,
    pub n_train: usize,
    pub feature_names: Vec<String>,
    /// Statistics used to standardize the training rows.
    pub standardizer: Standardizer,
    /// False where the sweep budget ran out.
    pub converged: Vec<bool>,
    /// Single-class classification data: intercept-only at the clip value.
    pub saturated: bool,
}

/// Fits the path at the given decreasing penalties, warm-starting each
/// solution from the previous one.
pub fn fit_glm_path(
    x: ArrayView2<f64>,
    response: &Response,
    family: GlmFamily,
    lambdas: &[f64],
    opts: &GlmOptions,
    weights: Option<&[f64]>,
) -> Result<GlmFit> {
    if lambdas.is_empty() {
        return Err(Error::input("empty penalty sequence"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::input("penalties must be finite and nonnegative"));
    }
    if lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("penalties must be strictly decreasing"));
    }
    let stats = standardizer_for(x, weights, opts)?;
    let problem = build_problem(x, response, family, weights, &stats)?;
    let solution = problem.solve_path(lambdas, opts);
    Ok(assemble(family, lambdas.to_vec(), solution, stats, x.nrows()))
}

/// Fits the path `lambda_max * fractions`, with `lambda_max` computed on this
/// fit's own standardized rows. Used wherever paths from different training
/// sets must line up by position.
pub fn fit_glm_fractions(
    x: ArrayView2<f64>,
    response: &Response,
    family: GlmFamily,
    fractions: &[f64],
    opts: &GlmOptions,
    weights: Option<&[f64]>,
) -> Result<GlmFit> {
    if fractions.is_empty() {
        return Err(Error::input("empty fraction grid"));
    }
    let stats = standardizer_for(x, weights, opts)?;
    let problem = build_problem(x, response, family, weights, &stats)?;
    let lambdas = match problem.null_model().1 {
        Some(lambda_max) => scale_fractions(lambda_max, fractions),
        None => vec![0.0],
    };
    let solution = problem.solve_path(&lambdas, opts);
    Ok(assemble(family, lambdas, solution, stats, x.nrows()))
}

fn standardizer_for(x: ArrayView2<f64>, weights: Option<&[f64]>, opts: &GlmOptions) -> Result<Standardizer> {
    if opts.standardize {
        Standardizer::fit_weighted(x, weights)
    } else {
        Standardizer::center_only(x, weights)
    }
}

fn assemble(
    family: GlmFamily,
    lambdas: Vec<f64>,
    solution: solver::PathSolution,
    stats: Standardizer,
    n_train: usize,
) -> GlmFit {
    let p = stats.n_features();
    let k = family.n_outputs();
    let mut intercepts = Vec::with_capacity(lambdas.len());
    let mut coefficients = Vec::with_capacity(lambdas.len());
    for (b0s, betas) in solution.intercepts.into_iter().zip(solution.coefficients) {
        let mut coef = Array2::zeros((k, p));
        let mut b0_out = Vec::with_capacity(k);
        for (c, (b0, beta)) in b0s.into_iter().zip(betas).enumerate() {
            let mut shift = 0.0;
            for j in 0..p {
                let scale = stats.scales[j];
                if scale > 0.0 && beta[j] != 0.0 {
                    let b = beta[j] / scale;
                    coef[[c, j]] = b;
                    shift += b * stats.means[j];
                }
            }
            b0_out.push(b0 - shift);
        }
        intercepts.push(b0_out);
        coefficients.push(coef);
    }
    GlmFit {
        family,
        lambdas,
        intercepts,
        coefficients,
        n_train,
        feature_names: (0..p).map(|j| format!("x{}", j + 1)).collect(),
        standardizer: stats,
        converged: solution.converged,
        saturated: solution.saturated,
    }
}

/// What [`predict_glm`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictMode {
    /// Gaussian mean, or the class-1 probability for binomial.
    Response,
    Class,
    Probability,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GlmPrediction {
    Values(Vec<f64>),
    Classes(Vec<usize>),
    /// `m × classes`.
    Probabilities(Array2<f64>),
}

/// Predicts at path position `lambda_index`. Class mode applies
/// `class_weights` through [`crate::selection::weighted_class_decision`].
pub fn predict_glm(
    fit: &GlmFit,
    lambda_index: usize,
    features: ArrayView2<f64>,
    mode: PredictMode,
    class_weights: Option<&[f64]>,
) -> Result<GlmPrediction> {
    Ok(match mode {
        PredictMode::Response => GlmPrediction::Values(fit.predict_response(lambda_index, features)?),
        PredictMode::Probability => GlmPrediction::Probabilities(fit.predict_proba(lambda_index, features)?),
        PredictMode::Class => GlmPrediction::Classes(fit.predict_class(lambda_index, features, class_weights)?),
    })
}

impl GlmFit {
    pub fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        if names.len() == self.n_features() {
            self.feature_names = names;
        }
        self
    }

    /// Path position for grid position `k`; degenerate single-point paths map
    /// every position to 0.
    pub fn index_for_position(&self, k: usize) -> usize {
        k.min(self.lambdas.len() - 1)
    }

    fn check(&self, lambda_index: usize, features: ArrayView2<f64>) -> Result<()> {
        if lambda_index >= self.lambdas.len() {
            return Err(Error::input(format!(
                "lambda index {lambda_index} out of range for a path of {}",
                self.lambdas.len()
            )));
        }
        if features.ncols() != self.n_features() {
            return Err(Error::input(format!(
                "model has {} features, input has {}",
                self.n_features(),
                features.ncols()
            )));
        }
        Ok(())
    }

    /// `m × outputs` linear predictors.
    pub fn linear_predictor(&self, lambda_index: usize, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check(lambda_index, features)?;
        Ok(objective::linear_predictor(
            features,
            &self.intercepts[lambda_index],
            self.coefficients[lambda_index].view(),
        ))
    }

    pub fn predict_response(&self, lambda_index: usize, features: ArrayView2<f64>) -> Result<Vec<f64>> {
        let eta = self.linear_predictor(lambda_index, features)?;
        match self.family {
            GlmFamily::Gaussian => Ok(eta.column(0).to_vec()),
            GlmFamily::Binomial => Ok(eta.column(0).iter().map(|&e| objective::logistic(e)).collect()),
            GlmFamily::Multinomial { .. } => Err(Error::input(
                "response mode is undefined for multinomial fits; use probabilities",
            )),
        }
    }

    /// `m × classes` probabilities; rows sum to one.
    pub fn predict_proba(&self, lambda_index: usize, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        let eta = self.linear_predictor(lambda_index, features)?;
        match self.family {
            GlmFamily::Gaussian => Err(Error::input("probabilities are undefined for gaussian fits")),
            GlmFamily::Binomial => {
                let mut out = Array2::zeros((eta.nrows(), 2));
                for (i, &e) in eta.column(0).iter().enumerate() {
                    let p1 = objective::logistic(e);
                    out[[i, 0]] = 1.0 - p1;
                    out[[i, 1]] = p1;
                }
                Ok(out)
            }
            GlmFamily::Multinomial { n_classes } => {
                let mut out = Array2::zeros((eta.nrows(), n_classes));
                let mut buf = vec![0.0; n_classes];
                for (i, row) in eta.axis_iter(Axis(0)).enumerate() {
                    objective::softmax_into(row.as_slice().unwrap_or(&row.to_vec()), &mut buf);
                    for c in 0..n_classes {
                        out[[i, c]] = buf[c];
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn predict_class(
        &self,
        lambda_index: usize,
        features: ArrayView2<f64>,
        class_weights: Option<&[f64]>,
    ) -> Result<Vec<usize>> {
        let probs = self.predict_proba(lambda_index, features)?;
        Ok(probs
            .axis_iter(Axis(0))
            .map(|row| crate::selection::decide_class(row.as_slice().unwrap(), class_weights))
            .collect())
    }

    /// Penalized objective at path position `lambda_index` evaluated on
    /// original-scale data; the penalty is measured on standardized
    /// coefficients, as in the fit.
    pub fn objective(
        &self,
        lambda_index: usize,
        x: ArrayView2<f64>,
        response: &Response,
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        let eta = self.linear_predictor(lambda_index, x)?;
        let (w, target) = solver_inputs(x.nrows(), response, weights);
        let nll = objective::nll_from_eta(self.family, target, &w, eta.view());
        Ok(nll + self.lambdas[lambda_index] * self.standardized_l1(lambda_index))
    }

    fn standardized_l1(&self, lambda_index: usize) -> f64 {
        let coef = &self.coefficients[lambda_index];
        coef.rows()
            .into_iter()
            .map(|row| {
                row.iter()
                    .zip(&self.standardizer.scales)
                    .map(|(b, s)| (b * s).abs())
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest violation of the lasso optimality conditions at path position
    /// `lambda_index`, in standardized coordinates (the original-scale gradient
    /// divided by the column scale): for zero coefficients the excess of
    /// `|gradient|` over lambda, otherwise `|gradient + lambda sign|`.
    /// Unpenalized intercept gradients count in full unless clipped.
    pub fn kkt_violation(
        &self,
        lambda_index: usize,
        x: ArrayView2<f64>,
        response: &Response,
        weights: Option<&[f64]>,
    ) -> Result<f64> {
        if self.saturated {
            return Ok(0.0);
        }
        let eta = self.linear_predictor(lambda_index, x)?;
        let (w, target) = solver_inputs(x.nrows(), response, weights);
        let (g0, g) = objective::parameter_gradient(self.family, target, &w, x, eta.view());
        let lambda = self.lambdas[lambda_index];
        let coef = &self.coefficients[lambda_index];
        let mut worst: f64 = 0.0;
        for (c, &gi) in g0.iter().enumerate() {
            if self.intercepts[lambda_index][c].abs() < INTERCEPT_CLIP - 1e-9 {
                worst = worst.max(gi.abs());
            }
        }
        for ((c, j), &gj) in g.indexed_iter() {
            let scale = self.standardizer.scales[j];
            if scale == 0.0 {
                continue;
            }
            let grad = gj / scale;
            let b = coef[[c, j]];
            let v = if b == 0.0 {
                (grad.abs() - lambda).max(0.0)
            } else {
                (grad + lambda * b.signum()).abs()
            };
            worst = worst.max(v);
        }
        Ok(worst)
    }

    /// Nonzero coefficients at a path position as `(output, feature, value)`.
    pub fn nonzero(&self, lambda_index: usize) -> Vec<(usize, usize, f64)> {
        self.coefficients[lambda_index]
            .indexed_iter()
            .filter(|(_, v)| **v != 0.0)
            .map(|((c, j), v)| (c, j, *v))
            .collect()
    }
}

fn solver_inputs<'a>(n: usize, response: &'a Response, weights: Option<&[f64]>) -> (Vec<f64>, Target<'a>) {
    let w = match weights {
        None => vec![1.0; n],
        Some(w) => {
            let total: f64 = w.iter().sum();
            w.iter().map(|v| v * n as f64 / total).collect()
        }
    };
    let target = match response {
        Response::Real(y) => Target::Real(y),
        Response::Classes { labels, .. } => Target::Labels(labels),
    };
    (w, target)
}

/// Mean negative log-likelihood and its gradient with respect to the
/// intercepts and the `outputs × p` coefficients, on the scale of `x`.
pub fn nll_and_gradient(
    family: GlmFamily,
    x: ArrayView2<f64>,
    response: &Response,
    weights: Option<&[f64]>,
    intercepts: &[f64],
    coefficients: ArrayView2<f64>,
) -> Result<(f64, Vec<f64>, Array2<f64>)> {
    family.check_response(response)?;
    if coefficients.dim() != (family.n_outputs(), x.ncols()) || intercepts.len() != family.n_outputs() {
        return Err(Error::input("parameter shapes do not match the family and features"));
    }
    let eta = objective::linear_predictor(x, intercepts, coefficients);
    let (w, target) = solver_inputs(x.nrows(), response, weights);
    let nll = objective::nll_from_eta(family, target, &w, eta.view());
    let (g0, g) = objective::parameter_gradient(family, target, &w, x, eta.view());
    Ok((nll, g0, g))
}

/// JSON layout of a [`GlmFit`]: coefficients are stored sparsely as
/// `(feature index, value)` pairs per output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GlmFitDocument {
    pub family: GlmFamily,
    pub n_train: usize,
    pub feature_names: Vec<String>,
    pub standardization: Standardizer,
    pub saturated: bool,
    pub path: Vec<PathPoint>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathPoint {
    pub lambda: f64,
    pub intercepts: Vec<f64>,
    pub coefficients: Vec<Vec<(usize, f64)>>,
    pub converged: bool,
}

impl From<&GlmFit> for GlmFitDocument {
    fn from(fit: &GlmFit) -> Self {
        let path = (0..fit.lambdas.len())
            .map(|l| PathPoint {
                lambda: fit.lambdas[l],
                intercepts: fit.intercepts[l].clone(),
                coefficients: fit.coefficients[l]
                    .rows()
                    .into_iter()
                    .map(|row| {
                        row.iter()
                            .enumerate()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(j, v)| (j, *v))
                            .collect()
                    })
                    .collect(),
                converged: fit.converged[l],
            })
            .collect();
        GlmFitDocument {
            family: fit.family,
            n_train: fit.n_train,
            feature_names: fit.feature_names.clone(),
            standardization: fit.standardizer.clone(),
            saturated: fit.saturated,
            path,
        }
    }
}

impl TryFrom<GlmFitDocument> for GlmFit {
    type Error = Error;

    fn try_from(doc: GlmFitDocument) -> Result<Self> {
        let p = doc.standardization.n_features();
        let k = doc.family.n_outputs();
        if doc.path.is_empty() {
            return Err(Error::input("model document has an empty path"));
        }
        let mut fit = GlmFit {
            family: doc.family,
            lambdas: Vec::new(),
            intercepts: Vec::new(),
            coefficients: Vec::new(),
            n_train: doc.n_train,
            feature_names: doc.feature_names,
            standardizer: doc.standardization,
            converged: Vec::new(),
            saturated: doc.saturated,
        };
        for point in doc.path {
            if point.intercepts.len() != k || point.coefficients.len() != k {
                return Err(Error::input("model document has the wrong number of outputs"));
            }
            let mut coef = Array2::zeros((k, p));
            for (c, entries) in point.coefficients.iter().enumerate() {
                for &(j, v) in entries {
                    if j >= p {
                        return Err(Error::input(format!("coefficient index {j} out of range")));
                    }
                    coef[[c, j]] = v;
                }
            }
            fit.lambdas.push(point.lambda);
            fit.intercepts.push(point.intercepts);
            fit.coefficients.push(coef);
            fit.converged.push(point.converged);
        }
        Ok(fit)
    }
}

impl Serialize for GlmFit {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        GlmFitDocument::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GlmFit {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let doc = GlmFitDocument::deserialize(deserializer)?;
        GlmFit::try_from(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests;
