//! Synthetic clustered regression data and the study comparing customized
//! training against a single global lasso and k-nearest neighbours.
//!
//! Each instance has three latent classes with probabilities drawn once from
//! Dirichlet(2, 2, 2). Class `k` has a center `c_k ~ N(0, sigma_c^2 I_p)` and
//! a coefficient vector with `p / 10` ones at uniformly random positions.
//! Rows are `x ~ N(c_z, I_p)` and `y ~ N(beta_z^T x, 1)`.
//!
//! Every random component draws from its own ChaCha8 stream of the instance
//! seed, so changing one component never shifts another.

use std::io::Write;

use ndarray::{Array2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Dirichlet, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::customize::{build_joint_partition, fit_ct, fit_standard, predict_ct, resolve_rejections, FitSettings, RejectionPolicy};
use crate::data::{Dataset, Response};
use crate::error::{Error, Result};
use crate::glm::{default_lambda_min_ratio, lambda_fractions, GlmFamily, DEFAULT_N_LAMBDA};
use crate::selection::{
    cv_select, evaluate_loss, knn_baseline, knn_cv_select, CvConfig, LossSpec, Prediction, DEFAULT_FOLDS,
    DEFAULT_G_GRID,
};

pub const N_CLASSES: usize = 3;
pub const DIRICHLET_ALPHA: [f64; N_CLASSES] = [2.0, 2.0, 2.0];

// Stream ids, one per random component.
const CLASS_STREAM: u64 = 1;
const CENTER_STREAM: u64 = 2;
const FEATURE_STREAM: u64 = 3;
const BETA_STREAM: u64 = 4;
const NOISE_STREAM: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub sigma_c: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.p % 10 != 0 {
            return Err(Error::input(format!("p must be a positive multiple of 10, got {}", self.p)));
        }
        if self.n < 3 || self.m < 3 {
            return Err(Error::input("need at least 3 training and 3 test rows"));
        }
        if !(self.sigma_c.is_finite() && self.sigma_c >= 0.0) {
            return Err(Error::input("sigma_c must be finite and nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimInstance {
    pub train: Dataset,
    pub test: Dataset,
    pub class_probabilities: [f64; N_CLASSES],
    /// `N_CLASSES × p`.
    pub true_centers: Array2<f64>,
    /// `N_CLASSES × p`, entries 0 or 1.
    pub true_betas: Array2<f64>,
    pub train_classes: Vec<usize>,
    pub test_classes: Vec<usize>,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn generate_instance(config: &SimConfig) -> Result<SimInstance> {
    config.validate()?;
    let SimConfig { n, m, p, sigma_c, seed } = *config;

    let mut rng = stream(seed, CLASS_STREAM);
    let dirichlet = Dirichlet::new(DIRICHLET_ALPHA).expect("valid concentration");
    let class_probabilities: [f64; N_CLASSES] = dirichlet.sample(&mut rng);
    let categorical = WeightedIndex::new(class_probabilities).map_err(|e| Error::input(e.to_string()))?;
    let train_classes: Vec<usize> = (0..n).map(|_| categorical.sample(&mut rng)).collect();
    let test_classes: Vec<usize> = (0..m).map(|_| categorical.sample(&mut rng)).collect();

    let mut rng = stream(seed, CENTER_STREAM);
    let true_centers = Array2::from_shape_fn((N_CLASSES, p), |_| {
        let z = normal(&mut rng);
        if sigma_c == 0.0 {
            0.0
        } else {
            sigma_c * z
        }
    });

    let mut rng = stream(seed, BETA_STREAM);
    let mut true_betas = Array2::zeros((N_CLASSES, p));
    for k in 0..N_CLASSES {
        for j in rand::seq::index::sample(&mut rng, p, p / 10) {
            true_betas[[k, j]] = 1.0;
        }
    }

    let mut features_rng = stream(seed, FEATURE_STREAM);
    let mut noise_rng = stream(seed, NOISE_STREAM);
    let mut draw = |classes: &[usize]| -> Result<Dataset> {
        let x = Array2::from_shape_fn((classes.len(), p), |(i, j)| {
            true_centers[[classes[i], j]] + normal(&mut features_rng)
        });
        let y: Vec<f64> = classes
            .iter()
            .zip(x.axis_iter(Axis(0)))
            .map(|(&k, row)| row.dot(&true_betas.row(k)) + normal(&mut noise_rng))
            .collect();
        Dataset::new(x, Response::Real(y))
    };
    let train = draw(&train_classes)?;
    let test = draw(&test_classes)?;
    Ok(SimInstance {
        train,
        test,
        class_probabilities,
        true_centers,
        true_betas,
        train_classes,
        test_classes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setting {
    LowDim,
    HighDim,
}

impl Setting {
    /// `(n, m, p)`.
    pub fn dims(self) -> (usize, usize, usize) {
        match self {
            Setting::LowDim => (300, 300, 100),
            Setting::HighDim => (200, 200, 300),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setting::LowDim => "low-dim",
            Setting::HighDim => "high-dim",
        }
    }

    pub fn parse(s: &str) -> Result<Setting> {
        match s {
            "low-dim" | "low_dim" => Ok(Setting::LowDim),
            "high-dim" | "high_dim" => Ok(Setting::HighDim),
            _ => Err(Error::input(format!("unknown setting '{s}' (expected low-dim or high-dim)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Ct,
    St,
    Knn,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Ct => "CT",
            Method::St => "ST",
            Method::Knn => "KNN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub setting: Setting,
    pub sigma_c_values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    pub g_grid: Vec<usize>,
    pub n_lambda: usize,
    pub folds: usize,
    pub knn_grid: Vec<usize>,
}

impl StudyConfig {
    pub fn new(setting: Setting, sigma_c_values: Vec<f64>, seeds: Vec<u64>) -> Self {
        StudyConfig {
            setting,
            sigma_c_values,
            seeds,
            methods: vec![Method::Ct, Method::St, Method::Knn],
            g_grid: DEFAULT_G_GRID.to_vec(),
            n_lambda: DEFAULT_N_LAMBDA,
            folds: DEFAULT_FOLDS,
            knn_grid: vec![1, 3, 5, 10, 20, 50],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub setting: String,
    pub sigma_c: f64,
    pub seed: u64,
    pub method: String,
    pub mse: f64,
    #[serde(rename = "G_selected")]
    pub g_selected: Option<usize>,
    pub lambda_fraction_selected: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub setting: String,
    pub sigma_c: f64,
    pub method: String,
    pub runs: usize,
    pub mean_mse: f64,
    /// Sample standard deviation over runs divided by `sqrt(runs)`.
    pub se_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyResults {
    pub rows: Vec<StudyRow>,
    pub summary: Vec<SummaryRow>,
}

impl StudyResults {
    pub fn write_rows<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.rows)
    }

    pub fn write_summary<W: Write>(&self, out: W) -> Result<()> {
        write_csv(out, &self.summary)
    }

    pub fn mean(&self, method: Method, sigma_c: f64) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.method == method.name() && s.sigma_c == sigma_c)
            .map(|s| s.mean_mse)
    }
}

fn write_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn mse(predictions: &[Prediction], truth: &Response) -> Result<f64> {
    Ok(evaluate_loss(&LossSpec::squared_error(), predictions, truth)? / truth.len() as f64)
}

/// Test MSE and selected tuning values of one method on one instance.
pub fn evaluate_method(
    instance: &SimInstance,
    method: Method,
    config: &StudyConfig,
    seed: u64,
) -> Result<(f64, Option<usize>, Option<f64>)> {
    let train = &instance.train;
    let test = &instance.test;
    let x = train.features.view();
    let xt = test.features.view();
    let ratio = default_lambda_min_ratio(train.n_rows(), train.n_features());
    let settings = FitSettings::new(GlmFamily::Gaussian, lambda_fractions(config.n_lambda, ratio)?);
    let mut cv = CvConfig::new(settings.clone(), LossSpec::squared_error());
    cv.folds = config.folds;
    cv.seed = seed;
    match method {
        Method::Ct => {
            cv.g_grid = config.g_grid.clone();
            let report = cv_select(x, &train.response, &cv)?;
            let g = report.selected.g.expect("joint selection has a G");
            let k = report.selected.fraction_index;
            let partition = build_joint_partition(x, xt, g, false)?;
            let model = fit_ct(partition, x, &train.response, &settings, k, None)?;
            let model = resolve_rejections(&model, x, &train.response, RejectionPolicy::default())?;
            let pred = predict_ct(&model, xt)?;
            let values: Vec<Prediction> = pred.values().into_iter().map(|v| v.expect("resolved")).collect();
            Ok((mse(&values, &test.response)?, Some(g), Some(report.selected.lambda_fraction)))
        }
        Method::St => {
            cv.g_grid = vec![1];
            let report = cv_select(x, &train.response, &cv)?;
            let k = report.selected.fraction_index;
            let model = fit_standard(x, &train.response, &settings, k)?;
            let values = model.predict(xt, None)?;
            Ok((mse(&values, &test.response)?, Some(1), Some(report.selected.lambda_fraction)))
        }
        Method::Knn => {
            let report = knn_cv_select(
                x,
                &train.response,
                &config.knn_grid,
                config.folds,
                seed,
                &LossSpec::squared_error(),
            )?;
            let values = knn_baseline(x, &train.response, xt, report.selected_k)?;
            Ok((mse(&values, &test.response)?, None, None))
        }
    }
}

/// Runs every method on every `(sigma_c, seed)` instance of the setting.
/// Rejected CT test rows are resolved by re-cutting so every row is scored.
pub fn run_study(config: &StudyConfig) -> Result<StudyResults> {
    if config.sigma_c_values.is_empty() || config.seeds.is_empty() || config.methods.is_empty() {
        return Err(Error::input("sigma_c values, seeds and methods must be nonempty"));
    }
    let (n, m, p) = config.setting.dims();
    let cells: Vec<(f64, u64)> = config
        .sigma_c_values
        .iter()
        .flat_map(|&s| config.seeds.iter().map(move |&seed| (s, seed)))
        .collect();
    let per_cell = cells
        .par_iter()
        .map(|&(sigma_c, seed)| -> Result<Vec<StudyRow>> {
            let instance = generate_instance(&SimConfig { n, m, p, sigma_c, seed })?;
            config
                .methods
                .iter()
                .map(|&method| {
                    let (mse, g, fraction) = evaluate_method(&instance, method, config, seed)?;
                    log::info!(
                        "{} sigma_c={sigma_c} seed={seed} {}: mse {mse:.4}",
                        config.setting.name(),
                        method.name()
                    );
                    Ok(StudyRow {
                        setting: config.setting.name().to_string(),
                        sigma_c,
                        seed,
                        method: method.name().to_string(),
                        mse,
                        g_selected: g,
                        lambda_fraction_selected: fraction,
                    })
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<StudyRow> = per_cell.into_iter().flatten().collect();

    let mut summary = Vec::new();
    for &sigma_c in &config.sigma_c_values {
        for &method in &config.methods {
            let values: Vec<f64> = rows
                .iter()
                .filter(|r| r.sigma_c == sigma_c && r.method == method.name())
                .map(|r| r.mse)
                .collect();
            let runs = values.len();
            let mean = values.iter().sum::<f64>() / runs as f64;
            let se = if runs > 1 {
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (runs - 1) as f64;
                (var / runs as f64).sqrt()
            } else {
                0.0
            };
            summary.push(SummaryRow {
                setting: config.setting.name().to_string(),
                sigma_c,
                method: method.name().to_string(),
                runs,
                mean_mse: mean,
                se_mse: se,
            });
        }
    }
    Ok(StudyResults { rows, summary })
}
