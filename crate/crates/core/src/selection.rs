//! Losses, fold construction, cross-validation over the number of clusters
//! and the shared penalty fraction, and the k-nearest-neighbour baseline.

use std::io::Write;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::knn_indices;
use crate::customize::{
    build_grouped_partition, joint_dendrogram, partition_from_dendrogram, ClusterModel, CustomizedPartition,
    FitSettings, PartitionMode,
};
use crate::data::{encode_first_appearance, Response};
use crate::error::{Error, Result};

pub const DEFAULT_FOLDS: usize = 10;
pub const DEFAULT_G_GRID: [usize; 5] = [1, 2, 3, 5, 10];

/// Stream used for fold shuffles so they never collide with other seeded draws.
const FOLD_STREAM: u64 = 0xF01D;

/// A single prediction: a real value or a class index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Real(f64),
    Class(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SquaredError,
    Misclassification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Cost of misclassifying an observation whose true class is `t`.
    pub class_weights: Option<Vec<f64>>,
}

impl LossSpec {
    pub fn squared_error() -> Self {
        LossSpec {
            kind: LossKind::SquaredError,
            class_weights: None,
        }
    }

    pub fn misclassification(class_weights: Option<Vec<f64>>) -> Result<Self> {
        if let Some(w) = &class_weights {
            if w.is_empty() || w.iter().any(|&v| !(v.is_finite() && v > 0.0)) {
                return Err(Error::input("class weights must be positive and finite"));
            }
        }
        Ok(LossSpec {
            kind: LossKind::Misclassification,
            class_weights,
        })
    }

    /// Squared error for real responses, unweighted misclassification otherwise.
    pub fn for_response(response: &Response) -> Self {
        if response.is_classification() {
            LossSpec {
                kind: LossKind::Misclassification,
                class_weights: None,
            }
        } else {
            LossSpec::squared_error()
        }
    }

    fn weight(&self, class: usize) -> f64 {
        self.class_weights
            .as_ref()
            .map_or(1.0, |w| w.get(class).copied().unwrap_or(1.0))
    }

    /// Largest loss a single classification error can incur.
    pub fn max_class_weight(&self) -> f64 {
        self.class_weights
            .as_ref()
            .map_or(1.0, |w| w.iter().copied().fold(f64::MIN, f64::max))
    }

    fn check(&self, truths: &Response) -> Result<()> {
        match (self.kind, truths) {
            (LossKind::SquaredError, Response::Real(_)) => Ok(()),
            (LossKind::Misclassification, Response::Classes { n_classes, .. }) => match &self.class_weights {
                Some(w) if w.len() != *n_classes => Err(Error::input(format!(
                    "{} class weights given for {n_classes} classes",
                    w.len()
                ))),
                _ => Ok(()),
            },
            _ => Err(Error::input("loss kind does not match the response type")),
        }
    }
}

/// Loss of one prediction against observation `i` of `truths`.
fn point_loss(spec: &LossSpec, prediction: Prediction, truths: &Response, i: usize) -> Result<f64> {
    match (prediction, truths) {
        (Prediction::Real(p), Response::Real(y)) => Ok((p - y[i]).powi(2)),
        (Prediction::Class(c), Response::Classes { labels, .. }) => {
            Ok(if c == labels[i] { 0.0 } else { spec.weight(labels[i]) })
        }
        _ => Err(Error::input("prediction type does not match the response type")),
    }
}

/// Summed loss; squared error or (weighted) misclassification count.
pub fn evaluate_loss(spec: &LossSpec, predictions: &[Prediction], truths: &Response) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::input(format!(
            "{} predictions for {} observations",
            predictions.len(),
            truths.len()
        )));
    }
    spec.check(truths)?;
    let mut total = 0.0;
    for (i, &p) in predictions.iter().enumerate() {
        total += point_loss(spec, p, truths, i)?;
    }
    Ok(total)
}

/// Class minimizing expected loss `sum_{t != c} w_t p_t`; ties go to the
/// lower class index.
pub fn decide_class(probabilities: &[f64], class_weights: Option<&[f64]>) -> usize {
    let w = |t: usize| class_weights.map_or(1.0, |w| w[t]);
    let mut best = (f64::INFINITY, 0);
    for c in 0..probabilities.len() {
        let expected: f64 = (0..probabilities.len())
            .filter(|&t| t != c)
            .map(|t| w(t) * probabilities[t])
            .sum();
        if expected < best.0 {
            best = (expected, c);
        }
    }
    best.1
}

pub fn weighted_class_decision(probabilities: &[f64], spec: &LossSpec) -> usize {
    decide_class(probabilities, spec.class_weights.as_deref())
}

/// Fold of every observation. Sizes differ by at most one; with labels each
/// class is also spread over the folds to within one observation.
pub fn make_folds(n: usize, folds: usize, seed: u64, stratify: Option<&[usize]>) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::input("at least two folds are needed"));
    }
    if folds > n {
        return Err(Error::input(format!("{folds} folds requested for {n} observations")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FOLD_STREAM);
    let order: Vec<usize> = match stratify {
        None => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            order
        }
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::input("stratification labels do not match the row count"));
            }
            let n_classes = labels.iter().max().map_or(0, |m| m + 1);
            let mut by_class = vec![Vec::new(); n_classes];
            for (i, &c) in labels.iter().enumerate() {
                by_class[c].push(i);
            }
            by_class
                .into_iter()
                .flat_map(|mut rows| {
                    rows.shuffle(&mut rng);
                    rows
                })
                .collect()
        }
    };
    let mut assignment = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }
    Ok(assignment)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub settings: FitSettings,
    pub g_grid: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub loss: LossSpec,
    pub stratify: bool,
    /// Standardize the stacked rows before clustering.
    pub standardize_distances: bool,
}

impl CvConfig {
    pub fn new(settings: FitSettings, loss: LossSpec) -> Self {
        CvConfig {
            settings,
            g_grid: DEFAULT_G_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            seed: 0,
            loss,
            stratify: false,
            standardize_distances: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSelection {
    /// `None` in grouped mode, where the groups fix the clusters.
    pub g: Option<usize>,
    pub fraction_index: usize,
    pub lambda_fraction: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mode: PartitionMode,
    /// Rows of the loss matrix; empty in grouped mode (one row).
    pub g_grid: Vec<usize>,
    pub lambda_fractions: Vec<f64>,
    /// Summed fold loss per cell; `None` for invalid cells.
    pub losses: Vec<Vec<Option<f64>>>,
    pub invalid: Vec<Vec<bool>>,
    pub selected: CvSelection,
    pub folds: usize,
    pub fold_assignment: Vec<usize>,
    pub seed: u64,
    pub r_neighbors: Option<usize>,
}

impl CvReport {
    /// Plot-ready rows `G,lambda_fraction,loss`; invalid cells have an empty loss.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["G", "lambda_fraction", "loss"])?;
        for (r, row) in self.losses.iter().enumerate() {
            let g = self.g_grid.get(r).map_or(String::new(), |g| g.to_string());
            for (k, loss) in row.iter().enumerate() {
                w.write_record([
                    g.clone(),
                    self.lambda_fractions[k].to_string(),
                    loss.map_or(String::new(), |v| v.to_string()),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_config(x: ArrayView2<f64>, y: &Response, config: &CvConfig) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::input("feature and response row counts differ"));
    }
    if config.settings.fractions.is_empty() {
        return Err(Error::input("penalty fraction grid is empty"));
    }
    config.settings.family.check_response(y)?;
    config.loss.check(y)
}

/// Per-row loss charged to a held-out row that no cluster could predict.
fn worst_case_losses(spec: &LossSpec, y: &Response, train: &[usize], held: &[usize]) -> Vec<f64> {
    match y {
        Response::Real(v) => {
            let mean = train.iter().map(|&i| v[i]).sum::<f64>() / train.len() as f64;
            held.iter().map(|&i| (v[i] - mean).powi(2)).collect()
        }
        Response::Classes { .. } => vec![spec.max_class_weight(); held.len()],
    }
}

/// Per-held-out-row losses at every path position for one partition of the
/// fold. `partition` indexes its training rows into `train` and its test
/// rows into `held`.
fn partition_point_losses(
    x: ArrayView2<f64>,
    y: &Response,
    train: &[usize],
    held: &[usize],
    partition: &CustomizedPartition,
    config: &CvConfig,
) -> Result<Vec<Vec<f64>>> {
    let n_fractions = config.settings.fractions.len();
    let worst = worst_case_losses(&config.loss, y, train, held);
    let weights = config.loss.class_weights.as_deref();
    let per_cluster = partition
        .clusters
        .par_iter()
        .map(|c| -> Result<Vec<(usize, Vec<f64>)>> {
            if c.test.is_empty() {
                return Ok(Vec::new());
            }
            if c.train.is_empty() {
                return Ok(c.test.iter().map(|&t| (t, vec![worst[t]; n_fractions])).collect());
            }
            let rows: Vec<usize> = c.train.iter().map(|&t| train[t]).collect();
            let model = ClusterModel::fit(x, y, &rows, &config.settings, &config.settings.fractions, 0)?;
            let test_rows: Vec<usize> = c.test.iter().map(|&t| held[t]).collect();
            let xt = x.select(Axis(0), &test_rows);
            let mut out: Vec<(usize, Vec<f64>)> = c.test.iter().map(|&t| (t, vec![0.0; n_fractions])).collect();
            for k in 0..n_fractions {
                let pred = model.predict_at(xt.view(), Some(k), weights)?;
                for (pos, &i) in test_rows.iter().enumerate() {
                    out[pos].1[k] = point_loss(&config.loss, pred[pos], y, i)?;
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut losses = vec![vec![0.0; n_fractions]; held.len()];
    for (t, l) in per_cluster.into_iter().flatten() {
        losses[t] = l;
    }
    Ok(losses)
}

fn split_fold(assignment: &[usize], j: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assignment.len()).partition(|&i| assignment[i] != j)
}

/// Totals per cell summed over rows in index order, so the result does not
/// depend on how folds are numbered.
fn sum_rows(point: &[Vec<f64>], n_fractions: usize) -> Vec<f64> {
    let mut total = vec![0.0; n_fractions];
    for row in point {
        for (t, v) in total.iter_mut().zip(row) {
            *t += v;
        }
    }
    total
}

/// Smallest loss; ties prefer the earlier (smaller G) row, then the earlier
/// (larger) fraction.
fn argmin_cell(losses: &[Vec<Option<f64>>], row_order: &[usize]) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for &r in row_order {
        for (k, v) in losses[r].iter().enumerate() {
            if let Some(v) = *v {
                if best.is_none_or(|b| v < b.2) {
                    best = Some((r, k, v));
                }
            }
        }
    }
    best
}

/// Cross-validation over the cluster-count grid and the shared penalty
/// fraction. Each held-out fold plays the test set: it is clustered jointly
/// with the remaining rows and every cluster is fitted and scored.
pub fn cv_select(x: ArrayView2<f64>, y: &Response, config: &CvConfig) -> Result<CvReport> {
    check_config(x, y, config)?;
    if config.g_grid.is_empty() || config.g_grid.contains(&0) {
        return Err(Error::input("cluster-count grid must be nonempty and positive"));
    }
    let n = x.nrows();
    let stratify = if config.stratify { y.as_labels() } else { None };
    let assignment = make_folds(n, config.folds, config.seed, stratify)?;
    let n_fractions = config.settings.fractions.len();
    let n_g = config.g_grid.len();

    let fold_sizes: Vec<usize> = (0..config.folds)
        .map(|j| assignment.iter().filter(|&&f| f != j).count())
        .collect();
    let min_train = *fold_sizes.iter().min().unwrap();
    let valid: Vec<bool> = config.g_grid.iter().map(|&g| g <= min_train).collect();

    // point[g][row] = per-fraction loss of `row` while it was held out
    let per_fold = (0..config.folds)
        .into_par_iter()
        .map(|j| -> Result<Vec<Option<Vec<(usize, Vec<f64>)>>>> {
            let (train, held) = split_fold(&assignment, j);
            let dendrogram = joint_dendrogram(
                x.select(Axis(0), &train).view(),
                x.select(Axis(0), &held).view(),
                config.standardize_distances,
            )?;
            config
                .g_grid
                .iter()
                .zip(&valid)
                .map(|(&g, &ok)| {
                    if !ok {
                        return Ok(None);
                    }
                    let partition = partition_from_dendrogram(dendrogram.clone(), train.len(), g)?;
                    let losses = partition_point_losses(x, y, &train, &held, &partition, config)?;
                    Ok(Some(held.iter().copied().zip(losses).collect()))
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut point = vec![vec![Vec::new(); n]; n_g];
    for fold in per_fold {
        for (r, cell) in fold.into_iter().enumerate() {
            for (i, l) in cell.into_iter().flatten() {
                point[r][i] = l;
            }
        }
    }
    let losses: Vec<Vec<Option<f64>>> = (0..n_g)
        .map(|r| {
            if valid[r] {
                sum_rows(&point[r], n_fractions).into_iter().map(Some).collect()
            } else {
                vec![None; n_fractions]
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..n_g).collect();
    order.sort_by_key(|&r| config.g_grid[r]);
    let (r, k, loss) = argmin_cell(&losses, &order)
        .ok_or_else(|| Error::input(format!("every cluster count exceeds the fold training size {min_train}")))?;
    Ok(CvReport {
        mode: PartitionMode::Joint,
        g_grid: config.g_grid.clone(),
        lambda_fractions: config.settings.fractions.clone(),
        invalid: valid.iter().map(|&ok| vec![!ok; n_fractions]).collect(),
        losses,
        selected: CvSelection {
            g: Some(config.g_grid[r]),
            fraction_index: k,
            lambda_fraction: config.settings.fractions[k],
            loss,
        },
        folds: config.folds,
        fold_assignment: assignment,
        seed: config.seed,
        r_neighbors: None,
    })
}

/// Cross-validation for grouped test data: folds hold out whole training
/// groups, each held-out group gets its customized training set from the
/// remaining rows, and only the penalty fraction is tuned. The fold count is
/// capped at the number of groups.
pub fn cv_select_grouped(
    x: ArrayView2<f64>,
    y: &Response,
    groups: &[usize],
    r_neighbors: usize,
    config: &CvConfig,
) -> Result<CvReport> {
    check_config(x, y, config)?;
    if groups.len() != x.nrows() {
        return Err(Error::input("every training row needs a group"));
    }
    let n_groups = groups.iter().max().map_or(0, |m| m + 1);
    if n_groups < 2 {
        return Err(Error::input("grouped cross-validation needs at least two training groups"));
    }
    let folds = config.folds.min(n_groups);
    if folds < config.folds {
        log::warn!("only {n_groups} training groups; using {folds} folds");
    }
    let group_fold = make_folds(n_groups, folds, config.seed, None)?;
    let assignment: Vec<usize> = groups.iter().map(|&g| group_fold[g]).collect();
    let n_fractions = config.settings.fractions.len();

    let per_fold = (0..folds)
        .into_par_iter()
        .map(|j| -> Result<Vec<(usize, Vec<f64>)>> {
            let (train, held) = split_fold(&assignment, j);
            if train.is_empty() || held.is_empty() {
                return Ok(Vec::new());
            }
            let held_groups: Vec<String> = held.iter().map(|&i| groups[i].to_string()).collect();
            let (codes, _) = encode_first_appearance(&held_groups);
            let partition = build_grouped_partition(
                x.select(Axis(0), &train).view(),
                x.select(Axis(0), &held).view(),
                &codes,
                r_neighbors,
            )?;
            let losses = partition_point_losses(x, y, &train, &held, &partition, config)?;
            Ok(held.iter().copied().zip(losses).collect())
        })
        .collect::<Result<Vec<_>>>()?;

    let mut point = vec![Vec::new(); x.nrows()];
    for (i, l) in per_fold.into_iter().flatten() {
        point[i] = l;
    }
    let losses = vec![sum_rows(&point, n_fractions).into_iter().map(Some).collect::<Vec<_>>()];
    let (_, k, loss) = argmin_cell(&losses, &[0]).expect("grid is nonempty");
    Ok(CvReport {
        mode: PartitionMode::Grouped,
        g_grid: Vec::new(),
        lambda_fractions: config.settings.fractions.clone(),
        losses,
        invalid: vec![vec![false; n_fractions]],
        selected: CvSelection {
            g: None,
            fraction_index: k,
            lambda_fraction: config.settings.fractions[k],
            loss,
        },
        folds,
        fold_assignment: assignment,
        seed: config.seed,
        r_neighbors: Some(r_neighbors),
    })
}

/// Summed held-out loss of one joint cell, recomputed from scratch over the
/// given fold assignment.
pub fn cv_cell_loss(
    x: ArrayView2<f64>,
    y: &Response,
    config: &CvConfig,
    assignment: &[usize],
    g: usize,
    fraction_index: usize,
) -> Result<f64> {
    use crate::customize::{build_joint_partition, fit_ct, predict_ct};
    check_config(x, y, config)?;
    let folds = assignment.iter().max().map_or(0, |m| m + 1);
    let mut point = vec![0.0; x.nrows()];
    for j in 0..folds {
        let (train, held) = split_fold(assignment, j);
        let xtr = x.select(Axis(0), &train);
        let xte = x.select(Axis(0), &held);
        let ytr = y.select(&train);
        let partition = build_joint_partition(xtr.view(), xte.view(), g, config.standardize_distances)?;
        let model = fit_ct(
            partition,
            xtr.view(),
            &ytr,
            &config.settings,
            fraction_index,
            config.loss.class_weights.clone(),
        )?;
        let pred = predict_ct(&model, xte.view())?;
        let worst = worst_case_losses(&config.loss, y, &train, &held);
        for (pos, (&i, row)) in held.iter().zip(&pred.rows).enumerate() {
            point[i] = match row.value {
                Some(p) => point_loss(&config.loss, p, y, i)?,
                None => worst[pos],
            };
        }
    }
    Ok(point.iter().sum())
}

/// k-nearest-neighbour predictions: mean response or majority class (ties to
/// the lower class). `k` above the training size is clamped.
pub fn knn_baseline(
    x_train: ArrayView2<f64>,
    y_train: &Response,
    x_test: ArrayView2<f64>,
    k: usize,
) -> Result<Vec<Prediction>> {
    if k == 0 {
        return Err(Error::input("k must be at least 1"));
    }
    if x_train.nrows() != y_train.len() {
        return Err(Error::input("feature and response row counts differ"));
    }
    let k = if k > x_train.nrows() {
        log::warn!("k = {k} exceeds {} training rows; clamping", x_train.nrows());
        x_train.nrows()
    } else {
        k
    };
    let neighbours = knn_indices(x_test, x_train, k)?;
    Ok(neighbours
        .iter()
        .map(|nn| match y_train {
            Response::Real(v) => Prediction::Real(nn.iter().map(|&i| v[i]).sum::<f64>() / nn.len() as f64),
            Response::Classes { labels, n_classes } => {
                let mut votes = vec![0usize; *n_classes];
                for &i in nn {
                    votes[labels[i]] += 1;
                }
                let mut best = 0;
                for c in 1..votes.len() {
                    if votes[c] > votes[best] {
                        best = c;
                    }
                }
                Prediction::Class(best)
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnCvReport {
    pub k_grid: Vec<usize>,
    pub losses: Vec<f64>,
    pub selected_k: usize,
    pub folds: usize,
    pub seed: u64,
}

/// Picks `k` by cross-validation; ties go to the larger (smoother) `k`.
pub fn knn_cv_select(
    x: ArrayView2<f64>,
    y: &Response,
    k_grid: &[usize],
    folds: usize,
    seed: u64,
    loss: &LossSpec,
) -> Result<KnnCvReport> {
    if k_grid.is_empty() {
        return Err(Error::input("k grid is empty"));
    }
    loss.check(y)?;
    let assignment = make_folds(x.nrows(), folds, seed, None)?;
    let mut point = vec![vec![0.0; k_grid.len()]; x.nrows()];
    for j in 0..folds {
        let (train, held) = split_fold(&assignment, j);
        let xtr = x.select(Axis(0), &train);
        let xte = x.select(Axis(0), &held);
        let ytr = y.select(&train);
        for (a, &k) in k_grid.iter().enumerate() {
            let pred = knn_baseline(xtr.view(), &ytr, xte.view(), k.min(train.len()))?;
            for (pos, &i) in held.iter().enumerate() {
                point[i][a] = point_loss(loss, pred[pos], y, i)?;
            }
        }
    }
    let losses = sum_rows(&point, k_grid.len());
    let mut best = 0;
    for a in 1..k_grid.len() {
        if losses[a] < losses[best] || (losses[a] == losses[best] && k_grid[a] > k_grid[best]) {
            best = a;
        }
    }
    Ok(KnnCvReport {
        k_grid: k_grid.to_vec(),
        losses,
        selected_k: k_grid[best],
        folds,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn asymmetric_loss_counts_false_negatives_twice() {
        // class 0 = normal (weight 1), class 1 = cancer (weight 2)
        let spec = LossSpec::misclassification(Some(vec![1.0, 2.0])).unwrap();
        let truth = Response::Classes { labels: vec![1, 0, 0], n_classes: 2 };
        let pred = [Prediction::Class(0), Prediction::Class(1), Prediction::Class(0)];
        assert_eq!(evaluate_loss(&spec, &pred, &truth).unwrap(), 3.0);
    }

    #[test]
    fn loss_basics() {
        let spec = LossSpec::misclassification(None).unwrap();
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let truth = Response::Classes { labels: labels.clone(), n_classes: 2 };
        let correct: Vec<Prediction> = labels.iter().map(|&c| Prediction::Class(c)).collect();
        assert_eq!(evaluate_loss(&spec, &correct, &truth).unwrap(), 0.0);
        let mut wrong = correct.clone();
        for p in wrong.iter_mut().take(3) {
            let Prediction::Class(c) = *p else { unreachable!() };
            *p = Prediction::Class(1 - c);
        }
        assert_eq!(evaluate_loss(&spec, &wrong, &truth).unwrap(), 3.0);
        assert!(evaluate_loss(&spec, &wrong[..9], &truth).is_err());

        let real = Response::Real(vec![1.0, 2.0]);
        let p = [Prediction::Real(0.0), Prediction::Real(4.0)];
        assert_eq!(evaluate_loss(&LossSpec::squared_error(), &p, &real).unwrap(), 5.0);
        assert!(evaluate_loss(&spec, &p, &real).is_err());
        assert!(LossSpec::misclassification(Some(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn weighted_decision_examples() {
        let spec = LossSpec::misclassification(Some(vec![1.0, 2.0])).unwrap();
        // predict normal: 2 * 0.4 = 0.8; predict cancer: 1 * 0.6 = 0.6
        assert_eq!(weighted_class_decision(&[0.6, 0.4], &spec), 1);
        assert_eq!(decide_class(&[0.6, 0.4], None), 0);
        assert_eq!(decide_class(&[0.5, 0.5], None), 0);
        assert_eq!(decide_class(&[0.2, 0.3, 0.5], None), 2);
    }

    #[test]
    fn folds_examples() {
        assert_eq!(DEFAULT_FOLDS, 10);
        let f = make_folds(10, 10, 3, None).unwrap();
        let mut sorted = f.clone();
        sorted.sort();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_eq!(make_folds(57, 10, 9, None).unwrap(), make_folds(57, 10, 9, None).unwrap());
        assert!(make_folds(5, 6, 0, None).is_err());
        assert!(make_folds(5, 1, 0, None).is_err());
    }

    #[test]
    fn knn_examples() {
        let x = array![[0.0], [1.0], [2.0], [10.0]];
        let y = Response::Classes { labels: vec![1, 0, 1, 1], n_classes: 2 };
        let all = knn_baseline(x.view(), &y, array![[0.0], [50.0]].view(), 4).unwrap();
        assert_eq!(all, vec![Prediction::Class(1); 2]);
        let clamp = knn_baseline(x.view(), &y, array![[0.0]].view(), 40).unwrap();
        assert_eq!(clamp, vec![Prediction::Class(1)]);
        let own = knn_baseline(x.view(), &y, x.view(), 1).unwrap();
        assert_eq!(own, vec![1, 0, 1, 1].into_iter().map(Prediction::Class).collect::<Vec<_>>());

        let yr = Response::Real(vec![1.0, 3.0, 100.0, 100.0]);
        let p = knn_baseline(x.view(), &yr, array![[0.4]].view(), 2).unwrap();
        assert_eq!(p, vec![Prediction::Real(2.0)]);
        assert!(knn_baseline(x.view(), &yr, x.view(), 0).is_err());
    }

    #[test]
    fn vote_ties_go_to_lower_class() {
        let x = array![[0.0], [1.0]];
        let y = Response::Classes { labels: vec![1, 0], n_classes: 2 };
        assert_eq!(knn_baseline(x.view(), &y, array![[0.5]].view(), 2).unwrap(), vec![Prediction::Class(0)]);
    }

    #[test]
    fn cell_argmin_breaks_ties_toward_parsimony() {
        let losses = vec![
            vec![Some(3.0), Some(2.0), Some(2.0)],
            vec![Some(2.0), None, Some(5.0)],
        ];
        assert_eq!(argmin_cell(&losses, &[0, 1]), Some((0, 1, 2.0)));
        assert_eq!(argmin_cell(&[vec![None]], &[0]), None);
    }
}
