//! Customized training sets, per-cluster fits and prediction.
//!
//! Test rows are split into clusters, either by given groups (each cluster's
//! training set is the union of every member's `R` nearest training rows) or
//! by cutting a complete-linkage dendrogram of the stacked training and test
//! rows (each cluster trains on the training rows it contains). A lasso path
//! is fitted per cluster and every cluster predicts at the same position on
//! its own path, i.e. at the same fraction of its own `lambda_max`.
//!
//! A joint cluster with test rows but no training rows is *rejected*: its rows
//! get no prediction until [`resolve_rejections`] walks up the dendrogram to
//! the lowest ancestor that contains training rows.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{hclust_complete, knn_indices, Dendrogram};
use crate::data::{Response, Standardizer};
use crate::error::{Error, Result};
use crate::glm::{fit_glm_fractions, GlmFamily, GlmFit, GlmOptions, PROB_CLIP};
use crate::selection::{decide_class, Prediction};

/// Nearest neighbours per test row in grouped mode.
pub const DEFAULT_R_NEIGHBORS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Grouped,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterSets {
    /// Customized training rows, ascending.
    pub train: Vec<usize>,
    /// Test rows in this cluster, ascending.
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomizedPartition {
    pub mode: PartitionMode,
    pub clusters: Vec<ClusterSets>,
    pub n_train: usize,
    pub n_test: usize,
    pub r_neighbors: Option<usize>,
    /// Joint mode: dendrogram over training rows `0..n_train` followed by
    /// test rows `n_train..n_train + n_test`.
    pub dendrogram: Option<Dendrogram>,
    /// Joint mode: height of the last merge kept by the cut.
    pub cut_height: Option<f64>,
    /// Clusters with test rows and an empty training set.
    pub rejected_clusters: Vec<usize>,
}

impl CustomizedPartition {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Cluster of every test row.
    pub fn test_cluster_of(&self) -> Vec<usize> {
        let mut out = vec![usize::MAX; self.n_test];
        for (k, c) in self.clusters.iter().enumerate() {
            for &i in &c.test {
                out[i] = k;
            }
        }
        out
    }
}

fn check_widths(x_train: ArrayView2<f64>, x_test: ArrayView2<f64>) -> Result<()> {
    if x_train.nrows() == 0 {
        return Err(Error::input("training set is empty"));
    }
    if x_train.ncols() != x_test.ncols() {
        return Err(Error::input(format!(
            "training rows have {} features, test rows have {}",
            x_train.ncols(),
            x_test.ncols()
        )));
    }
    Ok(())
}

/// One cluster per test group; the training set of a group is the union of
/// the `r` nearest training rows of each of its members. Groups are labelled
/// `0..G` and cluster `k` holds group `k`.
pub fn build_grouped_partition(
    x_train: ArrayView2<f64>,
    x_test: ArrayView2<f64>,
    test_groups: &[usize],
    r: usize,
) -> Result<CustomizedPartition> {
    check_widths(x_train, x_test)?;
    if test_groups.len() != x_test.nrows() {
        return Err(Error::input("every test row needs a group"));
    }
    let neighbours = knn_indices(x_test, x_train, r)?;
    let g = test_groups.iter().max().map_or(0, |m| m + 1);
    let mut train_sets = vec![BTreeSet::new(); g];
    let mut test_sets = vec![Vec::new(); g];
    for (i, (&group, nn)) in test_groups.iter().zip(&neighbours).enumerate() {
        train_sets[group].extend(nn.iter().copied());
        test_sets[group].push(i);
    }
    let clusters = train_sets
        .into_iter()
        .zip(test_sets)
        .map(|(train, test)| ClusterSets {
            train: train.into_iter().collect(),
            test,
        })
        .collect();
    Ok(CustomizedPartition {
        mode: PartitionMode::Grouped,
        clusters,
        n_train: x_train.nrows(),
        n_test: x_test.nrows(),
        r_neighbors: Some(r),
        dendrogram: None,
        cut_height: None,
        rejected_clusters: Vec::new(),
    })
}

/// Stacks training rows above test rows, optionally standardizing the stack
/// before distances are taken.
pub fn stack_rows(x_train: ArrayView2<f64>, x_test: ArrayView2<f64>, standardize: bool) -> Result<Array2<f64>> {
    let stacked = ndarray::concatenate(Axis(0), &[x_train, x_test])
        .map_err(|e| Error::input(format!("cannot stack training and test rows: {e}")))?;
    if standardize {
        Standardizer::fit(stacked.view())?.apply(stacked.view())
    } else {
        Ok(stacked)
    }
}

/// Complete-linkage dendrogram of the stacked training and test rows.
pub fn joint_dendrogram(x_train: ArrayView2<f64>, x_test: ArrayView2<f64>, standardize: bool) -> Result<Dendrogram> {
    check_widths(x_train, x_test)?;
    hclust_complete(stack_rows(x_train, x_test, standardize)?.view())
}

/// Cuts a joint dendrogram into `g` clusters and splits each into its
/// training and test rows.
pub fn partition_from_dendrogram(dendrogram: Dendrogram, n_train: usize, g: usize) -> Result<CustomizedPartition> {
    let total = dendrogram.leaf_count;
    if n_train > total {
        return Err(Error::input("more training rows than dendrogram leaves"));
    }
    if g == 0 || g > total {
        return Err(Error::input(format!(
            "cluster count {g} outside 1..={total} (training plus test rows)"
        )));
    }
    let assignment = dendrogram.cut_by_count(g)?;
    let mut clusters = vec![
        ClusterSets {
            train: Vec::new(),
            test: Vec::new()
        };
        assignment.n_clusters
    ];
    for (leaf, &label) in assignment.labels.iter().enumerate() {
        if leaf < n_train {
            clusters[label].train.push(leaf);
        } else {
            clusters[label].test.push(leaf - n_train);
        }
    }
    let rejected_clusters = clusters
        .iter()
        .enumerate()
        .filter(|(_, c)| c.train.is_empty() && !c.test.is_empty())
        .map(|(k, _)| k)
        .collect();
    Ok(CustomizedPartition {
        mode: PartitionMode::Joint,
        clusters,
        n_train,
        n_test: total - n_train,
        r_neighbors: None,
        cut_height: Some(dendrogram.cut_height(g)),
        dendrogram: Some(dendrogram),
        rejected_clusters,
    })
}

/// Joint clustering of training and test rows cut into `g` clusters.
pub fn build_joint_partition(
    x_train: ArrayView2<f64>,
    x_test: ArrayView2<f64>,
    g: usize,
    standardize_distances: bool,
) -> Result<CustomizedPartition> {
    check_widths(x_train, x_test)?;
    let total = x_train.nrows() + x_test.nrows();
    if g == 0 || g > total {
        return Err(Error::input(format!(
            "cluster count {g} outside 1..={total} (training plus test rows)"
        )));
    }
    let dendrogram = joint_dendrogram(x_train, x_test, standardize_distances)?;
    partition_from_dendrogram(dendrogram, x_train.nrows(), g)
}

/// Shared fitting configuration: the family, the penalty grid expressed as
/// fractions of each fit's own `lambda_max`, and solver options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub family: GlmFamily,
    /// Decreasing, starting at 1.
    pub fractions: Vec<f64>,
    pub glm: GlmOptions,
}

impl FitSettings {
    pub fn new(family: GlmFamily, fractions: Vec<f64>) -> Self {
        FitSettings {
            family,
            fractions,
            glm: GlmOptions::default(),
        }
    }
}

/// Model for one cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClusterModel {
    Glm { fit: GlmFit, lambda_index: usize },
    /// Every training response in the cluster had this class.
    ConstantClass { class: usize, n_classes: usize },
}

impl ClusterModel {
    /// Fits on `rows` of the training data along `fractions`.
    pub fn fit(
        x_train: ArrayView2<f64>,
        y_train: &Response,
        rows: &[usize],
        settings: &FitSettings,
        fractions: &[f64],
        position: usize,
    ) -> Result<ClusterModel> {
        if rows.is_empty() {
            return Err(Error::input("cannot fit a cluster without training rows"));
        }
        let y = y_train.select(rows);
        if let Response::Classes { labels, n_classes } = &y {
            if labels.iter().all(|&c| c == labels[0]) {
                return Ok(ClusterModel::ConstantClass {
                    class: labels[0],
                    n_classes: *n_classes,
                });
            }
        }
        let x = x_train.select(Axis(0), rows);
        let fit = fit_glm_fractions(x.view(), &y, settings.family, fractions, &settings.glm, None)?;
        let lambda_index = fit.index_for_position(position);
        Ok(ClusterModel::Glm { fit, lambda_index })
    }

    /// Predictions at an explicit path position (`None` uses the stored one).
    pub fn predict_at(
        &self,
        features: ArrayView2<f64>,
        position: Option<usize>,
        class_weights: Option<&[f64]>,
    ) -> Result<Vec<Prediction>> {
        match self {
            ClusterModel::Glm { fit, lambda_index } => {
                let idx = position.map_or(*lambda_index, |k| fit.index_for_position(k));
                match fit.family {
                    GlmFamily::Gaussian => Ok(fit
                        .predict_response(idx, features)?
                        .into_iter()
                        .map(Prediction::Real)
                        .collect()),
                    _ => Ok(fit
                        .predict_class(idx, features, class_weights)?
                        .into_iter()
                        .map(Prediction::Class)
                        .collect()),
                }
            }
            ClusterModel::ConstantClass { class, n_classes } => {
                let probs = constant_probabilities(*class, *n_classes);
                let decided = decide_class(&probs, class_weights);
                Ok(vec![Prediction::Class(decided); features.nrows()])
            }
        }
    }

    pub fn predict(&self, features: ArrayView2<f64>, class_weights: Option<&[f64]>) -> Result<Vec<Prediction>> {
        self.predict_at(features, None, class_weights)
    }
}

/// `1 - PROB_CLIP` on the observed class, the remainder spread evenly.
pub fn constant_probabilities(class: usize, n_classes: usize) -> Vec<f64> {
    let rest = PROB_CLIP / (n_classes - 1) as f64;
    (0..n_classes)
        .map(|c| if c == class { 1.0 - PROB_CLIP } else { rest })
        .collect()
}

/// How a rejected cluster was resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub cluster: usize,
    /// Height of the original cut.
    pub cut_height: f64,
    /// Lowest re-cut height at which the cluster's rows share a cluster with
    /// enough training rows.
    pub resolved_height: f64,
    /// Dendrogram node whose training leaves form the new training set.
    pub resolved_node: usize,
    pub train: Vec<usize>,
    pub model: ClusterModel,
}

/// Customized-training model fitted for a particular set of test rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtModel {
    pub partition: CustomizedPartition,
    pub settings: FitSettings,
    /// Shared position on every cluster's penalty path.
    pub fraction_index: usize,
    /// Per cluster; `None` for rejected clusters and clusters without test rows.
    pub models: Vec<Option<ClusterModel>>,
    pub rejections: Vec<RejectionRecord>,
    /// Per-true-class misclassification weights applied at decision time.
    pub decision_weights: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
}

impl CtModel {
    pub fn lambda_fraction(&self) -> f64 {
        self.settings.fractions[self.fraction_index]
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }
}

/// Fits every cluster that has both training and test rows at path position
/// `fraction_index`. Rejected clusters are recorded and skipped.
pub fn fit_ct(
    partition: CustomizedPartition,
    x_train: ArrayView2<f64>,
    y_train: &Response,
    settings: &FitSettings,
    fraction_index: usize,
    decision_weights: Option<Vec<f64>>,
) -> Result<CtModel> {
    settings.family.check_response(y_train)?;
    if fraction_index >= settings.fractions.len() {
        return Err(Error::input(format!(
            "fraction index {fraction_index} out of range for {} fractions",
            settings.fractions.len()
        )));
    }
    if x_train.nrows() != partition.n_train || y_train.len() != partition.n_train {
        return Err(Error::input("training data does not match the partition"));
    }
    // Warm starts make a truncated path identical to the prefix of a full one.
    let fractions = &settings.fractions[..=fraction_index];
    let models = partition
        .clusters
        .par_iter()
        .map(|c| {
            if c.train.is_empty() || c.test.is_empty() {
                return Ok(None);
            }
            ClusterModel::fit(x_train, y_train, &c.train, settings, fractions, fraction_index).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CtModel {
        partition,
        settings: settings.clone(),
        fraction_index,
        models,
        rejections: Vec::new(),
        decision_weights,
        feature_names: (0..x_train.ncols()).map(|j| format!("x{}", j + 1)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowPrediction {
    pub cluster: usize,
    /// `None` marks an abstention.
    pub value: Option<Prediction>,
    /// Predicted through a resolved rejection.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtPredictions {
    pub rows: Vec<RowPrediction>,
}

impl CtPredictions {
    pub fn values(&self) -> Vec<Option<Prediction>> {
        self.rows.iter().map(|r| r.value).collect()
    }

    pub fn rejected(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.value.is_none())
            .map(|(i, _)| i)
            .collect()
    }
}

/// Predicts every test row with its cluster's model; rows of unresolved
/// rejected clusters abstain.
pub fn predict_ct(model: &CtModel, x_test: ArrayView2<f64>) -> Result<CtPredictions> {
    let partition = &model.partition;
    if x_test.nrows() != partition.n_test {
        return Err(Error::input(format!(
            "model was fitted for {} test rows, got {}",
            partition.n_test,
            x_test.nrows()
        )));
    }
    if x_test.ncols() != model.n_features() {
        return Err(Error::input(format!(
            "model has {} features, test rows have {}",
            model.n_features(),
            x_test.ncols()
        )));
    }
    let weights = model.decision_weights.as_deref();
    let mut rows = vec![
        RowPrediction {
            cluster: usize::MAX,
            value: None,
            resolved: false
        };
        partition.n_test
    ];
    for (k, c) in partition.clusters.iter().enumerate() {
        if c.test.is_empty() {
            continue;
        }
        let (cluster_model, resolved) = match &model.models[k] {
            Some(m) => (Some(m), false),
            None => (
                model.rejections.iter().find(|r| r.cluster == k).map(|r| &r.model),
                true,
            ),
        };
        let predictions = match cluster_model {
            Some(m) => Some(m.predict(x_test.select(Axis(0), &c.test).view(), weights)?),
            None => None,
        };
        for (pos, &i) in c.test.iter().enumerate() {
            rows[i] = RowPrediction {
                cluster: k,
                value: predictions.as_ref().map(|p| p[pos]),
                resolved: resolved && predictions.is_some(),
            };
        }
    }
    Ok(CtPredictions { rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionPolicy {
    /// Training rows the enlarged cluster must contain.
    pub min_train: usize,
}

impl Default for RejectionPolicy {
    fn default() -> Self {
        RejectionPolicy { min_train: 1 }
    }
}

/// Walks up the dendrogram from `node` to the lowest ancestor holding at
/// least `min_train` training leaves, then through any ancestors merged at
/// the same height (a cut at that height keeps them too).
fn resolve_node(d: &Dendrogram, node: usize, n_train: usize, min_train: usize) -> Option<(usize, f64)> {
    let parents = d.parents();
    let n = d.leaf_count;
    let mut current = node;
    loop {
        let merge = parents[current]?;
        current = n + merge;
        let train = d.leaves(current).iter().filter(|&&l| l < n_train).count();
        if train >= min_train {
            break;
        }
    }
    let height = d.height_of(current);
    while let Some(merge) = parents[current] {
        if d.merges[merge].height > height {
            break;
        }
        current = n + merge;
    }
    Some((current, height))
}

/// Re-cuts above each rejected cluster and refits on the enlarged training
/// set. Only rows that previously abstained change; every other cluster's
/// model is left untouched.
pub fn resolve_rejections(
    model: &CtModel,
    x_train: ArrayView2<f64>,
    y_train: &Response,
    policy: RejectionPolicy,
) -> Result<CtModel> {
    let mut out = model.clone();
    let partition = &model.partition;
    if partition.rejected_clusters.is_empty() {
        return Ok(out);
    }
    let dendrogram = partition
        .dendrogram
        .as_ref()
        .ok_or_else(|| Error::input("rejections can only be resolved for joint partitions"))?;
    if x_train.nrows() != partition.n_train || y_train.len() != partition.n_train {
        return Err(Error::input("training data does not match the partition"));
    }
    let nodes = dendrogram.cluster_nodes(partition.n_clusters())?;
    let cut_height = partition.cut_height.unwrap_or(0.0);
    let fractions = &model.settings.fractions[..=model.fraction_index];
    for &k in &partition.rejected_clusters {
        if model.rejections.iter().any(|r| r.cluster == k) {
            continue;
        }
        let (node, height) = resolve_node(dendrogram, nodes[k], partition.n_train, policy.min_train.max(1))
            .ok_or_else(|| {
                Error::input(format!(
                    "no ancestor of cluster {k} has {} training rows",
                    policy.min_train
                ))
            })?;
        let train: Vec<usize> = dendrogram
            .leaves(node)
            .into_iter()
            .filter(|&l| l < partition.n_train)
            .collect();
        let cluster_model =
            ClusterModel::fit(x_train, y_train, &train, &model.settings, fractions, model.fraction_index)?;
        out.rejections.push(RejectionRecord {
            cluster: k,
            cut_height,
            resolved_height: height,
            resolved_node: node,
            train,
            model: cluster_model,
        });
    }
    out.rejections.sort_by_key(|r| r.cluster);
    Ok(out)
}

/// Standard training: one model on every training row, predicted at path
/// position `fraction_index`.
pub fn fit_standard(
    x_train: ArrayView2<f64>,
    y_train: &Response,
    settings: &FitSettings,
    fraction_index: usize,
) -> Result<ClusterModel> {
    settings.family.check_response(y_train)?;
    if fraction_index >= settings.fractions.len() {
        return Err(Error::input("fraction index out of range"));
    }
    let rows: Vec<usize> = (0..x_train.nrows()).collect();
    ClusterModel::fit(
        x_train,
        y_train,
        &rows,
        settings,
        &settings.fractions[..=fraction_index],
        fraction_index,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::lambda_fractions;
    use ndarray::Array2;

    fn points(v: &[f64]) -> Array2<f64> {
        Array2::from_shape_vec((v.len(), 1), v.to_vec()).unwrap()
    }

    fn gaussian_settings() -> FitSettings {
        FitSettings::new(GlmFamily::Gaussian, lambda_fractions(20, 0.01).unwrap())
    }

    #[test]
    fn grouped_partition_unions_neighbours() {
        let train = points(&[0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        let test = points(&[0.5, 0.6, 11.5]);
        let p = build_grouped_partition(train.view(), test.view(), &[0, 0, 1], 2).unwrap();
        assert_eq!(p.n_clusters(), 2);
        assert_eq!(p.clusters[0].train, vec![0, 1]);
        assert_eq!(p.clusters[0].test, vec![0, 1]);
        assert_eq!(p.clusters[1].train, vec![4, 5]);
        assert!(p.clusters[0].train.len() <= 2 * p.clusters[0].test.len());
        assert_eq!(DEFAULT_R_NEIGHBORS, 10);
    }

    #[test]
    fn grouped_partition_saturates_at_training_size() {
        let train = points(&[0.0, 1.0, 2.0]);
        let test = points(&[0.5]);
        let p = build_grouped_partition(train.view(), test.view(), &[0], 10).unwrap();
        assert_eq!(p.clusters[0].train, vec![0, 1, 2]);
        let empty = Array2::<f64>::zeros((0, 1));
        assert!(build_grouped_partition(empty.view(), test.view(), &[0], 10).is_err());
    }

    #[test]
    fn joint_partition_single_cluster() {
        let train = points(&[0.0, 1.0, 3.0]);
        let test = points(&[0.5, 2.0]);
        let p = build_joint_partition(train.view(), test.view(), 1, false).unwrap();
        assert_eq!(p.clusters, vec![ClusterSets { train: vec![0, 1, 2], test: vec![0, 1] }]);
        assert!(p.rejected_clusters.is_empty());
        assert!(build_joint_partition(train.view(), test.view(), 6, false).is_err());
    }

    #[test]
    fn far_test_points_are_rejected() {
        let train = points(&[0.0, 1.0]);
        let test = points(&[100.0, 101.0]);
        let p = build_joint_partition(train.view(), test.view(), 2, false).unwrap();
        assert_eq!(p.clusters[0], ClusterSets { train: vec![0, 1], test: vec![] });
        assert_eq!(p.clusters[1], ClusterSets { train: vec![], test: vec![0, 1] });
        assert_eq!(p.rejected_clusters, vec![1]);
        assert_eq!(p.cut_height, Some(1.0));

        let y = Response::Real(vec![1.0, 3.0]);
        let model = fit_ct(p, train.view(), &y, &gaussian_settings(), 5, None).unwrap();
        let pred = predict_ct(&model, test.view()).unwrap();
        assert_eq!(pred.rejected(), vec![0, 1]);

        let resolved = resolve_rejections(&model, train.view(), &y, RejectionPolicy::default()).unwrap();
        let rec = &resolved.rejections[0];
        // Root merge of {0,1} (height 1) with {100,101} (height 1) at 101.
        assert_eq!(rec.resolved_height, 101.0);
        assert_eq!(rec.train, vec![0, 1]);
        let pred = predict_ct(&resolved, test.view()).unwrap();
        assert!(pred.rejected().is_empty());
        assert!(pred.rows.iter().all(|r| r.resolved));
        // One feature, constant predictions from the two training points.
        for r in &pred.rows {
            let Some(Prediction::Real(v)) = r.value else { panic!() };
            assert!(v.is_finite());
        }
    }

    #[test]
    fn identical_train_and_test_pair_up() {
        let train = points(&[0.0, 3.0, 7.0, 12.0]);
        let p = build_joint_partition(train.view(), train.view(), 4, false).unwrap();
        for (k, c) in p.clusters.iter().enumerate() {
            assert_eq!(c.train, vec![k]);
            assert_eq!(c.test, vec![k]);
        }
    }

    #[test]
    fn resolution_stops_at_first_ancestor_with_training_rows() {
        // Train {0, 1} and {20}; test {9.5, 10.5} between them, test {50}.
        // Cut at 3 clusters: {0,1}, {9.5,10.5}, {20, 50}? Use a layout where the
        // rejected pair first joins the {20, 21} training pair, not the root.
        let train = points(&[0.0, 1.0, 20.0, 21.0]);
        let test = points(&[14.0, 14.5]);
        let d = joint_dendrogram(train.view(), test.view(), false).unwrap();
        let p = partition_from_dendrogram(d, 4, 3).unwrap();
        assert_eq!(p.clusters[2], ClusterSets { train: vec![], test: vec![0, 1] });
        assert_eq!(p.rejected_clusters, vec![2]);
        let y = Response::Real(vec![0.0, 1.0, 5.0, 7.0]);
        let model = fit_ct(p, train.view(), &y, &gaussian_settings(), 0, None).unwrap();
        let resolved = resolve_rejections(&model, train.view(), &y, RejectionPolicy::default()).unwrap();
        let rec = &resolved.rejections[0];
        assert_eq!(rec.train, vec![2, 3]);
        // complete linkage between {14, 14.5} and {20, 21}
        assert_eq!(rec.resolved_height, 7.0);
        let pred = predict_ct(&resolved, test.view()).unwrap();
        for r in &pred.rows {
            // intercept-only at the top of the path: mean of 5 and 7
            assert_eq!(r.value, Some(Prediction::Real(6.0)));
        }
    }

    #[test]
    fn single_class_cluster_is_constant() {
        let x = points(&[0.0, 0.1, 0.2, 5.0, 5.1]);
        let y = Response::Classes { labels: vec![0, 0, 0, 1, 0], n_classes: 2 };
        let settings = FitSettings::new(GlmFamily::Binomial, lambda_fractions(10, 0.05).unwrap());
        let m = ClusterModel::fit(x.view(), &y, &[0, 1, 2], &settings, &settings.fractions, 3).unwrap();
        assert_eq!(m, ClusterModel::ConstantClass { class: 0, n_classes: 2 });
        let pred = m.predict(points(&[9.0, -9.0]).view(), Some(&[1.0, 5.0])).unwrap();
        assert_eq!(pred, vec![Prediction::Class(0); 2]);
    }

    #[test]
    fn intercept_only_clusters_predict_cluster_means() {
        let train = points(&[0.0, 1.0, 50.0, 51.0]);
        let test = points(&[0.5, 50.5]);
        let y = Response::Real(vec![2.0, 4.0, -1.0, -3.0]);
        let p = build_joint_partition(train.view(), test.view(), 2, false).unwrap();
        let model = fit_ct(p, train.view(), &y, &gaussian_settings(), 0, None).unwrap();
        let pred = predict_ct(&model, test.view()).unwrap();
        assert_eq!(pred.values(), vec![Some(Prediction::Real(3.0)), Some(Prediction::Real(-2.0))]);
    }

    #[test]
    fn no_rejections_is_a_no_op() {
        let train = points(&[0.0, 1.0, 2.0]);
        let test = points(&[0.5]);
        let y = Response::Real(vec![1.0, 2.0, 2.5]);
        let p = build_joint_partition(train.view(), test.view(), 1, false).unwrap();
        let model = fit_ct(p, train.view(), &y, &gaussian_settings(), 7, None).unwrap();
        let resolved = resolve_rejections(&model, train.view(), &y, RejectionPolicy::default()).unwrap();
        assert_eq!(resolved, model);
    }

    #[test]
    fn model_round_trips_through_json() {
        let train = points(&[0.0, 1.0, 2.0, 40.0]);
        let test = points(&[0.5, 39.0]);
        let y = Response::Real(vec![1.0, 2.0, 2.5, 9.0]);
        let p = build_joint_partition(train.view(), test.view(), 2, false).unwrap();
        let model = fit_ct(p, train.view(), &y, &gaussian_settings(), 4, None).unwrap();
        let json = serde_json::to_string(&model).unwrap();
        let back: CtModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, model);
    }
}
