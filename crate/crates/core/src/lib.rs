//! Customized training for transductive prediction.
//!
//! The test set is partitioned, either by groups that come with the data or by
//! clustering the training and test rows together, and a sparse generalized
//! linear model is fitted on a customized training set for every partition.
//! The number of clusters and the penalty are chosen by cross-validation.
//!
//! Module map:
//!
//! * [`data`]: datasets, CSV ingestion and column standardization.
//! * [`glm`]: coordinate-descent lasso paths for gaussian, binomial and
//!   multinomial responses.
//! * [`cluster`]: nearest neighbours, complete-linkage dendrograms and cuts.
//! * [`customize`]: customized partitions, per-cluster fits, prediction and
//!   rejection handling.
//! * [`selection`]: losses, folds, cross-validation over the cluster/penalty
//!   grid and the k-nearest-neighbour baseline.
//! * [`simulation`]: the synthetic three-regime study.

pub mod cluster;
pub mod customize;
pub mod data;
pub mod error;
pub mod glm;
pub mod selection;
pub mod simulation;

pub use error::{Error, Result};
