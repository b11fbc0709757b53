//! Datasets, CSV ingestion and feature standardization.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Response vector of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    Real(Vec<f64>),
    /// Class codes in `0..n_classes`.
    Classes { labels: Vec<usize>, n_classes: usize },
}

impl Response {
    pub fn len(&self) -> usize {
        match self {
            Response::Real(y) => y.len(),
            Response::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_classification(&self) -> bool {
        matches!(self, Response::Classes { .. })
    }

    pub fn n_classes(&self) -> Option<usize> {
        match self {
            Response::Real(_) => None,
            Response::Classes { n_classes, .. } => Some(*n_classes),
        }
    }

    /// Rows `indices`, in the given order. The class count is preserved even
    /// when some classes are absent from the subset.
    pub fn select(&self, indices: &[usize]) -> Response {
        match self {
            Response::Real(y) => Response::Real(indices.iter().map(|&i| y[i]).collect()),
            Response::Classes { labels, n_classes } => Response::Classes {
                labels: indices.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }

    pub fn as_real(&self) -> Option<&[f64]> {
        match self {
            Response::Real(y) => Some(y),
            Response::Classes { .. } => None,
        }
    }

    pub fn as_labels(&self) -> Option<&[usize]> {
        match self {
            Response::Real(_) => None,
            Response::Classes { labels, .. } => Some(labels),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f64>,
    pub response: Response,
    pub group_ids: Option<Vec<usize>>,
    pub feature_names: Vec<String>,
    /// Original class strings indexed by class code (classification only).
    pub class_names: Option<Vec<String>>,
    /// Original group strings indexed by group id.
    pub group_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, response: Response) -> Result<Self> {
        let p = features.ncols();
        let ds = Dataset {
            features,
            response,
            group_ids: None,
            feature_names: (0..p).map(|j| format!("x{}", j + 1)).collect(),
            class_names: None,
            group_names: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_groups(mut self, group_ids: Vec<usize>) -> Result<Self> {
        self.group_ids = Some(group_ids);
        self.validate()?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        if self.response.len() != n {
            return Err(Error::input(format!(
                "feature matrix has {} rows but response has {} entries",
                n,
                self.response.len()
            )));
        }
        if let Some(g) = &self.group_ids {
            if g.len() != n {
                return Err(Error::input(format!(
                    "feature matrix has {} rows but group ids have {} entries",
                    n,
                    g.len()
                )));
            }
        }
        if self.feature_names.len() != self.features.ncols() {
            return Err(Error::input("feature name count does not match column count"));
        }
        if let Some((i, j)) = first_non_finite(self.features.view()) {
            return Err(Error::input(format!("non-finite feature value at row {i}, column {j}")));
        }
        match &self.response {
            Response::Real(y) => {
                if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                    return Err(Error::input(format!("non-finite response at row {i}")));
                }
            }
            Response::Classes { labels, n_classes } => {
                if *n_classes < 2 {
                    return Err(Error::input(format!(
                        "classification needs at least 2 classes, found {n_classes}"
                    )));
                }
                if let Some(&bad) = labels.iter().find(|&&c| c >= *n_classes) {
                    return Err(Error::input(format!(
                        "class label {bad} out of range for {n_classes} classes"
                    )));
                }
            }
        }
        Ok(())
    }
}

fn first_non_finite(x: ArrayView2<f64>) -> Option<(usize, usize)> {
    x.indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(idx, _)| idx)
}

/// Encodes strings to `0..k` in order of first appearance.
pub fn encode_first_appearance<S: AsRef<str>>(values: &[S]) -> (Vec<usize>, Vec<String>) {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let codes = values
        .iter()
        .map(|v| {
            let v = v.as_ref();
            *index.entry(v).or_insert_with(|| {
                names.push(v.to_string());
                names.len() - 1
            })
        })
        .collect();
    (codes, names)
}

pub fn decode_labels(codes: &[usize], names: &[String]) -> Vec<String> {
    codes.iter().map(|&c| names[c].clone()).collect()
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    pub response_column: String,
    pub group_column: Option<String>,
    /// Treat a numeric response as class labels.
    pub force_classification: bool,
}

impl LoadOptions {
    pub fn new(response_column: impl Into<String>) -> Self {
        LoadOptions {
            response_column: response_column.into(),
            ..Default::default()
        }
    }

    pub fn group(mut self, column: impl Into<String>) -> Self {
        self.group_column = Some(column.into());
        self
    }

    pub fn classification(mut self, yes: bool) -> Self {
        self.force_classification = yes;
        self
    }
}

struct RawTable {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path).map_err(|source| Error::Open {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { headers, rows })
}

impl RawTable {
    fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::input(format!("column '{name}' not found in CSV header")))
    }

    fn numeric_matrix(&self, columns: &[usize]) -> Result<Array2<f64>> {
        let mut x = Array2::zeros((self.rows.len(), columns.len()));
        for (i, row) in self.rows.iter().enumerate() {
            for (k, &c) in columns.iter().enumerate() {
                let cell = &row[c];
                let value: f64 = cell.parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: self.headers[c].clone(),
                    message: format!("'{cell}' is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Parse {
                        row: i + 1,
                        column: self.headers[c].clone(),
                        message: format!("'{cell}' is not finite"),
                    });
                }
                x[[i, k]] = value;
            }
        }
        Ok(x)
    }

    fn strings(&self, column: usize) -> Vec<&str> {
        self.rows.iter().map(|r| r[column].as_str()).collect()
    }
}

/// Reads a training dataset. Every column other than the response and group
/// columns is a feature. Row numbers in parse errors are 1-based data rows.
pub fn load_dataset(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let table = read_table(path.as_ref())?;
    let response_col = table.column(&opts.response_column)?;
    let group_col = opts
        .group_column
        .as_deref()
        .map(|g| table.column(g))
        .transpose()?;
    if table.rows.len() < 2 {
        return Err(Error::input(format!(
            "need at least 2 data rows, found {}",
            table.rows.len()
        )));
    }

    let feature_cols: Vec<usize> = (0..table.headers.len())
        .filter(|&c| c != response_col && Some(c) != group_col)
        .collect();
    let features = table.numeric_matrix(&feature_cols)?;
    let feature_names = feature_cols.iter().map(|&c| table.headers[c].clone()).collect();

    let raw_response = table.strings(response_col);
    let numeric: Option<Vec<f64>> = if opts.force_classification {
        None
    } else {
        raw_response.iter().map(|s| s.parse::<f64>().ok()).collect()
    };
    let (response, class_names) = match numeric {
        Some(y) => {
            if let Some(i) = y.iter().position(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    row: i + 1,
                    column: opts.response_column.clone(),
                    message: format!("'{}' is not finite", raw_response[i]),
                });
            }
            (Response::Real(y), None)
        }
        None => {
            let (labels, names) = encode_first_appearance(&raw_response);
            let n_classes = names.len();
            (Response::Classes { labels, n_classes }, Some(names))
        }
    };

    let (group_ids, group_names) = match group_col {
        Some(c) => {
            let (ids, names) = encode_first_appearance(&table.strings(c));
            (Some(ids), Some(names))
        }
        None => (None, None),
    };

    let ds = Dataset {
        features,
        response,
        group_ids,
        feature_names,
        class_names,
        group_names,
    };
    ds.validate()?;
    Ok(ds)
}

/// Feature rows read by column name, e.g. a test file laid out like the
/// training file. Any response column present is ignored.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub features: Array2<f64>,
    pub group_ids: Option<Vec<usize>>,
    pub group_names: Option<Vec<String>>,
}

pub fn load_features(
    path: impl AsRef<Path>,
    feature_names: &[String],
    group_column: Option<&str>,
) -> Result<FeatureTable> {
    let table = read_table(path.as_ref())?;
    let cols = feature_names
        .iter()
        .map(|name| table.column(name))
        .collect::<Result<Vec<_>>>()?;
    if table.rows.is_empty() {
        return Err(Error::input("feature file has no data rows"));
    }
    let features = table.numeric_matrix(&cols)?;
    let (group_ids, group_names) = match group_column {
        Some(g) => {
            let c = table.column(g)?;
            let (ids, names) = encode_first_appearance(&table.strings(c));
            (Some(ids), Some(names))
        }
        None => (None, None),
    };
    Ok(FeatureTable {
        features,
        group_ids,
        group_names,
    })
}

/// Per-column centering and scaling with population standard deviations.
///
/// Columns whose values are all identical get scale 0 and are only centered,
/// which maps them to exact zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: ArrayView2<f64>) -> Result<Self> {
        Self::fit_weighted(features, None)
    }

    /// Weighted means and standard deviations; `weights` need not be normalized.
    pub fn fit_weighted(features: ArrayView2<f64>, weights: Option<&[f64]>) -> Result<Self> {
        let n = features.nrows();
        if n == 0 {
            return Err(Error::input("cannot standardize an empty matrix"));
        }
        if let Some((i, j)) = first_non_finite(features) {
            return Err(Error::input(format!("non-finite feature value at row {i}, column {j}")));
        }
        if let Some(w) = weights {
            if w.len() != n {
                return Err(Error::input("weight count does not match row count"));
            }
        }
        let total: f64 = weights.map_or(n as f64, |w| w.iter().sum());
        let mut means = Vec::with_capacity(features.ncols());
        let mut scales = Vec::with_capacity(features.ncols());
        for col in features.axis_iter(Axis(1)) {
            let first = col[0];
            if col.iter().all(|&v| v == first) {
                means.push(first);
                scales.push(0.0);
                continue;
            }
            let mean = match weights {
                Some(w) => col.iter().zip(w).map(|(v, w)| v * w).sum::<f64>() / total,
                None => col.sum() / total,
            };
            let var = match weights {
                Some(w) => {
                    col.iter()
                        .zip(w)
                        .map(|(v, w)| w * (v - mean) * (v - mean))
                        .sum::<f64>()
                        / total
                }
                None => col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / total,
            };
            means.push(mean);
            scales.push(var.sqrt());
        }
        Ok(Standardizer { means, scales })
    }

    /// Centering only; every scale is 1 except constant columns.
    pub fn center_only(features: ArrayView2<f64>, weights: Option<&[f64]>) -> Result<Self> {
        let mut s = Self::fit_weighted(features, weights)?;
        for scale in &mut s.scales {
            if *scale > 0.0 {
                *scale = 1.0;
            }
        }
        Ok(s)
    }

    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, features: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(features.ncols())?;
        let mut out = features.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mean, scale) = (self.means[j], self.scales[j]);
            if scale > 0.0 {
                col.mapv_inplace(|v| (v - mean) / scale);
            } else {
                col.mapv_inplace(|v| v - mean);
            }
        }
        Ok(out)
    }

    pub fn invert(&self, standardized: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_width(standardized.ncols())?;
        let mut out = standardized.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (mean, scale) = (self.means[j], self.scales[j]);
            if scale > 0.0 {
                col.mapv_inplace(|v| v * scale + mean);
            } else {
                col.mapv_inplace(|v| v + mean);
            }
        }
        Ok(out)
    }

    fn check_width(&self, p: usize) -> Result<()> {
        if p != self.means.len() {
            return Err(Error::input(format!(
                "standardizer was fitted on {} columns, got {p}",
                self.means.len()
            )));
        }
        Ok(())
    }
}

/// One row of a predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub row_index: usize,
    /// Empty when the row was rejected.
    pub prediction: Option<String>,
    pub cluster_id: usize,
    pub rejected: bool,
}

/// Writes `row_index,prediction,cluster_id,rejected`.
pub fn write_predictions<W: Write>(out: W, rows: &[PredictionRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["row_index", "prediction", "cluster_id", "rejected"])?;
    for r in rows {
        w.write_record([
            r.row_index.to_string(),
            r.prediction.clone().unwrap_or_default(),
            r.cluster_id.to_string(),
            r.rejected.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
