//! Dataset ingestion, feature scaling, cross-validation splits and the
//! Mackey-Glass benchmark generator.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::RngExt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Classification,
    Regression,
    Timeseries,
}

impl TaskKind {
    pub fn is_classification(self) -> bool {
        self == TaskKind::Classification
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Classification => "classification",
            TaskKind::Regression => "regression",
            TaskKind::Timeseries => "timeseries",
        })
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "classification" => Ok(TaskKind::Classification),
            "regression" => Ok(TaskKind::Regression),
            "timeseries" | "time-series" => Ok(TaskKind::Timeseries),
            other => Err(Error::InvalidArgument(format!("unknown task kind {other:?}"))),
        }
    }
}

/// Min/max pair of an affine map onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParams {
    pub min: f64,
    pub max: f64,
}

impl NormParams {
    pub fn fit(values: impl IntoIterator<Item = f64>) -> Self {
        let (min, max) = values
            .into_iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            });
        NormParams { min, max }
    }

    /// Constant columns map to 0.5.
    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn scale(&self, v: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            (v - self.min) / (self.max - self.min)
        }
    }

    pub fn descale(&self, v: f64) -> f64 {
        if self.is_constant() {
            self.min
        } else {
            self.min + v * (self.max - self.min)
        }
    }
}

/// Feature matrix (row-major) with targets and scaling metadata.
///
/// Classification targets are contiguous label ids stored as `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    targets: Vec<f64>,
    pub feature_names: Vec<String>,
    pub task: TaskKind,
    /// Per-column scaling, `None` while unscaled.
    pub norm_params: Option<Vec<NormParams>>,
    /// Target scaling for regression and time-series data.
    pub target_norm: Option<NormParams>,
    /// Original class labels, indexed by label id.
    pub class_labels: Vec<String>,
}

impl Dataset {
    /// Builds an unscaled dataset from rows.
    pub fn from_rows(rows: Vec<Vec<f64>>, targets: Vec<f64>, task: TaskKind) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: targets.len(),
            });
        }
        let n_features = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != n_features) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} has {} features, expected {n_features}",
                rows[bad].len()
            )));
        }
        let class_labels = if task.is_classification() {
            let max = targets.iter().fold(0.0f64, |m, v| m.max(*v));
            (0..=(max as usize)).map(|c| c.to_string()).collect()
        } else {
            Vec::new()
        };
        Ok(Dataset {
            features: rows.into_iter().flatten().collect(),
            n_features,
            targets,
            feature_names: (1..=n_features).map(|j| format!("x{j}")).collect(),
            task,
            norm_params: None,
            target_norm: None,
            class_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len()).map(move |i| self.row(i))
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.rows().map(move |r| r[j])
    }

    /// Class ids of the targets (classification only).
    pub fn labels(&self) -> Vec<usize> {
        self.targets.iter().map(|t| *t as usize).collect()
    }

    pub fn n_classes(&self) -> usize {
        if self.task.is_classification() {
            self.class_labels.len().max(2)
        } else {
            0
        }
    }

    /// Rows `indices` in the given order, sharing this dataset's scaling.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            n_features: self.n_features,
            targets: indices.iter().map(|&i| self.targets[i]).collect(),
            feature_names: self.feature_names.clone(),
            task: self.task,
            norm_params: self.norm_params.clone(),
            target_norm: self.target_norm,
            class_labels: self.class_labels.clone(),
        }
    }

    /// Binary `class` vs rest view used by one-hot multi-class training.
    pub fn one_vs_rest(&self, class: usize) -> Dataset {
        let mut ds = self.clone();
        for t in &mut ds.targets {
            *t = if *t as usize == class { 1.0 } else { 0.0 };
        }
        ds.class_labels = vec!["rest".into(), self.class_labels.get(class).cloned().unwrap_or_default()];
        ds
    }
}

/// Column roles of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub target_column: usize,
    pub has_header: bool,
    pub delimiter: u8,
    pub task: TaskKind,
    /// Columns dropped entirely (ids, timestamps).
    #[serde(default)]
    pub ignore_columns: Vec<usize>,
}

impl CsvSchema {
    pub fn new(target_column: usize, task: TaskKind) -> Self {
        CsvSchema {
            target_column,
            has_header: false,
            delimiter: b',',
            task,
            ignore_columns: Vec::new(),
        }
    }

    pub fn with_header(mut self, has_header: bool) -> Self {
        self.has_header = has_header;
        self
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }
}

fn parse_cell(cell: &str, row: u64, column: usize) -> Result<f64> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Err(Error::MissingValue { row, column });
    }
    cell.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::NonNumeric {
            row,
            column,
            value: cell.to_string(),
        })
}

/// Reads a CSV file into an unscaled [`Dataset`].
///
/// Row numbers in errors are 1-based physical lines of the file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&bytes, schema)
}

/// [`load_csv`] over in-memory bytes.
pub fn parse_csv(bytes: &[u8], schema: &CsvSchema) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(schema.has_header)
        .delimiter(schema.delimiter)
        .flexible(false)
        .from_reader(bytes);

    let header: Option<Vec<String>> = if schema.has_header {
        let h = reader.headers().map_err(|e| csv_error(&e))?;
        Some(h.iter().map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(rows.len() as u64 + 1, |p| p.line());
        let w = *width.get_or_insert(record.len());
        if schema.target_column >= w {
            return Err(Error::Schema(format!(
                "target column {} but rows have {w} columns",
                schema.target_column
            )));
        }
        let mut row = Vec::with_capacity(w.saturating_sub(1));
        for (j, cell) in record.iter().enumerate() {
            if j == schema.target_column {
                if cell.trim().is_empty() {
                    return Err(Error::MissingValue { row: line, column: j });
                }
                raw_targets.push(cell.trim().to_string());
            } else if !schema.ignore_columns.contains(&j) {
                row.push(parse_cell(cell, line, j)?);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("no data rows".into()));
    }
    let width = width.unwrap_or(0);

    let mut class_labels = Vec::new();
    let targets: Vec<f64> = if schema.task.is_classification() {
        class_labels = ordered_labels(&raw_targets);
        let ids: BTreeMap<&str, usize> = class_labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        raw_targets.iter().map(|t| ids[t.as_str()] as f64).collect()
    } else {
        raw_targets
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let line = i as u64 + 1 + u64::from(schema.has_header);
                parse_cell(t, line, schema.target_column)
            })
            .collect::<Result<_>>()?
    };

    let feature_cols: Vec<usize> = (0..width)
        .filter(|j| *j != schema.target_column && !schema.ignore_columns.contains(j))
        .collect();
    let feature_names = match &header {
        Some(h) => feature_cols.iter().map(|&j| h[j].clone()).collect(),
        None => (1..=feature_cols.len()).map(|j| format!("x{j}")).collect(),
    };
    let n_features = feature_cols.len();
    Ok(Dataset {
        features: rows.into_iter().flatten().collect(),
        n_features,
        targets,
        feature_names,
        task: schema.task,
        norm_params: None,
        target_norm: None,
        class_labels,
    })
}

fn csv_error(e: &csv::Error) -> Error {
    Error::Csv {
        row: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    }
}

/// Distinct labels, numerically ordered when all are numbers.
fn ordered_labels(raw: &[String]) -> Vec<String> {
    let mut labels: Vec<String> = raw.to_vec();
    labels.sort();
    labels.dedup();
    if labels.iter().all(|l| l.parse::<f64>().is_ok()) {
        labels.sort_by(|a, b| {
            a.parse::<f64>()
                .unwrap()
                .total_cmp(&b.parse::<f64>().unwrap())
        });
    }
    labels
}

/// Reads one numeric column of a CSV file as a series.
pub fn load_series(path: impl AsRef<Path>, column: usize, has_header: bool) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let cell = record
            .get(column)
            .ok_or(Error::MissingValue { row: line, column })?;
        out.push(parse_cell(cell, line, column)?);
    }
    if out.is_empty() {
        return Err(Error::Empty("no series values".into()));
    }
    Ok(out)
}

/// Maps every feature column onto `[0, 1]`; regression and time-series
/// targets get their own min/max map. Classification targets are untouched.
pub fn scale(ds: &Dataset) -> Dataset {
    let params: Vec<NormParams> = (0..ds.n_features)
        .map(|j| NormParams::fit(ds.column(j)))
        .collect();
    let mut out = ds.clone();
    for row in out.features.chunks_mut(ds.n_features.max(1)) {
        for (v, p) in row.iter_mut().zip(&params) {
            *v = p.scale(*v);
        }
    }
    out.norm_params = Some(params);
    if !ds.task.is_classification() {
        let tp = NormParams::fit(ds.targets.iter().copied());
        for t in &mut out.targets {
            *t = tp.scale(*t);
        }
        out.target_norm = Some(tp);
    }
    out
}

/// Inverse of the target scaling (identity when targets were not scaled).
pub fn descale_output(y_scaled: f64, ds: &Dataset) -> f64 {
    ds.target_norm.map_or(y_scaled, |p| p.descale(y_scaled))
}

/// Inverse of the feature scaling of one row.
pub fn descale_row(row: &[f64], ds: &Dataset) -> Vec<f64> {
    match &ds.norm_params {
        Some(params) => row.iter().zip(params).map(|(v, p)| p.descale(*v)).collect(),
        None => row.to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SplitKind {
    Kfold { k: usize },
    FiveByTwo,
    Holdout { fraction: f64 },
}

/// Cross-validation plan, serializable for exact replay.
///
/// `fold_assignments` holds one vector of per-sample ids per repetition:
/// a single vector of fold ids for k-fold, five vectors of 0 (set A) / 1
/// (set B) for 5x2, and a single 0 (train) / 1 (test) vector for holdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub seed: u64,
    pub fold_assignments: Vec<Vec<usize>>,
}

/// One (train, test) pair of sample indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPair {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitPlan {
    pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Self> {
        Self::kfold_impl(n, k, seed, None)
    }

    /// Stratified variant: classes are spread round-robin over the folds.
    pub fn kfold_stratified(labels: &[usize], k: usize, seed: u64) -> Result<Self> {
        Self::kfold_impl(labels.len(), k, seed, Some(labels))
    }

    fn kfold_impl(n: usize, k: usize, seed: u64, labels: Option<&[usize]>) -> Result<Self> {
        if k < 2 {
            return Err(Error::Split(format!("k = {k} must be at least 2")));
        }
        if k > n {
            return Err(Error::Split(format!("k = {k} exceeds {n} samples")));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::seeded(seed));
        if let Some(labels) = labels {
            order.sort_by_key(|&i| labels[i]);
        }
        let mut folds = vec![0; n];
        for (pos, &i) in order.iter().enumerate() {
            folds[i] = pos % k;
        }
        Ok(SplitPlan {
            kind: SplitKind::Kfold { k },
            seed,
            fold_assignments: vec![folds],
        })
    }

    /// Five random halvings; with an odd count set A gets the extra sample.
    pub fn five_by_two(n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Split("5x2 needs at least 2 samples".into()));
        }
        let mut r = rng::seeded(seed);
        let half_a = n.div_ceil(2);
        let reps = (0..5)
            .map(|_| {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut r);
                let mut side = vec![1; n];
                for &i in &order[..half_a] {
                    side[i] = 0;
                }
                side
            })
            .collect();
        Ok(SplitPlan {
            kind: SplitKind::FiveByTwo,
            seed,
            fold_assignments: reps,
        })
    }

    /// Leading `fraction` of rows train, the rest test, order preserved.
    pub fn holdout(n: usize, fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Split(format!("holdout fraction {fraction} not in (0, 1)")));
        }
        let n_train = (n as f64 * fraction).round() as usize;
        if n_train == 0 || n_train >= n {
            return Err(Error::Split(format!(
                "holdout {fraction} of {n} samples leaves an empty side"
            )));
        }
        let side = (0..n).map(|i| usize::from(i >= n_train)).collect();
        Ok(SplitPlan {
            kind: SplitKind::Holdout { fraction },
            seed: 0,
            fold_assignments: vec![side],
        })
    }

    pub fn n_samples(&self) -> usize {
        self.fold_assignments.first().map_or(0, Vec::len)
    }

    /// All (train, test) pairs in run order. For 5x2 the pairs of repetition
    /// `r` are `(A, B)` then `(B, A)`.
    pub fn pairs(&self) -> Vec<FoldPair> {
        let split = |ids: &[usize], test_id: usize| FoldPair {
            train: (0..ids.len()).filter(|&i| ids[i] != test_id).collect(),
            test: (0..ids.len()).filter(|&i| ids[i] == test_id).collect(),
        };
        match self.kind {
            SplitKind::Kfold { k } => (0..k).map(|f| split(&self.fold_assignments[0], f)).collect(),
            SplitKind::FiveByTwo => self
                .fold_assignments
                .iter()
                .flat_map(|rep| [split(rep, 1), split(rep, 0)])
                .collect(),
            SplitKind::Holdout { .. } => vec![split(&self.fold_assignments[0], 1)],
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

pub fn make_kfold(ds: &Dataset, k: usize, seed: u64) -> Result<SplitPlan> {
    SplitPlan::kfold(ds.len(), k, seed)
}

pub fn make_five_by_two(ds: &Dataset, seed: u64) -> Result<SplitPlan> {
    SplitPlan::five_by_two(ds.len(), seed)
}

/// Sliding-window embedding: row `i` holds `series[i..i + lags]` and
/// targets `series[i + lags + horizon - 1]`.
pub fn lag_embed(series: &[f64], lags: usize, horizon: usize) -> Result<Dataset> {
    if lags == 0 || horizon == 0 || series.len() < lags + horizon {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            lags,
            horizon,
        });
    }
    let n_rows = series.len() - lags - horizon + 1;
    let rows = (0..n_rows).map(|i| series[i..i + lags].to_vec()).collect();
    let targets = (0..n_rows).map(|i| series[i + lags + horizon - 1]).collect();
    Dataset::from_rows(rows, targets, TaskKind::Timeseries)
}

/// Mackey-Glass delay-differential series
/// `dx/dt = 0.2 x(t-17) / (1 + x(t-17)^10) - 0.1 x(t)`, integrated with RK4
/// at step 0.1 and sampled once per time unit.
///
/// The seed perturbs the initial history around 1.2; the first 500 samples
/// are discarded as transient.
pub fn mackey_glass(n: usize, seed: u64) -> Vec<f64> {
    const A: f64 = 0.2;
    const B: f64 = 0.1;
    const TAU: usize = 17;
    const STEPS_PER_UNIT: usize = 10;
    const TRANSIENT: usize = 500;
    let dt = 1.0 / STEPS_PER_UNIT as f64;
    let delay = TAU * STEPS_PER_UNIT;
    let rhs = |x: f64, x_tau: f64| A * x_tau / (1.0 + x_tau.powi(10)) - B * x;

    let mut r = rng::seeded(seed);
    let mut grid: Vec<f64> = (0..=delay)
        .map(|_| 1.2 + 0.2 * (r.random::<f64>() - 0.5))
        .collect();
    let total_steps = (TRANSIENT + n) * STEPS_PER_UNIT;
    grid.reserve(total_steps);
    let mut out = Vec::with_capacity(n);
    for step in 0..total_steps {
        let t = grid.len() - 1;
        let x = grid[t];
        let lag0 = grid[t - delay];
        let lag1 = grid[t - delay + 1];
        let lag_mid = 0.5 * (lag0 + lag1);
        let k1 = rhs(x, lag0);
        let k2 = rhs(x + 0.5 * dt * k1, lag_mid);
        let k3 = rhs(x + 0.5 * dt * k2, lag_mid);
        let k4 = rhs(x + dt * k3, lag1);
        grid.push(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
        if (step + 1) % STEPS_PER_UNIT == 0 && (step + 1) / STEPS_PER_UNIT > TRANSIENT {
            out.push(*grid.last().unwrap());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn schema(target: usize) -> CsvSchema {
        CsvSchema::new(target, TaskKind::Classification)
    }

    #[test]
    fn load_small_csv() {
        let ds = parse_csv(b"0.1,2,1\n0.3,4,0\n0.5,6,1\n", &schema(2)).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.row(1), &[0.3, 4.0]);
        assert_eq!(ds.targets(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn header_and_target_in_column_zero() {
        let s = schema(0).with_header(true);
        let ds = parse_csv(b"label,a,b\nyes,1,2\nno,3,4\n", &s).unwrap();
        assert_eq!(ds.feature_names, vec!["a", "b"]);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
        // labels sorted lexically: no -> 0, yes -> 1
        assert_eq!(ds.targets(), &[1.0, 0.0]);
        assert_eq!(ds.class_labels, vec!["no", "yes"]);
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let err = parse_csv(b"1,abc,0\n", &schema(2)).unwrap_err();
        match err {
            Error::NonNumeric { row, column, .. } => assert_eq!((row, column), (1, 1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_and_ragged_files_are_rejected() {
        assert!(matches!(parse_csv(b"", &schema(0)), Err(Error::Empty(_))));
        assert!(matches!(
            parse_csv(b"1,2,0\n1,2\n", &schema(2)),
            Err(Error::Csv { row: 2, .. })
        ));
        assert!(matches!(
            parse_csv(b"1,,0\n", &schema(2)),
            Err(Error::MissingValue { row: 1, column: 1 })
        ));
    }

    #[test]
    fn quoted_cells_and_delimiter() {
        let s = CsvSchema::new(2, TaskKind::Regression).with_delimiter(b';');
        let ds = parse_csv(b"\"1.5\";2;3\n4;\"5\";6\n", &s).unwrap();
        assert_eq!(ds.row(0), &[1.5, 2.0]);
        assert_eq!(ds.targets(), &[3.0, 6.0]);
    }

    #[test]
    fn numeric_labels_are_ordered_numerically() {
        let ds = parse_csv(b"1,10\n2,2\n3,2\n", &schema(1)).unwrap();
        assert_eq!(ds.class_labels, vec!["2", "10"]);
        assert_eq!(ds.targets(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn scale_examples() {
        let rows = vec![vec![2.0, 0.0, 5.0], vec![4.0, 1.0, 5.0], vec![6.0, 0.5, 5.0]];
        let ds = Dataset::from_rows(rows, vec![0.0, 1.0, 0.0], TaskKind::Classification).unwrap();
        let s = scale(&ds);
        let col = |j| s.column(j).collect::<Vec<_>>();
        assert_eq!(col(0), vec![0.0, 0.5, 1.0]);
        assert_eq!(col(1), vec![0.0, 1.0, 0.5]);
        assert_eq!(col(2), vec![0.5, 0.5, 0.5]);
        let p = s.norm_params.as_ref().unwrap();
        assert_eq!(p[1], NormParams { min: 0.0, max: 1.0 });
        assert_eq!(p[2], NormParams { min: 5.0, max: 5.0 });
        assert!(p[2].is_constant());
        // classification targets untouched
        assert_eq!(s.targets(), ds.targets());
        assert!(s.target_norm.is_none());
    }

    #[test]
    fn descale_examples() {
        let ds = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![10.0, 20.0], TaskKind::Regression).unwrap();
        let s = scale(&ds);
        assert_eq!(s.targets(), &[0.0, 1.0]);
        assert_eq!(descale_output(0.0, &s), 10.0);
        assert_eq!(descale_output(1.0, &s), 20.0);
        let ds = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![0.0, 8.0], TaskKind::Regression).unwrap();
        assert_eq!(descale_output(0.25, &scale(&ds)), 2.0);
        let ds = Dataset::from_rows(vec![vec![0.0], vec![1.0]], vec![3.0, 3.0], TaskKind::Regression).unwrap();
        assert_eq!(descale_output(0.9, &scale(&ds)), 3.0);
    }

    #[test]
    fn kfold_examples() {
        let p = SplitPlan::kfold(10, 10, 1).unwrap();
        assert!(p.pairs().iter().all(|f| f.test.len() == 1 && f.train.len() == 9));
        let p = SplitPlan::kfold(11, 10, 1).unwrap();
        let mut sizes: Vec<usize> = p.pairs().iter().map(|f| f.test.len()).collect();
        sizes.sort();
        assert_eq!(sizes, vec![1, 1, 1, 1, 1, 1, 1, 1, 1, 2]);
        assert_eq!(SplitPlan::kfold(50, 5, 9).unwrap(), SplitPlan::kfold(50, 5, 9).unwrap());
        assert_ne!(SplitPlan::kfold(50, 5, 9).unwrap(), SplitPlan::kfold(50, 5, 10).unwrap());
        assert!(SplitPlan::kfold(5, 6, 0).is_err());
        assert!(SplitPlan::kfold(5, 1, 0).is_err());
    }

    #[test]
    fn stratified_kfold_balances_classes() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i < 30)).collect();
        let p = SplitPlan::kfold_stratified(&labels, 10, 3).unwrap();
        for f in p.pairs() {
            assert_eq!(f.test.len(), 10);
            assert_eq!(f.test.iter().filter(|&&i| labels[i] == 1).count(), 3);
        }
    }

    #[test]
    fn five_by_two_examples() {
        let p = SplitPlan::five_by_two(100, 4).unwrap();
        let pairs = p.pairs();
        assert_eq!(pairs.len(), 10);
        assert!(pairs.iter().all(|f| f.test.len() == 50 && f.train.len() == 50));
        for r in 0..5 {
            assert_eq!(pairs[2 * r].test, pairs[2 * r + 1].train);
            assert_eq!(pairs[2 * r].train, pairs[2 * r + 1].test);
        }
        let p = SplitPlan::five_by_two(101, 4).unwrap();
        for rep in &p.fold_assignments {
            assert_eq!(rep.iter().filter(|s| **s == 0).count(), 51);
        }
        assert!(SplitPlan::five_by_two(1, 0).is_err());
    }

    #[test]
    fn holdout_keeps_order() {
        let p = SplitPlan::holdout(10, 0.5).unwrap();
        let f = &p.pairs()[0];
        assert_eq!(f.train, vec![0, 1, 2, 3, 4]);
        assert_eq!(f.test, vec![5, 6, 7, 8, 9]);
        assert!(SplitPlan::holdout(10, 1.0).is_err());
    }

    #[test]
    fn split_plan_json_round_trip() {
        let p = SplitPlan::five_by_two(9, 77).unwrap();
        let js = p.to_json().unwrap();
        assert!(js.contains("\"kind\"") && js.contains("\"fold_assignments\""));
        assert_eq!(SplitPlan::from_json(&js).unwrap(), p);
    }

    #[test]
    fn lag_embed_examples() {
        let ds = lag_embed(&[1.0, 2.0, 3.0, 4.0, 5.0], 2, 1).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!((ds.row(0), ds.targets()[0]), (&[1.0, 2.0][..], 3.0));
        assert_eq!((ds.row(1), ds.targets()[1]), (&[2.0, 3.0][..], 4.0));
        assert_eq!((ds.row(2), ds.targets()[2]), (&[3.0, 4.0][..], 5.0));
        assert_eq!(ds.task, TaskKind::Timeseries);
        let long: Vec<f64> = (0..1000).map(f64::from).collect();
        assert_eq!(lag_embed(&long, 4, 1).unwrap().len(), 996);
        assert_eq!(lag_embed(&long[..10], 9, 1).unwrap().len(), 1);
        assert!(lag_embed(&long[..10], 10, 1).is_err());
    }

    #[test]
    fn mackey_glass_contract() {
        let a = mackey_glass(1000, 3);
        assert_eq!(a.len(), 1000);
        assert!(a.iter().all(|v| *v > 0.0 && *v < 1.5));
        let b = mackey_glass(1000, 3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_ne!(mackey_glass(10, 4), mackey_glass(10, 3));
        // chaotic regime: the attractor spans most of (0.2, 1.4)
        let (lo, hi) = a.iter().fold((f64::MAX, f64::MIN), |(l, h), v| (l.min(*v), h.max(*v)));
        assert!(lo < 0.5 && hi > 1.2, "range {lo}..{hi}");
    }

    proptest! {
        #[test]
        fn scale_descale_round_trip(col in prop::collection::vec(-1e3f64..1e3, 2..30)) {
            let p = NormParams::fit(col.iter().copied());
            prop_assume!(!p.is_constant());
            for v in &col {
                let s = p.scale(*v);
                prop_assert!((0.0..=1.0).contains(&s));
                prop_assert!((p.descale(s) - v).abs() <= 1e-12 * v.abs().max(1.0));
            }
        }

        #[test]
        fn kfold_tests_form_a_permutation(n in 2usize..120, k in 2usize..12, seed in any::<u64>()) {
            prop_assume!(k <= n);
            let p = SplitPlan::kfold(n, k, seed).unwrap();
            let mut all: Vec<usize> = p.pairs().into_iter().flat_map(|f| f.test).collect();
            let sizes: Vec<usize> = p.pairs().iter().map(|f| f.test.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        }

        #[test]
        fn five_by_two_tests_each_sample_five_times(n in 2usize..80, seed in any::<u64>()) {
            let p = SplitPlan::five_by_two(n, seed).unwrap();
            let mut counts = vec![0; n];
            for f in p.pairs() {
                for i in f.test { counts[i] += 1; }
            }
            prop_assert!(counts.iter().all(|c| *c == 5));
        }

        #[test]
        fn lag_embed_matches_window_enumeration(
            series in prop::collection::vec(-10f64..10.0, 2..50),
            lags in 1usize..6,
            horizon in 1usize..4,
        ) {
            prop_assume!(series.len() >= lags + horizon);
            let ds = lag_embed(&series, lags, horizon).unwrap();
            let mut expected = Vec::new();
            for start in 0..series.len() {
                let end = start + lags;
                let target = end + horizon - 1;
                if target < series.len() {
                    expected.push((series[start..end].to_vec(), series[target]));
                }
            }
            prop_assert_eq!(ds.len(), expected.len());
            for (i, (w, t)) in expected.iter().enumerate() {
                prop_assert_eq!(ds.row(i), &w[..]);
                prop_assert_eq!(ds.targets()[i], *t);
            }
        }
    }
}
