//! Tabular datasets: CSV ingestion with one-hot expansion, quantile grids and
//! a synthetic fixture with a planted interaction.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VineError};
use crate::scalar::Scalar;

/// Default number of quantiles per feature grid.
pub const DEFAULT_GRID_SIZE: usize = 40;

/// Default ceiling on distinct integer values for a column to count as ordinal.
pub const DEFAULT_ORDINAL_CARDINALITY: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Numeric,
    Ordinal,
    /// Native 0/1 columns and members of a one-hot group.
    Binary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Original categorical column, set only for one-hot members.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl ColumnSchema {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        ColumnSchema {
            name: name.into(),
            kind,
            source_column: None,
            display_name: None,
        }
    }

    /// Name shown to humans: the display name when present.
    pub fn label(&self) -> &str {
        self.display_name.as_deref().unwrap_or(&self.name)
    }
}

/// Feature matrix plus regression target. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar = f64> {
    name: String,
    target_name: String,
    schema: Vec<ColumnSchema>,
    x: Array2<T>,
    y: Array1<T>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(
        name: impl Into<String>,
        schema: Vec<ColumnSchema>,
        x: Array2<T>,
        y: Array1<T>,
    ) -> Result<Self> {
        let (n, k) = x.dim();
        if n < 2 {
            return Err(VineError::EmptyDataset);
        }
        if k == 0 {
            return Err(VineError::InvalidDataset("no feature columns".into()));
        }
        if schema.len() != k {
            return Err(VineError::InvalidDataset(format!(
                "schema describes {} columns, matrix has {k}",
                schema.len()
            )));
        }
        if y.len() != n {
            return Err(VineError::InvalidDataset(format!(
                "target has {} values, matrix has {n} rows",
                y.len()
            )));
        }
        let mut seen = HashSet::new();
        for (f, col) in schema.iter().enumerate() {
            if !seen.insert(col.name.as_str()) {
                return Err(VineError::InvalidDataset(format!(
                    "duplicate column name `{}`",
                    col.name
                )));
            }
            for (row, &v) in x.column(f).iter().enumerate() {
                if !v.is_finite() {
                    return Err(VineError::MissingValue {
                        row,
                        column: col.name.clone(),
                    });
                }
                if col.kind == FeatureKind::Binary && v != T::zero() && v != T::one() {
                    return Err(VineError::InvalidDataset(format!(
                        "binary column `{}` holds {v} at row {row}",
                        col.name
                    )));
                }
            }
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(VineError::NonNumericTarget {
                row,
                value: format!("{}", y[row]),
            });
        }
        Ok(Dataset {
            name: name.into(),
            target_name: "target".into(),
            schema,
            x,
            y,
        })
    }

    pub fn with_target_name(mut self, target: impl Into<String>) -> Self {
        self.target_name = target.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub fn x(&self) -> &Array2<T> {
        &self.x
    }

    pub fn y(&self) -> &Array1<T> {
        &self.y
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    pub fn column(&self, feature: usize) -> ArrayView1<'_, T> {
        self.x.column(feature)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|c| c.name == name)
    }

    /// Observed `(min, max)` of a feature column.
    pub fn feature_range(&self, feature: usize) -> (T, T) {
        self.column(feature)
            .iter()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Writes the encoded feature matrix and target as CSV with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.schema.iter().map(|c| c.name.as_str()).collect();
        header.push(&self.target_name);
        out.write_record(&header)?;
        for (row, &target) in self.x.rows().into_iter().zip(self.y.iter()) {
            let mut record: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            record.push(format!("{target}"));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncodingOptions {
    /// Integer-valued columns with at most this many distinct values are ordinal.
    pub ordinal_max_cardinality: usize,
    /// Numeric columns to one-hot encode anyway (integer-coded categoricals).
    pub categorical: Vec<String>,
    /// Human-readable names keyed by encoded column name.
    pub display_names: BTreeMap<String, String>,
}

impl Default for EncodingOptions {
    fn default() -> Self {
        EncodingOptions {
            ordinal_max_cardinality: DEFAULT_ORDINAL_CARDINALITY,
            categorical: Vec::new(),
            display_names: BTreeMap::new(),
        }
    }
}

pub fn load_csv<T: Scalar>(
    path: impl AsRef<Path>,
    target: &str,
    options: &EncodingOptions,
) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, target, options)
}

/// Parses a header-first CSV stream into an encoded dataset.
pub fn read_csv<T: Scalar, R: Read>(
    reader: R,
    name: &str,
    target: &str,
    options: &EncodingOptions,
) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_col = header
        .iter()
        .position(|h| h == target)
        .ok_or_else(|| VineError::MissingTarget(target.to_string()))?;

    let mut cells: Vec<Vec<String>> = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let values: Vec<String> = record.iter().map(|c| c.trim().to_string()).collect();
        if let Some(col) = values.iter().position(|c| c.is_empty()) {
            return Err(VineError::MissingValue {
                row,
                column: header[col].clone(),
            });
        }
        cells.push(values);
    }
    let n = cells.len();
    if n == 0 {
        return Err(VineError::EmptyDataset);
    }

    let mut y = Vec::with_capacity(n);
    for (row, values) in cells.iter().enumerate() {
        let v = values[target_col]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| VineError::NonNumericTarget {
                row,
                value: values[target_col].clone(),
            })?;
        y.push(T::lit(v));
    }

    let mut schema = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (col, col_name) in header.iter().enumerate() {
        if col == target_col {
            continue;
        }
        let raw: Vec<&str> = cells.iter().map(|r| r[col].as_str()).collect();
        let parsed: Option<Vec<f64>> = raw
            .iter()
            .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let forced = options.categorical.iter().any(|c| c == col_name);
        match parsed {
            Some(values) if !forced => {
                let kind = infer_kind(&values, options.ordinal_max_cardinality);
                schema.push(ColumnSchema::new(col_name.clone(), kind));
                columns.push(values);
            }
            parsed => {
                for (level, indicator) in one_hot(&raw, parsed.is_some()) {
                    let mut column = ColumnSchema::new(format!("{col_name}={level}"), FeatureKind::Binary);
                    column.source_column = Some(col_name.clone());
                    schema.push(column);
                    columns.push(indicator);
                }
            }
        }
    }
    for column in schema.iter_mut() {
        column.display_name = options.display_names.get(&column.name).cloned();
    }

    let k = columns.len();
    let x = Array2::from_shape_fn((n, k), |(i, j)| T::lit(columns[j][i]));
    Ok(Dataset::new(name, schema, x, Array1::from(y))?.with_target_name(target))
}

fn infer_kind(values: &[f64], ordinal_max: usize) -> FeatureKind {
    if values.iter().all(|&v| v == 0.0 || v == 1.0) {
        return FeatureKind::Binary;
    }
    if values.iter().all(|v| v.fract() == 0.0) {
        let distinct: BTreeSet<i64> = values.iter().map(|&v| v as i64).collect();
        if distinct.len() <= ordinal_max {
            return FeatureKind::Ordinal;
        }
    }
    FeatureKind::Numeric
}

/// Indicator columns per distinct level; numeric levels sort numerically,
/// string levels lexically.
fn one_hot(raw: &[&str], numeric: bool) -> Vec<(String, Vec<f64>)> {
    let mut levels: Vec<&str> = raw.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if numeric {
        levels.sort_by(|a, b| {
            let (a, b) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            a.total_cmp(&b)
        });
    }
    levels
        .into_iter()
        .map(|level| {
            let indicator = raw.iter().map(|&c| if c == level { 1.0 } else { 0.0 }).collect();
            (level.to_string(), indicator)
        })
        .collect()
}

/// Sweep values for one feature: deduplicated quantiles of its column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGrid<T: Scalar = f64> {
    pub feature_index: usize,
    pub values: Vec<T>,
    pub f_min: T,
    pub f_max: T,
}

impl<T: Scalar> FeatureGrid<T> {
    /// Builds a grid from strictly ascending values.
    pub fn new(feature_index: usize, values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(VineError::DegenerateGrid);
        }
        if values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(VineError::InvalidArgument(
                "grid values must be strictly ascending".into(),
            ));
        }
        Ok(FeatureGrid {
            feature_index,
            f_min: values[0],
            f_max: values[values.len() - 1],
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Reads `curve` (one value per grid point) at `x` by piecewise-linear
    /// interpolation, clamped to the end values outside the grid.
    pub fn lookup(&self, curve: &[T], x: T) -> T {
        debug_assert_eq!(curve.len(), self.values.len());
        let last = self.values.len() - 1;
        if x <= self.values[0] {
            return curve[0];
        }
        if x >= self.values[last] {
            return curve[last];
        }
        // first index with value > x; x lies in [hi-1, hi)
        let hi = self.values.partition_point(|&v| v <= x);
        let lo = hi - 1;
        if self.values[lo] == x {
            return curve[lo];
        }
        let t = (x - self.values[lo]) / (self.values[hi] - self.values[lo]);
        curve[lo] + t * (curve[hi] - curve[lo])
    }
}

/// Empirical quantiles of a feature at probabilities `i / (m - 1)` with
/// lower-value selection, deduplicated. Binary features always get `[0, 1]`.
pub fn quantile_grid<T: Scalar>(ds: &Dataset<T>, feature_index: usize, m: usize) -> Result<FeatureGrid<T>> {
    if m < 2 {
        return Err(VineError::InvalidArgument(format!("grid size must be at least 2, got {m}")));
    }
    if feature_index >= ds.n_features() {
        return Err(VineError::InvalidArgument(format!("no feature with index {feature_index}")));
    }
    if ds.schema()[feature_index].kind == FeatureKind::Binary {
        return FeatureGrid::new(feature_index, vec![T::zero(), T::one()]);
    }
    let mut sorted: Vec<T> = ds.column(feature_index).to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
    let n = sorted.len();
    let mut values: Vec<T> = (0..m).map(|i| sorted[i * (n - 1) / (m - 1)]).collect();
    values.dedup();
    if values.len() < 2 {
        return Err(VineError::ConstantFeature(feature_index));
    }
    FeatureGrid::new(feature_index, values)
}

/// Synthetic regression data with an `x3 * x4` interaction:
/// `y = x1 + 2 x2 + 5 x3 x4 + eps`, `x1..x3 ~ U[0,1]`, `x4 ~ Bernoulli(0.5)`,
/// `eps ~ N(0, 0.01)`. Deterministic per `(n, seed)`.
pub fn synth_interaction<T: Scalar>(n: usize, seed: u64) -> Result<Dataset<T>> {
    if n < 2 {
        return Err(VineError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let mut x = Array2::zeros((n, 4));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let x1: f64 = rng.random();
        let x2: f64 = rng.random();
        let x3: f64 = rng.random();
        let x4 = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        let eps = noise.sample(&mut rng);
        x[[i, 0]] = T::lit(x1);
        x[[i, 1]] = T::lit(x2);
        x[[i, 2]] = T::lit(x3);
        x[[i, 3]] = T::lit(x4);
        y[i] = T::lit(x1 + 2.0 * x2 + 5.0 * x3 * x4 + eps);
    }
    let schema = vec![
        ColumnSchema::new("x1", FeatureKind::Numeric),
        ColumnSchema::new("x2", FeatureKind::Numeric),
        ColumnSchema::new("x3", FeatureKind::Numeric),
        ColumnSchema::new("x4", FeatureKind::Binary),
    ];
    Ok(Dataset::new("synth_interaction", schema, x, y)?.with_target_name("y"))
}
