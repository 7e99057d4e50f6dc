//! Dataset ingestion, validation, and optional preprocessing.
//!
//! The on-disk convention is the usual one (each CSV row is an instance);
//! internally the matrix is stored feature-major (d x N, one column per
//! instance), which is the layout every downstream stage works in.

use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

/// Layout of a CSV file relative to the instance axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// Each row is one instance, each column one feature (default).
    #[default]
    RowsAreInstances,
    /// Each row is one feature, each column one instance.
    RowsAreFeatures,
}

/// Per-feature preprocessing mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Standardize {
    /// Leave values untouched (default; downstream stages assume nothing).
    #[default]
    None,
    /// Center each feature and divide by its population standard deviation.
    ZScore,
}

/// Feature-major data matrix: d named features by N instances.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: Array2<f64>,
    feature_names: Vec<String>,
}

impl DataMatrix {
    /// Validates shape, finiteness, and feature-name uniqueness.
    pub fn new(values: Array2<f64>, feature_names: Vec<String>) -> Result<Self> {
        let (d, n) = values.dim();
        if d == 0 {
            return Err(Error::NoFeatures);
        }
        if n < 2 {
            return Err(Error::TooFewInstances { n });
        }
        if feature_names.len() != d {
            return Err(Error::FeatureNameCount {
                got: feature_names.len(),
                d,
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "data matrix",
            });
        }
        let mut seen = std::collections::HashSet::new();
        for name in &feature_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::DuplicateFeatureName { name: name.clone() });
            }
        }
        Ok(Self {
            values,
            feature_names,
        })
    }

    /// Builds a matrix with default feature names `f0..f{d-1}`.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names = default_feature_names(values.nrows());
        Self::new(values, names)
    }

    /// d x N value matrix, one column per instance.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Number of features d.
    pub fn feature_count(&self) -> usize {
        self.values.nrows()
    }

    /// Number of instances N.
    pub fn instance_count(&self) -> usize {
        self.values.ncols()
    }

    /// Column view of instance i.
    pub fn instance(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.column(i)
    }

    /// New matrix restricted to the given feature rows, in the given order.
    pub fn restrict(&self, features: &[usize]) -> Result<DataMatrix> {
        if features.is_empty() {
            return Err(Error::EmptySelection);
        }
        let d = self.feature_count();
        for &idx in features {
            if idx >= d {
                return Err(Error::FeatureIndexOutOfRange { index: idx, d });
            }
        }
        let values = self.values.select(ndarray::Axis(0), features);
        let names = features
            .iter()
            .map(|&i| self.feature_names[i].clone())
            .collect();
        DataMatrix::new(values, names)
    }
}

/// A data matrix plus optional ground-truth class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub data: DataMatrix,
    labels: Option<Vec<String>>,
    label_name: Option<String>,
}

impl LabeledDataset {
    pub fn new(data: DataMatrix, labels: Option<Vec<String>>) -> Result<Self> {
        Self::with_label_name(data, labels, None)
    }

    pub fn with_label_name(
        data: DataMatrix,
        labels: Option<Vec<String>>,
        label_name: Option<String>,
    ) -> Result<Self> {
        if let Some(ref l) = labels {
            if l.len() != data.instance_count() {
                return Err(Error::LabelLengthMismatch {
                    got: l.len(),
                    instances: data.instance_count(),
                });
            }
        }
        Ok(Self {
            data,
            labels,
            label_name,
        })
    }

    pub fn unlabeled(data: DataMatrix) -> Self {
        Self {
            data,
            labels: None,
            label_name: None,
        }
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label_name.as_deref()
    }

    /// Number of distinct labels, when labels are present.
    pub fn class_count(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().collect::<std::collections::HashSet<_>>().len())
    }

    /// Labels as dense ids (0-based, in order of first occurrence).
    pub fn label_ids(&self) -> Option<Vec<usize>> {
        self.labels.as_ref().map(|labels| {
            let mut map = std::collections::HashMap::new();
            labels
                .iter()
                .map(|l| {
                    let next = map.len();
                    *map.entry(l.as_str()).or_insert(next)
                })
                .collect()
        })
    }
}

fn default_feature_names(d: usize) -> Vec<String> {
    (0..d).map(|i| format!("f{i}")).collect()
}

fn parse_cell(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => None,
    }
}

/// Whether a cell looks numeric for the purpose of header detection.
///
/// "NaN" and "inf" parse as floats, so they do not mark a header row; they
/// are rejected later with a precise cell error instead.
fn parses_as_float(raw: &str) -> bool {
    raw.trim().parse::<f64>().is_ok()
}

/// Loads a CSV dataset.
///
/// A header row is assumed when `label_column` names a cell of the first row,
/// or (without a label column) when the first row has any non-numeric cell.
/// Without a header, features are named `f0..f{d-1}`.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: Option<&str>,
    orientation: Orientation,
) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_csv_from_reader(file, label_column, orientation)
}

/// Reader-based variant of [`load_csv`]; rows and columns in errors are
/// 1-based positions in the stream.
pub fn load_csv_from_reader(
    reader: impl std::io::Read,
    label_column: Option<&str>,
    orientation: Orientation,
) -> Result<LabeledDataset> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows: Vec<Vec<String>> = Vec::new();
    for record in csv_reader.records() {
        let record = record?;
        rows.push(record.iter().map(|s| s.to_string()).collect());
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    let width = rows[0].len();
    for (idx, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::RaggedRow {
                row: idx + 1,
                expected: width,
                got: row.len(),
            });
        }
    }

    // Resolve header presence and the label column index.
    let (has_header, label_idx) = match label_column {
        Some(name) => {
            let idx = rows[0].iter().position(|cell| cell == name).ok_or_else(|| {
                Error::LabelColumnMissing {
                    name: name.to_string(),
                }
            })?;
            (true, Some(idx))
        }
        None => (rows[0].iter().any(|cell| !parses_as_float(cell)), None),
    };
    if label_idx.is_some() && orientation == Orientation::RowsAreFeatures {
        return Err(Error::LabelColumnOrientation);
    }

    let data_rows = &rows[has_header as usize..];
    if data_rows.is_empty() {
        return Err(Error::EmptyInput);
    }

    match orientation {
        Orientation::RowsAreInstances => {
            let n = data_rows.len();
            let d = width - label_idx.map_or(0, |_| 1);
            if d == 0 {
                return Err(Error::NoFeatures);
            }
            let mut values = Array2::zeros((d, n));
            let mut labels = label_idx.map(|_| Vec::with_capacity(n));
            for (i, row) in data_rows.iter().enumerate() {
                let mut feature = 0usize;
                for (j, cell) in row.iter().enumerate() {
                    if Some(j) == label_idx {
                        labels.as_mut().unwrap().push(cell.clone());
                        continue;
                    }
                    let value = parse_cell(cell).ok_or_else(|| Error::BadCell {
                        row: i + 1 + has_header as usize,
                        col: j + 1,
                        value: cell.clone(),
                    })?;
                    values[[feature, i]] = value;
                    feature += 1;
                }
            }
            let names = if has_header {
                rows[0]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| Some(*j) != label_idx)
                    .map(|(_, cell)| cell.clone())
                    .collect()
            } else {
                default_feature_names(d)
            };
            let label_name = label_column.map(|s| s.to_string());
            LabeledDataset::with_label_name(DataMatrix::new(values, names)?, labels, label_name)
        }
        Orientation::RowsAreFeatures => {
            let d = data_rows.len();
            let n = width;
            let mut values = Array2::zeros((d, n));
            for (i, row) in data_rows.iter().enumerate() {
                for (j, cell) in row.iter().enumerate() {
                    let value = parse_cell(cell).ok_or_else(|| Error::BadCell {
                        row: i + 1 + has_header as usize,
                        col: j + 1,
                        value: cell.clone(),
                    })?;
                    values[[i, j]] = value;
                }
            }
            let names = default_feature_names(d);
            Ok(LabeledDataset::unlabeled(DataMatrix::new(values, names)?))
        }
    }
}

/// Writes a dataset back to CSV in rows-are-instances layout with a header.
///
/// Floats are written with the shortest representation that round-trips, so
/// load -> write -> load reproduces the matrix exactly.
pub fn write_csv(dataset: &LabeledDataset, mut writer: impl Write) -> Result<()> {
    let data = &dataset.data;
    let io_err = |source: std::io::Error| Error::Io {
        path: "<writer>".to_string(),
        source,
    };

    let mut header: Vec<&str> = data.feature_names().iter().map(|s| s.as_str()).collect();
    let label_name = dataset.label_name().unwrap_or("label");
    if dataset.labels().is_some() {
        header.push(label_name);
    }
    writeln!(writer, "{}", header.join(",")).map_err(io_err)?;

    for i in 0..data.instance_count() {
        let mut cells: Vec<String> = data.instance(i).iter().map(|v| format!("{v}")).collect();
        if let Some(labels) = dataset.labels() {
            cells.push(labels[i].clone());
        }
        writeln!(writer, "{}", cells.join(",")).map_err(io_err)?;
    }
    Ok(())
}

/// Applies the requested preprocessing, returning a new matrix.
///
/// Z-scoring uses the population standard deviation; a per-feature std below
/// 1e-12 is clamped to 1 so constant features map to zeros.
pub fn standardize(x: &DataMatrix, mode: Standardize) -> DataMatrix {
    match mode {
        Standardize::None => x.clone(),
        Standardize::ZScore => {
            let n = x.instance_count() as f64;
            let mut values = x.values().clone();
            for mut row in values.rows_mut() {
                let mean = row.sum() / n;
                let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let mut std = var.sqrt();
                if std < 1e-12 {
                    std = 1.0;
                }
                row.mapv_inplace(|v| (v - mean) / std);
            }
            DataMatrix {
                values,
                feature_names: x.feature_names().to_vec(),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn load_str(
        text: &str,
        label_column: Option<&str>,
        orientation: Orientation,
    ) -> Result<LabeledDataset> {
        load_csv_from_reader(text.as_bytes(), label_column, orientation)
    }

    #[test]
    fn numeric_file_rows_are_instances() {
        let ds = load_str("1,2\n3,4\n5,6\n", None, Orientation::RowsAreInstances).unwrap();
        assert_eq!(ds.data.feature_count(), 2);
        assert_eq!(ds.data.instance_count(), 3);
        assert_eq!(ds.data.feature_names(), ["f0", "f1"]);
        // column per instance
        assert_eq!(ds.data.values()[[0, 0]], 1.0);
        assert_eq!(ds.data.values()[[1, 2]], 6.0);
        assert!(ds.labels().is_none());
    }

    #[test]
    fn header_and_label_column() {
        let ds = load_str(
            "a,b,y\n1,2,pos\n3,4,neg\n5,6,pos\n7,8,neg\n",
            Some("y"),
            Orientation::RowsAreInstances,
        )
        .unwrap();
        assert_eq!(ds.data.feature_count(), 2);
        assert_eq!(ds.data.instance_count(), 4);
        assert_eq!(ds.data.feature_names(), ["a", "b"]);
        assert_eq!(ds.labels().unwrap().len(), 4);
        assert_eq!(ds.class_count(), Some(2));
        assert_eq!(ds.label_ids().unwrap(), vec![0, 1, 0, 1]);
    }

    #[test]
    fn nan_cell_is_rejected_with_position() {
        let err = load_str("1,2\n3,NaN\n5,6\n", None, Orientation::RowsAreInstances).unwrap_err();
        match err {
            Error::BadCell { row, col, value } => {
                assert_eq!((row, col), (2, 2));
                assert_eq!(value, "NaN");
            }
            other => panic!("expected BadCell, got {other:?}"),
        }
    }

    #[test]
    fn ragged_row_is_rejected() {
        let err = load_str("1,2\n3\n", None, Orientation::RowsAreInstances).unwrap_err();
        assert!(matches!(
            err,
            Error::RaggedRow {
                row: 2,
                expected: 2,
                got: 1
            }
        ));
    }

    #[test]
    fn missing_label_column_is_rejected() {
        let err =
            load_str("a,b\n1,2\n3,4\n", Some("y"), Orientation::RowsAreInstances).unwrap_err();
        assert!(matches!(err, Error::LabelColumnMissing { .. }));
    }

    #[test]
    fn missing_file_is_io_error() {
        let err =
            load_csv("/nonexistent/path.csv", None, Orientation::RowsAreInstances).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn single_instance_is_rejected() {
        let err = load_str("1,2\n", None, Orientation::RowsAreInstances).unwrap_err();
        assert!(matches!(err, Error::TooFewInstances { n: 1 }));
    }

    #[test]
    fn rows_are_features_orientation() {
        let ds = load_str("1,2,3\n4,5,6\n", None, Orientation::RowsAreFeatures).unwrap();
        assert_eq!(ds.data.feature_count(), 2);
        assert_eq!(ds.data.instance_count(), 3);
        assert_eq!(ds.data.values()[[1, 0]], 4.0);
    }

    #[test]
    fn label_column_needs_instance_rows() {
        let err = load_str("y,a\n1,2\n", Some("y"), Orientation::RowsAreFeatures).unwrap_err();
        assert!(matches!(err, Error::LabelColumnOrientation));
    }

    #[test]
    fn standardize_none_is_identity() {
        let x = DataMatrix::from_values(array![[1.0, 2.0, 4.0], [0.5, 0.5, 0.5]]).unwrap();
        assert_eq!(standardize(&x, Standardize::None), x);
    }

    #[test]
    fn zscore_basic_row() {
        let x = DataMatrix::from_values(array![[1.0, 2.0, 3.0]]).unwrap();
        let z = standardize(&x, Standardize::ZScore);
        let row = z.values().row(0);
        let mean = row.sum() / 3.0;
        let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var.sqrt() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zscore_constant_row_clamps() {
        let x = DataMatrix::from_values(array![[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]]).unwrap();
        let z = standardize(&x, Standardize::ZScore);
        assert!(z.values().row(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zscore_rows_hit_spec_tolerances() {
        let x = DataMatrix::from_values(array![
            [1.0, -3.0, 7.5, 2.25],
            [4.0, 4.0, 4.0, 4.0],
            [1e6, 2e6, -5e5, 0.0]
        ])
        .unwrap();
        let z = standardize(&x, Standardize::ZScore);
        let n = 4.0;
        for row in z.values().rows() {
            let mean = row.sum() / n;
            let std = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!(mean.abs() <= 1e-10);
            assert!(std == 0.0 || (std - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn csv_round_trip_preserves_matrix() {
        let text = "a,b,y\n0.1,2e-3,u\n-7.25,3.5,v\n1e300,-2.5e-300,u\n";
        let ds = load_str(text, Some("y"), Orientation::RowsAreInstances).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let reloaded =
            load_csv_from_reader(buf.as_slice(), Some("y"), Orientation::RowsAreInstances)
                .unwrap();
        assert_eq!(reloaded.data, ds.data);
        assert_eq!(reloaded.labels(), ds.labels());
    }

    #[test]
    fn headerless_round_trip_preserves_matrix() {
        let ds = load_str("1.5,2\n3,4.25\n5,6\n", None, Orientation::RowsAreInstances).unwrap();
        let mut buf = Vec::new();
        write_csv(&ds, &mut buf).unwrap();
        let reloaded =
            load_csv_from_reader(buf.as_slice(), None, Orientation::RowsAreInstances).unwrap();
        assert_eq!(reloaded.data, ds.data);
    }

    #[test]
    fn duplicate_feature_names_rejected() {
        let err = DataMatrix::new(array![[1.0, 2.0], [3.0, 4.0]], vec!["x".into(), "x".into()])
            .unwrap_err();
        assert!(matches!(err, Error::DuplicateFeatureName { .. }));
    }

    #[test]
    fn scientific_notation_parses() {
        let ds = load_str("1e-3,2E4\n-3.5e2,6\n", None, Orientation::RowsAreInstances).unwrap();
        assert_eq!(ds.data.values()[[0, 0]], 1e-3);
        assert_eq!(ds.data.values()[[1, 0]], 2e4);
    }
}
