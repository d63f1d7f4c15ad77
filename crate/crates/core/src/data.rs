//! Dataset ingestion and the leakage-free preprocessing pipeline.

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{degenerate, invalid, QiError, Result};
use crate::matrix::{check_targets, DataMatrix};
use crate::pca::PcaModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub x: DataMatrix,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub source_path: Option<PathBuf>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, x: DataMatrix, y: Vec<f64>) -> Result<Self> {
        check_targets(&x, &y)?;
        let feature_names = (0..x.cols()).map(|j| format!("x{j}")).collect();
        Ok(Self { name: name.into(), x, y, feature_names, source_path: None })
    }

    pub fn instances(&self) -> usize {
        self.x.rows()
    }

    pub fn dimension(&self) -> usize {
        self.x.cols()
    }

    /// Rows `indices` of this dataset as a new one (same name).
    pub fn subset_rows(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            name: self.name.clone(),
            x: self.x.select_rows(indices)?,
            y: indices.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            source_path: self.source_path.clone(),
        })
    }
}

/// Target column selector: a header name or a zero-based index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    Name(String),
    Index(usize),
}

impl FromStr for TargetColumn {
    type Err = QiError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return invalid("empty target column");
        }
        Ok(s.parse::<usize>().map_or_else(|_| TargetColumn::Name(s.to_string()), TargetColumn::Index))
    }
}

impl fmt::Display for TargetColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetColumn::Name(n) => f.write_str(n),
            TargetColumn::Index(i) => write!(f, "{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderMode {
    /// Header present iff the first record has a non-numeric cell.
    #[default]
    Auto,
    Present,
    Absent,
}

fn parse_cell(cell: &str) -> Option<f64> {
    cell.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Loads a comma-separated numeric table.
///
/// Columns in which no cell parses as a number (e.g. a categorical code) are
/// dropped. Any other empty or non-numeric cell rejects its row, and all such
/// rows are listed in the error.
pub fn load_csv(path: &Path, target: &TargetColumn, header: HeaderMode) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);
    let mut records = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => QiError::Io(io),
            other => QiError::InvalidInput(format!("{}: malformed CSV: {other:?}", path.display())),
        })?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        records.push(rec.iter().map(str::to_string).collect::<Vec<_>>());
    }
    if records.is_empty() {
        return invalid(format!("{}: no records", path.display()));
    }

    let has_header = match header {
        HeaderMode::Present => true,
        HeaderMode::Absent => false,
        HeaderMode::Auto => records[0].iter().any(|c| parse_cell(c).is_none()),
    };
    let width = records[0].len();
    let names: Vec<String> = if has_header {
        records.remove(0).into_iter().map(|s| s.trim().to_string()).collect()
    } else {
        (0..width).map(|j| format!("col{j}")).collect()
    };
    if records.is_empty() {
        return invalid(format!("{}: header but no data rows", path.display()));
    }
    let line_offset = if has_header { 2 } else { 1 };

    let target_idx = match target {
        TargetColumn::Index(i) if *i < width => *i,
        TargetColumn::Index(i) => {
            return invalid(format!("{}: target column {i} out of range for {width} columns", path.display()))
        }
        TargetColumn::Name(name) => names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| QiError::InvalidInput(format!("{}: no column named '{name}'", path.display())))?,
    };

    let numeric_column = |j: usize| records.iter().any(|r| r.get(j).is_some_and(|c| parse_cell(c).is_some()));
    if !numeric_column(target_idx) {
        return invalid(format!("{}: target column '{}' is not numeric", path.display(), names[target_idx]));
    }
    let features: Vec<usize> = (0..width).filter(|&j| j != target_idx && numeric_column(j)).collect();
    for j in (0..width).filter(|&j| j != target_idx && !features.contains(&j)) {
        log::warn!("{}: dropping non-numeric column '{}'", path.display(), names[j]);
    }
    if features.is_empty() {
        return invalid(format!("{}: no numeric feature columns", path.display()));
    }

    let mut issues = Vec::new();
    let mut values = Vec::with_capacity(records.len() * features.len());
    let mut y = Vec::with_capacity(records.len());
    for (i, rec) in records.iter().enumerate() {
        if rec.len() != width {
            issues.push(format!("row {i} (line {}): {} cells, expected {width}", i + line_offset, rec.len()));
            continue;
        }
        let bad: Vec<&str> = std::iter::once(target_idx)
            .chain(features.iter().copied())
            .filter(|&j| parse_cell(&rec[j]).is_none())
            .map(|j| names[j].as_str())
            .collect();
        if !bad.is_empty() {
            issues.push(format!(
                "row {i} (line {}): missing or non-numeric value in {}",
                i + line_offset,
                bad.join(", ")
            ));
            continue;
        }
        y.push(parse_cell(&rec[target_idx]).expect("checked"));
        values.extend(features.iter().map(|&j| parse_cell(&rec[j]).expect("checked")));
    }
    if !issues.is_empty() {
        return invalid(format!("{}: rejected rows:\n  {}", path.display(), issues.join("\n  ")));
    }

    let x = DataMatrix::new(y.len(), features.len(), values)?;
    let name = path.file_stem().map_or_else(|| "dataset".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(Dataset {
        name,
        x,
        y,
        feature_names: features.iter().map(|&j| names[j].clone()).collect(),
        source_path: Some(path.to_path_buf()),
    })
}

/// Loads one CSV, or every `*.csv` in a directory (sorted by file name).
pub fn load_path(path: &Path, target: &TargetColumn, header: HeaderMode) -> Result<Vec<Dataset>> {
    if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
            .collect();
        files.sort();
        if files.is_empty() {
            return invalid(format!("{}: no .csv files", path.display()));
        }
        files.iter().map(|f| load_csv(f, target, header)).collect()
    } else {
        Ok(vec![load_csv(path, target, header)?])
    }
}

pub fn write_csv(ds: &Dataset, path: &Path, target_name: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    let mut header = ds.feature_names.clone();
    header.push(target_name.to_string());
    w.write_record(&header).map_err(csv_io)?;
    for i in 0..ds.instances() {
        let mut rec: Vec<String> = ds.x.row(i).iter().map(|v| format!("{v}")).collect();
        rec.push(format!("{}", ds.y[i]));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> QiError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => QiError::Io(io),
        other => QiError::InvalidInput(format!("CSV write failed: {other:?}")),
    }
}

/// Full-rank PCA for features and standardization for the target, both
/// fitted on one set of rows and then applied to any rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessor {
    pca: PcaModel,
    y_mean: f64,
    y_std: f64,
}

impl Preprocessor {
    pub fn fit(x: &DataMatrix, y: &[f64]) -> Result<Self> {
        check_targets(x, y)?;
        if y.iter().all(|&v| v == y[0]) {
            return degenerate("target has zero variance");
        }
        let n = y.len() as f64;
        let y_mean = y.iter().sum::<f64>() / n;
        let y_std = (y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n).sqrt();
        if !(y_std > 0.0 && y_std.is_finite()) {
            return degenerate("target has zero variance");
        }
        Ok(Self { pca: PcaModel::fit(x)?, y_mean, y_std })
    }

    pub fn pca(&self) -> &PcaModel {
        &self.pca
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    pub fn transform_x(&self, x: &DataMatrix) -> Result<DataMatrix> {
        self.pca.transform(x)
    }

    /// `(y − mean) / std` with the fitted statistics.
    pub fn transform_y(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.y_mean) / self.y_std).collect()
    }
}

/// Fits the preprocessing on `fit_rows` and applies it to every row of `ds`.
pub fn preprocess(ds: &Dataset, fit_rows: &[usize]) -> Result<(Preprocessor, Dataset)> {
    let fit = ds.subset_rows(fit_rows)?;
    let pre = Preprocessor::fit(&fit.x, &fit.y)?;
    let out = Dataset {
        name: ds.name.clone(),
        x: pre.transform_x(&ds.x)?,
        y: pre.transform_y(&ds.y),
        feature_names: (0..ds.dimension()).map(|k| format!("pc{k}")).collect(),
        source_path: ds.source_path.clone(),
    };
    Ok((pre, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn smoke_three_rows_target_last() {
        let f = write_tmp("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let ds = load_csv(f.path(), &TargetColumn::Name("y".into()), HeaderMode::Auto).unwrap();
        assert_eq!((ds.instances(), ds.dimension()), (3, 2));
        assert_eq!(ds.y, vec![3.0, 6.0, 9.0]);
        assert_eq!(ds.feature_names, vec!["a", "b"]);
    }

    #[test]
    fn blank_cell_names_the_row() {
        let f = write_tmp("a,b,y\n1,2,3\n4,,6\n7,8,9\n");
        let err = load_csv(f.path(), &TargetColumn::Index(2), HeaderMode::Auto).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, QiError::InvalidInput(_)));
        assert!(msg.contains("row 1 (line 3)") && msg.contains('b'), "{msg}");
    }

    #[test]
    fn headerless_with_index_target() {
        let f = write_tmp("1,2,3\n4,5,6\n");
        let ds = load_csv(f.path(), &TargetColumn::Index(0), HeaderMode::Auto).unwrap();
        assert_eq!(ds.y, vec![1.0, 4.0]);
        assert_eq!(ds.x.row(1), &[5.0, 6.0]);
    }

    #[test]
    fn categorical_column_is_dropped() {
        let f = write_tmp("sex,len,rings\nM,0.4,7\nF,0.5,9\nI,0.3,5\n");
        let ds = load_csv(f.path(), &TargetColumn::Name("rings".into()), HeaderMode::Auto).unwrap();
        assert_eq!(ds.feature_names, vec!["len"]);
    }

    #[test]
    fn missing_target_and_no_features() {
        let f = write_tmp("a,y\n1,2\n");
        assert!(load_csv(f.path(), &TargetColumn::Name("z".into()), HeaderMode::Auto).is_err());
        assert!(load_csv(f.path(), &TargetColumn::Index(5), HeaderMode::Auto).is_err());
        let f = write_tmp("name,y\nfoo,2\nbar,3\n");
        assert!(matches!(
            load_csv(f.path(), &TargetColumn::Name("y".into()), HeaderMode::Auto),
            Err(QiError::InvalidInput(_))
        ));
    }

    #[test]
    fn unreadable_file_is_io_error() {
        let err = load_csv(Path::new("/nonexistent/file.csv"), &TargetColumn::Index(0), HeaderMode::Auto).unwrap_err();
        assert!(matches!(err, QiError::Io(_)));
    }

    #[test]
    fn target_column_parsing() {
        assert_eq!("3".parse::<TargetColumn>().unwrap(), TargetColumn::Index(3));
        assert_eq!("MEDV".parse::<TargetColumn>().unwrap(), TargetColumn::Name("MEDV".into()));
    }

    #[test]
    fn constant_target_is_degenerate() {
        let x = DataMatrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        assert!(matches!(Preprocessor::fit(&x, &[2.0; 3]), Err(QiError::DegenerateData(_))));
    }

    #[test]
    fn write_then_load() {
        let x = DataMatrix::from_rows(&[[0.1, -2.5], [3.0, 4.25]]).unwrap();
        let ds = Dataset::new("t", x, vec![1.5, -0.125]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&ds, &path, "target").unwrap();
        let back = load_csv(&path, &TargetColumn::Name("target".into()), HeaderMode::Auto).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
    }
}
