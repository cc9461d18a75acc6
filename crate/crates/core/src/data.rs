//! Delimited-text ingestion, seeded train/test splitting and the registry of
//! benchmark datasets.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::DataError;

const REGISTRY_TOML: &str = include_str!("../registry/datasets.toml");

/// Relative tolerance on a registered dataset's row count.
pub const ROW_COUNT_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub source_note: String,
    /// Files relative to the data directory; concatenated in order.
    #[serde(default)]
    pub files: Vec<String>,
    pub target_column: String,
    pub feature_columns: Vec<String>,
    #[serde(default)]
    pub expected_rows: Option<usize>,
    #[serde(default)]
    pub expected_test_target_mean: Option<f64>,
}

impl DatasetSpec {
    /// An unregistered file: no row-count or mean expectations.
    pub fn ad_hoc(name: &str, target_column: &str, feature_columns: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            source_note: "user supplied".into(),
            files: Vec::new(),
            target_column: target_column.to_string(),
            feature_columns,
            expected_rows: None,
            expected_test_target_mean: None,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.feature_columns.is_empty() {
            return Err(DataError::Registry(format!(
                "{}: no feature columns",
                self.name
            )));
        }
        if self.feature_columns.contains(&self.target_column) {
            return Err(DataError::Registry(format!(
                "{}: target column '{}' also listed as a feature",
                self.name, self.target_column
            )));
        }
        Ok(())
    }

    pub fn check_row_count(&self, rows: usize) -> Result<(), DataError> {
        match self.expected_rows {
            Some(expected)
                if (rows as f64 - expected as f64).abs()
                    > ROW_COUNT_TOLERANCE * expected as f64 =>
            {
                Err(DataError::RowCount {
                    name: self.name.clone(),
                    actual: rows,
                    expected,
                })
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Registry {
    dataset: Vec<DatasetSpec>,
}

impl Registry {
    /// The five benchmark datasets shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(REGISTRY_TOML).expect("bundled registry is valid")
    }

    pub fn from_toml(text: &str) -> Result<Self, DataError> {
        let registry: Self =
            toml::from_str(text).map_err(|e| DataError::Registry(e.to_string()))?;
        for spec in &registry.dataset {
            spec.validate()?;
            if spec.files.is_empty() {
                return Err(DataError::Registry(format!(
                    "{}: no files listed",
                    spec.name
                )));
            }
        }
        Ok(registry)
    }

    pub fn specs(&self) -> &[DatasetSpec] {
        &self.dataset
    }

    pub fn get(&self, name: &str) -> Result<&DatasetSpec, DataError> {
        self.dataset
            .iter()
            .find(|s| s.name.eq_ignore_ascii_case(name))
            .ok_or_else(|| DataError::UnknownDataset(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.dataset.iter().map(|s| s.name.as_str()).collect()
    }
}

/// What ingestion kept and dropped.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadReport {
    pub rows_kept: usize,
    pub rows_rejected: usize,
    /// Up to a handful of `(line, reason)` pairs for the rejected rows.
    pub examples: Vec<(usize, String)>,
}

impl LoadReport {
    fn merge(&mut self, other: LoadReport) {
        self.rows_kept += other.rows_kept;
        self.rows_rejected += other.rows_rejected;
        self.examples.extend(other.examples);
        self.examples.truncate(MAX_REJECT_EXAMPLES);
    }
}

const MAX_REJECT_EXAMPLES: usize = 5;

/// Semicolon when the header has more of them than commas, else comma.
pub fn detect_delimiter(header_line: &str) -> u8 {
    let semis = header_line.matches(';').count();
    let commas = header_line.matches(',').count();
    if semis > commas {
        b';'
    } else {
        b','
    }
}

struct Table {
    features: Vec<f64>,
    target: Vec<f64>,
    report: LoadReport,
}

fn read_table(path: &Path, spec: &DatasetSpec) -> Result<Table, DataError> {
    let io = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    let text = std::fs::read_to_string(path).map_err(io)?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(&text);
    let header_line = text.lines().next().unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let parse_err = |e: csv::Error| DataError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = reader.headers().map_err(parse_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: path.to_path_buf(),
                column: name.to_string(),
            })
    };
    let target_idx = column(&spec.target_column)?;
    let feature_idx = spec
        .feature_columns
        .iter()
        .map(|c| column(c))
        .collect::<Result<Vec<_>, _>>()?;

    let mut table = Table {
        features: Vec::new(),
        target: Vec::new(),
        report: LoadReport::default(),
    };
    let mut row = Vec::with_capacity(feature_idx.len());
    for (k, record) in reader.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(parse_err)?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let cell = |i: usize, name: &str| -> Result<f64, String> {
            let raw = record
                .get(i)
                .ok_or_else(|| format!("missing cell '{name}'"))?;
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("cannot parse '{raw}' in column '{name}'")),
            }
        };
        row.clear();
        let parsed = feature_idx
            .iter()
            .zip(&spec.feature_columns)
            .try_for_each(|(&i, name)| cell(i, name).map(|v| row.push(v)))
            .and_then(|()| cell(target_idx, &spec.target_column));
        match parsed {
            Ok(y) => {
                table.features.extend_from_slice(&row);
                table.target.push(y);
                table.report.rows_kept += 1;
            }
            Err(reason) => {
                table.report.rows_rejected += 1;
                if table.report.examples.len() < MAX_REJECT_EXAMPLES {
                    table.report.examples.push((line, reason));
                }
            }
        }
    }
    Ok(table)
}

/// Loads the spec's columns from one delimited file.
pub fn load_csv(path: &Path, spec: &DatasetSpec) -> Result<(Dataset, LoadReport), DataError> {
    load_files(&[path.to_path_buf()], spec)
}

/// Loads and concatenates several files sharing the spec's columns.
pub fn load_files(
    paths: &[PathBuf],
    spec: &DatasetSpec,
) -> Result<(Dataset, LoadReport), DataError> {
    spec.validate()?;
    let mut features = Vec::new();
    let mut target = Vec::new();
    let mut report = LoadReport::default();
    for path in paths {
        let table = read_table(path, spec)?;
        if table.target.is_empty() {
            return Err(DataError::NoUsableRows {
                path: path.clone(),
                rejected: table.report.rows_rejected,
            });
        }
        features.extend(table.features);
        target.extend(table.target);
        report.merge(table.report);
    }
    spec.check_row_count(target.len())?;
    let dataset = Dataset::new(features, target, spec.feature_columns.clone())?;
    Ok((dataset, report))
}

/// Loads a registered dataset from `data_dir`.
pub fn load_registered(
    data_dir: &Path,
    spec: &DatasetSpec,
) -> Result<(Dataset, LoadReport), DataError> {
    let paths: Vec<PathBuf> = spec.files.iter().map(|f| data_dir.join(f)).collect();
    load_files(&paths, spec)
}

/// Header names of a delimited file, in file order.
pub fn header_columns(path: &Path) -> Result<Vec<String>, DataError> {
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let header_line = text
        .trim_start_matches('\u{feff}')
        .lines()
        .next()
        .unwrap_or("");
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(detect_delimiter(header_line))
        .trim(csv::Trim::All)
        .from_reader(header_line.as_bytes());
    let headers = reader.headers().map_err(|e| DataError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(headers.iter().map(str::to_string).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Row indices of a train/test partition, in shuffled order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Seeded shuffle; the first `ceil(n * (1 - test_fraction))` rows train,
/// with at least one row kept on each side.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<SplitIndices, DataError> {
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(DataError::InvalidSplit(format!(
            "test_fraction must lie in (0, 1), got {}",
            spec.test_fraction
        )));
    }
    if n < 2 {
        return Err(DataError::InvalidSplit(format!(
            "need at least 2 rows, got {n}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    // Guard the ceiling against representation error in 1 - f.
    let n_train = ((n as f64 * (1.0 - spec.test_fraction)) - 1e-9).ceil() as usize;
    let n_train = n_train.clamp(1, n - 1);
    let test = order.split_off(n_train);
    Ok(SplitIndices { train: order, test })
}

pub fn split(data: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset), DataError> {
    let idx = split_indices(data.n_rows(), spec)?;
    Ok((data.select_rows(&idx.train)?, data.select_rows(&idx.test)?))
}

/// Z-scores features with the training set's mean and population std.
/// Constant columns are only centered.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset), DataError> {
    let d = train.n_features();
    if test.n_features() != d {
        return Err(DataError::Invalid(format!(
            "train has {d} features, test has {}",
            test.n_features()
        )));
    }
    let n = train.n_rows() as f64;
    let mut mean = vec![0.0; d];
    for row in train.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut std = vec![0.0; d];
    for row in train.rows() {
        for ((s, v), m) in std.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m) / n;
        }
    }
    let scale: Vec<f64> = std
        .iter()
        .map(|v| if *v > 0.0 { v.sqrt() } else { 1.0 })
        .collect();
    let apply = |data: &Dataset| {
        let values = data
            .features()
            .chunks_exact(d)
            .flat_map(|row| {
                row.iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) / s)
            })
            .collect();
        data.with_features(values)
    };
    Ok((apply(train)?, apply(test)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn spec() -> DatasetSpec {
        DatasetSpec::ad_hoc("toy", "y", vec!["a".into(), "b".into()])
    }

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn builtin_registry_has_five_entries() {
        let reg = Registry::builtin();
        assert_eq!(
            reg.names(),
            vec!["california", "concrete", "gas", "ccpp", "airfoil"]
        );
        let concrete = reg.get("Concrete").unwrap();
        assert_eq!(concrete.expected_rows, Some(1030));
        assert_eq!(concrete.feature_columns.len(), 8);
        assert_eq!(reg.get("gas").unwrap().files.len(), 5);
        assert!(matches!(reg.get("iris"), Err(DataError::UnknownDataset(_))));
    }

    #[test]
    fn registry_rejects_target_among_features() {
        let text = r#"
            [[dataset]]
            name = "bad"
            source_note = ""
            files = ["x.csv"]
            target_column = "y"
            feature_columns = ["a", "y"]
        "#;
        assert!(Registry::from_toml(text).is_err());
    }

    #[test]
    fn loads_well_formed_file() {
        let f = write("a,y,b\n1,10,2\n3,20,4\n5,30,6\n");
        let (data, report) = load_csv(f.path(), &spec()).unwrap();
        assert_eq!(data.n_rows(), 3);
        assert_eq!(data.row(1), &[3.0, 4.0]);
        assert_eq!(data.target(), &[10.0, 20.0, 30.0]);
        assert_eq!(report.rows_rejected, 0);
    }

    #[test]
    fn semicolon_delimiter_detected() {
        assert_eq!(detect_delimiter("a;b;c"), b';');
        assert_eq!(detect_delimiter("a,b;c,d"), b',');
        let f = write("a;b;y\n1;2;3\n");
        let (data, _) = load_csv(f.path(), &spec()).unwrap();
        assert_eq!(data.target(), &[3.0]);
    }

    #[test]
    fn missing_target_column_is_named() {
        let f = write("a,b\n1,2\n");
        let err = load_csv(f.path(), &spec()).unwrap_err();
        assert!(matches!(&err, DataError::MissingColumn { column, .. } if column == "y"));
        assert!(err.to_string().contains("'y'"));
    }

    #[test]
    fn bad_rows_are_counted_not_loaded() {
        let f = write("a,b,y\n1,2,3\nx,2,3\n4,,6\n7,8\n9,10,11\n");
        let (data, report) = load_csv(f.path(), &spec()).unwrap();
        assert_eq!(data.n_rows(), 2);
        assert_eq!(report.rows_rejected, 3);
        assert_eq!(report.examples[0].0, 3);
        assert!(report.examples[0].1.contains("'a'"));
    }

    #[test]
    fn zero_usable_rows_and_missing_file() {
        let f = write("a,b,y\nq,r,s\n");
        assert!(matches!(
            load_csv(f.path(), &spec()),
            Err(DataError::NoUsableRows { rejected: 1, .. })
        ));
        assert!(matches!(
            load_csv(Path::new("/nonexistent/file.csv"), &spec()),
            Err(DataError::Io { .. })
        ));
    }

    #[test]
    fn row_count_band_enforced() {
        let f = write("a,b,y\n1,2,3\n");
        let mut s = spec();
        s.expected_rows = Some(100);
        assert!(matches!(
            load_csv(f.path(), &s),
            Err(DataError::RowCount { .. })
        ));
        s.expected_rows = Some(1);
        assert!(load_csv(f.path(), &s).is_ok());
    }

    #[test]
    fn multiple_files_concatenate() {
        let f1 = write("a,b,y\n1,2,3\n");
        let f2 = write("y,b,a\n6,5,4\n");
        let (data, _) = load_files(&[f1.path().into(), f2.path().into()], &spec()).unwrap();
        assert_eq!(data.target(), &[3.0, 6.0]);
        assert_eq!(data.row(1), &[4.0, 5.0]);
    }

    #[test]
    fn loading_is_idempotent() {
        let f = write("a,b,y\n1.5,2,3\n-4,5e3,6\n");
        assert_eq!(
            load_csv(f.path(), &spec()).unwrap().0,
            load_csv(f.path(), &spec()).unwrap().0
        );
    }

    #[test]
    fn header_columns_listed() {
        let f = write("a;b;y\n1;2;3\n");
        assert_eq!(header_columns(f.path()).unwrap(), vec!["a", "b", "y"]);
    }

    #[test]
    fn split_sizes_and_determinism() {
        let s = SplitSpec {
            test_fraction: 0.2,
            seed: 7,
        };
        let idx = split_indices(10, &s).unwrap();
        assert_eq!((idx.train.len(), idx.test.len()), (8, 2));
        assert_eq!(idx, split_indices(10, &s).unwrap());
        let other = split_indices(10, &SplitSpec { seed: 8, ..s }).unwrap();
        assert_ne!(idx, other);
        assert_eq!(split_indices(1030, &s).unwrap().test.len(), 206);
        let tiny = split_indices(
            2,
            &SplitSpec {
                test_fraction: 0.01,
                seed: 1,
            },
        )
        .unwrap();
        assert_eq!((tiny.train.len(), tiny.test.len()), (1, 1));
    }

    #[test]
    fn split_errors() {
        assert!(split_indices(1, &SplitSpec::default()).is_err());
        assert!(split_indices(
            10,
            &SplitSpec {
                test_fraction: 0.0,
                seed: 0
            }
        )
        .is_err());
        assert!(split_indices(
            10,
            &SplitSpec {
                test_fraction: 1.0,
                seed: 0
            }
        )
        .is_err());
    }

    #[test]
    fn split_is_a_partition() {
        for n in [2usize, 3, 17, 100] {
            for seed in 0..5 {
                let idx = split_indices(
                    n,
                    &SplitSpec {
                        test_fraction: 0.3,
                        seed,
                    },
                )
                .unwrap();
                let mut all: Vec<usize> = idx.train.iter().chain(&idx.test).copied().collect();
                all.sort_unstable();
                assert_eq!(all, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn standardize_uses_train_statistics() {
        let train = Dataset::from_rows(
            &[vec![0.0, 5.0], vec![2.0, 5.0]],
            vec![0.0, 1.0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let test =
            Dataset::from_rows(&[vec![4.0, 6.0]], vec![2.0], vec!["a".into(), "b".into()]).unwrap();
        let (tr, te) = standardize(&train, &test).unwrap();
        assert_eq!(tr.row(0), &[-1.0, 0.0]);
        assert_eq!(te.row(0), &[3.0, 1.0]);
        assert_eq!(te.target(), &[2.0]);
    }
}
