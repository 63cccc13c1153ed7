//! Tabular input: CSV loading, missing-value handling and one-hot encoding.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Untyped table as read from disk, before any encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    columns: Vec<String>,
    cells: Vec<Vec<String>>,
    target: usize,
}

impl RawTable {
    pub fn new(columns: Vec<String>, cells: Vec<Vec<String>>, target: &str) -> Result<Self> {
        let target = columns
            .iter()
            .position(|c| c == target)
            .ok_or_else(|| Error::Schema(format!("target column {target:?} not found")))?;
        if let Some((row, cells)) = cells.iter().enumerate().find(|(_, r)| r.len() != columns.len()) {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", columns.len(), cells.len()),
            });
        }
        Ok(Self { columns, cells, target })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.cells
    }

    pub fn n_rows(&self) -> usize {
        self.cells.len()
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_name(&self) -> &str {
        &self.columns[self.target]
    }
}

/// Options for [`load_csv`].
#[derive(Debug, Clone, Copy)]
pub struct CsvOptions {
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_header: true, delimiter: b',' }
    }
}

/// Reads a delimiter-separated file. Without a header, columns are named
/// `col0`, `col1`, ... and `target` must use that naming.
pub fn load_csv(path: impl AsRef<Path>, target: &str, opts: &CsvOptions) -> Result<RawTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    read_csv(file, target, opts)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(reader: R, target: &str, opts: &CsvOptions) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .delimiter(opts.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Parse { row: i, message: e.to_string() })?;
        // Skip fully blank lines (trailing newlines in UCI files).
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push(rec.iter().map(str::to_owned).collect::<Vec<_>>());
    }

    let columns = if opts.has_header {
        if records.is_empty() {
            return Err(Error::Schema("missing header row".into()));
        }
        records.remove(0)
    } else {
        let width = records.first().map_or(0, Vec::len);
        (0..width).map(|i| format!("col{i}")).collect()
    };
    RawTable::new(columns, records, target)
}

/// How missing cells (empty or `?`) are handled by [`prepare`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Drop every row containing a missing cell.
    DropRows,
    /// Mean for numeric columns, mode for categorical ones. Rows with a
    /// missing target are dropped.
    ImputeModeMean,
    /// Keep missing markers as ordinary category values.
    #[default]
    CategoryAsIs,
}

impl std::str::FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "drop_rows" | "drop" => Ok(Self::DropRows),
            "impute_mode_mean" | "impute" => Ok(Self::ImputeModeMean),
            "category_as_is" | "category" => Ok(Self::CategoryAsIs),
            other => Err(Error::InvalidArgument(format!("unknown missing policy {other:?}"))),
        }
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell == "?"
}

fn parse_number(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// How one source column maps onto encoded feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnEncoding {
    Numeric { name: String, index: usize },
    OneHot { name: String, categories: Vec<String>, indices: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EncodingMap {
    pub columns: Vec<ColumnEncoding>,
}

impl EncodingMap {
    /// Maps an encoded row back to source values, one per non-target column.
    /// Numeric values are printed with the shortest round-trip formatting.
    pub fn decode_row(&self, row: &[f64]) -> Vec<String> {
        self.columns
            .iter()
            .map(|col| match col {
                ColumnEncoding::Numeric { index, .. } => format!("{}", row[*index]),
                ColumnEncoding::OneHot { categories, indices, .. } => indices
                    .iter()
                    .position(|&k| row[k] == 1.0)
                    .map(|c| categories[c].clone())
                    .unwrap_or_default(),
            })
            .collect()
    }
}

/// Numeric feature matrix with dense integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    n: usize,
    d: usize,
    feature_names: Vec<String>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Builds a dataset from row-major rows.
    pub fn new(
        rows: Vec<Vec<f64>>,
        feature_names: Vec<String>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        let n = rows.len();
        let d = feature_names.len();
        if n == 0 || d == 0 {
            return Err(Error::DegenerateDataset(format!("need N >= 1 and d >= 1, got N={n}, d={d}")));
        }
        if class_names.len() < 2 {
            return Err(Error::DegenerateDataset(format!(
                "need at least 2 classes, got {}",
                class_names.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::Schema(format!("{} labels for {n} rows", labels.len())));
        }
        if let Some(j) = labels.iter().position(|&y| y >= class_names.len()) {
            return Err(Error::Schema(format!("label {} at row {j} has no class name", labels[j])));
        }
        let mut features = Vec::with_capacity(n * d);
        for (j, row) in rows.into_iter().enumerate() {
            if row.len() != d {
                return Err(Error::Parse { row: j, message: format!("expected {d} features, found {}", row.len()) });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { row: j, message: "non-finite feature value".into() });
            }
            features.extend(row);
        }
        Ok(Self { features, n, d, feature_names, labels, class_names })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.features[j * self.d..(j + 1) * self.d]
    }

    pub fn value(&self, j: usize, k: usize) -> f64 {
        self.features[j * self.d + k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.features.chunks_exact(self.d)
    }

    pub fn label(&self, j: usize) -> usize {
        self.labels[j]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }
}

/// Encodes a raw table: numeric columns pass through, any column with a
/// non-numeric cell is one-hot encoded, class names are sorted and indexed.
pub fn prepare(raw: &RawTable, policy: MissingPolicy) -> Result<(Dataset, EncodingMap)> {
    let target = raw.target_index();
    let rows: Vec<&Vec<String>> = raw
        .rows()
        .iter()
        .filter(|row| match policy {
            MissingPolicy::DropRows => !row.iter().any(|c| is_missing(c)),
            MissingPolicy::ImputeModeMean => !is_missing(&row[target]),
            MissingPolicy::CategoryAsIs => true,
        })
        .collect();
    let treat_missing = policy == MissingPolicy::ImputeModeMean;

    let class_names: Vec<String> =
        rows.iter().map(|r| r[target].clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if class_names.len() < 2 {
        return Err(Error::DegenerateDataset(format!(
            "target {:?} has {} distinct value(s) after cleaning",
            raw.target_name(),
            class_names.len()
        )));
    }
    let class_index: BTreeMap<&str, usize> =
        class_names.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let labels: Vec<usize> = rows.iter().map(|r| class_index[r[target].as_str()]).collect();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut feature_names = Vec::new();
    let mut encoding = EncodingMap::default();

    for (c, name) in raw.columns().iter().enumerate() {
        if c == target {
            continue;
        }
        let present = |cell: &str| !(treat_missing && is_missing(cell));
        let values: Vec<&str> = rows.iter().map(|r| r[c].as_str()).collect();
        let numeric = values.iter().filter(|v| present(v)).all(|v| parse_number(v).is_some());
        let n_present = values.iter().filter(|v| present(v)).count();
        if n_present == 0 && !values.is_empty() {
            return Err(Error::DegenerateDataset(format!("column {name:?} has no values")));
        }

        if numeric {
            let present_vals: Vec<f64> = values.iter().filter_map(|v| parse_number(v)).collect();
            let mean = present_vals.iter().sum::<f64>() / present_vals.len().max(1) as f64;
            let col = values.iter().map(|v| if present(v) { parse_number(v).unwrap() } else { mean }).collect();
            encoding.columns.push(ColumnEncoding::Numeric { name: name.clone(), index: columns.len() });
            feature_names.push(name.clone());
            columns.push(col);
        } else {
            let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
            for v in values.iter().filter(|v| present(v)) {
                *freq.entry(v).or_default() += 1;
            }
            // BTreeMap iteration is sorted, so max_by_key with reversed
            // comparison keeps the lexicographically smallest on ties.
            let mode = freq.iter().rev().max_by_key(|(_, &n)| n).map(|(v, _)| *v).unwrap_or_default();
            let filled: Vec<&str> = values.iter().map(|v| if present(v) { *v } else { mode }).collect();
            let categories: Vec<String> =
                filled.iter().copied().collect::<BTreeSet<_>>().into_iter().map(str::to_owned).collect();
            let mut indices = Vec::with_capacity(categories.len());
            for cat in &categories {
                indices.push(columns.len());
                feature_names.push(format!("{name}_{cat}"));
                columns.push(filled.iter().map(|v| if v == cat { 1.0 } else { 0.0 }).collect());
            }
            encoding.columns.push(ColumnEncoding::OneHot { name: name.clone(), categories, indices });
        }
    }

    let rows_out: Vec<Vec<f64>> = (0..rows.len()).map(|j| columns.iter().map(|col| col[j]).collect()).collect();
    let data = Dataset::new(rows_out, feature_names, labels, class_names)?;
    Ok((data, encoding))
}
