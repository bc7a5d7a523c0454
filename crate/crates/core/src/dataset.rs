//! Tabular input: CSV ingestion with a column designation.
//!
//! A [`Dataset`] keeps the raw cells of every column so that transformations
//! (such as data repair) can rewrite the feature columns and leave everything
//! else byte-for-byte untouched on output.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which columns play which role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    /// Real-valued feature columns.
    pub features: Vec<String>,
    /// Column holding the sensitive attribute.
    pub sensitive: String,
    /// Target column, real for regression and `{0,1}` for classification.
    #[serde(default)]
    pub target: Option<String>,
}

impl Schema {
    pub fn new(features: Vec<String>, sensitive: impl Into<String>, target: Option<String>) -> Self {
        Self {
            features,
            sensitive: sensitive.into(),
            target,
        }
    }
}

/// Validated tabular data.
///
/// Invariants: at least one row, every designated cell present and parsed,
/// at least two distinct sensitive values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    header: Vec<String>,
    records: Vec<Vec<String>>,
    schema: Schema,
    feature_index: Vec<usize>,
    features: Vec<Vec<f64>>,
    group_labels: Vec<String>,
    groups: Vec<usize>,
    target: Option<Vec<f64>>,
}

/// Load a CSV file (header row required) and validate it against `schema`.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_reader(file, schema)
}

/// Every column of `path` whose cells all parse as reals, in header order,
/// skipping `exclude`.
pub fn numeric_columns(path: impl AsRef<Path>, exclude: &[&str]) -> Result<Vec<String>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let (header, records) = read_table(file)?;
    Ok(header
        .iter()
        .enumerate()
        .filter(|(_, name)| !exclude.contains(&name.as_str()))
        .filter(|(j, _)| {
            records
                .iter()
                .all(|r| r[*j].trim().parse::<f64>().is_ok_and(f64::is_finite))
        })
        .map(|(_, name)| name.clone())
        .collect())
}

fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        records.push(rec.iter().map(str::to_owned).collect());
    }
    Ok((header, records))
}

fn parse_real(column: &str, row: usize, cell: &str) -> Result<f64> {
    if cell.is_empty() {
        return Err(Error::MissingValue {
            column: column.to_owned(),
            row,
        });
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            column: column.to_owned(),
            row,
            value: cell.to_owned(),
        }),
    }
}

/// Sort labels numerically when they all parse, otherwise lexicographically.
fn sort_labels(labels: &mut [String]) {
    let numeric: Option<Vec<f64>> = labels.iter().map(|l| l.parse::<f64>().ok()).collect();
    if numeric.is_some() {
        labels.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    } else {
        labels.sort();
    }
}

impl Dataset {
    pub fn from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Self> {
        let (header, records) = read_table(reader)?;
        Self::from_table(header, records, schema.clone())
    }

    /// Build from an in-memory table. Row numbers in errors are 1-based data rows.
    pub fn from_table(header: Vec<String>, records: Vec<Vec<String>>, schema: Schema) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        for rec in &records {
            if rec.len() != header.len() {
                return Err(Error::LengthMismatch {
                    expected: header.len(),
                    found: rec.len(),
                });
            }
        }
        let col = |name: &str| {
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn {
                    column: name.to_owned(),
                })
        };

        let feature_index = schema.features.iter().map(|f| col(f)).collect::<Result<Vec<_>>>()?;
        let sensitive_index = col(&schema.sensitive)?;
        let target_index = schema.target.as_deref().map(col).transpose()?;

        let mut features = Vec::with_capacity(feature_index.len());
        for (&j, name) in feature_index.iter().zip(&schema.features) {
            let column = records
                .iter()
                .enumerate()
                .map(|(i, r)| parse_real(name, i + 1, &r[j]))
                .collect::<Result<Vec<_>>>()?;
            features.push(column);
        }

        let target = match (target_index, schema.target.as_deref()) {
            (Some(j), Some(name)) => Some(
                records
                    .iter()
                    .enumerate()
                    .map(|(i, r)| parse_real(name, i + 1, &r[j]))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => None,
        };

        let mut distinct: BTreeMap<&str, ()> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let cell = r[sensitive_index].as_str();
            if cell.is_empty() {
                return Err(Error::MissingValue {
                    column: schema.sensitive.clone(),
                    row: i + 1,
                });
            }
            distinct.insert(cell, ());
        }
        if distinct.len() < 2 {
            return Err(Error::DegenerateSensitive {
                column: schema.sensitive.clone(),
            });
        }
        let mut group_labels: Vec<String> = distinct.keys().map(|s| (*s).to_owned()).collect();
        sort_labels(&mut group_labels);
        let lookup: BTreeMap<&str, usize> = group_labels.iter().enumerate().map(|(g, l)| (l.as_str(), g)).collect();
        let groups = records.iter().map(|r| lookup[r[sensitive_index].as_str()]).collect();

        Ok(Self {
            header,
            records,
            schema,
            feature_index,
            features,
            group_labels,
            groups,
            target,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.records.len()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Feature column `j` (position in `schema.features`).
    pub fn feature(&self, j: usize) -> &[f64] {
        &self.features[j]
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    /// Feature vector of row `i`.
    pub fn row_features(&self, i: usize) -> Vec<f64> {
        self.features.iter().map(|c| c[i]).collect()
    }

    /// Distinct sensitive values, in group-index order.
    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    /// Group index of every row.
    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn group_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_groups()];
        for &g in &self.groups {
            counts[g] += 1;
        }
        counts
    }

    /// Group indices as `{0,1}` labels; fails unless there are exactly two groups.
    pub fn binary_groups(&self) -> Result<Vec<u8>> {
        if self.n_groups() != 2 {
            return Err(Error::invalid(format!(
                "sensitive column {:?} has {} groups, a binary attribute is required",
                self.schema.sensitive,
                self.n_groups()
            )));
        }
        Ok(self.groups.iter().map(|&g| g as u8).collect())
    }

    /// Sensitive column parsed as reals (for models with a continuous attribute).
    pub fn sensitive_values(&self) -> Result<Vec<f64>> {
        self.column_f64(&self.schema.sensitive)
    }

    pub fn target(&self) -> Option<&[f64]> {
        self.target.as_deref()
    }

    /// Target as binary labels.
    pub fn binary_target(&self) -> Result<Vec<u8>> {
        let target = self.target.as_deref().ok_or_else(|| Error::MissingColumn {
            column: "<target>".into(),
        })?;
        to_binary(target)
    }

    fn column_position(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn {
                column: name.to_owned(),
            })
    }

    /// Any column parsed as reals.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_position(name)?;
        self.records
            .iter()
            .enumerate()
            .map(|(i, r)| parse_real(name, i + 1, &r[j]))
            .collect()
    }

    /// Any column parsed as `{0,1}` labels.
    pub fn column_binary(&self, name: &str) -> Result<Vec<u8>> {
        to_binary(&self.column_f64(name)?)
    }

    /// Copy with the feature values of the rows flagged in `replace` taken
    /// from `values` (column-major, same layout as [`Dataset::features`]).
    /// Cells of all other rows and columns are kept verbatim.
    pub fn with_feature_values(&self, values: &[Vec<f64>], replace: &[bool]) -> Result<Self> {
        if values.len() != self.n_features() {
            return Err(Error::LengthMismatch {
                expected: self.n_features(),
                found: values.len(),
            });
        }
        if replace.len() != self.n_rows() {
            return Err(Error::LengthMismatch {
                expected: self.n_rows(),
                found: replace.len(),
            });
        }
        let mut out = self.clone();
        for (f, column) in values.iter().enumerate() {
            if column.len() != self.n_rows() {
                return Err(Error::LengthMismatch {
                    expected: self.n_rows(),
                    found: column.len(),
                });
            }
            let j = self.feature_index[f];
            for (i, &v) in column.iter().enumerate() {
                if replace[i] {
                    out.features[f][i] = v;
                    out.records[i][j] = format_real(v);
                }
            }
        }
        Ok(out)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(&self.header)?;
        for r in &self.records {
            wtr.write_record(r)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv output>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_real(v: f64) -> String {
    format!("{v}")
}

fn to_binary(values: &[f64]) -> Result<Vec<u8>> {
    values
        .iter()
        .map(|&v| {
            if v == 0.0 {
                Ok(0)
            } else if v == 1.0 {
                Ok(1)
            } else {
                Err(Error::NonBinaryLabel { value: v })
            }
        })
        .collect()
}
