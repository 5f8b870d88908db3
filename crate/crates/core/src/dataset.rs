//! Column-oriented continuous data and the robust scale statistics built on it.
//!
//! A [`Dataset`] is immutable once constructed: every entry is finite, every
//! column has the same length `N >= 1`, and variable names are unique.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

/// A borrowed column together with its variable name.
#[derive(Debug, Clone, Copy)]
pub struct ColumnView<'a> {
    pub name: &'a str,
    pub data: &'a [f64],
}

impl Dataset {
    /// Builds a dataset from named columns, validating every invariant.
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::BadNames("no variables".into()));
        }
        if names.len() != columns.len() {
            return Err(Error::LengthMismatch {
                expected: names.len(),
                found: columns.len(),
            });
        }
        let mut index = HashMap::with_capacity(names.len());
        for (i, name) in names.iter().enumerate() {
            if name.is_empty() {
                return Err(Error::BadNames(format!("column {i} has an empty name")));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::BadNames(format!("duplicate name {name:?}")));
            }
        }
        let n = columns[0].len();
        if n == 0 {
            return Err(Error::NoSamples);
        }
        for (name, col) in names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: col.len(),
                });
            }
            if let Some(row) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::BadCell {
                    row: row + 1,
                    column: name.clone(),
                    value: col[row].to_string(),
                });
            }
        }
        Ok(Self {
            names,
            columns,
            index,
        })
    }

    /// A single all-zero row over `names`. Useful for searches driven by an
    /// oracle that never looks at the data.
    pub fn placeholder(names: Vec<String>) -> Result<Self> {
        let columns = vec![vec![0.0]; names.len()];
        Self::new(names, columns)
    }

    pub fn n_samples(&self) -> usize {
        self.columns[0].len()
    }

    pub fn n_vars(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVariable(name.to_string()))
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn column_by_name(&self, name: &str) -> Result<ColumnView<'_>> {
        let i = self.index_of(name)?;
        Ok(self.view(i))
    }

    pub fn view(&self, i: usize) -> ColumnView<'_> {
        ColumnView {
            name: &self.names[i],
            data: &self.columns[i],
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = ColumnView<'_>> {
        (0..self.n_vars()).map(move |i| self.view(i))
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file)
    }

    /// Parses comma-separated text with a header row. Numbers use `.` as the
    /// decimal point regardless of locale.
    pub fn read_csv(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if names.iter().all(|s| s.is_empty()) {
            return Err(Error::Empty("missing header row"));
        }
        let mut columns = vec![Vec::new(); names.len()];
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            // 1-based data row, header excluded
            let row = r + 1;
            if record.len() != names.len() {
                return Err(Error::RaggedRow {
                    row,
                    expected: names.len(),
                    found: record.len(),
                });
            }
            for (c, cell) in record.iter().enumerate() {
                let value = cell
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::BadCell {
                        row,
                        column: names[c].clone(),
                        value: cell.to_string(),
                    })?;
                columns[c].push(value);
            }
        }
        if columns[0].is_empty() {
            return Err(Error::NoSamples);
        }
        Self::new(names, columns)
    }

    /// Writes the dataset as CSV. Values are printed in Rust's shortest
    /// round-trip representation, so reloading reproduces them bit for bit.
    pub fn write_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.names.join(","))?;
        let mut line = String::new();
        for row in 0..self.n_samples() {
            line.clear();
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    line.push(',');
                }
                line.push_str(&format!("{:?}", col[row]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// Median; even-length input averages the two middle order statistics.
pub fn median(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Empty("median of an empty vector"));
    }
    let mut v = x.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    let m = v.len() / 2;
    Ok(if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    })
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(x: &[f64]) -> Result<f64> {
    let center = median(x)?;
    let devs: Vec<f64> = x.iter().map(|v| (v - center).abs()).collect();
    median(&devs)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation with the `N - 1` denominator.
pub fn sample_std(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Centers to mean 0 and scales to sample standard deviation 1.
pub fn standardize(x: &[f64]) -> Result<Vec<f64>> {
    if x.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            have: x.len(),
        });
    }
    let m = mean(x);
    let s = sample_std(x);
    // Relative check: a column of identical values can leave a few ulps of
    // spread after centering.
    let scale = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if s == 0.0 || s <= scale * 1e-13 {
        return Err(Error::DegenerateColumn);
    }
    Ok(x.iter().map(|v| (v - m) / s).collect())
}
