//! CSV ingestion, min-max normalization and the train/validation/test split.
//!
//! Files are comma separated with `.` decimals and at most one header line.
//! The header is detected by the first record failing to parse as numbers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{Rng, Stream};

/// A numeric table with an optional header.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub data: Matrix,
}

impl CsvTable {
    /// Index of the column named `name`, if there is a header.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.as_ref()?.iter().position(|h| h == name)
    }

    /// Splits off column `index`, returning (remaining table, column values).
    pub fn take_column(&self, index: usize) -> (CsvTable, Vec<f64>) {
        let keep: Vec<usize> = (0..self.data.cols()).filter(|&j| j != index).collect();
        let mut rest = Matrix::zeros(self.data.rows(), keep.len());
        for i in 0..self.data.rows() {
            for (k, &j) in keep.iter().enumerate() {
                rest[(i, k)] = self.data[(i, j)];
            }
        }
        let header = self
            .header
            .as_ref()
            .map(|h| keep.iter().map(|&j| h[j].clone()).collect());
        (
            CsvTable { header, data: rest },
            self.data.column(index),
        )
    }
}

fn csv_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path)?;
    parse_csv(&text).map_err(|e| match e {
        Error::Csv { message, .. } => csv_err(path, message),
        other => other,
    })
}

/// Parses CSV text. Ragged rows, non-numeric cells after the first line and
/// non-finite values are errors.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut width = None;
    let mut count = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_err(Path::new(""), e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(|c| c.parse::<f64>()).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if line == 0 => {
                header = Some(record.iter().map(str::to_owned).collect::<Vec<_>>());
                width = Some(record.len());
                continue;
            }
            Err(_) => {
                let (col, cell) = record
                    .iter()
                    .enumerate()
                    .find(|(_, c)| c.parse::<f64>().is_err())
                    .unwrap();
                return Err(csv_err(
                    Path::new(""),
                    format!("line {}, column {}: '{cell}' is not a number", line + 1, col + 1),
                ));
            }
        };
        if let Some((col, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(csv_err(
                Path::new(""),
                format!("line {}, column {}: non-finite value {v}", line + 1, col + 1),
            ));
        }
        match width {
            Some(w) if w != values.len() => {
                return Err(csv_err(
                    Path::new(""),
                    format!(
                        "line {} has {} fields, expected {w}",
                        line + 1,
                        values.len()
                    ),
                ))
            }
            _ => width = Some(values.len()),
        }
        rows.extend(values);
        count += 1;
    }
    let cols = width.unwrap_or(0);
    Ok(CsvTable {
        header,
        data: Matrix::from_vec(count, cols, rows)?,
    })
}

/// Renders rows as CSV with `header` as the first line.
pub fn format_csv(header: &[String], data: &Matrix) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in data.iter_rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, header: &[String], data: &Matrix) -> Result<()> {
    fs::write(path, format_csv(header, data))?;
    Ok(())
}

/// Per-feature minimum and maximum for min-max scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl NormStats {
    pub fn new(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self> {
        if mins.len() != maxs.len() {
            return Err(Error::Shape("min and max vectors differ in length".into()));
        }
        if mins.iter().zip(&maxs).any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi)) {
            return Err(Error::Input("normalization bounds must be finite with min ≤ max".into()));
        }
        Ok(Self { mins, maxs })
    }

    /// Column statistics over the given rows.
    pub fn fit(data: &Matrix, rows: &[usize]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("cannot fit normalization on zero rows".into()));
        }
        let d = data.cols();
        let mut mins = vec![f64::INFINITY; d];
        let mut maxs = vec![f64::NEG_INFINITY; d];
        for &i in rows {
            for (j, &v) in data.row(i).iter().enumerate() {
                mins[j] = mins[j].min(v);
                maxs[j] = maxs[j].max(v);
            }
        }
        for j in 0..d {
            if mins[j] == maxs[j] {
                warn!("column {j} is constant ({}); it normalizes to 0.5", mins[j]);
            }
        }
        Self::new(mins, maxs)
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    fn check(&self, data: &Matrix) -> Result<()> {
        if data.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "data has {} columns, normalization covers {}",
                data.cols(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// `(x − min) / (max − min)`; constant columns map to 0.5.
    pub fn normalize(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let mut out = data.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let range = self.maxs[j] - self.mins[j];
                *v = if range > 0.0 {
                    (*v - self.mins[j]) / range
                } else {
                    0.5
                };
            }
        }
        Ok(out)
    }

    pub fn denormalize(&self, data: &Matrix) -> Result<Matrix> {
        self.check(data)?;
        let mut out = data.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let range = self.maxs[j] - self.mins[j];
                *v = if range > 0.0 {
                    self.mins[j] + *v * range
                } else {
                    self.mins[j]
                };
            }
        }
        Ok(out)
    }

    /// `log |det ∂normalize/∂x| = −Σ log(max − min)` over non-constant
    /// columns: add it to a normalized-space log-density to express the
    /// density in original units.
    pub fn log_jacobian(&self) -> f64 {
        self.mins
            .iter()
            .zip(&self.maxs)
            .filter(|(lo, hi)| hi > lo)
            .map(|(lo, hi)| -(hi - lo).ln())
            .sum()
    }
}

/// Disjoint train/validation/test row indices covering `0..count`:
/// 10% test, then 10% of the remainder for validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..count).collect();
        Rng::new(seed, Stream::Split).shuffle(&mut idx);
        let n_test = (count as f64 * 0.1).round() as usize;
        let n_val = ((count - n_test) as f64 * 0.1).round() as usize;
        let test = idx[..n_test].to_vec();
        let validation = idx[n_test..n_test + n_val].to_vec();
        let train = idx[n_test + n_val..].to_vec();
        Self {
            train,
            validation,
            test,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_detection_and_parsing() {
        let t = parse_csv("a,b\n1,2\n3.5,-4e2\n").unwrap();
        assert_eq!(t.header, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(t.data.as_slice(), &[1.0, 2.0, 3.5, -400.0]);
        let t = parse_csv("1,2\n3,4\n").unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.data.shape(), (2, 2));
    }

    #[test]
    fn ragged_and_non_numeric_rows_fail() {
        assert!(matches!(parse_csv("1,2\n3\n"), Err(Error::Csv { .. })));
        assert!(matches!(parse_csv("1,2\n3,x\n"), Err(Error::Csv { .. })));
        assert!(matches!(parse_csv("1,2\n3,inf\n"), Err(Error::Csv { .. })));
    }

    #[test]
    fn minmax_definition() {
        let m = Matrix::from_vec(3, 1, vec![0.0, 5.0, 10.0]).unwrap();
        let stats = NormStats::fit(&m, &[0, 1, 2]).unwrap();
        assert_eq!(stats.normalize(&m).unwrap().as_slice(), &[0.0, 0.5, 1.0]);
        assert!((stats.log_jacobian() + 10f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn constant_column_maps_to_half() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 7.0, 2.0, 7.0]).unwrap();
        let stats = NormStats::fit(&m, &[0, 1]).unwrap();
        let n = stats.normalize(&m).unwrap();
        assert_eq!(n.column(1), vec![0.5, 0.5]);
        assert_eq!(stats.denormalize(&n).unwrap(), m);
    }

    #[test]
    fn split_sizes() {
        let s = SplitSpec::new(1000, 4);
        assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (810, 90, 100));
        let mut all: Vec<usize> = s
            .train
            .iter()
            .chain(&s.validation)
            .chain(&s.test)
            .copied()
            .collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(s, SplitSpec::new(1000, 4));
    }

    #[test]
    fn csv_text_roundtrip() {
        let m = Matrix::from_vec(2, 2, vec![0.1, -3.0, 1e-300, 2.5]).unwrap();
        let text = format_csv(&["x1".into(), "x2".into()], &m);
        assert_eq!(parse_csv(&text).unwrap().data, m);
    }

    proptest! {
        #[test]
        fn denormalize_inverts_normalize(
            vals in proptest::collection::vec(-1e6f64..1e6, 6..60)
        ) {
            let rows = vals.len() / 3;
            let m = Matrix::from_vec(rows, 3, vals[..rows * 3].to_vec()).unwrap();
            let idx: Vec<usize> = (0..rows).collect();
            let stats = NormStats::fit(&m, &idx).unwrap();
            let back = stats.denormalize(&stats.normalize(&m).unwrap()).unwrap();
            for j in 0..3 {
                let range = stats.maxs()[j] - stats.mins()[j];
                for i in 0..rows {
                    let scale = range.max(m[(i, j)].abs()).max(1.0);
                    prop_assert!((back[(i, j)] - m[(i, j)]).abs() <= 1e-12 * scale);
                }
            }
        }
    }
}
