//! Loading labeled curve datasets from delimited text and writing result tables.
//!
//! The input format is one record per line: a class label followed by the
//! sampled values of that curve, separated by tabs or commas (auto-detected).
//! Labels are remapped to the contiguous range `0..=U`; the original label
//! strings are kept so files round-trip.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A set of discretely observed curves with class labels.
///
/// All curves share the same sampling grid, rescaled to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct CurveSet {
    values: DMatrix<f64>,
    domain: Vec<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl CurveSet {
    /// Builds a curve set from raw parts, validating the shape invariants.
    pub fn new(
        values: DMatrix<f64>,
        domain: Vec<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if values.ncols() != domain.len() {
            return Err(Error::Validation(format!(
                "domain has {} points but curves have {} columns",
                domain.len(),
                values.ncols()
            )));
        }
        if values.ncols() < 2 {
            return Err(Error::Validation(
                "curves must be sampled at no fewer than 2 time points".into(),
            ));
        }
        if values.nrows() != labels.len() {
            return Err(Error::Validation(format!(
                "{} curves but {} labels",
                values.nrows(),
                labels.len()
            )));
        }
        if !domain.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Validation(
                "domain points must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(
                "curve values must be finite (no missing values)".into(),
            ));
        }
        let n_classes = class_names.len();
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::Validation(format!(
                "label {bad} outside class range 0..{n_classes}"
            )));
        }
        Ok(CurveSet {
            values,
            domain,
            labels,
            class_names,
        })
    }

    /// Convenience constructor for a grid equally spaced on `[0, 1]`,
    /// with labels already in `0..=U` and class names `"0"..="U"`.
    pub fn from_rows(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("empty curve set".into()));
        }
        let t_len = rows[0].len();
        if rows.iter().any(|r| r.len() != t_len) {
            return Err(Error::Validation("rows have differing lengths".into()));
        }
        let n = rows.len();
        let values = DMatrix::from_fn(n, t_len, |i, j| rows[i][j]);
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let class_names = (0..n_classes).map(|c| c.to_string()).collect();
        CurveSet::new(values, unit_grid(t_len), labels, class_names)
    }

    pub fn n_curves(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_points(&self) -> usize {
        self.values.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn domain(&self) -> &[f64] {
        &self.domain
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Original label strings, indexed by remapped class index.
    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }
}

/// Equally spaced grid of `n` points on `[0, 1]`.
pub fn unit_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| j as f64 / (n - 1) as f64).collect()
}

fn detect_delimiter(line: &str) -> char {
    if line.contains('\t') {
        '\t'
    } else {
        ','
    }
}

/// Loads a labeled curve dataset: one record per line, class label first,
/// then the curve values. Tab or comma separated (auto-detected). The grid is
/// rescaled to equally spaced points on `[0, 1]` and labels are remapped to
/// `0..=U` in sorted order of the original labels.
pub fn load_ucr(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = fs::read_to_string(path).map_err(|e| Error::io(&display, e))?;

    let mut raw_labels: Vec<String> = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut n_points: Option<usize> = None;
    let mut delim: Option<char> = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let d = *delim.get_or_insert_with(|| detect_delimiter(trimmed));
        let mut fields = trimmed.split(d).map(str::trim).filter(|f| !f.is_empty());
        let label = fields
            .next()
            .ok_or_else(|| Error::parse(&display, lineno, "empty record"))?;
        let mut values = Vec::new();
        for field in fields {
            let v: f64 = field.parse().map_err(|_| {
                Error::parse(&display, lineno, format!("non-numeric field {field:?}"))
            })?;
            values.push(v);
        }
        match n_points {
            None => {
                if values.len() < 2 {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("record has {} time points, need at least 2", values.len()),
                    ));
                }
                n_points = Some(values.len());
            }
            Some(t) if t != values.len() => {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("ragged record: {} values, expected {}", values.len(), t),
                ));
            }
            _ => {}
        }
        raw_labels.push(label.to_string());
        rows.push(values);
    }

    if rows.is_empty() {
        return Err(Error::Validation(format!("{display}: no records")));
    }

    let (labels, class_names) = remap_labels(&raw_labels);
    let t_len = n_points.unwrap();
    let n = rows.len();
    let values = DMatrix::from_fn(n, t_len, |i, j| rows[i][j]);
    CurveSet::new(values, unit_grid(t_len), labels, class_names)
}

/// Remaps arbitrary label strings to `0..=U`. Labels that all parse as
/// numbers sort numerically (so `{-1, 1}` becomes `{0, 1}`); otherwise they
/// sort lexicographically. Returns the remapped labels and the original
/// label strings in class-index order.
fn remap_labels(raw: &[String]) -> (Vec<usize>, Vec<String>) {
    let mut distinct: Vec<String> = raw.to_vec();
    distinct.sort();
    distinct.dedup();
    let all_numeric = distinct.iter().all(|s| s.parse::<f64>().is_ok());
    if all_numeric {
        distinct.sort_by(|a, b| {
            let (x, y): (f64, f64) = (a.parse().unwrap(), b.parse().unwrap());
            x.partial_cmp(&y).unwrap()
        });
    }
    let index: BTreeMap<&str, usize> = distinct
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), i))
        .collect();
    let labels = raw.iter().map(|s| index[s.as_str()]).collect();
    (labels, distinct)
}

/// Writes a curve set in the same delimited format `load_ucr` reads
/// (tab separated, original label string first). Floats are written with
/// shortest round-trip precision, so load → write → load is bit-exact.
pub fn write_ucr(set: &CurveSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut out = String::new();
    for i in 0..set.n_curves() {
        let _ = write!(out, "{}", set.class_names[set.labels[i]]);
        for j in 0..set.n_points() {
            let _ = write!(out, "\t{}", set.values[(i, j)]);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(&display, e))
}

/// A single CSV cell. Floats are written with shortest round-trip precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Str(String),
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Float(v) => write!(f, "{v}"),
            Cell::Str(s) => write!(f, "{s}"),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Str(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Str(v)
    }
}

/// A homogeneous record table destined for CSV output.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Writes a table as CSV with RFC 4180 quoting. The header is always
/// emitted, so an empty row set yields a header-only file.
pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    if let Some(bad) = table.rows.iter().find(|r| r.len() != table.header.len()) {
        return Err(Error::Validation(format!(
            "table row has {} cells, header has {} columns",
            bad.len(),
            table.header.len()
        )));
    }
    let mut writer = csv::Writer::from_path(path).map_err(|e| {
        Error::io(
            &display,
            std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        )
    })?;
    let io_err = |e: csv::Error| {
        Error::io(
            &display,
            std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
        )
    };
    writer.write_record(&table.header).map_err(io_err)?;
    for row in &table.rows {
        let fields: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        writer.write_record(&fields).map_err(io_err)?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(&display, std::io::Error::new(std::io::ErrorKind::Other, e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        use std::io::Write;
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_tab_separated_records() {
        let f = write_temp("1\t0.5\t1.5\t2.5\n-1\t3.0\t4.0\t5.0\n");
        let set = load_ucr(f.path()).unwrap();
        assert_eq!(set.n_curves(), 2);
        assert_eq!(set.n_points(), 3);
        assert_eq!(set.domain(), &[0.0, 0.5, 1.0]);
        // numeric sort: -1 -> class 0, 1 -> class 1
        assert_eq!(set.labels(), &[1, 0]);
        assert_eq!(set.class_names(), &["-1".to_string(), "1".to_string()]);
    }

    #[test]
    fn loads_comma_separated_records() {
        let f = write_temp("2,1.0,2.0\n3,4.0,5.0\n");
        let set = load_ucr(f.path()).unwrap();
        assert_eq!(set.labels(), &[0, 1]);
    }

    #[test]
    fn ragged_row_reports_line_number() {
        let f = write_temp("1\t0.5\t1.5\n1\t1.0\n");
        let err = load_ucr(f.path()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_field_is_a_parse_error() {
        let f = write_temp("1\t0.5\tabc\n");
        assert!(matches!(load_ucr(f.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn single_point_records_are_rejected() {
        let f = write_temp("1\t0.5\n");
        assert!(load_ucr(f.path()).is_err());
    }

    #[test]
    fn label_remapping_is_a_bijection() {
        let raw = vec!["7".into(), "-1".into(), "7".into(), "3".into()];
        let (labels, names) = remap_labels(&raw);
        assert_eq!(names, vec!["-1", "3", "7"]);
        assert_eq!(labels, vec![2, 0, 2, 1]);
    }

    #[test]
    fn load_write_load_round_trips_bit_exactly() {
        let f = write_temp("1\t0.125\t-3.75\t0.0001220703125\n2\t1e-30\t2.5\t7.0\n");
        let a = load_ucr(f.path()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_ucr(&a, out.path()).unwrap();
        let b = load_ucr(out.path()).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.labels(), b.labels());
        assert_eq!(a.class_names(), b.class_names());
    }

    #[test]
    fn empty_table_writes_header_only() {
        let t = Table::new(&["a", "b"]);
        let out = tempfile::NamedTempFile::new().unwrap();
        write_table(&t, out.path()).unwrap();
        let text = std::fs::read_to_string(out.path()).unwrap();
        assert_eq!(text, "a,b\n");
    }

    #[test]
    fn float_cells_round_trip_through_csv() {
        let mut t = Table::new(&["x"]);
        let vals = [0.1 + 0.2, 1.0 / 3.0, f64::MIN_POSITIVE, -0.0];
        for &v in &vals {
            t.push(vec![Cell::Float(v)]);
        }
        let out = tempfile::NamedTempFile::new().unwrap();
        write_table(&t, out.path()).unwrap();
        let text = std::fs::read_to_string(out.path()).unwrap();
        let parsed: Vec<f64> = text
            .lines()
            .skip(1)
            .map(|l| l.parse::<f64>().unwrap())
            .collect();
        for (a, b) in vals.iter().zip(parsed.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
