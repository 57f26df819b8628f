use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use ndarray::Array2;

use super::{DataError, LabeledDataset};
use crate::Scalar;

/// Column layout of a dataset CSV: numeric feature columns, optional integer
/// label as the last column, optional header row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CsvOptions {
    pub has_labels: bool,
    pub has_header: bool,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { has_labels: true, has_header: false }
    }
}

/// Loads a dataset, treating the first row as a header when any of its
/// cells is not a number.
pub fn load_dataset_csv<F: Scalar>(
    path: impl AsRef<Path>,
    has_labels: bool,
) -> Result<LabeledDataset<F>, DataError> {
    let has_header = detect_header(path.as_ref())?;
    load_dataset_csv_with(path, CsvOptions { has_labels, has_header })
}

fn open(path: &Path) -> Result<File, DataError> {
    File::open(path).map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => DataError::MissingFile(path.display().to_string()),
        _ => DataError::Io(format!("{}: {e}", path.display())),
    })
}

/// True when the first non-empty row has a non-numeric cell.
pub fn detect_header(path: &Path) -> Result<bool, DataError> {
    let mut first = String::new();
    let mut reader = io::BufReader::new(open(path)?);
    while first.trim().is_empty() {
        first.clear();
        if io::BufRead::read_line(&mut reader, &mut first).map_err(|e| DataError::Io(e.to_string()))? == 0 {
            return Ok(false);
        }
    }
    Ok(first.trim().split(',').any(|cell| cell.trim().parse::<f64>().is_err()))
}

/// Loads a dataset, remapping raw integer labels onto `0..C` in ascending
/// order of the raw value. The mapping is kept in `label_names`.
pub fn load_dataset_csv_with<F: Scalar>(
    path: impl AsRef<Path>,
    opts: CsvOptions,
) -> Result<LabeledDataset<F>, DataError> {
    let path = path.as_ref();
    let file = open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut values: Vec<F> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;

    for record in reader.records() {
        let record = record.map_err(|e| DataError::Io(e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(DataError::RaggedRows { line, found: record.len(), expected });
        }
        let n_features = if opts.has_labels { expected - 1 } else { expected };
        for (col, cell) in record.iter().enumerate().take(n_features) {
            let v: f64 = cell.parse().map_err(|_| DataError::NonNumericCell {
                line,
                col: col + 1,
                cell: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(DataError::NonFiniteValue { line, col: col + 1 });
            }
            values.push(F::lit(v));
        }
        if opts.has_labels {
            let cell = &record[expected - 1];
            raw_labels.push(parse_label(cell).ok_or_else(|| DataError::NonNumericCell {
                line,
                col: expected,
                cell: cell.to_string(),
            })?);
        }
        rows += 1;
    }

    let width = width.ok_or(DataError::Empty)?;
    let n_features = if opts.has_labels { width.saturating_sub(1) } else { width };
    if n_features == 0 {
        return Err(DataError::NoFeatures);
    }
    let features = Array2::from_shape_vec((rows, n_features), values)
        .map_err(|e| DataError::Io(e.to_string()))?;

    if !opts.has_labels {
        return LabeledDataset::with_class_count(features, None, 0);
    }
    let names: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let dense = raw_labels
        .iter()
        .map(|l| names.binary_search(l).expect("label present in its own set"))
        .collect();
    Ok(LabeledDataset::with_class_count(features, Some(dense), names.len())?.with_label_names(names))
}

fn parse_label(cell: &str) -> Option<i64> {
    if let Ok(v) = cell.parse::<i64>() {
        return Some(v);
    }
    let v: f64 = cell.parse().ok()?;
    (v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15).then_some(v as i64)
}

/// Writes features (and the original label values, when labels are present)
/// as a CSV with a header row.
pub fn write_dataset_csv<F: Scalar>(
    path: impl AsRef<Path>,
    data: &LabeledDataset<F>,
) -> io::Result<()> {
    let mut out = io::BufWriter::new(File::create(path)?);
    let header: Vec<String> = (0..data.n_features()).map(|j| format!("f{j}")).collect();
    write!(out, "{}", header.join(","))?;
    if data.labels().is_some() {
        write!(out, ",label")?;
    }
    writeln!(out)?;
    for (i, row) in data.features().rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        write!(out, "{}", cells.join(","))?;
        if let Some(labels) = data.labels() {
            let y = labels[i];
            let raw = data.label_names().map_or(y as i64, |names| names[y]);
            write!(out, ",{raw}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}
