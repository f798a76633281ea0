use std::collections::HashMap;
use std::path::Path;

use crate::data::{Dataset, SourceFormat};
use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    pub has_header: bool,
    pub delimiter: u8,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self { label_column: LabelColumn::Last, has_header: false, delimiter: b',' }
    }
}

/// Labels written as integral numbers compare by value, so `1`, `1.` and
/// `1.0` name the same class.
fn canonical_label(raw: &str) -> String {
    let raw = raw.trim();
    match raw.parse::<f64>() {
        Ok(v) if v.fract() == 0.0 && v.abs() < 1e15 => format!("{}", v as i64),
        _ => raw.to_string(),
    }
}

/// Reads a CSV of real-valued features plus one label column. Labels are
/// mapped to dense indices in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    load_csv_with_classes(path, opts, None)
}

/// As [`load_csv`], but labels are looked up in `known` (typically the
/// training set's classes). A label missing from `known` is an error.
pub fn load_csv_with_classes(path: impl AsRef<Path>, opts: &CsvOptions, known: Option<&[String]>) -> Result<Dataset> {
    let path = path.as_ref();
    let parse_err = |row: usize, msg: String| Error::Parse { path: path.to_path_buf(), row, msg };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .delimiter(opts.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format { path: path.to_path_buf(), msg: format!("{other:?}") },
        })?;

    let header: Option<Vec<String>> = if opts.has_header {
        let h = reader.headers().map_err(|e| parse_err(1, e.to_string()))?;
        Some(h.iter().map(str::to_string).collect())
    } else {
        None
    };

    let mut classes: Vec<String> = known.map(<[String]>::to_vec).unwrap_or_default();
    let mut index: HashMap<String, usize> = classes.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    let mut label_at = 0usize;

    for (k, record) in reader.records().enumerate() {
        // 1-based line number in the file.
        let row = k + 1 + usize::from(opts.has_header);
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        match width {
            None => {
                if record.len() < 2 {
                    return Err(parse_err(row, "need at least one feature and one label column".into()));
                }
                label_at = match &opts.label_column {
                    LabelColumn::Last => record.len() - 1,
                    LabelColumn::Index(i) if *i < record.len() => *i,
                    LabelColumn::Index(i) => {
                        return Err(parse_err(row, format!("label column {i} out of range ({} columns)", record.len())))
                    }
                    LabelColumn::Name(name) => header
                        .as_ref()
                        .and_then(|h| h.iter().position(|c| c == name))
                        .ok_or_else(|| parse_err(row, format!("unknown label column `{name}`")))?,
                };
                width = Some(record.len());
            }
            Some(w) if w != record.len() => {
                return Err(parse_err(row, format!("expected {w} columns, found {}", record.len())));
            }
            Some(_) => {}
        }
        for (col, cell) in record.iter().enumerate() {
            if col == label_at {
                continue;
            }
            let v: f32 = cell
                .parse()
                .map_err(|_| parse_err(row, format!("column {}: cannot parse `{cell}` as a number", col + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(row, format!("column {}: non-finite value `{cell}`", col + 1)));
            }
            features.push(v);
        }
        let label = canonical_label(&record[label_at]);
        let y = match index.get(&label) {
            Some(&y) => y,
            None if known.is_some() => return Err(parse_err(row, format!("label `{label}` not seen in training data"))),
            None => {
                classes.push(label.clone());
                index.insert(label, classes.len() - 1);
                classes.len() - 1
            }
        };
        labels.push(y);
    }

    let width = width.ok_or_else(|| Error::Format { path: path.to_path_buf(), msg: "no data rows".into() })?;
    Ok(Dataset::new(features, width - 1, labels, classes)?.with_provenance(path, SourceFormat::Csv))
}
