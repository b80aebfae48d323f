//! Feature matrices as CSV: one header row, numeric feature columns and an
//! optional `label` column holding `-1`/`+1` (or `0`/`1`).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use qseg_core::features::{FeatureError, FeatureMatrix};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TabularError {
    #[error("{source_name}: {error}")]
    Csv { source_name: String, error: csv::Error },
    #[error("{0}: cannot open: {1}")]
    Open(String, std::io::Error),
    #[error("{0}: no feature columns")]
    NoFeatures(String),
    #[error("{0}: no data rows")]
    NoRows(String),
    #[error("{source_name}, line {line}: expected {expected} fields, found {found}")]
    Ragged {
        source_name: String,
        line: u64,
        expected: usize,
        found: usize,
    },
    #[error("{source_name}, line {line}, column `{column}`: `{value}` is not a number")]
    NotNumeric {
        source_name: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{source_name}, line {line}: label `{value}` is not one of -1, +1, 0, 1")]
    BadLabel {
        source_name: String,
        line: u64,
        value: String,
    },
    #[error("{0}: {1}")]
    Matrix(String, FeatureError),
}

fn parse_label(s: &str) -> Option<i8> {
    match s {
        "1" | "+1" | "1.0" => Some(1),
        "-1" | "0" | "-1.0" | "0.0" => Some(-1),
        _ => None,
    }
}

/// Reads a feature table; `source_name` only labels error messages.
pub fn read_features<R: Read>(reader: R, source_name: &str) -> Result<FeatureMatrix, TabularError> {
    let name = || source_name.to_string();
    let csv_err = |error| TabularError::Csv {
        source_name: name(),
        error,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let label_col = header.iter().position(|h| h.eq_ignore_ascii_case("label"));
    if header.len() - usize::from(label_col.is_some()) == 0 {
        return Err(TabularError::NoFeatures(name()));
    }
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(TabularError::Ragged {
                source_name: name(),
                line,
                expected: header.len(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(header.len());
        for (i, field) in record.iter().enumerate() {
            if Some(i) == label_col {
                let label = parse_label(field).ok_or_else(|| TabularError::BadLabel {
                    source_name: name(),
                    line,
                    value: field.to_string(),
                })?;
                labels.push(label);
            } else {
                let v = field.parse::<f64>().map_err(|_| TabularError::NotNumeric {
                    source_name: name(),
                    line,
                    column: header[i].clone(),
                    value: field.to_string(),
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(TabularError::NoRows(name()));
    }
    FeatureMatrix::from_rows(&rows, label_col.map(|_| labels)).map_err(|e| TabularError::Matrix(name(), e))
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix, TabularError> {
    let name = path.display().to_string();
    let file = File::open(path).map_err(|e| TabularError::Open(name.clone(), e))?;
    read_features(file, &name)
}

/// Writes columns `f0..f{d-1}` and, when labelled, `label`.
pub fn write_features<W: Write>(m: &FeatureMatrix, writer: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (0..m.cols()).map(|j| format!("f{j}")).collect();
    if m.labels().is_some() {
        header.push("label".into());
    }
    w.write_record(&header)?;
    for i in 0..m.rows() {
        let mut rec: Vec<String> = m.row(i).iter().map(f64::to_string).collect();
        if let Some(l) = m.label(i) {
            rec.push(l.to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(s: &str) -> Result<FeatureMatrix, TabularError> {
        read_features(s.as_bytes(), "inline")
    }

    #[test]
    fn labels_in_any_column() {
        let m = read("label,a,b\n1,0.5,2\n0,1.5,-3\n-1,0,0\n").unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 2));
        assert_eq!(m.labels().unwrap(), &[1, -1, -1]);
        assert_eq!(m.row(1), &[1.5, -3.0]);
    }

    #[test]
    fn unlabelled_tables_are_allowed() {
        let m = read("x,y\n1,2\n").unwrap();
        assert!(m.labels().is_none());
    }

    #[test]
    fn malformed_input_is_reported_with_its_line() {
        assert!(matches!(
            read("a,b\n1,2\n3\n"),
            Err(TabularError::Ragged { line: 3, .. })
        ));
        assert!(matches!(
            read("a,b\n1,x\n"),
            Err(TabularError::NotNumeric { line: 2, .. })
        ));
        assert!(matches!(read("a,label\n1,2\n"), Err(TabularError::BadLabel { .. })));
        assert!(matches!(read("a,b\n"), Err(TabularError::NoRows(_))));
        assert!(matches!(read("label\n1\n"), Err(TabularError::NoFeatures(_))));
        assert!(matches!(read("a\nNaN\n"), Err(TabularError::Matrix(..))));
    }

    #[test]
    fn write_then_read_is_lossless() {
        let rows = vec![vec![0.1, 1e-300], vec![-7.25, std::f64::consts::PI]];
        let m = FeatureMatrix::from_rows(&rows, Some(vec![1, -1])).unwrap();
        let mut buf = Vec::new();
        write_features(&m, &mut buf).unwrap();
        assert_eq!(read_features(buf.as_slice(), "buf").unwrap(), m);
    }
}
