//! CSV reading and writing.
//!
//! Labeled files carry a header `f1,...,fd,y`; interval files carry
//! `f1,...,fd,y_lower,y_upper` with an optional trailing `y_true`. Feature
//! column names are not checked, the trailing target columns are. Reals are
//! written in Rust's shortest round-trip form, so write-then-read is exact.
//! Parse errors report 1-based data row numbers (the header is not counted).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::interval::{Interval, IntervalDataset, IntervalExample, LabeledDataset, LabeledExample};

fn parse_field(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| Error::Parse {
        row,
        message: format!("column {column}: cannot parse {raw:?} as a number"),
    })
}

fn header_names(reader: &mut csv::Reader<impl Read>) -> Result<Vec<String>> {
    Ok(reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect())
}

pub fn read_labeled_csv(source: impl Read) -> Result<LabeledDataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = header_names(&mut reader)?;
    if header.last().map(String::as_str) != Some("y") {
        return Err(Error::Schema(format!(
            "labeled data must end with a `y` column, found header {header:?}"
        )));
    }
    let dimension = header.len() - 1;
    if dimension == 0 {
        return Err(Error::Schema("no feature columns before `y`".into()));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(dimension);
        for (j, name) in header.iter().enumerate().take(dimension) {
            features.push(parse_field(&record[j], row, name)?);
        }
        let target = parse_field(&record[dimension], row, "y")?;
        rows.push(LabeledExample { features, target });
    }
    LabeledDataset::new(dimension, rows)
}

pub fn read_interval_csv(source: impl Read) -> Result<IntervalDataset> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let header = header_names(&mut reader)?;
    let has_truth = header.last().map(String::as_str) == Some("y_true");
    let tail = if has_truth { 3 } else { 2 };
    if header.len() < tail + 1
        || header[header.len() - tail] != "y_lower"
        || header[header.len() - tail + 1] != "y_upper"
    {
        return Err(Error::Schema(format!(
            "interval data must end with `y_lower,y_upper[,y_true]`, found header {header:?}"
        )));
    }
    let dimension = header.len() - tail;
    let mut rows = Vec::new();
    let mut truth = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let mut features = Vec::with_capacity(dimension);
        for (j, name) in header.iter().enumerate().take(dimension) {
            features.push(parse_field(&record[j], row, name)?);
        }
        let lower = parse_field(&record[dimension], row, "y_lower")?;
        let upper = parse_field(&record[dimension + 1], row, "y_upper")?;
        let interval = Interval::new(lower, upper).map_err(|_| Error::Parse {
            row,
            message: format!("y_lower {lower} exceeds y_upper {upper}"),
        })?;
        if has_truth {
            let y = parse_field(&record[dimension + 2], row, "y_true")?;
            if !interval.contains(y) {
                return Err(Error::Parse {
                    row,
                    message: format!("y_true {y} outside [{lower}, {upper}]"),
                });
            }
            truth.push(y);
        }
        rows.push(IntervalExample { features, interval });
    }
    IntervalDataset::new(dimension, rows, has_truth.then_some(truth))
}

fn feature_header(dimension: usize) -> Vec<String> {
    (1..=dimension).map(|i| format!("f{i}")).collect()
}

pub fn write_labeled_csv_to(data: &LabeledDataset, sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = feature_header(data.dimension());
    header.push("y".into());
    w.write_record(&header)?;
    for row in data.rows() {
        let mut rec: Vec<String> = row.features.iter().map(|v| v.to_string()).collect();
        rec.push(row.target.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_interval_csv_to(data: &IntervalDataset, sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    let mut header = feature_header(data.dimension());
    header.push("y_lower".into());
    header.push("y_upper".into());
    let hidden = data.hidden_targets();
    if hidden.is_some() {
        header.push("y_true".into());
    }
    w.write_record(&header)?;
    for (i, row) in data.rows().iter().enumerate() {
        let mut rec: Vec<String> = row.features.iter().map(|v| v.to_string()).collect();
        rec.push(row.interval.lower().to_string());
        rec.push(row.interval.upper().to_string());
        if let Some(h) = hidden {
            rec.push(h[i].to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    read_labeled_csv(File::open(path)?)
}

pub fn load_interval_csv(path: impl AsRef<Path>) -> Result<IntervalDataset> {
    read_interval_csv(File::open(path)?)
}

pub fn write_labeled_csv(data: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    write_labeled_csv_to(data, File::create(path)?)
}

pub fn write_interval_csv(data: &IntervalDataset, path: impl AsRef<Path>) -> Result<()> {
    write_interval_csv_to(data, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeled_parses() {
        let ds = read_labeled_csv("f1,f2,y\n1,2,3\n4.5,-6,7e-3\n".as_bytes()).unwrap();
        assert_eq!(ds.dimension(), 2);
        assert_eq!(ds.rows()[1].features, vec![4.5, -6.0]);
        assert_eq!(ds.rows()[1].target, 7e-3);
    }

    #[test]
    fn missing_y_is_schema_error() {
        let err = read_labeled_csv("f1,f2\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
        let err = read_interval_csv("f1,y\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Schema(_)), "{err}");
    }

    #[test]
    fn inverted_interval_names_row() {
        let err = read_interval_csv("f1,y_lower,y_upper\n0,1,2\n0,5,4\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn bad_number_names_row() {
        let err = read_labeled_csv("f1,y\n1,2\nx,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }), "{err}");
    }

    #[test]
    fn short_row_is_parse_error() {
        let err = read_labeled_csv("f1,f2,y\n1,2\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }

    #[test]
    fn truth_column_optional() {
        let with = read_interval_csv("f1,y_lower,y_upper,y_true\n0,1,2,1.5\n".as_bytes()).unwrap();
        assert_eq!(with.hidden_targets(), Some(&[1.5][..]));
        let without = read_interval_csv("f1,y_lower,y_upper\n0,1,2\n".as_bytes()).unwrap();
        assert!(without.hidden_targets().is_none());
    }

    #[test]
    fn truth_outside_interval_rejected() {
        let err = read_interval_csv("f1,y_lower,y_upper,y_true\n0,1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }), "{err}");
    }
}
