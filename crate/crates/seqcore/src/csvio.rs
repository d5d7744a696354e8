//! CSV ingestion and emission. Convention: the first `d` columns are
//! features, the last column is the response; comma-separated, `.` decimal.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Load a rectangular numeric CSV. With `has_header` the first line is
/// skipped. Errors carry the 1-based file line of the offending row.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Ingest { row: 0, message: e.to_string() })?;
    let mut features: Vec<f64> = Vec::new();
    let mut responses: Vec<f64> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let row = e
                .position()
                .map(|p| p.line() as usize)
                .unwrap_or(idx + 1 + usize::from(has_header));
            Error::Ingest { row, message: e.to_string() }
        })?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(idx + 1 + usize::from(has_header));
        let w = record.len();
        if w < 2 {
            return Err(Error::Ingest {
                row: line,
                message: format!("need at least 2 columns, found {w}"),
            });
        }
        match width {
            None => width = Some(w),
            Some(expect) if expect != w => {
                return Err(Error::Ingest {
                    row: line,
                    message: format!("{w} columns where previous rows had {expect}"),
                })
            }
            _ => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| Error::Ingest {
                row: line,
                message: format!("column {} is not numeric: {field:?}", col + 1),
            })?;
            if col + 1 == w {
                responses.push(value);
            } else {
                features.push(value);
            }
        }
    }
    let d = match width {
        Some(w) => w - 1,
        None => return Err(Error::Ingest { row: 0, message: "no data rows".into() }),
    };
    Dataset::new(features, responses, d)
}

/// Write a dataset as CSV, features first and the response last. Values use
/// the shortest representation that round-trips exactly.
pub fn save_csv(path: &Path, data: &Dataset, header: bool) -> Result<()> {
    let file = File::create(path)?;
    let mut out = BufWriter::new(file);
    if header {
        for j in 0..data.dim() {
            write!(out, "x{j},")?;
        }
        writeln!(out, "y")?;
    }
    let mut line = String::with_capacity(data.dim() * 24 + 24);
    for i in 0..data.n() {
        line.clear();
        for v in data.row(i) {
            line.push_str(&format!("{v}"));
            line.push(',');
        }
        line.push_str(&format!("{}", data.response(i)));
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_linear;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn two_by_three_fixture() {
        let f = write_temp("1,2,3\n4,5,6\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
        assert_eq!(ds.row(1), &[4.0, 5.0]);
        assert_eq!(ds.responses(), &[3.0, 6.0]);
    }

    #[test]
    fn header_row_is_skipped() {
        let f = write_temp("a,b,label\n1,2,3\n");
        let ds = load_csv(f.path(), true).unwrap();
        assert_eq!(ds.n(), 1);
        assert_eq!(ds.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn ragged_and_bad_rows_report_line_numbers() {
        let f = write_temp("1,2,3\n4,5\n");
        match load_csv(f.path(), false) {
            Err(Error::Ingest { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
        let g = write_temp("1,2,3\n4,oops,6\n");
        match load_csv(g.path(), false) {
            Err(Error::Ingest { row, message }) => {
                assert_eq!(row, 2);
                assert!(message.contains("column 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        let empty = write_temp("");
        assert!(load_csv(empty.path(), false).is_err());
    }

    #[test]
    fn generator_roundtrip_is_exact() {
        let (ds, _) = gen_linear(64, 5, (-5.0, 5.0), 4.0, 42).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        save_csv(f.path(), &ds, false).unwrap();
        let back = load_csv(f.path(), false).unwrap();
        assert_eq!(back.n(), ds.n());
        assert_eq!(back.dim(), ds.dim());
        for i in 0..ds.n() {
            assert_eq!(back.row(i), ds.row(i), "row {i}");
            assert_eq!(back.response(i), ds.response(i));
        }
    }
}
