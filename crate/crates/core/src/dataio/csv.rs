//! Numeric CSV ingestion: comma separated, `.` as decimal point, no header
//! unless asked to skip one.

use std::path::Path;

use crate::error::{io_at, LofiError, Result};
use crate::linalg::DenseMatrix;

fn read(reader: csv::Reader<impl std::io::Read>) -> Result<DenseMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.into_records() {
        let record = record.map_err(|e| LofiError::Format {
            offset: e.position().map_or(0, |p| p.byte()),
            message: e.to_string(),
        })?;
        let offset = record.position().map_or(0, |p| p.byte());
        let row = record
            .iter()
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| LofiError::Format {
                    offset,
                    message: format!("cannot parse {:?} as a number", f.trim()),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(LofiError::Format { offset: 0, message: "no data rows".into() });
    }
    DenseMatrix::from_rows(&rows)
}

fn builder(skip_header: bool) -> csv::ReaderBuilder {
    let mut b = csv::ReaderBuilder::new();
    b.has_headers(skip_header).flexible(false);
    b
}

pub fn parse_csv(text: &str, skip_header: bool) -> Result<DenseMatrix> {
    read(builder(skip_header).from_reader(text.as_bytes()))
}

pub fn load_csv(path: impl AsRef<Path>, skip_header: bool) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let reader = builder(skip_header).from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => io_at(path)(io),
        other => LofiError::Format { offset: 0, message: format!("{other:?}") },
    })?;
    read(reader)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_rows() {
        let m = parse_csv("1,2.5,-3\n4,5e-1,6\n", false).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m[(1, 1)], 0.5);
    }

    #[test]
    fn header_skip_and_errors() {
        let m = parse_csv("a,b\n1,2\r\n3,4", true).unwrap();
        assert_eq!(m.shape(), (2, 2));
        assert!(parse_csv("a,b\n1,2\n", false).is_err());
        assert!(parse_csv("1,2\n3\n", false).is_err());
        assert!(parse_csv("1;5,2\n", false).is_err());
    }
}
