use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::series::TimeSeries;

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Leading columns to drop, such as a timestamp column.
    pub skip_columns: usize,
    /// Required number of feature columns after skipping.
    pub expected_features: Option<usize>,
}

fn parse_cell(cell: &str) -> Option<f64> {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    cell.parse::<f64>().ok()
}

fn open(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line: line as usize, msg: msg.into() }
}

/// Reads a comma-separated `T x D` matrix. A first row containing a
/// non-numeric cell is taken as a header and skipped. Empty and `nan`
/// cells are imputed.
pub fn load_csv(path: &Path, label_path: Option<&Path>, options: &LoadOptions) -> Result<TimeSeries> {
    let mut reader = open(path)?;
    let mut data = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let cells: Vec<Option<f64>> = record.iter().skip(options.skip_columns).map(parse_cell).collect();
        if let Some(bad) = cells.iter().position(Option::is_none) {
            if rows == 0 && width.is_none() {
                width = Some(cells.len());
                continue;
            }
            return Err(parse_err(path, line, format!("non-numeric cell {:?}", &record[bad + options.skip_columns])));
        }
        match width {
            Some(w) if w != cells.len() => {
                return Err(parse_err(path, line, format!("expected {w} columns, found {}", cells.len())))
            }
            _ => width = Some(cells.len()),
        }
        data.extend(cells.into_iter().flatten());
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if rows == 0 || d == 0 {
        return Err(Error::data(format!("{}: no data rows", path.display())));
    }
    if let Some(want) = options.expected_features {
        if want != d {
            return Err(Error::data(format!("{}: expected {want} features, found {d}", path.display())));
        }
    }
    let values = Tensor::new(vec![rows, d], data)?;
    let labels = label_path.map(load_labels).transpose()?;
    TimeSeries::new(values, labels)
}

/// One label per line; when a line has several fields the last one is the
/// label. A non-numeric first line is skipped as a header.
pub fn load_labels(path: &Path) -> Result<Vec<u8>> {
    let mut reader = open(path)?;
    let mut labels = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let Some(cell) = record.iter().next_back().filter(|c| !c.is_empty()) else {
            continue;
        };
        match cell.parse::<f64>() {
            Ok(v) if v == 0.0 || v == 1.0 => labels.push(v as u8),
            Ok(v) => return Err(parse_err(path, line, format!("label {v} is not 0 or 1"))),
            Err(_) if i == 0 => continue,
            Err(_) => return Err(parse_err(path, line, format!("non-numeric label {cell:?}"))),
        }
    }
    Ok(labels)
}

pub fn write_csv(path: &Path, series: &TimeSeries, header: Option<&[String]>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    if let Some(h) = header {
        writeln!(w, "{}", h.join(",")).map_err(io)?;
    }
    for t in 0..series.len() {
        let row: Vec<String> = series.row(t).iter().map(f64::to_string).collect();
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn toy_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor::from_rows(&[[0.1, -2.5], [1e-7, 3.0], [123.456, 0.3333333333333333]]).unwrap();
        let s = TimeSeries::new(t, None).unwrap();
        let p = dir.path().join("toy.csv");
        write_csv(&p, &s, None).unwrap();
        let back = load_csv(&p, None, &LoadOptions::default()).unwrap();
        assert_eq!(back, s);
        let h = ["a".to_string(), "b".to_string()];
        write_csv(&p, &s, Some(&h)).unwrap();
        assert_eq!(load_csv(&p, None, &LoadOptions::default()).unwrap(), s);
    }

    #[test]
    fn ragged_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "r.csv", "x,y\n1,2\n3,4\n5\n");
        match load_csv(&p, None, &LoadOptions::default()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn labels_with_header_and_index_column() {
        let dir = tempfile::tempdir().unwrap();
        let data = write(dir.path(), "d.csv", "ts,a\n0,1.5\n1,2.5\n2,\n");
        let labels = write(dir.path(), "l.csv", "ts,label\n0,0\n1,1\n2,1.0\n");
        let opts = LoadOptions { skip_columns: 1, expected_features: Some(1) };
        let s = load_csv(&data, Some(&labels), &opts).unwrap();
        assert_eq!(s.values().data(), &[1.5, 2.5, 2.5]);
        assert_eq!(s.labels(), Some(&[0u8, 1, 1][..]));
        assert_eq!(s.imputed(), 1);
        let short = write(dir.path(), "s.csv", "0\n1\n");
        assert!(matches!(load_csv(&data, Some(&short), &opts), Err(Error::Data(_))));
    }
}
