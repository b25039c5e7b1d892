//! Dataset CSV files: header `u1,...,ud,y`, no index column.

use std::path::Path;

use advcert_core::model::{DataPoint, Dataset};

use crate::error::{CliError, CliResult};
use crate::output::fmt_f64;

pub fn read_dataset(path: &Path) -> CliResult<Dataset> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path).map_err(io)?;
    let header = rdr.headers().map_err(io)?.clone();
    let d = header.len().checked_sub(1).filter(|d| *d >= 1).ok_or_else(|| {
        CliError::Io(format!("{}: header must be u1,...,ud,y", path.display()))
    })?;
    let expected: Vec<String> = (1..=d).map(|i| format!("u{i}")).chain(std::iter::once("y".to_string())).collect();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(CliError::Io(format!("{}: header must be {}", path.display(), expected.join(","))));
    }
    let mut points = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(io)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Io(format!("{}: row {}: {e}", path.display(), line + 2)))?;
        points.push(DataPoint::new(vals[..d].to_vec(), vals[d]));
    }
    Dataset::new(points).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn write_dataset(path: &Path, data: &Dataset) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let d = data.dim().max(1);
    let header: Vec<String> = (1..=d).map(|i| format!("u{i}")).chain(std::iter::once("y".to_string())).collect();
    w.write_record(&header).map_err(io)?;
    for p in data.points() {
        let row: Vec<String> = p.u.iter().chain(std::iter::once(&p.y)).map(|v| fmt_f64(*v)).collect();
        w.write_record(&row).map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let data = Dataset::new(vec![DataPoint::new(vec![0.1, -2.0], 1.0 / 3.0), DataPoint::new(vec![5.0, 0.0], -1e-300)]).unwrap();
        write_dataset(&path, &data).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), data);
    }

    #[test]
    fn bad_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        std::fs::write(&path, "x,y\n1,2\n").unwrap();
        assert!(matches!(read_dataset(&path), Err(CliError::Io(_))));
    }
}
