//! Plain numeric CSV tables. Numbers are written with `{:e}`, the shortest
//! representation that round-trips, so identical data gives identical bytes.

use std::path::Path;

use crate::{Error, Result};

/// Writes equal-length columns under the given header.
pub fn write_columns(path: impl AsRef<Path>, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::arg("header and column counts differ"));
    }
    let rows = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != rows) {
        return Err(Error::arg("columns have different lengths"));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    let mut row = Vec::with_capacity(columns.len());
    for i in 0..rows {
        row.clear();
        row.extend(columns.iter().map(|c| format!("{:e}", c[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric table written by [`write_columns`].
pub fn read_columns(path: impl AsRef<Path>) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let mut columns = vec![Vec::new(); header.len()];
    for rec in r.records() {
        let rec = rec?;
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(field.trim().parse().map_err(|_| Error::Format(format!("not a number: {field:?}")))?);
        }
    }
    Ok((header, columns))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let a = [0.1, 1.0 / 3.0, -2.5e-300];
        let b = [f64::MAX, 0.0, 7.0];
        write_columns(&path, &["a", "b"], &[&a, &b]).unwrap();
        let (h, cols) = read_columns(&path).unwrap();
        assert_eq!(h, ["a", "b"]);
        assert_eq!(cols[0], a);
        assert_eq!(cols[1], b);
        assert!(write_columns(&path, &["a"], &[&a, &b]).is_err());
        assert!(write_columns(&path, &["a", "b"], &[&a, &b[..2]]).is_err());
    }
}
