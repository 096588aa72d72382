//! Deterministic CSV writers for per-frame metrics and training logs.
//!
//! Floats are written with a decimal point and 4 fractional digits; rows
//! are ordered by frame index.

use crate::error::{Error, Result};
use std::path::Path;

/// One per-frame metrics row: the frame index, its PSNR, and any auxiliary
/// named columns (order taken from the first row).
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub psnr_db: f64,
    pub aux: Vec<(String, f64)>,
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.4}")
    }
}

/// Writes `t,psnr_db[,aux...]` rows sorted by `t`.
pub fn write_csv(rows: &[MetricsRow], path: &Path) -> Result<()> {
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.t);
    let mut buf = String::from("t,psnr_db");
    if let Some(first) = sorted.first() {
        for (name, _) in &first.aux {
            buf.push(',');
            buf.push_str(name);
        }
    }
    buf.push('\n');
    for row in sorted {
        buf.push_str(&format!("{},{}", row.t, fmt(row.psnr_db)));
        for (_, v) in &row.aux {
            buf.push(',');
            buf.push_str(&fmt(*v));
        }
        buf.push('\n');
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Parses a file written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::CsvFormat("empty file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "t" || cols[1] != "psnr_db" {
        return Err(Error::CsvFormat(format!("unexpected header `{header}`")));
    }
    let mut rows = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::CsvFormat(format!("ragged row `{line}`")));
        }
        let t: usize = fields[0]
            .parse()
            .map_err(|_| Error::CsvFormat(format!("bad index `{}`", fields[0])))?;
        let parse_num = |s: &str| -> Result<f64> {
            if s == "nan" {
                Ok(f64::NAN)
            } else {
                s.parse::<f64>()
                    .map_err(|_| Error::CsvFormat(format!("bad number `{s}`")))
            }
        };
        let psnr_db = parse_num(fields[1])?;
        let mut aux = Vec::new();
        for (name, value) in cols[2..].iter().zip(&fields[2..]) {
            aux.push((name.to_string(), parse_num(value)?));
        }
        rows.push(MetricsRow { t, psnr_db, aux });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_rows_write_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_csv(&[], &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "t,psnr_db\n");
    }

    #[test]
    fn round_trip_within_format_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![
            MetricsRow {
                t: 2,
                psnr_db: 31.20474,
                aux: vec![("loss".into(), 0.015)],
            },
            MetricsRow {
                t: 1,
                psnr_db: 29.9,
                aux: vec![("loss".into(), f64::NAN)],
            },
        ];
        write_csv(&rows, &path).unwrap();
        let back = read_csv(&path).unwrap();
        assert_eq!(back.len(), rows.len());
        // sorted by t on write
        assert_eq!(back[0].t, 1);
        assert!((back[1].psnr_db - 31.2047).abs() < 1e-4);
        assert!(back[0].aux[0].1.is_nan());
    }
}
