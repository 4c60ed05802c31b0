//! CSV artifacts: a `# {json}` metadata line followed by a header row and records.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::{Error, Result};

pub fn write_csv<S: AsRef<str>>(
    path: &Path,
    meta: &serde_json::Value,
    header: &[&str],
    rows: &[Vec<S>],
) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# {}", meta)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a file written by [`write_csv`]: metadata, header, records.
pub fn read_csv(path: &Path) -> Result<(serde_json::Value, Vec<String>, Vec<Vec<String>>)> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let meta = first.strip_prefix("# ").ok_or_else(|| Error::Format {
        path: path.to_path_buf(),
        msg: "missing metadata line".into(),
    })?;
    let meta = serde_json::from_str(meta.trim_end())?;
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(Error::from)
        })
        .collect::<Result<_>>()?;
    Ok((meta, header, rows))
}

/// Shortest round-trip decimal form, so identical values always print identically.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// Median and 5-95% quantiles (linear interpolation between order statistics).
pub fn quantiles(values: &[f64]) -> (f64, f64, f64) {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let q = |p: f64| {
        if v.is_empty() {
            return f64::NAN;
        }
        let pos = p * (v.len() - 1) as f64;
        let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
        v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
    };
    (q(0.5), q(0.05), q(0.95))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_quantiles() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        let meta = serde_json::json!({"task": "x", "K": 3});
        write_csv(&p, &meta, &["a", "b"], &[vec!["1", "2"], vec!["3", "4"]]).unwrap();
        let (m, h, rows) = read_csv(&p).unwrap();
        assert_eq!(m, meta);
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[1], vec!["3", "4"]);
        assert_eq!(quantiles(&[2.0]), (2.0, 2.0, 2.0));
        assert_eq!(quantiles(&[1.0, 3.0, 2.0]).0, 2.0);
    }
}
