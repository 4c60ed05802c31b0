use std::path::Path;

use crate::analysis::report::{fmt_f64, read_csv, write_csv};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CurvePoint {
    pub step: u64,
    pub metric: String,
    pub value: f64,
}

/// Training curve: `(step, metric, value)` rows, steps strictly increasing per metric.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingCurve {
    pub points: Vec<CurvePoint>,
}

impl TrainingCurve {
    pub fn push(&mut self, step: u64, metric: &str, value: f64) -> Result<()> {
        if let Some(last) = self.points.iter().rev().find(|p| p.metric == metric) {
            if last.step >= step {
                return Err(Error::contract(format!(
                    "curve step {step} for {metric} is not after {}",
                    last.step
                )));
            }
        }
        self.points.push(CurvePoint {
            step,
            metric: metric.to_string(),
            value,
        });
        Ok(())
    }

    pub fn series(&self, metric: &str) -> Vec<(u64, f64)> {
        self.points
            .iter()
            .filter(|p| p.metric == metric)
            .map(|p| (p.step, p.value))
            .collect()
    }

    /// Drops every point recorded after `step`.
    pub fn truncate_after(&mut self, step: u64) {
        self.points.retain(|p| p.step <= step);
    }

    pub fn write(&self, path: &Path, meta: &serde_json::Value) -> Result<()> {
        let rows: Vec<Vec<String>> = self
            .points
            .iter()
            .map(|p| vec![p.step.to_string(), p.metric.clone(), fmt_f64(p.value)])
            .collect();
        write_csv(path, meta, &["step", "metric", "value"], &rows)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let (_, header, rows) = read_csv(path)?;
        let bad = |msg: String| Error::Format {
            path: path.to_path_buf(),
            msg,
        };
        if header != ["step", "metric", "value"] {
            return Err(bad(format!("unexpected header {header:?}")));
        }
        let mut curve = Self::default();
        for r in rows {
            let step = r[0]
                .parse()
                .map_err(|e| bad(format!("step {:?}: {e}", r[0])))?;
            let value = r[2]
                .parse()
                .map_err(|e| bad(format!("value {:?}: {e}", r[2])))?;
            curve.push(step, &r[1], value)?;
        }
        Ok(curve)
    }
}

/// Median of the values with step in the first (or last) `frac` of the step range.
pub fn edge_median(series: &[(u64, f64)], frac: f64, last: bool) -> Option<f64> {
    let (lo, hi) = (series.first()?.0 as f64, series.last()?.0 as f64);
    let cut = if last {
        hi - frac * (hi - lo)
    } else {
        lo + frac * (hi - lo)
    };
    let mut v: Vec<f64> = series
        .iter()
        .filter(|(s, _)| {
            if last {
                *s as f64 >= cut
            } else {
                *s as f64 <= cut
            }
        })
        .map(|p| p.1)
        .collect();
    v.sort_by(f64::total_cmp);
    v.get(v.len() / 2).copied()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_round_trips_and_rejects_repeats() {
        let mut c = TrainingCurve::default();
        c.push(0, "loss", 0.7).unwrap();
        c.push(0, "d", 1.0).unwrap();
        c.push(10, "loss", 0.1 + 0.2).unwrap();
        assert!(c.push(10, "loss", 0.0).is_err());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        c.write(&p, &serde_json::json!({"run": "x"})).unwrap();
        assert_eq!(TrainingCurve::read(&p).unwrap(), c);
        c.truncate_after(5);
        assert_eq!(c.points.len(), 2);
    }
}
