use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: u64,
    pub rmse: f64,
    pub fit: f64,
    pub wall_ms: f64,
}

/// `(t, rmse, fit, wall_ms)` rows with strictly increasing `t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTrace {
    points: Vec<TracePoint>,
}

impl ConvergenceTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, p: TracePoint) -> Result<()> {
        if let Some(last) = self.points.last() {
            if p.t <= last.t {
                return Err(Error::input(format!(
                    "trace step {} does not follow {}",
                    p.t, last.t
                )));
            }
        }
        if !(p.rmse >= 0.0) || p.fit > 1.0 {
            return Err(Error::input(format!(
                "trace point out of range: rmse {} fit {}",
                p.rmse, p.fit
            )));
        }
        self.points.push(p);
        Ok(())
    }

    pub fn points(&self) -> &[TracePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }

    /// First recorded step whose RMSE is at or below `target`.
    pub fn steps_to(&self, target: f64) -> Option<u64> {
        self.points.iter().find(|p| p.rmse <= target).map(|p| p.t)
    }

    /// RMSE at step `t`, carrying the last recorded value forward.
    pub fn rmse_at(&self, t: u64) -> Option<f64> {
        let idx = self.points.partition_point(|p| p.t <= t);
        idx.checked_sub(1).map(|i| self.points[i].rmse)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "rmse", "fit", "wall_ms"])?;
        for p in &self.points {
            out.write_record([
                p.t.to_string(),
                p.rmse.to_string(),
                p.fit.to_string(),
                p.wall_ms.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["t", "rmse", "fit", "wall_ms"] {
            return Err(Error::Parse(format!("unexpected trace header {headers:?}")));
        }
        let mut trace = Self::new();
        for rec in rdr.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Parse("short trace row".into()))?
                    .parse::<f64>()
                    .map_err(|e| Error::Parse(e.to_string()))
            };
            let t = rec
                .get(0)
                .unwrap_or_default()
                .parse::<u64>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            trace.push(TracePoint {
                t,
                rmse: num(1)?,
                fit: num(2)?,
                wall_ms: num(3)?,
            })?;
        }
        Ok(trace)
    }
}
