use crate::error::{Error, Result};

/// Allowed deviation of a sample time from `t0 + i * dt`.
pub const TIME_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub setpoint: f64,
    pub q: f64,
    pub qdot: f64,
    pub tau: Option<f64>,
}

/// Uniformly sampled joint tracking log.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    /// Free-form `key = value` notes carried in file comments.
    pub metadata: Vec<String>,
}

impl Trace {
    pub fn new(dt: f64, rows: Vec<TraceRow>) -> Result<Self> {
        let trace = Trace {
            dt,
            rows,
            metadata: Vec::new(),
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.q)
    }

    pub fn setpoints(&self) -> SetpointSeries {
        SetpointSeries {
            dt: self.dt,
            values: self.rows.iter().map(|r| r.setpoint).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invariant("dt", format!("must be > 0, got {}", self.dt)));
        }
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        for (i, row) in self.rows.iter().enumerate() {
            let expected = first.t + i as f64 * self.dt;
            if (row.t - expected).abs() > TIME_TOLERANCE {
                return Err(Error::Parse {
                    line: i,
                    reason: format!("non-uniform sample time {} (expected {expected})", row.t),
                });
            }
            if !(row.q.is_finite() && row.qdot.is_finite() && row.setpoint.is_finite()) {
                return Err(Error::NonFinite("trace sample"));
            }
        }
        Ok(())
    }

    /// Look up `key` in the metadata notes.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find_map(|line| {
            let (k, v) = line.split_once('=')?;
            (k.trim() == key).then(|| v.trim())
        })
    }

    pub fn set_meta(&mut self, key: &str, value: impl std::fmt::Display) {
        self.metadata
            .retain(|line| line.split_once('=').is_none_or(|(k, _)| k.trim() != key));
        self.metadata.push(format!("{key} = {value}"));
    }
}

/// Position setpoints held for `dt` each.
#[derive(Debug, Clone, PartialEq)]
pub struct SetpointSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl SetpointSeries {
    pub fn constant(value: f64, dt: f64, len: usize) -> Self {
        SetpointSeries {
            dt,
            values: vec![value; len],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
