//! Head-orientation traces: ingestion from delimited text, interpolation and
//! resampling onto a uniform grid.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::str::FromStr;

use super::quaternion::{quat_to_viewport, Quaternion};
use super::PredictionError;
use crate::geometry::Viewport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// Seconds.
    pub t: f64,
    pub vp: Viewport,
}

impl Sample {
    pub fn new(t: f64, vp: Viewport) -> Self {
        Sample { t, vp }
    }
}

/// One viewer's orientation over time, timestamps strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub user_id: String,
    samples: Vec<Sample>,
}

impl Trace {
    pub fn new(user_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self, PredictionError> {
        let user_id = user_id.into();
        if samples.is_empty() {
            return Err(PredictionError::EmptyTrace(user_id));
        }
        for (i, w) in samples.windows(2).enumerate() {
            if !(w[1].t > w[0].t) {
                return Err(PredictionError::NonIncreasing {
                    user: user_id,
                    index: i + 1,
                    t: w[1].t,
                });
            }
        }
        if let Some(s) = samples.iter().find(|s| !s.t.is_finite()) {
            return Err(PredictionError::NonIncreasing {
                user: user_id,
                index: 0,
                t: s.t,
            });
        }
        Ok(Trace { user_id, samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.samples[0].t
    }

    pub fn end(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    pub fn viewports(&self) -> Vec<Viewport> {
        self.samples.iter().map(|s| s.vp).collect()
    }

    /// Orientation at time `t`, interpolated between the bracketing samples
    /// (yaw along the shorter arc, pitch and roll linearly). `None` outside
    /// the trace span.
    pub fn viewport_at(&self, t: f64) -> Option<Viewport> {
        const SLACK: f64 = 1e-9;
        if !(t >= self.start() - SLACK && t <= self.end() + SLACK) {
            return None;
        }
        let i = self.samples.partition_point(|s| s.t <= t);
        if i == 0 {
            return Some(self.samples[0].vp);
        }
        if i == self.samples.len() {
            return Some(self.samples[i - 1].vp);
        }
        let (a, b) = (&self.samples[i - 1], &self.samples[i]);
        let f = (t - a.t) / (b.t - a.t);
        Some(interpolate(&a.vp, &b.vp, f))
    }
}

fn interpolate(a: &Viewport, b: &Viewport, f: f64) -> Viewport {
    let dyaw = shortest_delta(a.yaw, b.yaw);
    Viewport::new(
        a.yaw + dyaw * f,
        a.pitch + (b.pitch - a.pitch) * f,
        a.roll + (b.roll - a.roll) * f,
    )
}

/// `b − a` shifted by a multiple of 2π into `(−π, π]`.
fn shortest_delta(a: f64, b: f64) -> f64 {
    let mut d = (b - a) - TAU * ((b - a) / TAU).round();
    if d <= -PI {
        d += TAU;
    } else if d > PI {
        d -= TAU;
    }
    d
}

/// Removes 2π jumps: the first value is kept and every later value is
/// shifted so consecutive differences lie in `(−π, π]`.
pub fn unwrap_yaw(seq: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(seq.len());
    let mut prev_raw = match seq.first() {
        Some(&v) => v,
        None => return out,
    };
    let mut acc = prev_raw;
    out.push(acc);
    for &v in &seq[1..] {
        acc += shortest_delta(prev_raw, v);
        prev_raw = v;
        out.push(acc);
    }
    out
}

/// Resamples onto `t0, t0 + 1/hz, …` up to the last timestamp.
pub fn resample_trace(trace: &Trace, hz: f64) -> Result<Trace, PredictionError> {
    if !(hz > 0.0) || !hz.is_finite() {
        return Err(PredictionError::Config(format!("resample rate must be > 0, got {hz}")));
    }
    let span = trace.end() - trace.start();
    if span + 1e-9 < 2.0 / hz {
        return Err(PredictionError::TooShort {
            user: trace.user_id.clone(),
            span,
            needed: 2.0 / hz,
        });
    }
    let n = (span * hz + 1e-9).floor() as usize + 1;
    let t0 = trace.start();
    let samples = (0..n)
        .map(|k| {
            let t = t0 + k as f64 / hz;
            Sample::new(t, trace.viewport_at(t.min(trace.end())).expect("grid inside span"))
        })
        .collect();
    Trace::new(trace.user_id.clone(), samples)
}

/// What a column of a trace file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    Time,
    Q0,
    Q1,
    Q2,
    Q3,
    Yaw,
    Pitch,
    Roll,
    Skip,
}

impl FromStr for Column {
    type Err = PredictionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "t" | "time" => Column::Time,
            "q0" => Column::Q0,
            "q1" => Column::Q1,
            "q2" => Column::Q2,
            "q3" => Column::Q3,
            "yaw" => Column::Yaw,
            "pitch" => Column::Pitch,
            "roll" => Column::Roll,
            "_" | "skip" => Column::Skip,
            other => return Err(PredictionError::Config(format!("unknown trace column {other:?}"))),
        })
    }
}

/// Column mapping for delimited trace files.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFormat {
    pub columns: Vec<Column>,
    /// Euler columns are in degrees.
    pub degrees: bool,
}

impl Default for TraceFormat {
    fn default() -> Self {
        TraceFormat {
            columns: vec![Column::Time, Column::Yaw, Column::Pitch, Column::Roll],
            degrees: false,
        }
    }
}

impl TraceFormat {
    /// Parses a mapping such as `t,q0,q1,q2,q3` or `t,_,yaw,pitch,roll`.
    pub fn parse(spec: &str, degrees: bool) -> Result<Self, PredictionError> {
        let columns = spec.split(',').map(str::parse).collect::<Result<Vec<Column>, _>>()?;
        let fmt = TraceFormat { columns, degrees };
        fmt.validate()?;
        Ok(fmt)
    }

    fn count(&self, c: Column) -> usize {
        self.columns.iter().filter(|&&x| x == c).count()
    }

    fn validate(&self) -> Result<(), PredictionError> {
        let bad = |m: &str| Err(PredictionError::Config(m.into()));
        for c in [Column::Time, Column::Q0, Column::Q1, Column::Q2, Column::Q3, Column::Yaw, Column::Pitch, Column::Roll] {
            if self.count(c) > 1 {
                return bad(&format!("column {c:?} mapped twice"));
            }
        }
        if self.count(Column::Time) != 1 {
            return bad("mapping needs exactly one time column");
        }
        let quats = [Column::Q0, Column::Q1, Column::Q2, Column::Q3].iter().map(|&c| self.count(c)).sum::<usize>();
        let eulers = [Column::Yaw, Column::Pitch, Column::Roll].iter().map(|&c| self.count(c)).sum::<usize>();
        match (quats, eulers) {
            (4, 0) | (0, 3) => Ok(()),
            _ => bad("mapping needs either all of q0..q3 or all of yaw,pitch,roll"),
        }
    }

    fn is_quaternion(&self) -> bool {
        self.count(Column::Q0) == 1
    }
}

fn split_fields(line: &str) -> Vec<&str> {
    if line.contains(',') {
        line.split(',').map(str::trim).collect()
    } else {
        line.split_whitespace().collect()
    }
}

/// Parses a delimited trace. Fields are separated by commas, or by
/// whitespace when a line has no comma. Blank lines and `#` comments are
/// skipped; a first line whose mapped fields are not numeric is treated as
/// a header.
pub fn parse_trace(user_id: &str, text: &str, fmt: &TraceFormat) -> Result<Trace, PredictionError> {
    fmt.validate()?;
    let mut samples = Vec::new();
    let mut first = true;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields = split_fields(line);
        match parse_row(&fields, fmt) {
            Ok(s) => samples.push(s),
            Err(_) if first && !looks_numeric(&fields, fmt) => {}
            Err(msg) => {
                return Err(PredictionError::Parse {
                    line: lineno + 1,
                    msg,
                })
            }
        }
        first = false;
    }
    Trace::new(user_id, samples)
}

fn looks_numeric(fields: &[&str], fmt: &TraceFormat) -> bool {
    fmt.columns
        .iter()
        .zip(fields)
        .any(|(c, f)| *c != Column::Skip && f.parse::<f64>().is_ok())
}

fn parse_row(fields: &[&str], fmt: &TraceFormat) -> Result<Sample, String> {
    if fields.len() < fmt.columns.len() {
        return Err(format!("expected {} fields, found {}", fmt.columns.len(), fields.len()));
    }
    let mut vals = [0.0f64; 8];
    for (col, field) in fmt.columns.iter().zip(fields) {
        let slot = match col {
            Column::Time => 0,
            Column::Q0 => 1,
            Column::Q1 => 2,
            Column::Q2 => 3,
            Column::Q3 => 4,
            Column::Yaw => 5,
            Column::Pitch => 6,
            Column::Roll => 7,
            Column::Skip => continue,
        };
        let v: f64 = field.parse().map_err(|_| format!("{col:?} field {field:?} is not a number"))?;
        if !v.is_finite() {
            return Err(format!("{col:?} field {field:?} is not finite"));
        }
        vals[slot] = v;
    }
    let vp = if fmt.is_quaternion() {
        let q = Quaternion::new(vals[1], vals[2], vals[3], vals[4]);
        quat_to_viewport(&q).map_err(|e| e.to_string())?
    } else if fmt.degrees {
        Viewport::degrees(vals[5], vals[6], vals[7])
    } else {
        Viewport::new(vals[5], vals[6], vals[7])
    };
    Ok(Sample::new(vals[0], vp))
}

/// Reads a trace file; the user id is the file stem.
pub fn load_trace(path: impl AsRef<Path>, fmt: &TraceFormat) -> Result<Trace, PredictionError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| PredictionError::Io(format!("{}: {e}", path.display())))?;
    let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_trace(&id, &text, fmt).map_err(|e| e.in_file(path))
}

/// Writes `t,yaw,pitch,roll` rows in radians, parseable with the default
/// [`TraceFormat`].
pub fn format_trace(trace: &Trace) -> String {
    let mut out = String::from("t,yaw,pitch,roll\n");
    for s in trace.samples() {
        out.push_str(&format!("{},{},{},{}\n", s.t, s.vp.yaw, s.vp.pitch, s.vp.roll));
    }
    out
}
