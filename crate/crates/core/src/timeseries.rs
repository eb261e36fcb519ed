//! Time series of a growing entity: validated construction, delimited-text
//! loading and the elementwise transforms used to look for linear
//! representations.

use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{split_metadata, Metadata};

/// One observation of the size of a growing entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    /// Time in calendar years (fractional allowed).
    pub t: f64,
    pub value: f64,
}

/// Ordered observations `(t, S(t))`.
///
/// Invariants, checked by [`TimeSeries::new`]: at least two points, strictly
/// increasing finite times, finite values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    points: Vec<Point>,
    pub label: String,
    pub unit: String,
}

impl TimeSeries {
    pub fn new(points: Vec<Point>, label: impl Into<String>, unit: impl Into<String>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Validation(format!(
                "a time series needs at least 2 points, got {}",
                points.len()
            )));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() {
                return Err(Error::Validation(format!("time at point {i} is not finite")));
            }
            if !p.value.is_finite() {
                return Err(Error::Validation(format!("value at point {i} (t = {}) is not finite", p.t)));
            }
        }
        for (i, w) in points.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                let what = if w[1].t == w[0].t { "duplicated" } else { "decreasing" };
                return Err(Error::Validation(format!(
                    "{what} time {} at point {} (previous time {})",
                    w[1].t,
                    i + 1,
                    w[0].t
                )));
            }
        }
        Ok(Self {
            points,
            label: label.into(),
            unit: unit.into(),
        })
    }

    /// Builds a series from parallel slices of times and values.
    pub fn from_pairs(times: &[f64], values: &[f64], label: impl Into<String>, unit: impl Into<String>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Validation(format!(
                "{} times but {} values",
                times.len(),
                values.len()
            )));
        }
        let points = times
            .iter()
            .zip(values)
            .map(|(&t, &value)| Point { t, value })
            .collect();
        Self::new(points, label, unit)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.value).collect()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    /// Multiplies every value by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let points = self
            .points
            .iter()
            .map(|p| Point { t: p.t, value: p.value * k })
            .collect();
        Self::new(points, self.label.clone(), self.unit.clone())
    }
}

/// Elementwise substitution `F(S)` applied before computing rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransformKind {
    /// `F = ln S`, requires `S > 0`.
    Log,
    /// `F = 1/S`, requires `S != 0`.
    Reciprocal,
}

impl TransformKind {
    pub fn apply(self, value: f64) -> Option<f64> {
        match self {
            TransformKind::Log if value > 0.0 => Some(value.ln()),
            TransformKind::Reciprocal if value != 0.0 => Some(1.0 / value),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::Log => "log",
            TransformKind::Reciprocal => "reciprocal",
        }
    }

    fn annotate(self, unit: &str) -> String {
        match self {
            TransformKind::Log => format!("ln({unit})"),
            TransformKind::Reciprocal => format!("1/({unit})"),
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for TransformKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "log" | "ln" => Ok(TransformKind::Log),
            "reciprocal" | "recip" => Ok(TransformKind::Reciprocal),
            other => Err(Error::Config(format!("unknown transform '{other}'"))),
        }
    }
}

/// Replaces every value by `F(value)`; times are unchanged and the unit is
/// annotated with the transform.
pub fn transform_series(ts: &TimeSeries, kind: TransformKind) -> Result<TimeSeries> {
    let mut points = Vec::with_capacity(ts.len());
    for (i, p) in ts.points.iter().enumerate() {
        let value = kind.apply(p.value).ok_or_else(|| {
            Error::Domain(format!(
                "{} transform undefined for value {} at point {i} (t = {})",
                kind, p.value, p.t
            ))
        })?;
        points.push(Point { t: p.t, value });
    }
    TimeSeries::new(points, ts.label.clone(), kind.annotate(&ts.unit))
}

/// Reads a delimited text table with a header row and selects two columns by
/// name.
///
/// Lines starting with `#` before the header are metadata (`key = value`);
/// `label` and `unit` keys are picked up when present. Parse errors report
/// the 1-based data row.
pub fn load_series<R: Read>(mut source: R, time_column: &str, value_column: &str, delimiter: u8) -> Result<TimeSeries> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let (meta, body) = split_metadata(&text);
    load_series_body(&meta, body, time_column, value_column, delimiter)
}

pub(crate) fn load_series_body(
    meta: &Metadata,
    body: &str,
    time_column: &str,
    value_column: &str,
    delimiter: u8,
) -> Result<TimeSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { row: 0, message: e.to_string() })?
        .clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::Config(format!(
                "missing column '{name}' (available: {})",
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let ti = find(time_column)?;
    let vi = find(value_column)?;

    let mut points = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).ok_or_else(|| Error::Parse {
                row,
                message: format!("missing cell for column '{name}'"),
            })?;
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value '{raw}' in column '{name}'"),
            })
        };
        let t = cell(ti, time_column)?;
        let value = cell(vi, value_column)?;
        points.push(Point { t, value });
    }
    let label = meta.get("label").unwrap_or(value_column).to_string();
    let unit = meta.get("unit").unwrap_or("").to_string();
    TimeSeries::new(points, label, unit)
}
