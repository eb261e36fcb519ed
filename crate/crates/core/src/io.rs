//! Plain-text file formats: delimited tables with `# key = value` metadata
//! lines above the header, and flat TOML for models and fit reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a value
//! read back is bit-identical to the one written. Nothing time-dependent is
//! ever written.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::FitReport;
use crate::forecast::Projection;
use crate::models::{Model, ModelKind, NormConst, Params};
use crate::rates::{RateMethod, RatePoint, RateSeries};
use crate::timeseries::{load_series_body, TimeSeries};

/// Ordered `key = value` pairs from the metadata block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new() -> Self {
        Self::default()
    }

    /// Last value set for `key`.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.push((key.into(), value.into()));
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    fn write_to(&self, out: &mut String) {
        for (k, v) in &self.entries {
            // one line per entry; embedded newlines would end the block
            let v = v.replace('\n', " ");
            if v.is_empty() {
                let _ = writeln!(out, "# {k} =");
            } else {
                let _ = writeln!(out, "# {k} = {v}");
            }
        }
    }
}

/// Splits leading `#` lines (and blank lines) off a table.
pub fn split_metadata(text: &str) -> (Metadata, &str) {
    let mut meta = Metadata::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if let Some(body) = trimmed.strip_prefix('#') {
            if let Some((k, v)) = body.split_once('=') {
                meta.push(k.trim(), v.trim());
            }
        } else if !trimmed.is_empty() {
            break;
        }
        offset += line.len();
    }
    (meta, &text[offset..])
}

fn parse_meta_f64(meta: &Metadata, key: &str) -> Result<Option<f64>> {
    match meta.get(key) {
        None | Some("") => Ok(None),
        Some(v) => v
            .parse::<f64>()
            .map(Some)
            .map_err(|_| Error::Parse { row: 0, message: format!("metadata '{key}' is not a number: '{v}'") }),
    }
}

/// Parses a series table; `label` and `unit` metadata are picked up.
pub fn read_series(text: &str, time_column: &str, value_column: &str, delimiter: u8) -> Result<TimeSeries> {
    let (meta, body) = split_metadata(text);
    load_series_body(&meta, body, time_column, value_column, delimiter)
}

pub fn write_series(ts: &TimeSeries, extra: &Metadata) -> String {
    let mut meta = Metadata::new();
    meta.push("label", ts.label.clone());
    meta.push("unit", ts.unit.clone());
    let mut out = String::new();
    meta.write_to(&mut out);
    extra.write_to(&mut out);
    out.push_str("t,value\n");
    for p in ts.points() {
        let _ = writeln!(out, "{},{}", p.t, p.value);
    }
    out
}

/// Rate table `t,rate,size` with method, origin and transform in the
/// metadata block.
pub fn write_rates(rs: &RateSeries) -> String {
    let mut meta = Metadata::new();
    meta.push("label", rs.label.clone());
    meta.push("unit", rs.unit.clone());
    meta.push("method", rs.method.to_string());
    meta.push("transform", rs.transform.map_or("none".to_string(), |t| t.to_string()));
    if let Some(o) = rs.origin {
        meta.push("origin", o.to_string());
    }
    let mut out = String::new();
    meta.write_to(&mut out);
    out.push_str("t,rate,size\n");
    for p in rs.points() {
        let _ = writeln!(out, "{},{},{}", p.t, p.rate, p.size);
    }
    out
}

/// True when the table header has a `rate` column.
pub fn looks_like_rates(text: &str, delimiter: u8) -> bool {
    let (_, body) = split_metadata(text);
    let header = body.lines().next().unwrap_or("");
    header.split(delimiter as char).any(|h| h.trim() == "rate")
}

pub fn read_rates(text: &str, delimiter: u8) -> Result<RateSeries> {
    let (meta, body) = split_metadata(text);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_reader(body.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse { row: 0, message: e.to_string() })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("rate table is missing column '{name}'")))
    };
    let (ti, ri, si) = (col("t")?, col("rate")?, col("size")?);
    let mut points = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>().map_err(|_| Error::Parse {
                row,
                message: format!("non-numeric value '{raw}' in column '{name}'"),
            })
        };
        points.push(RatePoint {
            t: cell(ti, "t")?,
            rate: cell(ri, "rate")?,
            size: cell(si, "size")?,
        });
    }
    let method = match meta.get("method") {
        Some(m) => m.parse::<RateMethod>()?,
        None => RateMethod::Direct,
    };
    let transform = match meta.get("transform") {
        None | Some("none") | Some("") => None,
        Some(t) => Some(t.parse()?),
    };
    RateSeries::new(
        points,
        meta.get("label").unwrap_or("rates"),
        meta.get("unit").unwrap_or(""),
        method,
        transform,
        parse_meta_f64(&meta, "origin")?,
    )
}

/// Projection table `t,value` with model, anchor, features and warnings in
/// the metadata block.
pub fn write_projection(p: &Projection) -> String {
    let mut meta = Metadata::new();
    meta.push("label", p.series.label.clone());
    meta.push("unit", p.series.unit.clone());
    meta.push("model", p.model.to_string());
    meta.push("anchor", format!("{}:{}", p.anchor.0, p.anchor.1));
    meta.push("feature", p.features.kind.to_string());
    if let Some(t) = p.features.t_star {
        meta.push("feature_t", t.to_string());
    }
    if let Some(s) = p.features.s_star {
        meta.push("feature_s", s.to_string());
    }
    if let Some(r) = p.features.asymptotic_rate {
        meta.push("asymptotic_rate", r.to_string());
    }
    if let Some(n) = &p.features.note {
        meta.push("feature_note", n.clone());
    }
    for w in &p.warnings {
        meta.push("warning", w.clone());
    }
    let mut out = String::new();
    meta.write_to(&mut out);
    out.push_str("t,value\n");
    for pt in p.series.points() {
        let _ = writeln!(out, "{},{}", pt.t, pt.value);
    }
    out
}

/// On-disk model: flat keys. `C` is written directly when it fits in an
/// `f64`, otherwise as `ln_C` with `C_sign`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
struct ModelFile {
    kind: ModelKind,
    a: f64,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    C: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ln_C: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    C_sign: Option<f64>,
    #[serde(default)]
    t_ref: f64,
    #[serde(default)]
    unit: String,
}

pub fn write_model(m: &Model) -> String {
    let (mut c, mut ln_c, mut c_sign) = (None, None, None);
    if let Some(k) = m.params.c {
        if k.is_representable() {
            c = Some(k.value());
        } else {
            ln_c = Some(k.ln_abs());
            c_sign = Some(k.sign());
        }
    }
    let file = ModelFile {
        kind: m.kind,
        a: m.params.a,
        b: m.params.b,
        r: m.params.r,
        C: c,
        ln_C: ln_c,
        C_sign: c_sign,
        t_ref: m.t_ref,
        unit: m.unit.clone(),
    };
    toml::to_string(&file).expect("model file serializes")
}

pub fn read_model(text: &str) -> Result<Model> {
    let file: ModelFile = toml::from_str(text).map_err(|e| Error::Config(format!("invalid model file: {e}")))?;
    let mut params = Params::new(file.a, file.b);
    params.r = file.r;
    params.c = match (file.C, file.ln_C) {
        (Some(_), Some(_)) => return Err(Error::Config("model file sets both C and ln_C".into())),
        (Some(c), None) => Some(NormConst::new(c)),
        (None, Some(l)) => Some(NormConst::from_log(file.C_sign.unwrap_or(1.0), l)),
        (None, None) => None,
    };
    Model::new(file.kind, params, file.t_ref, file.unit)
}

#[derive(Serialize)]
struct FitReportFile<'a> {
    linearization: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    aux_a: Option<f64>,
    intercept: f64,
    slope: f64,
    r_squared: f64,
    rms_residual: f64,
    n_points: usize,
    dropped_points: usize,
    warnings: &'a [String],
    notes: &'a [String],
    model: ModelFile,
}

pub fn write_fit_report(r: &FitReport) -> String {
    let aux_a = match r.linearization {
        crate::fitting::LinearizationKind::ShiftedLnVsT { aux_a } => Some(aux_a),
        _ => None,
    };
    let model: ModelFile = toml::from_str(&write_model(&r.model)).expect("model file round-trips");
    let file = FitReportFile {
        linearization: r.linearization.name(),
        aux_a,
        intercept: r.line.intercept,
        slope: r.line.slope,
        r_squared: r.line.r_squared,
        rms_residual: r.line.rms_residual,
        n_points: r.line.n_points,
        dropped_points: r.line.dropped_points,
        warnings: &r.warnings,
        notes: &r.notes,
        model,
    };
    toml::to_string(&file).expect("fit report serializes")
}
