//! Bundled case studies: published model parameters and the values they are
//! expected to reproduce.
//!
//! The parameters are kept in `data/cases.toml` and compiled into the
//! binary, so a reproduction needs no external files.

use std::fmt;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fitting::PolyFit;
use crate::forecast::{compare_scenarios, project, Projection, ScenarioReport, INDISTINGUISHABLE_THRESHOLD};
use crate::io::write_projection;
use crate::models::{Model, ModelKind, Params};

const CASES_TOML: &str = include_str!("../data/cases.toml");

#[derive(Debug, Clone, Deserialize)]
struct CaseFile {
    version: u32,
    case: Vec<CaseStudy>,
}

/// A published model with optional normalization.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub id: String,
    pub description: String,
    pub kind: ModelKind,
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default, rename = "C")]
    pub c: Option<f64>,
    #[serde(default)]
    pub anchor: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Quantity {
    Value,
    Rate,
    FeatureSize,
    FeatureTime,
    RateZeroTime,
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Quantity::Value => "S(t)",
            Quantity::Rate => "R(t)",
            Quantity::FeatureSize => "S*",
            Quantity::FeatureTime => "t*",
            Quantity::RateZeroTime => "t(R=0)",
        })
    }
}

/// A published value and the tolerance it is checked at.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub model: String,
    pub quantity: Quantity,
    #[serde(default)]
    pub t: Option<f64>,
    pub expected: f64,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub abs_tol: Option<f64>,
    #[serde(default)]
    pub range: Option<[f64; 2]>,
    #[serde(default)]
    pub note: Option<String>,
}

/// Published raw-basis polynomial rate law, reported for information.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolySpec {
    pub id: String,
    pub description: String,
    pub coefficients: Vec<f64>,
    pub domain: [f64; 2],
    pub sample_years: Vec<f64>,
    #[serde(default)]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseStudy {
    pub name: String,
    pub title: String,
    pub unit: String,
    pub report_years: Vec<f64>,
    /// `[start, stop, step]` for the projection files.
    pub grid: [f64; 3],
    /// Model ids tabulated side by side.
    #[serde(default)]
    pub compare: Vec<String>,
    #[serde(rename = "model")]
    pub models: Vec<ModelSpec>,
    #[serde(default, rename = "check")]
    pub checks: Vec<CheckSpec>,
    #[serde(default, rename = "polynomial")]
    pub polynomials: Vec<PolySpec>,
    #[serde(default)]
    pub notes: Vec<String>,
}

/// All bundled cases.
pub fn load_cases() -> Result<Vec<CaseStudy>> {
    let file: CaseFile = toml::from_str(CASES_TOML).map_err(|e| Error::Config(format!("bundled case data: {e}")))?;
    if file.version != 1 {
        return Err(Error::Config(format!("unsupported case data version {}", file.version)));
    }
    Ok(file.case)
}

pub fn case_names() -> Vec<String> {
    load_cases()
        .map(|cs| cs.into_iter().map(|c| c.name).collect())
        .unwrap_or_default()
}

pub fn find_case(name: &str) -> Result<CaseStudy> {
    let cases = load_cases()?;
    let names: Vec<String> = cases.iter().map(|c| c.name.clone()).collect();
    cases
        .into_iter()
        .find(|c| c.name == name)
        .ok_or_else(|| Error::Config(format!("unknown case '{name}'; valid cases: {}", names.join(", "))))
}

/// Evenly spaced times from `start` to `stop` inclusive.
pub fn grid_points(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::Config(format!("invalid grid {start}:{stop}:{step}")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| start + step * i as f64).collect())
}

impl CaseStudy {
    pub fn spec(&self, id: &str) -> Result<&ModelSpec> {
        self.models
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| Error::Config(format!("case '{}' has no model '{id}'", self.name)))
    }

    /// The model with its published constant, normalized at its anchor when
    /// one is given.
    pub fn model(&self, id: &str) -> Result<Model> {
        let spec = self.spec(id)?;
        let mut params = Params::new(spec.a, spec.b);
        if let Some(r) = spec.r {
            params = params.with_r(r);
        }
        if let Some(c) = spec.c {
            params = params.with_c(c);
        }
        let model = Model::new(spec.kind, params, 0.0, self.unit.clone())?;
        match spec.anchor {
            Some([t0, s0]) => model.normalize(t0, s0),
            None => Ok(model),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub spec: CheckSpec,
    pub computed: Option<f64>,
    pub error: Option<String>,
    pub pass: bool,
}

impl CheckResult {
    pub fn tolerance(&self) -> String {
        let s = &self.spec;
        match (s.range, s.rel_tol, s.abs_tol) {
            (Some([lo, hi]), _, _) => format!("in [{lo}, {hi}]"),
            (None, Some(r), _) => format!("rel {}%", 100.0 * r),
            (None, None, Some(a)) => format!("abs {a:e}"),
            _ => "exact".to_string(),
        }
    }
}

fn evaluate(case: &CaseStudy, check: &CheckSpec) -> Result<f64> {
    let m = case.model(&check.model)?;
    let need_t = || {
        check
            .t
            .ok_or_else(|| Error::Config(format!("check on '{}' needs a time t", check.model)))
    };
    let missing = |what: &str| Error::Domain(format!("{} model has no {what}", m.kind));
    match check.quantity {
        Quantity::Value => m.trajectory_at(need_t()?),
        Quantity::Rate => m.rate_at(need_t()?, None),
        Quantity::FeatureSize => m.features()?.s_star.ok_or_else(|| missing("feature size")),
        Quantity::FeatureTime => m.features()?.t_star.ok_or_else(|| missing("feature time")),
        Quantity::RateZeroTime => m.stationary_time().ok_or_else(|| missing("zero-rate time")),
    }
}

fn run_check(case: &CaseStudy, spec: &CheckSpec) -> CheckResult {
    match evaluate(case, spec) {
        Ok(c) => {
            let e = spec.expected;
            let pass = match (spec.range, spec.rel_tol, spec.abs_tol) {
                (Some([lo, hi]), _, _) => c >= lo && c <= hi,
                (None, Some(r), _) => ((c - e) / e).abs() <= r,
                (None, None, Some(a)) => (c - e).abs() <= a,
                _ => c == e,
            };
            CheckResult {
                spec: spec.clone(),
                computed: Some(c),
                error: None,
                pass,
            }
        }
        Err(err) => CheckResult {
            spec: spec.clone(),
            computed: None,
            error: Some(err.to_string()),
            pass: false,
        },
    }
}

/// Informational evaluation of a published polynomial rate law.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyReport {
    pub spec: PolySpec,
    /// `(t, R(t))` at the sample years.
    pub rates: Vec<(f64, f64)>,
}

/// Everything `reproduce` computes for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub case: CaseStudy,
    pub checks: Vec<CheckResult>,
    /// Projections of every normalized model over the case grid.
    pub projections: Vec<(String, Projection)>,
    pub scenarios: Option<ScenarioReport>,
    /// One line per model.
    pub features: Vec<String>,
    pub polynomials: Vec<PolyReport>,
}

impl CaseReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes `report.txt` and one projection table per normalized model
    /// into `dir/<case name>/`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        let out = dir.join(&self.case.name);
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("report.txt"), self.to_string())?;
        for (id, p) in &self.projections {
            std::fs::write(out.join(format!("{id}.csv")), write_projection(p))?;
        }
        Ok(())
    }
}

fn feature_line(id: &str, m: &Model) -> String {
    match m.features() {
        Ok(f) => {
            let mut line = format!("{id}: {}", f.kind);
            if let Some(t) = f.t_star {
                line.push_str(&format!(" t* = {t:.4}"));
            }
            if let Some(s) = f.s_star {
                line.push_str(&format!(" S* = {s:.6e}"));
            }
            if let Some(r) = f.asymptotic_rate {
                line.push_str(&format!(" asymptotic rate = {r:.6e}"));
            }
            line
        }
        Err(Error::NotNormalized(_)) => {
            let mut line = format!("{id}: not normalized (no published constant or anchor)");
            if let Some(t) = m.stationary_time() {
                let turn = if m.params.b < 0.0 { "maximum" } else { "minimum" };
                line.push_str(&format!("; rate crosses zero at t = {t:.4} ({turn} of S)"));
            }
            line
        }
        Err(e) => format!("{id}: {e}"),
    }
}

/// Evaluates every check, projection and scenario table of `case`.
pub fn reproduce(case: &CaseStudy) -> Result<CaseReport> {
    let checks = case.checks.iter().map(|c| run_check(case, c)).collect();
    let [start, stop, step] = case.grid;
    let grid = grid_points(start, stop, step)?;
    let mut projections = Vec::new();
    let mut features = Vec::new();
    for spec in &case.models {
        let m = case.model(&spec.id)?;
        features.push(feature_line(&spec.id, &m));
        if m.is_normalized() {
            let mut p = project(&m, spec.anchor.map(|[t, s]| (t, s)), &grid)?;
            p.series.label = spec.id.clone();
            projections.push((spec.id.clone(), p));
        }
    }
    let scenarios = if case.compare.is_empty() {
        None
    } else {
        let chosen: Vec<Projection> = case
            .compare
            .iter()
            .map(|id| {
                projections
                    .iter()
                    .find(|(pid, _)| pid == id)
                    .map(|(_, p)| p.clone())
                    .ok_or_else(|| Error::Config(format!("compared model '{id}' has no projection")))
            })
            .collect::<Result<_>>()?;
        Some(compare_scenarios(&chosen, &case.report_years, INDISTINGUISHABLE_THRESHOLD)?)
    };
    let polynomials = case
        .polynomials
        .iter()
        .map(|spec| {
            let p = PolyFit::from_raw(spec.coefficients.clone(), (spec.domain[0], spec.domain[1]))?;
            let rates = spec.sample_years.iter().map(|&t| (t, p.eval(t))).collect();
            Ok(PolyReport { spec: spec.clone(), rates })
        })
        .collect::<Result<_>>()?;
    Ok(CaseReport {
        case: case.clone(),
        checks,
        projections,
        scenarios,
        features,
        polynomials,
    })
}

impl fmt::Display for CaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.case;
        writeln!(f, "case: {} ({})", c.name, c.title)?;
        writeln!(f, "unit: {}", c.unit)?;
        writeln!(f)?;
        writeln!(f, "models:")?;
        for m in &c.models {
            write!(f, "  {}: {} a = {:e}, b = {:e}", m.id, m.kind, m.a, m.b)?;
            if let Some(cc) = m.c {
                write!(f, ", C = {cc:e}")?;
            }
            if let Some([t, s]) = m.anchor {
                write!(f, ", anchor S({t}) = {s:e}")?;
            }
            writeln!(f)?;
            writeln!(f, "      {}", m.description)?;
        }
        if let Some(s) = &self.scenarios {
            writeln!(f)?;
            writeln!(f, "scenarios:")?;
            write!(f, "{s}")?;
        }
        writeln!(f)?;
        writeln!(f, "features:")?;
        for line in &self.features {
            writeln!(f, "  {line}")?;
        }
        writeln!(f)?;
        writeln!(f, "checks:")?;
        let mut notes = Vec::new();
        for r in &self.checks {
            let s = &r.spec;
            let at = s.t.map_or(String::new(), |t| format!(" at {t}"));
            let computed = match (r.computed, &r.error) {
                (Some(v), _) => format!("{v:.6e}"),
                (None, Some(e)) => format!("error: {e}"),
                (None, None) => "-".into(),
            };
            let mark = if s.note.is_some() {
                notes.push(s.note.clone().unwrap_or_default());
                format!(" [{}]", notes.len())
            } else {
                String::new()
            };
            writeln!(
                f,
                "  {} {}{} {}: computed {} published {:e} ({}){}",
                if r.pass { "PASS" } else { "FAIL" },
                s.model,
                at,
                s.quantity,
                computed,
                s.expected,
                r.tolerance(),
                mark
            )?;
        }
        notes.extend(c.notes.iter().cloned());
        for p in &self.polynomials {
            writeln!(f)?;
            writeln!(f, "polynomial {} ({}), information only:", p.spec.id, p.spec.description)?;
            for (t, r) in &p.rates {
                writeln!(f, "  R({t}) = {r:.6e}")?;
            }
            if let Some(n) = &p.spec.note {
                notes.push(n.clone());
                writeln!(f, "  see note [{}]", notes.len())?;
            }
        }
        if !notes.is_empty() {
            writeln!(f)?;
            writeln!(f, "notes:")?;
            for (i, n) in notes.iter().enumerate() {
                writeln!(f, "  [{}] {n}", i + 1)?;
            }
        }
        writeln!(f)?;
        let passed = self.checks.iter().filter(|r| r.pass).count();
        writeln!(f, "result: {passed}/{} checks passed", self.checks.len())
    }
}
