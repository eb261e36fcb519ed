//! From rates or fitted laws to trajectories: discrete reconstruction,
//! analytic integration of polynomial rate laws, and projection of catalog
//! models with their features.

use std::fmt;

use crate::error::{Error, Result};
use crate::fitting::PolyFit;
use crate::models::{Features, FeatureKind, Model, SINGULARITY_GUARD};
use crate::rates::RateSeries;
use crate::timeseries::{Point, TimeSeries};

/// Default relative spread below which scenarios are reported as
/// indistinguishable.
pub const INDISTINGUISHABLE_THRESHOLD: f64 = 0.05;

fn same_time(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Rebuilds sizes from rates by the inverse of the direct-rate rule:
/// forward `S_{i+1} = S_i (1 + R_{i+1} dt)`, backward
/// `S_i = S_{i+1} / (1 + R_{i+1} dt)`.
///
/// The grid is the rate series' origin followed by its rate times. When the
/// series has no origin and `t0` precedes the first rate time, `t0` serves
/// as the origin.
pub fn integrate_discrete(rs: &RateSeries, anchor: (f64, f64)) -> Result<TimeSeries> {
    let (t0, s0) = anchor;
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::Domain(format!("anchor size must be positive and finite, got {s0}")));
    }
    let pts = rs.points();
    let origin = match rs.origin {
        Some(o) => Some(o),
        None if t0 < pts[0].t && !same_time(t0, pts[0].t) => Some(t0),
        None => None,
    };
    let mut grid: Vec<f64> = origin.into_iter().collect();
    grid.extend(pts.iter().map(|p| p.t));
    // rate k (into grid[j]) belongs to the interval ending at grid[j]
    let offset = grid.len() - pts.len();

    let k = grid.iter().position(|&t| same_time(t, t0)).ok_or_else(|| {
        Error::Domain(format!(
            "anchor time {t0} is not a reference time of the rate series [{}, {}]",
            grid[0],
            grid[grid.len() - 1]
        ))
    })?;

    let factor = |j: usize| -> Result<f64> {
        let p = pts[j - offset];
        let f = 1.0 + p.rate * (grid[j] - grid[j - 1]);
        if f <= 0.0 || !f.is_finite() {
            return Err(Error::Collapse { t: p.t, factor: f });
        }
        Ok(f)
    };

    let mut values = vec![0.0; grid.len()];
    values[k] = s0;
    for j in k + 1..grid.len() {
        values[j] = values[j - 1] * factor(j)?;
    }
    for j in (offset.max(1)..=k).rev() {
        values[j - 1] = values[j] / factor(j)?;
    }
    let points = grid
        .iter()
        .zip(&values)
        .map(|(&t, &value)| Point { t, value })
        .collect();
    TimeSeries::new(points, rs.label.clone(), rs.unit.clone())
}

/// `S(t) = s0 exp(P(t) - P(t0))` with `P` the exact antiderivative of the
/// rate polynomial. Refuses any time outside the polynomial's fitted range.
pub fn integrate_rate_function(p: &PolyFit, anchor: (f64, f64), grid: &[f64]) -> Result<TimeSeries> {
    let (t0, s0) = anchor;
    if !(s0 > 0.0) || !s0.is_finite() {
        return Err(Error::Domain(format!("anchor size must be positive and finite, got {s0}")));
    }
    let (lo, hi) = p.domain;
    for &t in std::iter::once(&t0).chain(grid) {
        if !p.contains(t) {
            return Err(Error::RangeRefusal { t, lo, hi });
        }
    }
    let ln_s0 = s0.ln();
    let points = grid
        .iter()
        .map(|&t| Point {
            t,
            value: (ln_s0 + p.integral(t0, t)).exp(),
        })
        .collect();
    TimeSeries::new(points, "integrated rate law", "")
}

/// A normalized model evaluated on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub series: TimeSeries,
    /// The normalized model.
    pub model: Model,
    pub features: Features,
    pub anchor: (f64, f64),
    pub warnings: Vec<String>,
}

/// Normalizes `m` at `anchor` (or uses its stored constant when `anchor` is
/// `None`) and evaluates it over `grid`. A grid running into a forward
/// singularity is truncated with a warning.
pub fn project(m: &Model, anchor: Option<(f64, f64)>, grid: &[f64]) -> Result<Projection> {
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::Validation("grid times must be finite".into()));
    }
    let model = match anchor {
        Some((t0, s0)) => m.normalize(t0, s0)?,
        None if m.is_normalized() => m.clone(),
        None => {
            return Err(Error::NotNormalized(format!(
                "{} model has no constant C; supply an anchor",
                m.kind
            )))
        }
    };
    let features = model.features()?;
    let mut warnings = Vec::new();
    let mut kept: Vec<f64> = grid.to_vec();
    if let Some(ts) = model.forward_singularity() {
        kept.retain(|&t| t < ts - SINGULARITY_GUARD);
        let dropped = grid.len() - kept.len();
        if dropped > 0 {
            warnings.push(format!(
                "grid truncated at the singularity t* = {ts}: {dropped} of {} points dropped",
                grid.len()
            ));
        }
        if kept.len() < 2 {
            return Err(Error::Singularity {
                t_star: ts,
                message: format!("only {} grid points precede the singularity", kept.len()),
            });
        }
    }
    let mut points = Vec::with_capacity(kept.len());
    for &t in &kept {
        let value = model.trajectory_at(t)?;
        if !value.is_finite() || value == 0.0 {
            return Err(Error::Domain(format!(
                "S({t}) = {value} is outside the floating-point range"
            )));
        }
        points.push(Point { t, value });
    }
    let anchor = match anchor {
        Some(a) => a,
        None => (points[0].t, points[0].value),
    };
    let series = TimeSeries::new(points, format!("{} projection", model.kind), model.unit.clone())?;
    Ok(Projection {
        series,
        model,
        features,
        anchor,
        warnings,
    })
}

/// One scenario column of a [`ScenarioReport`].
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: Model,
    pub anchor: (f64, f64),
    /// Projected size at each report year; `None` where undefined.
    pub values: Vec<Option<f64>>,
    pub features: Features,
}

/// One report year across scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct YearRow {
    pub t: f64,
    /// `(max - min) / max` over the scenarios defined at `t`.
    pub relative_difference: Option<f64>,
    pub indistinguishable: Option<bool>,
}

/// Scenario values at report years with a feature summary per scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub years: Vec<f64>,
    pub scenarios: Vec<Scenario>,
    pub rows: Vec<YearRow>,
    pub threshold: f64,
    pub unit: String,
}

/// Tabulates projections at `report_years`. With two or more scenarios each
/// year is flagged indistinguishable when the relative spread is below
/// `threshold`.
pub fn compare_scenarios(projections: &[Projection], report_years: &[f64], threshold: f64) -> Result<ScenarioReport> {
    if projections.is_empty() {
        return Err(Error::Validation("no scenarios to compare".into()));
    }
    let unit = projections[0].model.unit.clone();
    for p in projections {
        if p.model.unit != unit {
            return Err(Error::Unit(format!(
                "scenario units differ: '{}' vs '{}'",
                unit, p.model.unit
            )));
        }
    }
    let scenarios: Vec<Scenario> = projections
        .iter()
        .map(|p| Scenario {
            name: p.series.label.clone(),
            model: p.model.clone(),
            anchor: p.anchor,
            values: report_years.iter().map(|&t| p.model.trajectory_at(t).ok()).collect(),
            features: p.features.clone(),
        })
        .collect();
    let rows = report_years
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let vals: Vec<f64> = scenarios.iter().filter_map(|s| s.values[i]).collect();
            if scenarios.len() < 2 || vals.len() < 2 {
                return YearRow {
                    t,
                    relative_difference: None,
                    indistinguishable: None,
                };
            }
            let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            let rel = (max - min) / max.abs();
            YearRow {
                t,
                relative_difference: Some(rel),
                indistinguishable: Some(rel < threshold),
            }
        })
        .collect();
    Ok(ScenarioReport {
        years: report_years.to_vec(),
        scenarios,
        rows,
        threshold,
        unit,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or("-".to_string(), |x| format!("{x:.6e}"))
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.scenarios.iter().enumerate() {
            writeln!(
                f,
                "[{}] {}: {} anchor ({}, {:e})",
                i + 1,
                s.name,
                s.model,
                s.anchor.0,
                s.anchor.1
            )?;
        }
        write!(f, "{:>10}", "year")?;
        for i in 0..self.scenarios.len() {
            write!(f, " {:>14}", format!("[{}]", i + 1))?;
        }
        if self.scenarios.len() > 1 {
            write!(f, " {:>10} flag", "rel.diff")?;
        }
        writeln!(f)?;
        for (i, row) in self.rows.iter().enumerate() {
            write!(f, "{:>10}", row.t)?;
            for s in &self.scenarios {
                write!(f, " {:>14}", fmt_opt(s.values[i]))?;
            }
            if let (Some(rel), Some(same)) = (row.relative_difference, row.indistinguishable) {
                let flag = if same { "indistinguishable" } else { "distinguishable" };
                write!(f, " {:>9.2}% {flag}", 100.0 * rel)?;
            }
            writeln!(f)?;
        }
        if self.scenarios.len() > 1 {
            writeln!(f, "threshold: {:.2}% relative", 100.0 * self.threshold)?;
        }
        writeln!(f, "features:")?;
        for (i, s) in self.scenarios.iter().enumerate() {
            write!(f, "  [{}] {}", i + 1, s.features.kind)?;
            match s.features.kind {
                FeatureKind::Maximum => write!(
                    f,
                    " t* = {} S* = {}",
                    fmt_opt(s.features.t_star),
                    fmt_opt(s.features.s_star)
                )?,
                FeatureKind::Asymptote => write!(f, " S* = {}", fmt_opt(s.features.s_star))?,
                FeatureKind::Singularity => write!(f, " t* = {}", fmt_opt(s.features.t_star))?,
                FeatureKind::None => {}
            }
            if let Some(note) = &s.features.note {
                write!(f, " ({note})")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}
