//! Model identification by testing which linearization makes the data a
//! straight line, and the low-rate instability flag.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::fitting::{fit_constant, fit_line, linearize, linearize_series, LineFit, LinearizationKind};
use crate::models::ModelKind;
use crate::rates::{compute_rates, RateMethod, RateSeries, SmoothingConfig};
use crate::timeseries::TimeSeries;

/// r-squared values closer than this are treated as tied.
const R2_RESOLUTION: f64 = 1e-10;

/// Default rate (1/year) below which recent growth is flagged as unstable.
pub const DEFAULT_STABILITY_THRESHOLD: f64 = 0.014;

/// Number of trailing rate points averaged by [`stability_flag`].
pub const RECENT_WINDOW: usize = 5;

/// One tested linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    /// `CONST_R` for the constant-rate test, else the linearization name.
    pub test: String,
    pub kind: ModelKind,
    pub r_squared: f64,
    pub rms_residual: f64,
    pub n_points: usize,
    pub dropped_points: usize,
    pub intercept: f64,
    pub slope: f64,
}

impl Candidate {
    fn new(test: &str, kind: ModelKind, line: &LineFit) -> Self {
        Self {
            test: test.to_string(),
            kind,
            r_squared: line.r_squared,
            rms_residual: line.rms_residual,
            n_points: line.n_points,
            dropped_points: line.dropped_points,
            intercept: line.intercept,
            slope: line.slope,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentificationReport {
    /// Best first.
    pub candidates: Vec<Candidate>,
    pub notes: Vec<String>,
}

impl IdentificationReport {
    pub fn winner(&self) -> &Candidate {
        &self.candidates[0]
    }
}

fn rank(a: &Candidate, b: &Candidate) -> Ordering {
    let q = |c: &Candidate| (c.r_squared / R2_RESOLUTION).round() as i64;
    q(b).cmp(&q(a))
        .then(a.dropped_points.cmp(&b.dropped_points))
        .then(a.kind.simplicity_rank().cmp(&b.kind.simplicity_rank()))
}

/// Computes rates, fits every rate linearization plus `1/S` against `t` on
/// the raw series, and ranks the candidates by r-squared, then fewer
/// dropped points, then simplest kind first.
///
/// The shifted-log test needs an auxiliary parameter and is not run here.
pub fn identify(ts: &TimeSeries, method: RateMethod, cfg: Option<&SmoothingConfig>) -> Result<IdentificationReport> {
    if ts.len() < 3 {
        return Err(Error::Size(format!(
            "identification needs at least 3 points, got {}",
            ts.len()
        )));
    }
    let default_cfg = SmoothingConfig::default();
    let rs = compute_rates(ts, method, cfg.unwrap_or(&default_cfg), None)?;
    let mut candidates = Vec::new();
    let mut notes = Vec::new();
    let skip = |test: &str, e: Error, notes: &mut Vec<String>| notes.push(format!("{test} skipped: {e}"));

    match fit_constant(&rs.rates()) {
        Ok(line) => candidates.push(Candidate::new("CONST_R", ModelKind::ExpConst, &line)),
        Err(e) => skip("CONST_R", e, &mut notes),
    }
    let tests = [
        LinearizationKind::RVsT,
        LinearizationKind::RVsS,
        LinearizationKind::RecipRVsT,
        LinearizationKind::LnRVsT,
    ];
    for kind in tests {
        let fitted = linearize(&rs, kind).and_then(|lin| {
            let mut line = fit_line(&lin.xs, &lin.ys)?;
            line.dropped_points = lin.dropped;
            let max_x = lin.xs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            Ok((line, max_x))
        });
        match fitted {
            Ok((line, max_x)) => {
                let mut model = kind.model_kind();
                // R = b S with no intercept is pure hyperbolic growth
                if kind == LinearizationKind::RVsS
                    && line.slope != 0.0
                    && line.intercept.abs() <= 1e-9 * line.slope.abs() * max_x
                {
                    model = ModelKind::Hyperbolic;
                    notes.push("R_VS_S intercept is negligible: read as HYPERBOLIC".into());
                }
                candidates.push(Candidate::new(kind.name(), model, &line));
            }
            Err(e) => skip(kind.name(), e, &mut notes),
        }
    }
    match linearize_series(ts).and_then(|lin| {
        let mut line = fit_line(&lin.xs, &lin.ys)?;
        line.dropped_points = lin.dropped;
        Ok(line)
    }) {
        Ok(line) => candidates.push(Candidate::new("RECIP_S_VS_T", ModelKind::Hyperbolic, &line)),
        Err(e) => skip("RECIP_S_VS_T", e, &mut notes),
    }
    if candidates.is_empty() {
        return Err(Error::DegenerateDesign("no linearization could be fitted".into()));
    }
    candidates.sort_by(rank);
    notes.push("shifted-log test not run: it requires the auxiliary parameter a".into());
    Ok(IdentificationReport { candidates, notes })
}

impl fmt::Display for IdentificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>4} {:<14} {:<18} {:>16} {:>12} {:>7} {:>7}",
            "rank", "test", "model", "r_squared", "rms", "points", "dropped"
        )?;
        for (i, c) in self.candidates.iter().enumerate() {
            writeln!(
                f,
                "{:>4} {:<14} {:<18} {:>16.12} {:>12.4e} {:>7} {:>7}",
                i + 1,
                c.test,
                c.kind.name(),
                c.r_squared,
                c.rms_residual,
                c.n_points,
                c.dropped_points
            )?;
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityStatus {
    Ok,
    LowRateUnstable,
}

impl fmt::Display for StabilityStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityStatus::Ok => "OK",
            StabilityStatus::LowRateUnstable => "LOW_RATE_UNSTABLE",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityFlag {
    pub status: StabilityStatus,
    pub threshold: f64,
    /// Mean of the last [`RECENT_WINDOW`] rates (fewer when unavailable).
    pub recent_rate: f64,
    pub points_used: usize,
}

impl fmt::Display for StabilityFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: recent rate {:.4}% (mean of last {} points) vs threshold {:.4}%",
            self.status,
            100.0 * self.recent_rate,
            self.points_used,
            100.0 * self.threshold
        )
    }
}

/// Flags growth whose recent mean rate has fallen below `threshold`.
pub fn stability_flag(rs: &RateSeries, threshold: f64) -> Result<StabilityFlag> {
    if rs.is_empty() {
        return Err(Error::Size("empty rate series".into()));
    }
    let rates = rs.rates();
    let n = rates.len().min(RECENT_WINDOW);
    let recent_rate = rates[rates.len() - n..].iter().sum::<f64>() / n as f64;
    let status = if recent_rate < threshold {
        StabilityStatus::LowRateUnstable
    } else {
        StabilityStatus::Ok
    };
    Ok(StabilityFlag {
        status,
        threshold,
        recent_rate,
        points_used: n,
    })
}
