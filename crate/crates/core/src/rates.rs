//! Empirical growth rates: finite differences between consecutive
//! observations, or gradients taken from local least-squares polynomials.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::lstsq_polynomial;
use crate::timeseries::{transform_series, TimeSeries, TransformKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RateMethod {
    Direct,
    Refined,
}

impl fmt::Display for RateMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RateMethod::Direct => "DIRECT",
            RateMethod::Refined => "REFINED",
        })
    }
}

impl std::str::FromStr for RateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(RateMethod::Direct),
            "refined" => Ok(RateMethod::Refined),
            other => Err(Error::Config(format!("unknown rate method '{other}'"))),
        }
    }
}

/// Growth rate `rate` (1/year) at time `t`, with the series value `size`
/// at that time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub t: f64,
    pub rate: f64,
    pub size: f64,
}

/// Ordered growth-rate points.
///
/// When `transform` is set the rates are those of `F(S)` and `size` carries
/// `F(S)`; `unit` always names the unit of the untransformed `S`.
/// `origin` is the start of the first differencing interval for direct
/// rates, which discrete integration needs to take the first step.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSeries {
    points: Vec<RatePoint>,
    pub label: String,
    pub unit: String,
    pub method: RateMethod,
    pub transform: Option<TransformKind>,
    pub origin: Option<f64>,
}

impl RateSeries {
    pub fn new(
        points: Vec<RatePoint>,
        label: impl Into<String>,
        unit: impl Into<String>,
        method: RateMethod,
        transform: Option<TransformKind>,
        origin: Option<f64>,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Validation("a rate series needs at least one point".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.t.is_finite() || !p.rate.is_finite() || !p.size.is_finite() {
                return Err(Error::Validation(format!("rate point {i} (t = {}) is not finite", p.t)));
            }
        }
        if let Some(w) = points.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::Validation(format!(
                "rate times must be strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        if let Some(o) = origin {
            if !(o < points[0].t) {
                return Err(Error::Validation(format!(
                    "origin {o} must precede the first rate time {}",
                    points[0].t
                )));
            }
        }
        Ok(Self {
            points,
            label: label.into(),
            unit: unit.into(),
            method,
            transform,
            origin,
        })
    }

    /// A direct-method rate series without transform or origin.
    pub fn from_points(points: Vec<RatePoint>) -> Result<Self> {
        Self::new(points, "rates", "", RateMethod::Direct, None, None)
    }

    pub fn points(&self) -> &[RatePoint] {
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

    pub fn rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate).collect()
    }

    pub fn sizes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.size).collect()
    }

    /// Points with `t1 <= t <= t2`.
    pub fn restricted(&self, t1: f64, t2: f64) -> Result<Self> {
        let first = self.points.iter().position(|p| p.t >= t1 && p.t <= t2);
        let points: Vec<RatePoint> = self.points.iter().copied().filter(|p| p.t >= t1 && p.t <= t2).collect();
        let Some(first) = first else {
            return Err(Error::Size(format!("no rate points in range [{t1}, {t2}]")));
        };
        // the first kept interval still starts at the preceding reference time
        let origin = match (self.method, first) {
            (RateMethod::Direct, 0) => self.origin,
            (RateMethod::Direct, k) => Some(self.points[k - 1].t),
            (RateMethod::Refined, _) => None,
        };
        Self::new(points, self.label.clone(), self.unit.clone(), self.method, self.transform, origin)
    }
}

/// Window and degree of the local polynomial used for refined gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SmoothingConfig {
    window: usize,
    degree: usize,
}

impl SmoothingConfig {
    pub fn new(window: usize, degree: usize) -> Result<Self> {
        if window < 3 || window % 2 == 0 {
            return Err(Error::Config(format!("window must be an odd point count >= 3, got {window}")));
        }
        if degree < 1 || degree >= window {
            return Err(Error::Config(format!(
                "degree must satisfy 1 <= degree < window ({window}), got {degree}"
            )));
        }
        Ok(Self { window, degree })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn degree(&self) -> usize {
        self.degree
    }
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self { window: 7, degree: 3 }
    }
}

/// `R_{i+1} = (S_{i+1} - S_i) / (S_i (t_{i+1} - t_i))`, attributed to
/// `t_{i+1}` with size `S_{i+1}`.
pub fn direct_rates(ts: &TimeSeries) -> Result<RateSeries> {
    let pts = ts.points();
    let mut out = Vec::with_capacity(pts.len() - 1);
    for (i, w) in pts.windows(2).enumerate() {
        let (p, q) = (w[0], w[1]);
        if p.value == 0.0 {
            return Err(Error::Division { index: i, t: p.t });
        }
        let rate = (q.value - p.value) / (p.value * (q.t - p.t));
        if !rate.is_finite() {
            return Err(Error::Division { index: i, t: p.t });
        }
        out.push(RatePoint {
            t: q.t,
            rate,
            size: q.value,
        });
    }
    RateSeries::new(out, ts.label.clone(), ts.unit.clone(), RateMethod::Direct, None, Some(pts[0].t))
}

/// Rates from smoothed gradients: at every point the gradient is the slope
/// of a least-squares polynomial of `cfg.degree` fitted over `cfg.window`
/// points centred on it (shifted one-sidedly near the ends), divided by the
/// observed value.
pub fn refined_rates(ts: &TimeSeries, cfg: &SmoothingConfig) -> Result<RateSeries> {
    let pts = ts.points();
    let n = pts.len();
    let w = cfg.window();
    if n < w {
        return Err(Error::Size(format!("refined rates need at least {w} points, got {n}")));
    }
    let half = w / 2;
    let mut out = Vec::with_capacity(n);
    for (i, p) in pts.iter().enumerate() {
        if p.value == 0.0 {
            return Err(Error::Division { index: i, t: p.t });
        }
        let lo = i.saturating_sub(half).min(n - w);
        let window = &pts[lo..lo + w];
        let scale = window
            .iter()
            .map(|q| (q.t - p.t).abs())
            .fold(0.0, f64::max);
        let us: Vec<f64> = window.iter().map(|q| (q.t - p.t) / scale).collect();
        let ys: Vec<f64> = window.iter().map(|q| q.value).collect();
        let coeffs = lstsq_polynomial(&us, &ys, cfg.degree()).ok_or_else(|| {
            Error::DegenerateDesign(format!("local polynomial fit failed at point {i} (t = {})", p.t))
        })?;
        let gradient = coeffs[1] / scale;
        out.push(RatePoint {
            t: p.t,
            rate: gradient / p.value,
            size: p.value,
        });
    }
    RateSeries::new(out, ts.label.clone(), ts.unit.clone(), RateMethod::Refined, None, None)
}

/// Rates of `F(S)`; the size column carries `F(S)`.
pub fn rate_of_transform(
    ts: &TimeSeries,
    kind: TransformKind,
    method: RateMethod,
    cfg: Option<&SmoothingConfig>,
) -> Result<RateSeries> {
    let transformed = transform_series(ts, kind)?;
    let mut rs = match method {
        RateMethod::Direct => direct_rates(&transformed)?,
        RateMethod::Refined => refined_rates(&transformed, cfg.unwrap_or(&SmoothingConfig::default()))?,
    };
    rs.transform = Some(kind);
    rs.unit = ts.unit.clone();
    Ok(rs)
}

/// Dispatches on `method`, with an optional transform.
pub fn compute_rates(
    ts: &TimeSeries,
    method: RateMethod,
    cfg: &SmoothingConfig,
    transform: Option<TransformKind>,
) -> Result<RateSeries> {
    match (transform, method) {
        (Some(kind), _) => rate_of_transform(ts, kind, method, Some(cfg)),
        (None, RateMethod::Direct) => direct_rates(ts),
        (None, RateMethod::Refined) => refined_rates(ts, cfg),
    }
}
