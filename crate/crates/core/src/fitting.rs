//! Least squares on linearized coordinates, and the dispatch that turns a
//! rate series into a fitted model.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::models::{Model, ModelKind, Params};
use crate::rates::RateSeries;
use crate::timeseries::{TimeSeries, TransformKind};

/// Below this relative spread a response is treated as constant to working
/// precision, and any line through it counts as a perfect fit.
const FLAT_SPREAD: f64 = 1e-12;

/// Ordinary least-squares line `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    pub rms_residual: f64,
    pub r_squared: f64,
    pub n_points: usize,
    pub dropped_points: usize,
}

fn is_flat(ys: &[f64], ss_tot: f64) -> bool {
    let peak = ys.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    ss_tot == 0.0 || (ss_tot / ys.len() as f64).sqrt() <= FLAT_SPREAD * peak
}

fn r_squared(ys: &[f64], ss_res: f64, ss_tot: f64) -> f64 {
    if is_flat(ys, ss_tot) {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    }
}

/// Fits a line by the centred normal equations.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::DegenerateDesign(format!("a line needs at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let x_mean = xs.iter().sum::<f64>() / nf;
    let y_mean = ys.iter().sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut ss_tot) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - x_mean;
        let dy = y - y_mean;
        sxx += dx * dx;
        sxy += dx * dy;
        ss_tot += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateDesign("all x values are identical".into()));
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    Ok(LineFit {
        intercept,
        slope,
        rms_residual: (ss_res / nf).sqrt(),
        r_squared: r_squared(ys, ss_res, ss_tot),
        n_points: n,
        dropped_points: 0,
    })
}

/// Fits `y = const`; the line has zero slope and its `r_squared` is 1 only
/// when the data are flat.
pub fn fit_constant(ys: &[f64]) -> Result<LineFit> {
    let n = ys.len();
    if n == 0 {
        return Err(Error::DegenerateDesign("no points".into()));
    }
    let nf = n as f64;
    let mean = ys.iter().sum::<f64>() / nf;
    let ss: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    Ok(LineFit {
        intercept: mean,
        slope: 0.0,
        rms_residual: (ss / nf).sqrt(),
        r_squared: r_squared(ys, ss, ss),
        n_points: n,
        dropped_points: 0,
    })
}

/// Least-squares polynomial coefficients (ascending powers of `us`) via a
/// QR factorisation. `None` when the design is rank deficient.
pub(crate) fn lstsq_polynomial(us: &[f64], ys: &[f64], degree: usize) -> Option<Vec<f64>> {
    let m = degree + 1;
    if us.len() < m {
        return None;
    }
    let design = DMatrix::from_fn(us.len(), m, |i, j| us[i].powi(j as i32));
    let rhs = DVector::from_column_slice(ys);
    let qr = design.qr();
    let r = qr.r();
    let diag_max = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if (0..m).any(|i| r[(i, i)].abs() <= 1e-13 * diag_max) {
        return None;
    }
    let qty = qr.q().transpose() * rhs;
    r.solve_upper_triangular(&qty).map(|c| c.iter().copied().collect())
}

/// Polynomial in ascending powers of `x`, valid on `domain`.
///
/// Internally the polynomial is held in the scaled variable
/// `u = (x - center) / half_width` that maps the domain onto `[-1, 1]`; all
/// evaluation and integration use that form, since raw calendar-year powers
/// up to `x^7` cancel catastrophically.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyFit {
    pub coefficients: Vec<f64>,
    pub degree: usize,
    pub rms_residual: f64,
    pub domain: (f64, f64),
    pub warnings: Vec<String>,
    center: f64,
    half_width: f64,
    local: Vec<f64>,
}

impl PolyFit {
    /// Wraps published raw-basis coefficients `a_0..a_d` valid on `domain`.
    pub fn from_raw(coefficients: Vec<f64>, domain: (f64, f64)) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(Error::Validation("a rate polynomial needs degree >= 1".into()));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("polynomial coefficients must be finite".into()));
        }
        let (lo, hi) = domain;
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Validation(format!("invalid polynomial domain [{lo}, {hi}]")));
        }
        let center = 0.5 * (lo + hi);
        let half_width = 0.5 * (hi - lo);
        // Taylor shift to the centre by repeated synthetic division, then scale
        let mut shifted = coefficients.clone();
        let d = shifted.len() - 1;
        for i in 0..d {
            for j in (i..d).rev() {
                shifted[j] += center * shifted[j + 1];
            }
        }
        let local = shifted
            .iter()
            .enumerate()
            .map(|(k, c)| c * half_width.powi(k as i32))
            .collect();
        Ok(Self {
            degree: d,
            coefficients,
            rms_residual: 0.0,
            domain,
            warnings: Vec::new(),
            center,
            half_width,
            local,
        })
    }

    fn from_local(local: Vec<f64>, center: f64, half_width: f64, domain: (f64, f64)) -> Self {
        let d = local.len() - 1;
        let mut raw = vec![0.0; d + 1];
        // sum_k c_k h^-k (x - m)^k expanded binomially
        for (k, &c) in local.iter().enumerate() {
            let ck = c / half_width.powi(k as i32);
            let mut binom = 1.0;
            for j in 0..=k {
                // coefficient of x^j in (x - m)^k is C(k, j) (-m)^(k-j)
                raw[j] += ck * binom * (-center).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Self {
            coefficients: raw,
            degree: d,
            rms_residual: 0.0,
            domain,
            warnings: Vec::new(),
            center,
            half_width,
            local,
        }
    }

    fn to_local(&self, x: f64) -> f64 {
        (x - self.center) / self.half_width
    }

    pub fn eval(&self, x: f64) -> f64 {
        let u = self.to_local(x);
        self.local.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }

    /// `P(x) - P(x0)` for the exact antiderivative `P`.
    pub fn integral(&self, x0: f64, x: f64) -> f64 {
        let anti = |u: f64| {
            self.local
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, c)| acc * u + c / (k + 1) as f64)
                * u
        };
        self.half_width * (anti(self.to_local(x)) - anti(self.to_local(x0)))
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.domain.0 && x <= self.domain.1
    }
}

/// Least-squares polynomial of `degree`, solved on `x` mapped to `[-1, 1]`.
pub fn fit_polynomial(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolyFit> {
    if xs.len() != ys.len() {
        return Err(Error::Validation(format!("{} x values but {} y values", xs.len(), ys.len())));
    }
    if degree < 1 {
        return Err(Error::Config("polynomial degree must be >= 1".into()));
    }
    let mut distinct: Vec<f64> = xs.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < degree + 1 {
        return Err(Error::DegenerateDesign(format!(
            "degree {degree} needs {} distinct x values, got {}",
            degree + 1,
            distinct.len()
        )));
    }
    let lo = distinct[0];
    let hi = distinct[distinct.len() - 1];
    let center = 0.5 * (lo + hi);
    let half_width = 0.5 * (hi - lo);
    let us: Vec<f64> = xs.iter().map(|x| (x - center) / half_width).collect();
    let local = lstsq_polynomial(&us, ys, degree)
        .ok_or_else(|| Error::DegenerateDesign(format!("rank-deficient design for degree {degree}")))?;
    let mut fit = PolyFit::from_local(local, center, half_width, (lo, hi));
    let ss: f64 = xs.iter().zip(ys).map(|(&x, &y)| (y - fit.eval(x)).powi(2)).sum();
    fit.rms_residual = (ss / xs.len() as f64).sqrt();
    if distinct.len() == degree + 1 {
        fit.warnings.push("interpolation regime: degree equals distinct points minus one".into());
    }
    Ok(fit)
}

/// The straight-line representations a rate series can be tested against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearizationKind {
    /// `R` against `t`.
    RVsT,
    /// `R` against `S`.
    RVsS,
    /// `1/R` against `t`.
    RecipRVsT,
    /// `ln R` against `t`.
    LnRVsT,
    /// `ln(a - 1/R)` against `t`, for a known `a`.
    ShiftedLnVsT { aux_a: f64 },
    /// `1/S` against `t`.
    RecipSVsT,
}

impl LinearizationKind {
    pub fn name(&self) -> &'static str {
        match self {
            LinearizationKind::RVsT => "R_VS_T",
            LinearizationKind::RVsS => "R_VS_S",
            LinearizationKind::RecipRVsT => "RECIP_R_VS_T",
            LinearizationKind::LnRVsT => "LN_R_VS_T",
            LinearizationKind::ShiftedLnVsT { .. } => "SHIFTED_LN_VS_T",
            LinearizationKind::RecipSVsT => "RECIP_S_VS_T",
        }
    }

    /// Catalog kind the linearization identifies for untransformed rates.
    pub fn model_kind(&self) -> ModelKind {
        match self {
            LinearizationKind::RVsT => ModelKind::LinearT,
            LinearizationKind::RVsS => ModelKind::LinearS,
            LinearizationKind::RecipRVsT => ModelKind::RateRecipLinear,
            LinearizationKind::LnRVsT => ModelKind::RateLnLinear,
            LinearizationKind::ShiftedLnVsT { .. } => ModelKind::RateShiftedExp,
            LinearizationKind::RecipSVsT => ModelKind::Hyperbolic,
        }
    }

    /// Parses the command-line spelling (`r-vs-t`, `shifted-ln`, ...);
    /// `aux_a` is attached to the shifted form.
    pub fn parse(name: &str, aux_a: Option<f64>) -> Result<Self> {
        let key = name.trim().to_ascii_lowercase().replace('_', "-");
        let kind = match key.as_str() {
            "r-vs-t" => LinearizationKind::RVsT,
            "r-vs-s" => LinearizationKind::RVsS,
            "recip-r-vs-t" => LinearizationKind::RecipRVsT,
            "ln-r-vs-t" => LinearizationKind::LnRVsT,
            "shifted-ln" | "shifted-ln-vs-t" => match aux_a {
                Some(aux_a) => LinearizationKind::ShiftedLnVsT { aux_a },
                None => return Err(Error::Config("shifted-ln linearization requires the auxiliary parameter a".into())),
            },
            "recip-s-vs-t" => LinearizationKind::RecipSVsT,
            other => return Err(Error::Config(format!("unknown linearization '{other}'"))),
        };
        Ok(kind)
    }
}

impl fmt::Display for LinearizationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinearizationKind::ShiftedLnVsT { aux_a } => write!(f, "SHIFTED_LN_VS_T(a={aux_a})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Linearized coordinates and the count of points that had no image.
#[derive(Debug, Clone, PartialEq)]
pub struct Linearized {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub dropped: usize,
}

fn collect(points: impl Iterator<Item = Option<(f64, f64)>>) -> Result<Linearized> {
    let mut out = Linearized {
        xs: Vec::new(),
        ys: Vec::new(),
        dropped: 0,
    };
    let mut total = 0;
    for p in points {
        total += 1;
        match p {
            Some((x, y)) if x.is_finite() && y.is_finite() => {
                out.xs.push(x);
                out.ys.push(y);
            }
            _ => out.dropped += 1,
        }
    }
    if out.xs.is_empty() {
        return Err(Error::EmptyLinearization(total));
    }
    Ok(out)
}

/// Maps rate points to the linearized coordinates of `kind`, dropping
/// points outside the transform's domain. `RecipSVsT` uses the size column.
pub fn linearize(rs: &RateSeries, kind: LinearizationKind) -> Result<Linearized> {
    let pts = rs.points().iter();
    match kind {
        LinearizationKind::RVsT => collect(pts.map(|p| Some((p.t, p.rate)))),
        LinearizationKind::RVsS => collect(pts.map(|p| Some((p.size, p.rate)))),
        LinearizationKind::RecipRVsT => collect(pts.map(|p| (p.rate != 0.0).then(|| (p.t, 1.0 / p.rate)))),
        LinearizationKind::LnRVsT => collect(pts.map(|p| (p.rate > 0.0).then(|| (p.t, p.rate.ln())))),
        LinearizationKind::ShiftedLnVsT { aux_a } => collect(pts.map(|p| {
            if p.rate == 0.0 {
                return None;
            }
            let shifted = aux_a - 1.0 / p.rate;
            (shifted > 0.0).then(|| (p.t, shifted.ln()))
        })),
        LinearizationKind::RecipSVsT => collect(pts.map(|p| (p.size != 0.0).then(|| (p.t, 1.0 / p.size)))),
    }
}

/// `(t, 1/S)` straight from a series: the hyperbolic signature.
pub fn linearize_series(ts: &TimeSeries) -> Result<Linearized> {
    collect(
        ts.points()
            .iter()
            .map(|p| (p.value != 0.0).then(|| (p.t, 1.0 / p.value))),
    )
}

/// Result of fitting one linearization.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub linearization: LinearizationKind,
    pub line: LineFit,
    /// Not normalized, except HYPERBOLIC where the fitted line is `1/S`.
    pub model: Model,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

fn to_model(kind: ModelKind, params: Params, unit: &str) -> Result<Model> {
    Model::new(kind, params, 0.0, unit).map_err(|e| match e {
        Error::Validation(msg) => Error::DegenerateDesign(format!("fitted line gives an invalid model: {msg}")),
        other => other,
    })
}

/// Linearizes, fits a line and maps `(intercept, slope)` onto the model
/// parameters of the matching catalog kind. Rates of `ln S` map `R_VS_T`
/// and `R_VS_S` onto the `LOGLOG` kinds.
pub fn fit_rate_model(rs: &RateSeries, kind: LinearizationKind, t_range: Option<(f64, f64)>) -> Result<FitReport> {
    let restricted;
    let rs = match t_range {
        Some((t1, t2)) => {
            restricted = rs.restricted(t1, t2)?;
            &restricted
        }
        None => rs,
    };
    let lin = linearize(rs, kind)?;
    let mut line = fit_line(&lin.xs, &lin.ys)?;
    line.dropped_points = lin.dropped;

    let mut warnings = Vec::new();
    let mut notes = Vec::new();
    if lin.dropped > 0 {
        warnings.push(format!(
            "{} of {} points dropped outside the {} domain",
            lin.dropped,
            rs.len(),
            kind.name()
        ));
    }
    let span = lin.xs.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
        - lin.xs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    if line.slope.abs() * span > 10.0 * line.intercept.abs() {
        warnings.push(format!(
            "ill-conditioned extrapolation: |slope| x span = {:.4e} exceeds 10 x |intercept| = {:.4e}",
            line.slope.abs() * span,
            10.0 * line.intercept.abs()
        ));
    }

    let (a, b) = (line.intercept, line.slope);
    let model = match (rs.transform, kind) {
        (None, LinearizationKind::RVsT) => to_model(ModelKind::LinearT, Params::new(a, b), &rs.unit)?,
        (None, LinearizationKind::RVsS) => to_model(ModelKind::LinearS, Params::new(a, b), &rs.unit)?,
        (None, LinearizationKind::RecipRVsT) => to_model(ModelKind::RateRecipLinear, Params::new(a, b), &rs.unit)?,
        (None, LinearizationKind::LnRVsT) => {
            notes.push(format!(
                "fitted ln R = {a} + {b} t; stored as R = A e^(b t) with amplitude A = e^{a} = {}",
                a.exp()
            ));
            to_model(ModelKind::RateLnLinear, Params::new(a.exp(), b), &rs.unit)?
        }
        (None, LinearizationKind::ShiftedLnVsT { aux_a }) => {
            notes.push(format!("fitted ln(a - 1/R) = ln b - r t with a = {aux_a}"));
            to_model(ModelKind::RateShiftedExp, Params::new(aux_a, a.exp()).with_r(-b), &rs.unit)?
        }
        (None, LinearizationKind::RecipSVsT) => {
            if b >= 0.0 {
                warnings.push("1/S does not decrease with time: not hyperbolic growth".into());
            }
            to_model(ModelKind::Hyperbolic, Params::new(0.0, -b).with_c(a), &rs.unit)?
        }
        (Some(TransformKind::Log), LinearizationKind::RVsT) => {
            to_model(ModelKind::LoglogT, Params::new(a, b), &rs.unit)?
        }
        (Some(TransformKind::Log), LinearizationKind::RVsS) => {
            to_model(ModelKind::LoglogS, Params::new(a, b), &rs.unit)?
        }
        (Some(t), k) => {
            return Err(Error::Config(format!(
                "no catalog model for {} on rates of the {t}-transformed series",
                k.name()
            )))
        }
    };
    Ok(FitReport {
        linearization: kind,
        line,
        model,
        warnings,
        notes,
    })
}

/// Fits `1/S = C - b t` directly to a series.
pub fn fit_hyperbolic_series(ts: &TimeSeries, t_range: Option<(f64, f64)>) -> Result<FitReport> {
    let (t1, t2) = t_range.unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let points: Vec<_> = ts.points().iter().copied().filter(|p| p.t >= t1 && p.t <= t2).collect();
    let total = points.len();
    let lin = collect(points.iter().map(|p| (p.value != 0.0).then(|| (p.t, 1.0 / p.value))))?;
    let mut line = fit_line(&lin.xs, &lin.ys)?;
    line.dropped_points = lin.dropped;
    let mut warnings = Vec::new();
    if lin.dropped > 0 {
        warnings.push(format!("{} of {total} points with S = 0 dropped", lin.dropped));
    }
    if line.slope >= 0.0 {
        warnings.push("1/S does not decrease with time: not hyperbolic growth".into());
    }
    let model = to_model(
        ModelKind::Hyperbolic,
        Params::new(0.0, -line.slope).with_c(line.intercept),
        &ts.unit,
    )?;
    Ok(FitReport {
        linearization: LinearizationKind::RecipSVsT,
        line,
        model,
        warnings,
        notes: Vec::new(),
    })
}

/// Constant-rate fit: `EXP_CONST` with `a` the mean rate.
pub fn fit_constant_rate(rs: &RateSeries, t_range: Option<(f64, f64)>) -> Result<(Model, LineFit)> {
    let rs = match t_range {
        Some((t1, t2)) => rs.restricted(t1, t2)?,
        None => rs.clone(),
    };
    let line = fit_constant(&rs.rates())?;
    let model = to_model(ModelKind::ExpConst, Params::new(line.intercept, 0.0), &rs.unit)?;
    Ok((model, line))
}

/// Chooses the auxiliary `a` of the shifted linearization by maximising
/// `r_squared` over `[lo, hi]`: a 200-point grid followed by golden-section
/// refinement around the best grid cell.
pub fn scan_aux_a(rs: &RateSeries, lo: f64, hi: f64, t_range: Option<(f64, f64)>) -> Result<FitReport> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("invalid scan bounds [{lo}, {hi}]")));
    }
    let score = |a: f64| {
        fit_rate_model(rs, LinearizationKind::ShiftedLnVsT { aux_a: a }, t_range)
            .ok()
            .filter(|r| r.line.n_points >= 3)
            .map(|r| r.line.r_squared)
    };
    const STEPS: usize = 200;
    let h = (hi - lo) / STEPS as f64;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=STEPS {
        if let Some(s) = score(lo + h * i as f64) {
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
    }
    let (i, _) = best.ok_or_else(|| Error::DegenerateDesign(format!("no a in [{lo}, {hi}] linearizes the rates")))?;
    let (mut x0, mut x1) = (lo + h * i.saturating_sub(1) as f64, (lo + h * (i + 1) as f64).min(hi));
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let f = |a: f64| score(a).unwrap_or(f64::NEG_INFINITY);
    for _ in 0..60 {
        let c = x1 - phi * (x1 - x0);
        let d = x0 + phi * (x1 - x0);
        if f(c) >= f(d) {
            x1 = d;
        } else {
            x0 = c;
        }
    }
    let mid = 0.5 * (x0 + x1);
    let grid_best = lo + h * i as f64;
    let aux_a = if f(mid) >= f(grid_best) { mid } else { grid_best };
    let mut report = fit_rate_model(rs, LinearizationKind::ShiftedLnVsT { aux_a }, t_range)?;
    report
        .notes
        .push(format!("auxiliary a = {aux_a} chosen by r-squared scan over [{lo}, {hi}]"));
    Ok(report)
}
