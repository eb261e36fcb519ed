//! The model catalog: nine growth-rate laws, each paired with its closed-form
//! trajectory and its critical features.
//!
//! Every trajectory is evaluated as `ln S` first; [`Model::trajectory_at`]
//! exponentiates only at the boundary. Rate laws written in calendar years
//! routinely produce exponents in the hundreds or thousands (the Japan
//! maximum trajectory reaches `a*t + b*t^2/2 ~ 3450`), so the integration
//! constant is also stored as a sign and a log-magnitude.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance (years) from a singular time inside which evaluation is refused.
pub const SINGULARITY_GUARD: f64 = 1e-9;

/// The catalog of rate laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ModelKind {
    /// `R = a`; `S = C e^{a t}`.
    ExpConst,
    /// `R = a + b t`; `S = C exp(a t + b t^2 / 2)`.
    LinearT,
    /// `R = b S`; `S = 1 / (C - b t)`.
    Hyperbolic,
    /// `R = a + b S`; `S = 1 / (C e^{-a t} - b/a)`. Logistic for `b < 0`,
    /// pseudo-hyperbolic for `b > 0`.
    LinearS,
    /// `F = ln S`, `R_F = a + b t`; `F = C exp(a t + b t^2 / 2)`.
    LoglogT,
    /// `F = ln S`, `R_F = a + b F`; `F = 1 / (C e^{-a t} - b/a)`.
    LoglogS,
    /// `1/R = a + b t`; `S = C |a + b t|^{1/b}`.
    RateRecipLinear,
    /// `R = a e^{b t}`; `S = C exp((a/b) e^{b t})`.
    RateLnLinear,
    /// `R = 1 / (a - b e^{-r t})`; `S = C exp(t/a + ln(a - b e^{-r t}) / (r a))`.
    RateShiftedExp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 9] = [
        ModelKind::ExpConst,
        ModelKind::LinearT,
        ModelKind::Hyperbolic,
        ModelKind::LinearS,
        ModelKind::LoglogT,
        ModelKind::LoglogS,
        ModelKind::RateRecipLinear,
        ModelKind::RateLnLinear,
        ModelKind::RateShiftedExp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ExpConst => "EXP_CONST",
            ModelKind::LinearT => "LINEAR_T",
            ModelKind::Hyperbolic => "HYPERBOLIC",
            ModelKind::LinearS => "LINEAR_S",
            ModelKind::LoglogT => "LOGLOG_T",
            ModelKind::LoglogS => "LOGLOG_S",
            ModelKind::RateRecipLinear => "RATE_RECIP_LINEAR",
            ModelKind::RateLnLinear => "RATE_LN_LINEAR",
            ModelKind::RateShiftedExp => "RATE_SHIFTED_EXP",
        }
    }

    /// Position in the simplest-first ordering used to break ties when
    /// ranking candidate models.
    pub fn simplicity_rank(self) -> u8 {
        match self {
            ModelKind::ExpConst => 0,
            ModelKind::LinearT => 1,
            ModelKind::LinearS => 2,
            ModelKind::Hyperbolic => 3,
            ModelKind::LoglogT => 4,
            ModelKind::LoglogS => 5,
            ModelKind::RateRecipLinear => 6,
            ModelKind::RateLnLinear => 7,
            ModelKind::RateShiftedExp => 8,
        }
    }

    /// Kinds whose rate law depends on the size of the entity.
    pub fn is_size_dependent(self) -> bool {
        matches!(
            self,
            ModelKind::Hyperbolic | ModelKind::LinearS | ModelKind::LoglogT | ModelKind::LoglogS
        )
    }

    /// Kinds whose integration constant multiplies `S`, so `ln S = ln C + g(t)`.
    fn is_multiplicative(self) -> bool {
        matches!(
            self,
            ModelKind::ExpConst
                | ModelKind::LinearT
                | ModelKind::RateRecipLinear
                | ModelKind::RateLnLinear
                | ModelKind::RateShiftedExp
        )
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == upper)
            .ok_or_else(|| Error::Config(format!("unknown model kind '{s}'")))
    }
}

/// Integration constant `C`, kept as sign and `ln |C|` so that values such as
/// `e^{-3450}` survive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConst {
    sign: f64,
    ln_abs: f64,
    value: f64,
}

impl NormConst {
    pub fn new(value: f64) -> Self {
        Self {
            sign: if value == 0.0 { 0.0 } else { value.signum() },
            ln_abs: value.abs().ln(),
            value,
        }
    }

    /// `sign * exp(ln_abs)`; `sign` is reduced to -1, 0 or 1.
    pub fn from_log(sign: f64, ln_abs: f64) -> Self {
        let sign = if sign == 0.0 { 0.0 } else { sign.signum() };
        let value = if sign == 0.0 { 0.0 } else { sign * ln_abs.exp() };
        Self {
            sign,
            ln_abs: if sign == 0.0 { f64::NEG_INFINITY } else { ln_abs },
            value,
        }
    }

    /// The plain value; may be `0` or infinite when the magnitude is outside
    /// the `f64` range.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn ln_abs(&self) -> f64 {
        self.ln_abs
    }

    /// True when `value()` carries the constant without overflow or underflow.
    pub fn is_representable(&self) -> bool {
        self.sign == 0.0 || (self.value.is_finite() && self.value.is_normal())
    }

    /// `C * e^{x}` without forming either factor separately.
    fn times_exp(&self, x: f64) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * (self.ln_abs + x).exp()
        }
    }
}

/// Rate-law parameters. `r` is used only by [`ModelKind::RateShiftedExp`];
/// `c` is unset until the model is normalized (or supplied directly).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    pub a: f64,
    pub b: f64,
    pub r: Option<f64>,
    pub c: Option<NormConst>,
}

impl Params {
    pub fn new(a: f64, b: f64) -> Self {
        Self { a, b, r: None, c: None }
    }

    pub fn with_r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn with_c(mut self, c: f64) -> Self {
        self.c = Some(NormConst::new(c));
        self
    }
}

/// A catalog member with parameters and its time origin.
///
/// Evaluation uses `t' = t - t_ref`; parameters are expressed in `t'`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub kind: ModelKind,
    pub params: Params,
    pub t_ref: f64,
    pub unit: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FeatureKind {
    Maximum,
    Asymptote,
    Singularity,
    None,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Maximum => "MAXIMUM",
            FeatureKind::Asymptote => "ASYMPTOTE",
            FeatureKind::Singularity => "SINGULARITY",
            FeatureKind::None => "NONE",
        })
    }
}

/// The critical point of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub kind: FeatureKind,
    pub t_star: Option<f64>,
    pub s_star: Option<f64>,
    /// Limiting growth rate for laws that relax to exponential growth.
    pub asymptotic_rate: Option<f64>,
    pub note: Option<String>,
}

impl Features {
    fn none() -> Self {
        Self {
            kind: FeatureKind::None,
            t_star: None,
            s_star: None,
            asymptotic_rate: None,
            note: None,
        }
    }

    fn maximum(t: f64, s: f64) -> Self {
        Self {
            kind: FeatureKind::Maximum,
            t_star: Some(t),
            s_star: Some(s),
            ..Self::none()
        }
    }

    fn asymptote(s: f64) -> Self {
        Self {
            kind: FeatureKind::Asymptote,
            s_star: Some(s),
            ..Self::none()
        }
    }

    fn singularity(t: f64) -> Self {
        Self {
            kind: FeatureKind::Singularity,
            t_star: Some(t),
            ..Self::none()
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

impl Model {
    pub fn new(kind: ModelKind, params: Params, t_ref: f64, unit: impl Into<String>) -> Result<Self> {
        let Params { a, b, r, c } = params;
        let invalid = |msg: String| Err(Error::Validation(format!("{kind}: {msg}")));
        if !a.is_finite() || !b.is_finite() || !t_ref.is_finite() {
            return invalid(format!("parameters must be finite (a = {a}, b = {b}, t_ref = {t_ref})"));
        }
        match (kind, r) {
            (ModelKind::RateShiftedExp, None) => return invalid("parameter r is required".into()),
            (ModelKind::RateShiftedExp, Some(r)) if !r.is_finite() || r == 0.0 => {
                return invalid(format!("r must be finite and non-zero, got {r}"))
            }
            (ModelKind::RateShiftedExp, Some(_)) => {}
            (_, Some(_)) => return invalid("parameter r is only used by RATE_SHIFTED_EXP".into()),
            (_, None) => {}
        }
        match kind {
            ModelKind::Hyperbolic | ModelKind::RateRecipLinear | ModelKind::RateLnLinear if b == 0.0 => {
                return invalid("b must be non-zero".into())
            }
            ModelKind::LinearS | ModelKind::LoglogS | ModelKind::RateShiftedExp if a == 0.0 => {
                return invalid("a must be non-zero".into())
            }
            _ => {}
        }
        if let Some(c) = c {
            if c.sign.is_nan() || c.ln_abs.is_nan() || (c.sign != 0.0 && !c.ln_abs.is_finite()) {
                return invalid("C must be finite".into());
            }
            if kind.is_multiplicative() && c.sign <= 0.0 {
                return invalid(format!("C must be positive, got {}", c.value));
            }
        }
        Ok(Self {
            kind,
            params,
            t_ref,
            unit: unit.into(),
        })
    }

    /// Shorthand for a model with `t_ref = 0` and no unit.
    pub fn with_params(kind: ModelKind, params: Params) -> Result<Self> {
        Self::new(kind, params, 0.0, "")
    }

    pub fn is_normalized(&self) -> bool {
        self.params.c.is_some()
    }

    fn c(&self) -> Result<NormConst> {
        self.params
            .c
            .ok_or_else(|| Error::NotNormalized(format!("{} model has no constant C; normalize it first", self.kind)))
    }

    fn local(&self, t: f64) -> f64 {
        t - self.t_ref
    }

    /// `ln S - ln C` for multiplicative kinds.
    fn log_shape(&self, tl: f64) -> Result<f64> {
        let Params { a, b, .. } = self.params;
        match self.kind {
            ModelKind::ExpConst => Ok(a * tl),
            ModelKind::LinearT => Ok(a * tl + 0.5 * b * tl * tl),
            ModelKind::RateRecipLinear => Ok((a + b * tl).abs().ln() / b),
            ModelKind::RateLnLinear => {
                let ratio = a / b;
                Ok(ratio.signum() * (ratio.abs().ln() + b * tl).exp())
            }
            ModelKind::RateShiftedExp => {
                let r = self.params.r.unwrap_or(f64::NAN);
                let w = a - b.signum() * (b.abs().ln() - r * tl).exp();
                Ok(tl / a + w.abs().ln() / (r * a))
            }
            _ => unreachable!("log_shape called for non-multiplicative kind"),
        }
    }

    /// `C e^{-a t'} - b/a`, the reciprocal of `S` (LINEAR_S) or of `F`
    /// (LOGLOG_S).
    fn logistic_denominator(&self, c: NormConst, tl: f64) -> f64 {
        let Params { a, b, .. } = self.params;
        c.times_exp(-a * tl) - b / a
    }

    /// Calendar time at which the trajectory's denominator vanishes, if any.
    fn pole(&self) -> Option<f64> {
        let Params { a, b, r, c } = self.params;
        let local = match self.kind {
            ModelKind::Hyperbolic => Some(c?.value() / b),
            ModelKind::LinearS | ModelKind::LoglogS => {
                let c = c?;
                let ratio = b / a;
                if c.sign == 0.0 || ratio == 0.0 || c.sign != ratio.signum() {
                    None
                } else {
                    Some((c.ln_abs - ratio.abs().ln()) / a)
                }
            }
            ModelKind::RateRecipLinear => Some(-a / b),
            ModelKind::RateShiftedExp => {
                let ratio = a / b;
                if b == 0.0 || ratio <= 0.0 {
                    None
                } else {
                    Some(-ratio.ln() / r?)
                }
            }
            _ => None,
        };
        local.map(|tl| tl + self.t_ref)
    }

    /// Calendar time of a singularity reached going forward in time, if the
    /// trajectory has one.
    pub fn forward_singularity(&self) -> Option<f64> {
        let b = self.params.b;
        match self.kind {
            ModelKind::Hyperbolic if b > 0.0 => self.pole(),
            ModelKind::LinearS | ModelKind::LoglogS if b > 0.0 => self.pole(),
            ModelKind::RateRecipLinear if b < 0.0 => self.pole(),
            _ => None,
        }
    }

    /// Calendar time at which the growth rate crosses zero for the
    /// time-linear laws (`t = -a/b`); needs no normalization.
    pub fn stationary_time(&self) -> Option<f64> {
        let Params { a, b, .. } = self.params;
        match self.kind {
            ModelKind::LinearT | ModelKind::LoglogT if b != 0.0 => Some(self.t_ref - a / b),
            _ => None,
        }
    }

    fn check_singular(&self, t: f64) -> Result<()> {
        if let Some(tp) = self.pole() {
            if (t - tp).abs() < SINGULARITY_GUARD {
                return Err(Error::Singularity {
                    t_star: tp,
                    message: format!("{} trajectory is singular at t = {t}", self.kind),
                });
            }
        }
        if let Some(ts) = self.forward_singularity() {
            if t > ts {
                return Err(Error::Domain(format!(
                    "t = {t} lies past the singularity at t = {ts}; {} trajectory is undefined there",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    /// `ln S(t)`.
    pub fn log_trajectory_at(&self, t: f64) -> Result<f64> {
        let c = self.c()?;
        self.check_singular(t)?;
        let tl = self.local(t);
        let Params { a: _, b, .. } = self.params;
        let value = match self.kind {
            k if k.is_multiplicative() => c.ln_abs + self.log_shape(tl)?,
            ModelKind::Hyperbolic => {
                let d = c.value() - b * tl;
                if d <= 0.0 {
                    return Err(Error::Domain(format!(
                        "HYPERBOLIC: C - b t = {d} is not positive at t = {t}"
                    )));
                }
                -d.ln()
            }
            ModelKind::LinearS => {
                let d = self.logistic_denominator(c, tl);
                if d <= 0.0 {
                    return Err(Error::Domain(format!(
                        "LINEAR_S: C e^(-a t) - b/a = {d} is not positive at t = {t}"
                    )));
                }
                -d.ln()
            }
            ModelKind::LoglogT => c.times_exp(self.log_shape_quadratic(tl)),
            ModelKind::LoglogS => 1.0 / self.logistic_denominator(c, tl),
            _ => unreachable!(),
        };
        if value.is_nan() {
            return Err(Error::Domain(format!("{} trajectory undefined at t = {t}", self.kind)));
        }
        if value.is_infinite() {
            return Err(Error::Singularity {
                t_star: t,
                message: format!("{} trajectory diverges at t = {t}", self.kind),
            });
        }
        Ok(value)
    }

    fn log_shape_quadratic(&self, tl: f64) -> f64 {
        self.params.a * tl + 0.5 * self.params.b * tl * tl
    }

    /// `S(t)`; may overflow to infinity where `ln S` exceeds the `f64` range.
    pub fn trajectory_at(&self, t: f64) -> Result<f64> {
        self.log_trajectory_at(t).map(f64::exp)
    }

    /// Growth rate `(1/S) dS/dt` at `t`.
    ///
    /// Size-dependent kinds take `s` when supplied and otherwise evaluate
    /// the (normalized) trajectory. For the `F = ln S` kinds the returned
    /// value is the growth rate of `S` itself, `R_F * ln S`.
    pub fn rate_at(&self, t: f64, s: Option<f64>) -> Result<f64> {
        let Params { a, b, r, .. } = self.params;
        let tl = self.local(t);
        let log_size = |this: &Self| -> Result<f64> {
            match s {
                Some(s) if s > 0.0 => Ok(s.ln()),
                Some(s) => Err(Error::Domain(format!("size must be positive, got {s}"))),
                None => this.log_trajectory_at(t),
            }
        };
        let size = |this: &Self| -> Result<f64> {
            match s {
                Some(s) => Ok(s),
                None => this.trajectory_at(t),
            }
        };
        let rate = match self.kind {
            ModelKind::ExpConst => a,
            ModelKind::LinearT => a + b * tl,
            ModelKind::Hyperbolic => b * size(self)?,
            ModelKind::LinearS => a + b * size(self)?,
            ModelKind::LoglogT => log_size(self)? * (a + b * tl),
            ModelKind::LoglogS => {
                let f = log_size(self)?;
                f * (a + b * f)
            }
            ModelKind::RateRecipLinear => {
                let u = a + b * tl;
                if u == 0.0 {
                    return Err(Error::SingularRate { t });
                }
                1.0 / u
            }
            ModelKind::RateLnLinear => a * (b * tl).exp(),
            ModelKind::RateShiftedExp => {
                let r = r.unwrap_or(f64::NAN);
                let w = a - b.signum() * (b.abs().ln() - r * tl).exp();
                if w == 0.0 {
                    return Err(Error::SingularRate { t });
                }
                1.0 / w
            }
        };
        if !rate.is_finite() {
            return Err(Error::SingularRate { t });
        }
        Ok(rate)
    }

    /// Critical features: maximum, asymptote, singularity or none.
    pub fn features(&self) -> Result<Features> {
        let Params { a, b, .. } = self.params;
        let features = match self.kind {
            ModelKind::ExpConst => Features::none(),
            ModelKind::LinearT => {
                if b < 0.0 {
                    let t = self.t_ref - a / b;
                    Features::maximum(t, self.trajectory_at(t)?)
                } else {
                    Features::none().with_note("rate a + b t never turns from positive to negative")
                }
            }
            ModelKind::Hyperbolic => {
                self.c()?;
                match self.forward_singularity() {
                    Some(t) => Features::singularity(t),
                    None => Features::none().with_note("b < 0: reciprocal grows linearly, S decays"),
                }
            }
            ModelKind::LinearS | ModelKind::LoglogS => {
                let to_size = |x: f64| if self.kind == ModelKind::LinearS { x } else { x.exp() };
                if b < 0.0 && a > 0.0 {
                    Features::asymptote(to_size(a / b.abs()))
                } else if b > 0.0 {
                    self.c()?;
                    match self.forward_singularity() {
                        Some(t) => Features::singularity(t),
                        None => Features::none().with_note(
                            "b > 0 but C e^(-a t) - b/a never reaches zero; no finite-time singularity",
                        ),
                    }
                } else {
                    Features::none()
                }
            }
            ModelKind::LoglogT => {
                let c = self.c()?;
                if b < 0.0 && c.sign > 0.0 {
                    let t = self.t_ref - a / b;
                    Features::maximum(t, self.trajectory_at(t)?)
                } else {
                    Features::none()
                }
            }
            ModelKind::RateRecipLinear => match self.forward_singularity() {
                Some(t) => Features::singularity(t),
                None => Features::none(),
            },
            ModelKind::RateLnLinear => {
                if b < 0.0 {
                    Features::asymptote(self.c()?.value())
                } else {
                    Features::none()
                }
            }
            ModelKind::RateShiftedExp => Features {
                asymptotic_rate: Some(1.0 / a),
                ..Features::none().with_note("relaxes to exponential growth at rate 1/a")
            },
        };
        Ok(features)
    }

    /// Returns a copy with `C` chosen so that `S(t0) = s0`.
    pub fn normalize(&self, t0: f64, s0: f64) -> Result<Model> {
        if !(s0 > 0.0) || !s0.is_finite() {
            return Err(Error::Domain(format!("anchor size must be positive and finite, got {s0}")));
        }
        if !t0.is_finite() {
            return Err(Error::Domain(format!("anchor time must be finite, got {t0}")));
        }
        let Params { a, b, .. } = self.params;
        let tl = self.local(t0);
        let c = match self.kind {
            k if k.is_multiplicative() => NormConst::from_log(1.0, s0.ln() - self.log_shape(tl)?),
            ModelKind::Hyperbolic => NormConst::new(1.0 / s0 + b * tl),
            ModelKind::LinearS => logistic_constant(a, b, 1.0 / s0, tl),
            ModelKind::LoglogT => {
                let f0 = s0.ln();
                if f0 == 0.0 {
                    return Err(Error::Domain("LOGLOG_T cannot be anchored at S = 1 (ln S = 0)".into()));
                }
                NormConst::from_log(f0.signum(), f0.abs().ln() - self.log_shape_quadratic(tl))
            }
            ModelKind::LoglogS => {
                let f0 = s0.ln();
                if f0 == 0.0 {
                    return Err(Error::Domain("LOGLOG_S cannot be anchored at S = 1 (ln S = 0)".into()));
                }
                logistic_constant(a, b, 1.0 / f0, tl)
            }
            _ => unreachable!(),
        };
        let mut m = self.clone();
        m.params.c = Some(c);
        Ok(m)
    }
}

/// `C = (1/x0 + b/a) e^{a t0}` with the exponential kept in log form.
fn logistic_constant(a: f64, b: f64, inv_x0: f64, tl: f64) -> NormConst {
    let base = inv_x0 + b / a;
    if base == 0.0 {
        NormConst::new(0.0)
    } else {
        NormConst::from_log(base.signum(), base.abs().ln() + a * tl)
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} a={} b={}", self.kind, self.params.a, self.params.b)?;
        if let Some(r) = self.params.r {
            write!(f, " r={r}")?;
        }
        if let Some(c) = self.params.c {
            if c.is_representable() {
                write!(f, " C={:e}", c.value())?;
            } else {
                write!(f, " C={}e^{}", if c.sign < 0.0 { "-" } else { "" }, c.ln_abs)?;
            }
        }
        if self.t_ref != 0.0 {
            write!(f, " t_ref={}", self.t_ref)?;
        }
        Ok(())
    }
}

/// Definite integral of `1 / ((a + b x)(c + e x))` over `[x1, x2]` by the
/// partial-fraction formula `(1/D) ln|(a + b x)/(c + e x)|`, `D = c b - a e`.
pub fn integrate_rational(a: f64, b: f64, c: f64, e: f64, x1: f64, x2: f64) -> Result<f64> {
    if x1 == x2 {
        return Ok(0.0);
    }
    let delta = c * b - a * e;
    let scale = (c * b).abs() + (a * e).abs();
    if delta == 0.0 || delta.abs() <= 1e-14 * scale {
        return Err(Error::DegenerateFactor(format!(
            "c b - a e = {delta}: factors ({a} + {b} x) and ({c} + {e} x) are proportional"
        )));
    }
    let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
    for (p, q, name) in [(a, b, "a + b x"), (c, e, "c + e x")] {
        let vanishes = if q == 0.0 {
            p == 0.0
        } else {
            let root = -p / q;
            (lo..=hi).contains(&root)
        };
        if vanishes {
            return Err(Error::SingularIntegrand(format!("factor {name} vanishes on [{lo}, {hi}]")));
        }
    }
    // ln|u(x2)/u(x1)| = ln1p(slope (x2 - x1) / u(x1)), accurate for short intervals
    let log_ratio = |p: f64, q: f64| {
        let u1 = p + q * x1;
        (q * (x2 - x1) / u1).ln_1p()
    };
    Ok((log_ratio(a, b) - log_ratio(c, e)) / delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(kind: ModelKind, a: f64, b: f64) -> Model {
        Model::with_params(kind, Params::new(a, b)).unwrap()
    }

    fn close(x: f64, y: f64, rel: f64) -> bool {
        (x - y).abs() <= rel * y.abs().max(1e-300)
    }

    #[test]
    fn exp_const_rate() {
        let m = model(ModelKind::ExpConst, 0.02, 0.0);
        assert_eq!(m.rate_at(1234.5, None).unwrap(), 0.02);
    }

    #[test]
    fn linear_s_rate_vanishes_at_asymptote() {
        let m = model(ModelKind::LinearS, 8.411e-2, -1.279e-2);
        assert!(m.rate_at(2010.0, Some(6.5763)).unwrap().abs() < 1e-5);
    }

    #[test]
    fn uk_linear_rate_at_2008() {
        let m = model(ModelKind::LinearT, -8.964e-2, 5.459e-5);
        let r = m.rate_at(2008.0, None).unwrap();
        assert!((r - 0.01998).abs() < 5e-6, "{r}");
    }

    #[test]
    fn unit_logistic() {
        let m = Model::with_params(ModelKind::LinearS, Params::new(1.0, -1.0).with_c(1.0)).unwrap();
        assert!(close(m.trajectory_at(0.0).unwrap(), 0.5, 1e-15));
        assert!(close(m.trajectory_at(40.0).unwrap(), 1.0, 1e-15));
        let t = 1.7;
        assert!(close(m.trajectory_at(t).unwrap(), 1.0 / ((-t).exp() + 1.0), 1e-14));
    }

    #[test]
    fn hyperbolic_trajectory_and_singularity() {
        let m = Model::with_params(ModelKind::Hyperbolic, Params::new(0.0, 1.0).with_c(10.0)).unwrap();
        assert!(close(m.trajectory_at(0.0).unwrap(), 0.1, 1e-15));
        assert!(close(m.trajectory_at(9.0).unwrap(), 1.0, 1e-15));
        assert!(matches!(m.trajectory_at(10.0), Err(Error::Singularity { .. })));
        assert!(matches!(m.trajectory_at(10.0 + 1e-12), Err(Error::Singularity { .. })));
        assert!(matches!(m.trajectory_at(11.0), Err(Error::Domain(_))));
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::Singularity);
        assert_eq!(f.t_star, Some(10.0));
        assert_eq!(f.s_star, None);
    }

    #[test]
    fn world_population_exponential_rate_2030() {
        let m = Model::with_params(ModelKind::RateLnLinear, Params::new(2.179e10, -1.406e-2).with_c(15.6e9)).unwrap();
        let s = m.trajectory_at(2030.0).unwrap();
        assert!(close(s, 8.4e9, 0.015), "{s}");
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::Asymptote);
        assert!(close(f.s_star.unwrap(), 15.6e9, 1e-14));
    }

    #[test]
    fn world_population_linear_maximum() {
        let m = model(ModelKind::LinearT, 2.520e-1, -1.197e-4).normalize(2030.0, 8.4e9).unwrap();
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::Maximum);
        assert!((f.t_star.unwrap() - 2105.26).abs() < 0.01);
    }

    #[test]
    fn pseudo_hyperbolic_singularity() {
        let m = Model::with_params(ModelKind::LinearS, Params::new(1.0, 1.0).with_c(2.0)).unwrap();
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::Singularity);
        assert!((f.t_star.unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert!(matches!(m.trajectory_at(1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn pseudo_hyperbolic_without_root_reports_none() {
        // b/(aC) < 0: the denominator never vanishes
        let m = Model::with_params(ModelKind::LinearS, Params::new(1.0, 1.0).with_c(-2.0)).unwrap();
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::None);
        assert!(f.note.is_some());
    }

    #[test]
    fn linear_t_without_maximum() {
        let m = model(ModelKind::LinearT, 0.01, 0.001).normalize(0.0, 1.0).unwrap();
        assert_eq!(m.features().unwrap().kind, FeatureKind::None);
    }

    #[test]
    fn shifted_exp_asymptotic_rate() {
        let m = Model::with_params(ModelKind::RateShiftedExp, Params::new(40.0, 20.0).with_r(0.05)).unwrap();
        let f = m.features().unwrap();
        assert_eq!(f.kind, FeatureKind::None);
        assert_eq!(f.asymptotic_rate, Some(1.0 / 40.0));
        let late = m.rate_at(1000.0, None).unwrap();
        assert!(close(late, 1.0 / 40.0, 1e-12));
    }

    #[test]
    fn singular_rates() {
        let m = model(ModelKind::RateRecipLinear, 2.0, -1.0);
        assert_eq!(m.rate_at(2.0, None), Err(Error::SingularRate { t: 2.0 }));
        let m = Model::with_params(ModelKind::RateShiftedExp, Params::new(1.0, 1.0).with_r(1.0)).unwrap();
        assert_eq!(m.rate_at(0.0, None), Err(Error::SingularRate { t: 0.0 }));
    }

    #[test]
    fn normalize_logistic_constant() {
        let m = model(ModelKind::LinearS, 1.0, -1.0).normalize(0.0, 0.5).unwrap();
        assert!(close(m.params.c.unwrap().value(), 1.0, 1e-15));
    }

    #[test]
    fn normalize_world_exponential_rate() {
        let m = model(ModelKind::RateLnLinear, 2.179e10, -1.406e-2).normalize(2030.0, 8.37e9).unwrap();
        // C = S0 / exp((a/b) e^{b t0}), evaluated independently
        let expected = 8.37e9 / ((2.179e10 / -1.406e-2) * (-1.406e-2f64 * 2030.0).exp()).exp();
        let c = m.params.c.unwrap().value();
        assert!(close(c, expected, 1e-12));
        assert!(close(c, 15.6e9, 0.002), "{c}");
    }

    #[test]
    fn normalize_round_trip_every_kind() {
        let cases = [
            (ModelKind::ExpConst, Params::new(0.03, 0.0)),
            (ModelKind::LinearT, Params::new(3.452, -1.726e-3)),
            (ModelKind::Hyperbolic, Params::new(0.0, 0.002)),
            (ModelKind::LinearS, Params::new(8.411e-2, -1.279e-2)),
            (ModelKind::LoglogT, Params::new(0.001, -2e-6)),
            (ModelKind::LoglogS, Params::new(0.02, -0.001)),
            (ModelKind::RateRecipLinear, Params::new(-10.0, 0.5)),
            (ModelKind::RateLnLinear, Params::new(2.179e10, -1.406e-2)),
            (ModelKind::RateShiftedExp, Params::new(30.0, 1e10).with_r(0.01)),
        ];
        for (kind, p) in cases {
            let m = Model::with_params(kind, p).unwrap().normalize(2006.0, 5.469).unwrap();
            let s = m.trajectory_at(2006.0).unwrap();
            assert!(close(s, 5.469, 1e-12), "{kind}: {s}");
        }
    }

    #[test]
    fn japan_maximum_trajectory_stays_finite_in_log_space() {
        let m = model(ModelKind::LinearT, 3.452, -1.726e-3).normalize(1990.0, 4.5).unwrap();
        assert!(!m.params.c.unwrap().is_representable());
        let f = m.features().unwrap();
        assert!((f.t_star.unwrap() - 2000.0).abs() < 0.1);
        assert!(f.s_star.unwrap().is_finite());
    }

    #[test]
    fn invalid_parameters() {
        assert!(Model::with_params(ModelKind::Hyperbolic, Params::new(0.0, 0.0)).is_err());
        assert!(Model::with_params(ModelKind::LinearS, Params::new(0.0, 1.0)).is_err());
        assert!(Model::with_params(ModelKind::LinearT, Params::new(0.0, 1.0).with_r(1.0)).is_err());
        assert!(Model::with_params(ModelKind::RateShiftedExp, Params::new(1.0, 1.0)).is_err());
        assert!(Model::with_params(ModelKind::ExpConst, Params::new(1.0, 0.0).with_c(-1.0)).is_err());
    }

    #[test]
    fn unnormalized_evaluation_is_refused() {
        let m = model(ModelKind::LinearT, 0.1, -0.001);
        assert!(matches!(m.trajectory_at(1.0), Err(Error::NotNormalized(_))));
        assert!(matches!(m.features(), Err(Error::NotNormalized(_))));
        assert_eq!(m.stationary_time(), Some(100.0));
    }

    #[test]
    fn model_kind_names_round_trip() {
        for k in ModelKind::ALL {
            assert_eq!(k.name().parse::<ModelKind>().unwrap(), k);
        }
    }

    #[test]
    fn rational_integral_special_case() {
        let v = integrate_rational(1.0, 1.0, 0.0, 1.0, 1.0, 2.0).unwrap();
        assert!((v - (4.0f64 / 3.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn rational_integral_degenerate() {
        assert!(matches!(
            integrate_rational(1.0, 2.0, 1.0, 2.0, 0.0, 1.0),
            Err(Error::DegenerateFactor(_))
        ));
    }

    #[test]
    fn rational_integral_empty_interval() {
        assert_eq!(integrate_rational(1.0, 1.0, 0.0, 1.0, 3.0, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn rational_integral_root_inside() {
        assert!(matches!(
            integrate_rational(1.0, 1.0, 0.0, 1.0, -1.0, 2.0),
            Err(Error::SingularIntegrand(_))
        ));
    }
}
