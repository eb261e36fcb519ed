//! Independent numerical oracles shared by the integration tests.
//!
//! None of these call into the library's integration or evaluation code;
//! they only take closures.

#![allow(dead_code)]

use growth_core::{Model, ModelKind, Params, TimeSeries};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rel_err(got: f64, want: f64) -> f64 {
    if want == 0.0 {
        got.abs()
    } else {
        ((got - want) / want).abs()
    }
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, a, b);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Classical fourth-order Runge-Kutta for `dS/dt = R(t) S` from `(t0, s0)`,
/// returning `S` at each of `targets` (ascending, all >= t0). Steps of `h`
/// are shortened to land exactly on each target.
pub fn rk4_growth<F: Fn(f64) -> f64>(rate: F, t0: f64, s0: f64, h: f64, targets: &[f64]) -> Vec<f64> {
    let f = |t: f64, s: f64| rate(t) * s;
    let mut out = Vec::with_capacity(targets.len());
    let (mut t, mut s) = (t0, s0);
    for &target in targets {
        while t < target {
            let step = h.min(target - t);
            let k1 = f(t, s);
            let k2 = f(t + 0.5 * step, s + 0.5 * step * k1);
            let k3 = f(t + 0.5 * step, s + 0.5 * step * k2);
            let k4 = f(t + step, s + step * k3);
            s += step / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            // snap when within rounding of the target
            t = if (target - (t + step)).abs() < 1e-9 * h { target } else { t + step };
        }
        out.push(s);
    }
    out
}

/// Random positive series with uneven spacing: a geometric random walk.
pub fn random_series(rng: &mut ChaCha8Rng) -> TimeSeries {
    let n = rng.gen_range(5..80);
    let mut t = rng.gen_range(1800.0..2000.0);
    let mut s: f64 = 10f64.powf(rng.gen_range(-3.0..12.0));
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for _ in 0..n {
        ts.push(t);
        vs.push(s);
        t += rng.gen_range(0.1..3.0);
        s *= (rng.gen_range(-0.1..0.15f64)).exp();
    }
    TimeSeries::from_pairs(&ts, &vs, "fixture", "u").unwrap()
}

/// Parameters for one draw of `kind`, chosen so that the trajectory is
/// regular on `[t_ref, t_ref + 10]` for an anchor size in the returned
/// range. Kinds with a singularity are kept well clear of it by the ranges
/// themselves.
pub fn random_model(kind: ModelKind, rng: &mut ChaCha8Rng) -> (Model, (f64, f64)) {
    let t_ref = rng.gen_range(0.0..2000.0);
    let nonzero = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| loop {
        let v = rng.gen_range(-hi..hi);
        if v.abs() >= lo {
            return v;
        }
    };
    let (params, s0) = match kind {
        ModelKind::ExpConst => (Params::new(rng.gen_range(-0.1..0.1), 0.0), rng.gen_range(0.5..1e6)),
        ModelKind::LinearT => (
            Params::new(rng.gen_range(-0.1..0.1), rng.gen_range(-0.01..0.01)),
            rng.gen_range(0.5..1e6),
        ),
        // 1/S(t) = 1/s0 - b (t - t0) stays >= 0.1 on the window
        ModelKind::Hyperbolic => (Params::new(0.0, nonzero(rng, 1e-3, 0.01)), rng.gen_range(0.5..5.0)),
        // logistic (b < 0) or pseudo-hyperbolic (b > 0) far from its pole
        ModelKind::LinearS => {
            let a = rng.gen_range(0.01..0.1);
            if rng.gen_bool(0.5) {
                (Params::new(a, -rng.gen_range(1e-3..0.05)), rng.gen_range(0.1..1.0))
            } else {
                (Params::new(a, rng.gen_range(1e-3..0.005)), rng.gen_range(0.1..0.5))
            }
        }
        ModelKind::LoglogT => (
            Params::new(rng.gen_range(-0.05..0.05), rng.gen_range(-0.005..0.005)),
            rng.gen_range(2.0..1e3),
        ),
        ModelKind::LoglogS => {
            let a = rng.gen_range(0.01..0.1);
            (Params::new(a, -rng.gen_range(1e-3..0.02)), rng.gen_range(2.0..100.0))
        }
        // 1/R = a + b (t - t_ref) stays >= 10
        ModelKind::RateRecipLinear => (
            Params::new(rng.gen_range(20.0..100.0), nonzero(rng, 1e-3, 1.0)),
            rng.gen_range(0.5..1e6),
        ),
        ModelKind::RateLnLinear => (
            Params::new(rng.gen_range(1e-3..0.1), nonzero(rng, 1e-3, 0.1)),
            rng.gen_range(0.5..1e6),
        ),
        // a - b e^{-r t} stays >= 10
        ModelKind::RateShiftedExp => (
            Params::new(rng.gen_range(20.0..100.0), nonzero(rng, 0.1, 10.0)).with_r(rng.gen_range(0.01..0.2)),
            rng.gen_range(0.5..1e6),
        ),
    };
    let m = Model::new(kind, params, t_ref, "u").unwrap();
    (m, (t_ref, s0))
}
