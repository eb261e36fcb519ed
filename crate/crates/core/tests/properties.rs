mod common;

use growth_core::diagnostics::identify;
use growth_core::fitting::{fit_polynomial, fit_rate_model, LinearizationKind};
use growth_core::forecast::{integrate_discrete, integrate_rate_function, project};
use growth_core::rates::direct_rates;
use growth_core::{Model, ModelKind, Params, RateMethod, TimeSeries};
use proptest::prelude::*;

use common::rel_err;

fn series_strategy() -> impl Strategy<Value = TimeSeries> {
    (3usize..30, 0.1f64..3.0, -1000.0f64..2000.0).prop_flat_map(|(n, dt, t0)| {
        prop::collection::vec(0.01f64..1e6, n).prop_map(move |vs| {
            let ts: Vec<f64> = (0..vs.len()).map(|i| t0 + dt * i as f64).collect();
            TimeSeries::from_pairs(&ts, &vs, "s", "u").unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn discrete_round_trip(ts in series_strategy()) {
        let rs = direct_rates(&ts).unwrap();
        let first = ts.first();
        let back = integrate_discrete(&rs, (first.t, first.value)).unwrap();
        prop_assert_eq!(back.len(), ts.len());
        for (a, b) in back.points().iter().zip(ts.points()) {
            prop_assert_eq!(a.t, b.t);
            prop_assert!(rel_err(a.value, b.value) < 1e-12);
        }
    }

    #[test]
    fn rates_are_scale_invariant(ts in series_strategy(), k in 1e-3f64..1e3) {
        let a = direct_rates(&ts).unwrap();
        let b = direct_rates(&ts.scaled(k).unwrap()).unwrap();
        for (p, q) in a.points().iter().zip(b.points()) {
            prop_assert!((p.rate - q.rate).abs() <= 1e-12 * (1.0 + p.rate.abs()));
        }
    }

    #[test]
    fn identification_is_scale_invariant_for_exponentials(
        c in 0.1f64..100.0, r in 0.001f64..0.1, k in 1e-3f64..1e3,
    ) {
        let times: Vec<f64> = (0..20).map(f64::from).collect();
        let vs: Vec<f64> = times.iter().map(|t| c * (r * t).exp()).collect();
        let ts = TimeSeries::from_pairs(&times, &vs, "s", "u").unwrap();
        let a = identify(&ts, RateMethod::Direct, None).unwrap();
        let b = identify(&ts.scaled(k).unwrap(), RateMethod::Direct, None).unwrap();
        prop_assert_eq!(a.winner().kind, ModelKind::ExpConst);
        prop_assert_eq!(b.winner().kind, ModelKind::ExpConst);
    }

    /// Dense sampling: direct rates approach the continuous rate, so an
    /// R-vs-t fit recovers the generating linear law.
    #[test]
    fn dense_sampling_recovers_linear_rate_law(a in 0.005f64..0.05, b in -1e-3f64..1e-3) {
        let m = Model::new(ModelKind::LinearT, Params::new(a, b), 0.0, "u").unwrap().normalize(0.0, 1.0).unwrap();
        let dt = 1e-5;
        let times: Vec<f64> = (0..=100_000).map(|i| dt * i as f64).collect();
        let vs: Vec<f64> = times.iter().map(|&t| m.trajectory_at(t).unwrap()).collect();
        let ts = TimeSeries::from_pairs(&times, &vs, "s", "u").unwrap();
        let fit = fit_rate_model(&direct_rates(&ts).unwrap(), LinearizationKind::RVsT, None).unwrap();
        prop_assert!((fit.model.params.a - a).abs() < 1e-6, "a {} vs {}", fit.model.params.a, a);
        prop_assert!((fit.model.params.b - b).abs() < 1e-6, "b {} vs {}", fit.model.params.b, b);
    }

    #[test]
    fn linear_rate_projection_matches_polynomial_integration(
        a in -0.05f64..0.05, b in -1e-3f64..1e-3, s0 in 0.1f64..1e9, t0 in 1800.0f64..2000.0,
    ) {
        let m = Model::new(ModelKind::LinearT, Params::new(a, b), t0, "u").unwrap();
        let grid: Vec<f64> = (0..=20).map(|i| t0 + 5.0 * i as f64).collect();
        let proj = project(&m, Some((t0, s0)), &grid).unwrap();
        let xs = [t0, t0 + 100.0];
        let ys = [a + b * (xs[0] - t0), a + b * (xs[1] - t0)];
        let poly = fit_polynomial(&xs, &ys, 1).unwrap();
        let via_poly = integrate_rate_function(&poly, (t0, s0), &grid).unwrap();
        for (p, q) in proj.series.points().iter().zip(via_poly.points()) {
            prop_assert!(rel_err(p.value, q.value) < 1e-12, "{} vs {}", p.value, q.value);
        }
    }

    #[test]
    fn logistic_is_monotone_and_bounded(
        a in 0.01f64..0.5, b in -0.5f64..-0.001, frac in 0.01f64..0.99,
    ) {
        let cap = a / -b;
        let m = Model::new(ModelKind::LinearS, Params::new(a, b), 0.0, "u")
            .unwrap()
            .normalize(0.0, frac * cap)
            .unwrap();
        let mut prev = 0.0;
        for i in 0..200 {
            let s = m.trajectory_at(i as f64).unwrap();
            prop_assert!(s >= prev);
            prop_assert!(s <= cap * (1.0 + 1e-12));
            prev = s;
        }
    }

    #[test]
    fn normalize_pins_anchor(idx in 0usize..9, seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let kind = ModelKind::ALL[idx];
        let (m, (t0, s0)) = common::random_model(kind, &mut rng);
        let n = m.normalize(t0, s0).unwrap();
        prop_assert!(rel_err(n.trajectory_at(t0).unwrap(), s0) < 1e-12);
    }
}
