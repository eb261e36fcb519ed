use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use tempfile::TempDir;

fn growth() -> Command {
    Command::new(env!("CARGO_BIN_EXE_growth"))
}

fn run(args: &[&str]) -> Output {
    growth().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = growth()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_series(dir: &Path, name: &str, f: impl Fn(f64) -> f64, times: impl Iterator<Item = f64>) -> PathBuf {
    let mut text = String::from("t,value\n");
    for t in times {
        text.push_str(&format!("{t},{}\n", f(t)));
    }
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Data rows of a table: lines after the header, metadata skipped.
fn rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn meta<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('=').map(str::trim))
}

fn logistic(t: f64) -> f64 {
    let (a, b) = (0.3, -0.03);
    1.0 / (9.0 * (-a * t).exp() - b / a)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn rates_of_exponential_are_constant() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "e.csv", |t| 5.0 * (0.03 * t).exp(), (0..12).map(f64::from));
    let o = run(&["rates", p(&input)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    let r = rows(&text);
    assert_eq!(r.len(), 11);
    let want = 0.03f64.exp_m1();
    for row in &r {
        assert!((row[1] - want).abs() < 1e-12, "{row:?}");
    }
    assert_eq!(r[0][0], 1.0);
    assert_eq!(meta(&text, "origin"), Some("0"));
}

#[test]
fn refined_window_too_small_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "e.csv", |t| 1.0 + t, (0..12).map(f64::from));
    let o = run(&["rates", p(&input), "--method", "refined", "--window", "2"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn log_transform_of_zero_is_numeric_error() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "z.csv", |t| t, (0..6).map(f64::from));
    let o = run(&["rates", p(&input), "--transform", "log"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn unknown_column_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "e.csv", |t| 1.0 + t, (0..6).map(f64::from));
    let o = run(&["rates", p(&input), "--value-col", "pop"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn fit_logistic_rates_gives_linear_s() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "l.csv", logistic, (0..40).map(|i| 0.5 * i as f64));
    let rates = dir.path().join("r.csv");
    assert_eq!(code(&run(&["rates", p(&input), "--out", p(&rates)])), 0);
    let model = dir.path().join("m.toml");
    let report = dir.path().join("fit.toml");
    let o = run(&[
        "fit",
        p(&rates),
        "--linearization",
        "r-vs-s",
        "--out",
        p(&model),
        "--report",
        p(&report),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: toml::Table = toml::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(m["kind"].as_str(), Some("LINEAR_S"));
    // direct rates of the exact logistic satisfy R = a' + b' S exactly
    let b = m["b"].as_float().unwrap();
    assert!(b < 0.0);
    let r: toml::Table = toml::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r["r_squared"].as_float().unwrap() > 1.0 - 1e-10);
}

#[test]
fn shifted_ln_needs_aux_a() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "e.csv", |t| 5.0 * (0.03 * t).exp(), (0..12).map(f64::from));
    let o = run(&["fit", p(&input), "--linearization", "shifted-ln"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("aux"));
}

#[test]
fn range_restricts_fit() {
    let dir = TempDir::new().unwrap();
    // rate 0.02 before t = 10, 0.05 after
    let f = |t: f64| if t <= 10.0 { (0.02 * t).exp() } else { (0.2 + 0.05 * (t - 10.0)).exp() };
    let input = write_series(dir.path(), "k.csv", f, (0..21).map(f64::from));
    let rates = dir.path().join("r.csv");
    assert_eq!(code(&run(&["rates", p(&input), "--out", p(&rates)])), 0);
    let o = run(&["fit", p(&rates), "--linearization", "constant", "--range", "12:20"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: toml::Table = toml::from_str(&stdout(&o)).unwrap();
    let a = m["a"].as_float().unwrap();
    assert!((a - 0.05f64.exp_m1()).abs() < 1e-12, "a = {a}");
}

fn linear_model_file(dir: &Path) -> PathBuf {
    let path = dir.join("linear.toml");
    std::fs::write(&path, "kind = \"LINEAR_T\"\na = 0.252\nb = -0.0001197\nunit = \"persons\"\n").unwrap();
    path
}

#[test]
fn forecast_world_linear_scenario_has_maximum() {
    let dir = TempDir::new().unwrap();
    let model = linear_model_file(dir.path());
    let o = run(&["forecast", p(&model), "--anchor", "2030:8.4e9", "--grid", "2030:2110:5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(meta(&text, "feature"), Some("MAXIMUM"));
    let t_star: f64 = meta(&text, "feature_t").unwrap().parse().unwrap();
    assert!((t_star - 0.252 / 0.0001197).abs() < 1e-9);
    let r = rows(&text);
    assert_eq!(r.len(), 17);
    assert_eq!(r[0][0], 2030.0);
    assert!((r[0][1] / 8.4e9 - 1.0).abs() < 1e-12);
    let s2100 = r.iter().find(|row| row[0] == 2100.0).unwrap()[1];
    assert!((s2100 / 11.77e9 - 1.0).abs() < 1e-3, "{s2100}");
}

#[test]
fn forecast_truncates_at_singularity() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("h.toml");
    std::fs::write(&model, "kind = \"HYPERBOLIC\"\na = 0.0\nb = 0.01\n").unwrap();
    // S(0) = 1 puts the singularity at t = 100
    let o = run(&["forecast", p(&model), "--anchor", "0:1", "--grid", "0:150:10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("truncated"), "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r.last().unwrap()[0], 90.0);
    assert!((r.last().unwrap()[1] - 10.0).abs() < 1e-9);
}

#[test]
fn forecast_nonpositive_anchor_is_numeric_error() {
    let dir = TempDir::new().unwrap();
    let model = linear_model_file(dir.path());
    let o = run(&["forecast", p(&model), "--anchor", "2030:-1", "--grid", "2030:2040:5"]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn forecast_unit_mismatch_for_size_law() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("l.toml");
    std::fs::write(&model, "kind = \"LINEAR_S\"\na = 0.3\nb = -0.03\nunit = \"billions\"\n").unwrap();
    let o = run(&[
        "forecast",
        p(&model),
        "--anchor",
        "0:1",
        "--grid",
        "0:10:1",
        "--unit",
        "persons",
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn reproduce_unknown_case() {
    let o = run(&["reproduce", "mars-pop"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("world-pop"));
}

#[test]
fn reproduce_writes_report_files() {
    let dir = TempDir::new().unwrap();
    for case in ["world-pop", "japan-gdp", "uk-gdpcap"] {
        let o = run(&["reproduce", case, "--out", p(dir.path())]);
        assert_eq!(code(&o), 0, "{case}: {}", stderr(&o));
        let report = std::fs::read_to_string(dir.path().join(case).join("report.txt")).unwrap();
        assert!(report.contains("PASS"));
        assert!(!report.contains("FAIL"));
    }
    let proj = std::fs::read_to_string(dir.path().join("world-pop").join("linear-rate.csv")).unwrap();
    assert!(!rows(&proj).is_empty());
}

#[test]
fn output_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "l.csv", logistic, (0..40).map(|i| 0.5 * i as f64));
    let a = run(&["rates", p(&input), "--method", "refined"]);
    let b = run(&["rates", p(&input), "--method", "refined"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let a = run(&["reproduce", "world-pop"]);
    let b = run(&["reproduce", "world-pop"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn pipeline_rates_fit_forecast() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "e.csv", |t| 2.0 * (0.01 * t).exp(), (0..30).map(f64::from));
    let rates = run(&["rates", p(&input)]);
    assert_eq!(code(&rates), 0);
    let fit = run_stdin(&["fit", "-", "--linearization", "constant"], &rates.stdout);
    assert_eq!(code(&fit), 0, "{}", stderr(&fit));
    let fc = run_stdin(&["forecast", "-", "--anchor", "29:5", "--grid", "29:39:10"], &fit.stdout);
    assert_eq!(code(&fc), 0, "{}", stderr(&fc));
    let r = rows(&stdout(&fc));
    // constant direct rate r' integrates to (1 + r') per year only at the
    // sample points, so compare against the continuous law of the fit
    let a = 0.01f64.exp_m1();
    assert!((r[1][1] - 5.0 * (10.0 * a).exp()).abs() < 1e-9);
}

#[test]
fn diagnose_hyperbolic_series() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "h.csv", |t| 1.0 / (10.0 - t), (0..10).map(f64::from));
    let o = run(&["diagnose", p(&input)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("winner: HYPERBOLIC"), "{text}");
    assert!(text.contains("stability: OK"), "{text}");
}

#[test]
fn diagnose_flags_low_recent_rate() {
    let dir = TempDir::new().unwrap();
    let input = write_series(dir.path(), "s.csv", |t| 100.0 * (0.005 * t).exp(), (0..20).map(f64::from));
    let o = run(&["diagnose", p(&input)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("LOW_RATE_UNSTABLE"));
}

#[test]
fn integrate_round_trip() {
    let dir = TempDir::new().unwrap();
    let f = |t: f64| 3.0 + (0.4 * t).sin() + 0.1 * t;
    let input = write_series(dir.path(), "w.csv", f, (0..25).map(f64::from));
    let rates = dir.path().join("r.csv");
    assert_eq!(code(&run(&["rates", p(&input), "--out", p(&rates)])), 0);
    let o = run(&["integrate", p(&rates), "--anchor", &format!("0:{}", f(0.0))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let r = rows(&stdout(&o));
    assert_eq!(r.len(), 25);
    for row in r {
        let want = f(row[0]);
        assert!(((row[1] - want) / want).abs() < 1e-12, "{row:?}");
    }
}

#[test]
fn bad_grid_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let model = linear_model_file(dir.path());
    let o = run(&["forecast", p(&model), "--anchor", "2030:8.4e9", "--grid", "2030:2040"]);
    assert_eq!(code(&o), 2);
}
