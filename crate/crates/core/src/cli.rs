//! The `growth` command line.
//!
//! Exit codes: 0 on success, 2 for usage, configuration, parse and
//! validation problems, 3 for numeric or domain failures (and for case
//! reproductions with failing checks).

use std::ffi::OsString;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::cases::{find_case, grid_points, reproduce};
use crate::diagnostics::{identify, stability_flag, DEFAULT_STABILITY_THRESHOLD};
use crate::error::{Error, Result};
use crate::fitting::{
    fit_constant_rate, fit_hyperbolic_series, fit_polynomial, fit_rate_model, scan_aux_a, FitReport, LinearizationKind,
};
use crate::forecast::{integrate_discrete, integrate_rate_function, project};
use crate::io::{
    looks_like_rates, read_model, read_rates, read_series, write_fit_report, write_model, write_projection, write_rates,
    write_series, Metadata,
};
use crate::models::Model;
use crate::rates::{compute_rates, direct_rates, RateMethod, RateSeries, SmoothingConfig};
use crate::timeseries::TransformKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "growth", version, about = "Growth-rate analysis and forecasting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct TableArgs {
    /// Name of the time column.
    #[arg(long, default_value = "t")]
    time_col: String,
    /// Name of the value column.
    #[arg(long, default_value = "value")]
    value_col: String,
    /// Field delimiter: a single character, or `tab`.
    #[arg(long, default_value = ",", value_parser = parse_delimiter)]
    delimiter: u8,
}

#[derive(Debug, Clone, clap::Args)]
struct RateArgs {
    #[arg(long, value_enum, default_value_t = MethodArg::Direct)]
    method: MethodArg,
    /// Smoothing window for refined rates (odd, >= 3).
    #[arg(long, default_value_t = 7)]
    window: usize,
    /// Local polynomial degree for refined rates.
    #[arg(long, default_value_t = 3)]
    degree: usize,
}

impl RateArgs {
    fn config(&self) -> Result<SmoothingConfig> {
        SmoothingConfig::new(self.window, self.degree)
    }

    fn method(&self) -> RateMethod {
        match self.method {
            MethodArg::Direct => RateMethod::Direct,
            MethodArg::Refined => RateMethod::Refined,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Direct,
    Refined,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TransformArg {
    None,
    Log,
    Reciprocal,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LinearizationArg {
    /// Mean rate: constant-rate exponential growth.
    Constant,
    RVsT,
    RVsS,
    RecipRVsT,
    LnRVsT,
    ShiftedLn,
    RecipSVsT,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute growth rates from a series table.
    Rates {
        /// Series table, or `-` for standard input.
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        rate: RateArgs,
        /// Substitution applied to the values before computing rates.
        #[arg(long, value_enum, default_value_t = TransformArg::None)]
        transform: TransformArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a rate law through one linearization; writes a model file.
    Fit {
        /// Rate table (with a `rate` column) or series table; `-` for stdin.
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        #[arg(long, value_enum)]
        linearization: LinearizationArg,
        /// Restrict the fit to `t1:t2`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        range: Option<(f64, f64)>,
        /// Auxiliary parameter a of the shifted-log linearization.
        #[arg(long, allow_hyphen_values = true)]
        aux_a: Option<f64>,
        /// Choose a by maximising r-squared over `lo:hi`.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true, conflicts_with = "aux_a")]
        aux_scan: Option<(f64, f64)>,
        /// Model file (standard output when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit report file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Evaluate a model file on a grid.
    Forecast {
        model: PathBuf,
        /// Normalize the model so that S(t0) = s0.
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        anchor: Option<(f64, f64)>,
        /// `start:stop:step`, inclusive.
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        grid: Grid,
        /// Unit of the anchor size; must match the model unit for size-dependent laws.
        #[arg(long)]
        unit: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild sizes from a rate table.
    Integrate {
        /// Rate table, or `-` for standard input.
        rates: PathBuf,
        #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
        anchor: (f64, f64),
        /// Fit a polynomial of this degree to the rates and integrate it exactly.
        #[arg(long)]
        poly_degree: Option<usize>,
        /// Evaluation grid for the polynomial route (default: the rate times).
        #[arg(long, value_parser = parse_grid, allow_hyphen_values = true)]
        grid: Option<Grid>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank linearizations and flag low recent growth.
    Diagnose {
        input: PathBuf,
        #[command(flatten)]
        table: TableArgs,
        #[command(flatten)]
        rate: RateArgs,
        /// Rate (1/year) below which recent growth is flagged.
        #[arg(long, default_value_t = DEFAULT_STABILITY_THRESHOLD)]
        threshold: f64,
    },
    /// Reproduce a bundled case study from its published parameters.
    Reproduce {
        case: String,
        /// Directory for the report and projection tables.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_delimiter(s: &str) -> std::result::Result<u8, String> {
    match s {
        "tab" | "\\t" | "\t" => Ok(b'\t'),
        _ if s.len() == 1 && s.is_ascii() => Ok(s.as_bytes()[0]),
        _ => Err(format!("delimiter must be a single ASCII character or 'tab', got '{s}'")),
    }
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected 'x:y', got '{s}'"))?;
    Ok((parse_number(a)?, parse_number(b)?))
}

/// Inclusive `start:stop:step` grid; a newtype so clap parses it as one value.
#[derive(Debug, Clone, PartialEq)]
struct Grid(Vec<f64>);

fn parse_grid(s: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(format!("expected 'start:stop:step', got '{s}'"));
    };
    grid_points(parse_number(start)?, parse_number(stop)?, parse_number(step)?)
        .map(Grid)
        .map_err(|e| e.to_string())
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin().read_to_string(&mut text)?;
        Ok(text)
    } else {
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn warn(msg: &str) {
    eprintln!("warning: {msg}");
}

fn cmd_rates(
    input: &Path,
    table: &TableArgs,
    rate: &RateArgs,
    transform: TransformArg,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = rate.config()?;
    let ts = read_series(&read_input(input)?, &table.time_col, &table.value_col, table.delimiter)?;
    let transform = match transform {
        TransformArg::None => None,
        TransformArg::Log => Some(TransformKind::Log),
        TransformArg::Reciprocal => Some(TransformKind::Reciprocal),
    };
    let rs = compute_rates(&ts, rate.method(), &cfg, transform)?;
    emit(out, &write_rates(&rs))
}

fn restrict(rs: RateSeries, range: Option<(f64, f64)>) -> Result<RateSeries> {
    match range {
        Some((t1, t2)) => rs.restricted(t1, t2),
        None => Ok(rs),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    input: &Path,
    table: &TableArgs,
    linearization: LinearizationArg,
    range: Option<(f64, f64)>,
    aux_a: Option<f64>,
    aux_scan: Option<(f64, f64)>,
    out: Option<&Path>,
    report_out: Option<&Path>,
) -> Result<()> {
    if let Some((t1, t2)) = range {
        if !(t1 <= t2) {
            return Err(Error::Config(format!("empty range {t1}:{t2}")));
        }
    }
    let kind = match linearization {
        LinearizationArg::Constant => None,
        LinearizationArg::RVsT => Some(LinearizationKind::RVsT),
        LinearizationArg::RVsS => Some(LinearizationKind::RVsS),
        LinearizationArg::RecipRVsT => Some(LinearizationKind::RecipRVsT),
        LinearizationArg::LnRVsT => Some(LinearizationKind::LnRVsT),
        LinearizationArg::RecipSVsT => Some(LinearizationKind::RecipSVsT),
        LinearizationArg::ShiftedLn => match (aux_a, aux_scan) {
            (Some(a), _) => Some(LinearizationKind::ShiftedLnVsT { aux_a: a }),
            // placeholder; the scan picks the value
            (None, Some(_)) => Some(LinearizationKind::ShiftedLnVsT { aux_a: f64::NAN }),
            (None, None) => {
                return Err(Error::Config(
                    "shifted-ln linearization requires --aux-a or --aux-scan".into(),
                ))
            }
        },
    };
    let text = read_input(input)?;
    let is_rates = looks_like_rates(&text, table.delimiter);

    let report: FitReport = match kind {
        Some(LinearizationKind::RecipSVsT) if !is_rates => {
            let ts = read_series(&text, &table.time_col, &table.value_col, table.delimiter)?;
            fit_hyperbolic_series(&ts, range)?
        }
        _ => {
            let rs = if is_rates {
                read_rates(&text, table.delimiter)?
            } else {
                direct_rates(&read_series(&text, &table.time_col, &table.value_col, table.delimiter)?)?
            };
            match kind {
                None => {
                    let rs = restrict(rs, range)?;
                    let (model, line) = fit_constant_rate(&rs, None)?;
                    eprintln!(
                        "EXP_CONST: mean rate {} over {} points (rms deviation {:e})",
                        line.intercept, line.n_points, line.rms_residual
                    );
                    emit(out, &write_model(&model))?;
                    return Ok(());
                }
                Some(LinearizationKind::ShiftedLnVsT { aux_a }) if aux_a.is_nan() => {
                    let (lo, hi) = aux_scan.unwrap_or_default();
                    scan_aux_a(&rs, lo, hi, range)?
                }
                Some(k) => fit_rate_model(&rs, k, range)?,
            }
        }
    };
    for w in &report.warnings {
        warn(w);
    }
    eprintln!(
        "{}: {} (r^2 = {}, rms = {:e}, {} points, {} dropped)",
        report.linearization,
        report.model,
        report.line.r_squared,
        report.line.rms_residual,
        report.line.n_points,
        report.line.dropped_points
    );
    if let Some(p) = report_out {
        emit(Some(p), &write_fit_report(&report))?;
    }
    emit(out, &write_model(&report.model))
}

fn cmd_forecast(
    model_path: &Path,
    anchor: Option<(f64, f64)>,
    grid: &[f64],
    unit: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let mut model: Model = read_model(&read_input(model_path)?)?;
    if let Some(u) = unit {
        if u != model.unit {
            if model.kind.is_size_dependent() && !model.unit.is_empty() {
                return Err(Error::Unit(format!(
                    "{} parameters are expressed in '{}' but the anchor is in '{u}'",
                    model.kind, model.unit
                )));
            }
            model.unit = u.to_string();
        }
    }
    let p = project(&model, anchor, grid)?;
    for w in &p.warnings {
        warn(w);
    }
    emit(out, &write_projection(&p))
}

fn cmd_integrate(
    rates_path: &Path,
    anchor: (f64, f64),
    poly_degree: Option<usize>,
    grid: Option<&[f64]>,
    out: Option<&Path>,
) -> Result<()> {
    let rs = read_rates(&read_input(rates_path)?, b',')?;
    let ts = match poly_degree {
        None => {
            if grid.is_some() {
                return Err(Error::Config("--grid applies only with --poly-degree".into()));
            }
            integrate_discrete(&rs, anchor)?
        }
        Some(d) => {
            let poly = fit_polynomial(&rs.times(), &rs.rates(), d)?;
            for w in &poly.warnings {
                warn(w);
            }
            let grid = grid.map(<[f64]>::to_vec).unwrap_or_else(|| rs.times());
            let mut ts = integrate_rate_function(&poly, anchor, &grid)?;
            ts.label = rs.label.clone();
            ts.unit = rs.unit.clone();
            ts
        }
    };
    let mut meta = Metadata::new();
    meta.push("anchor", format!("{}:{}", anchor.0, anchor.1));
    if let Some(d) = poly_degree {
        meta.push("rate_polynomial_degree", d.to_string());
    }
    emit(out, &write_series(&ts, &meta))
}

fn cmd_diagnose(input: &Path, table: &TableArgs, rate: &RateArgs, threshold: f64) -> Result<()> {
    let cfg = rate.config()?;
    let ts = read_series(&read_input(input)?, &table.time_col, &table.value_col, table.delimiter)?;
    let report = identify(&ts, rate.method(), Some(&cfg))?;
    let rs = compute_rates(&ts, rate.method(), &cfg, None)?;
    let flag = stability_flag(&rs, threshold)?;
    let text = format!(
        "identification ({} rates):\n{report}winner: {} via {}\n\nstability: {flag}\n",
        rs.method,
        report.winner().kind,
        report.winner().test
    );
    emit(None, &text)
}

fn cmd_reproduce(name: &str, out: Option<&Path>) -> Result<bool> {
    let case = find_case(name)?;
    let report = reproduce(&case)?;
    emit(None, &report.to_string())?;
    if let Some(dir) = out {
        report.write_to(dir)?;
    }
    Ok(report.all_passed())
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Rates {
            input,
            table,
            rate,
            transform,
            out,
        } => cmd_rates(&input, &table, &rate, transform, out.as_deref())?,
        Command::Fit {
            input,
            table,
            linearization,
            range,
            aux_a,
            aux_scan,
            out,
            report,
        } => cmd_fit(
            &input,
            &table,
            linearization,
            range,
            aux_a,
            aux_scan,
            out.as_deref(),
            report.as_deref(),
        )?,
        Command::Forecast {
            model,
            anchor,
            grid,
            unit,
            out,
        } => cmd_forecast(&model, anchor, &grid.0, unit.as_deref(), out.as_deref())?,
        Command::Integrate {
            rates,
            anchor,
            poly_degree,
            grid,
            out,
        } => cmd_integrate(&rates, anchor, poly_degree, grid.as_ref().map(|g| g.0.as_slice()), out.as_deref())?,
        Command::Diagnose {
            input,
            table,
            rate,
            threshold,
        } => cmd_diagnose(&input, &table, &rate, threshold)?,
        Command::Reproduce { case, out } => {
            if !cmd_reproduce(&case, out.as_deref())? {
                eprintln!("error: some checks failed");
                return Ok(EXIT_NUMERIC);
            }
        }
    }
    Ok(EXIT_OK)
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                EXIT_USAGE
            } else {
                EXIT_NUMERIC
            }
        }
    }
}
