//! Growth-rate analysis and forecasting.
//!
//! Empirical growth rates `R = (1/S) dS/dt` are computed from a time series,
//! tested against straight-line representations, fitted to one of nine
//! closed-form rate laws and projected forward with their maxima, asymptotes
//! and singularities.

pub mod error;
pub mod timeseries;
pub mod rates;
pub mod models;
pub mod fitting;
pub mod forecast;
pub mod diagnostics;
pub mod io;
pub mod cases;
pub mod cli;

pub use error::{Error, Result};
pub use models::{FeatureKind, Features, Model, ModelKind, NormConst, Params};
pub use rates::{RateMethod, RatePoint, RateSeries, SmoothingConfig};
pub use timeseries::{Point, TimeSeries, TransformKind};
