//! Early-warning analysis of records approaching a fold (saddle-node)
//! bifurcation, and probabilistic forecasts of when they tip.
//!
//! The pipeline runs in three layers:
//!
//! - [`timeseries`] and [`fingerprint`] turn a raw, possibly unevenly sampled
//!   record into sliding-window estimates of the AR(1) propagator, the linear
//!   decay rate and the noise amplitude.
//! - [`sde`] and [`escape`] simulate the noisy drifting normal form
//!   `dx = (a - x²) dt + σ dW`, `da = -ε dt`, and tabulate frozen escape rates,
//!   quasi-static escape probabilities and their percentiles.
//! - [`normalform`] maps fingerprint output onto normal-form coordinates and
//!   forecasts the distributions of the time the control parameter reaches
//!   the fold and of the time the trajectory actually escapes.
//!
//! The `tipfit` binary exposes the same steps as batch commands that write
//! CSV and JSON; see [`cli`].

pub mod cli;
pub mod error;
pub mod escape;
pub mod fingerprint;
pub mod normalform;
pub mod sde;
pub mod stats;
pub mod streams;
pub mod timeseries;

pub use error::{Error, ErrorClass, Result};
pub use escape::{
    build_escape_table, escape_rate_frozen, kramers_rate, kramers_rate_overdamped,
    percentile_surface, quasistatic_escape_cdf, EscapeTable, PercentileSurface, Rescaling,
};
pub use fingerprint::{
    extrapolate_propagator, fingerprint, fingerprint_record, fit_ar1_window, FingerprintConfig,
    FingerprintResult,
};
pub use normalform::{
    epsilon_distribution, extract_normal_form, forecast, forecast_report, EpsilonSampler,
    EscapeForecast, ForecastMode, NormalFormEstimate, Report,
};
pub use sde::{
    run_ensemble, simulate_path, wiener_increments, Drift, EnsembleTrace, NormalFormParams,
    ReinitMode, SimConfig, StopRule,
};
pub use timeseries::{
    detrend_gaussian, interpolate_uniform, parse_csv, parse_icecore, DetrendResult, TimeSeries,
    UniformSeries,
};
