//! Batch commands behind the `tipfit` binary.
//!
//! Every command reads files and flags and writes CSV/JSON. Exit codes:
//! 0 success, 2 usage error, 3 data error, 4 numerical refusal.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, ErrorClass, Result};
use crate::escape::{
    build_escape_table, dynamic_percentile_surface, grid, percentile_surface, Asymptote,
    EscapeTable, TableConfig,
};
use crate::fingerprint::{fingerprint_record, FingerprintConfig, FingerprintResult};
use crate::normalform::{
    epsilon_distribution, extract_normal_form, forecast, forecast_report, ForecastMode,
    NoiseAggregate, Report,
};
use crate::sde::{
    synthetic_record, Drift, NodeVariance, NormalFormParams, RecordSpec, ReinitMode, SimConfig,
};
use crate::timeseries::{parse_csv, parse_icecore, TimeSeries};

#[derive(Debug, Parser)]
#[command(name = "tipfit", version, about = "Fold early-warning fits and tipping-time forecasts")]
pub struct Cli {
    /// Random seed; required by simulate, escape-table, percentiles and predict.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sliding-window AR(1) fingerprint of a record.
    Fingerprint(FingerprintArgs),
    /// Synthetic record from the drifting normal form.
    Simulate(SimulateArgs),
    /// Frozen-control escape rates k0(a) and their integral K0(a).
    EscapeTable(EscapeTableArgs),
    /// Escape percentiles versus drift speed, quasi-static and simulated.
    Percentiles(PercentilesArgs),
    /// Fingerprint, normal-form fit and escape forecast of a record.
    Predict(PredictArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    /// Comma separated, no header required.
    Csv,
    /// Whitespace separated columns with a free-text preamble.
    Icecore,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    /// Input record.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: InputFormat,
    /// Zero-based column holding time (or age for ice cores).
    #[arg(long, default_value_t = 0)]
    pub time_col: usize,
    /// Zero-based column holding the observable.
    #[arg(long, default_value_t = 1)]
    pub value_col: usize,
    /// Negate the time column (ages before present become increasing time).
    #[arg(long)]
    pub reverse_time: bool,
    /// Interpolation spacing, record time units.
    #[arg(long)]
    pub dt: f64,
    /// Gaussian detrending bandwidth d, record time units.
    #[arg(long)]
    pub bandwidth: f64,
    /// Ignore every sample after this time, record time units.
    #[arg(long)]
    pub cutoff: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FingerprintArgs {
    #[command(flatten)]
    pub record: RecordArgs,
    /// Window size w = 2m + 1 in samples; repeat for several windows.
    #[arg(short = 'w', long = "window", required = true)]
    pub windows: Vec<usize>,
    /// Output prefix; writes <prefix>_w<w>.csv per window.
    #[arg(long, default_value = "fingerprint")]
    pub out: String,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Initial control value a0.
    #[arg(long)]
    pub a0: f64,
    /// Drift speed ε of the control, per unit time.
    #[arg(long)]
    pub epsilon: f64,
    /// Noise amplitude σ.
    #[arg(long)]
    pub sigma: f64,
    /// Observation scale: z = z0 + q x.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// Observation offset.
    #[arg(long, default_value_t = 0.0)]
    pub z0: f64,
    /// Sampling interval of the written record, time units.
    #[arg(long, default_value_t = 0.1)]
    pub sample_interval: f64,
    /// Euler–Maruyama step, time units.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// Simulated duration; defaults to the time the control needs to reach a = -1.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Escape threshold on x.
    #[arg(long, default_value_t = -5.0)]
    pub x_threshold: f64,
    /// Record CSV (time,value).
    #[arg(long, default_value = "record.csv")]
    pub out: PathBuf,
    /// Ground-truth parameter file (JSON).
    #[arg(long, default_value = "truth.json")]
    pub truth: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AsymptoteArg {
    /// (sqrt(a)/π) exp(-(8/3) a^{3/2}).
    Overdamped,
    /// (2 sqrt(a)/π) exp(-2 sqrt(a)).
    ExponentialRoot,
}

impl From<AsymptoteArg> for Asymptote {
    fn from(a: AsymptoteArg) -> Self {
        match a {
            AsymptoteArg::Overdamped => Asymptote::Overdamped,
            AsymptoteArg::ExponentialRoot => Asymptote::ExponentialRoot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReinitArg {
    /// Copy a surviving member.
    Resample,
    /// Normal draw at the node with variance σ²/sqrt(a).
    Gaussian,
    /// Normal draw at the node with variance σ²/(4 sqrt(a)).
    GaussianLinearized,
}

impl From<ReinitArg> for ReinitMode {
    fn from(r: ReinitArg) -> Self {
        match r {
            ReinitArg::Resample => ReinitMode::ResampleSurvivors,
            ReinitArg::Gaussian => ReinitMode::GaussianAtNode(NodeVariance::Stated),
            ReinitArg::GaussianLinearized => ReinitMode::GaussianAtNode(NodeVariance::Linearized),
        }
    }
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// Ensemble size N.
    #[arg(long, default_value_t = 400)]
    pub ensemble: usize,
    /// Euler–Maruyama step h, rescaled time units.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, value_enum, default_value = "resample")]
    pub reinit: ReinitArg,
    /// Advance ensemble members on all cores (results are unchanged).
    #[arg(long)]
    pub parallel: bool,
}

impl EnsembleArgs {
    fn config(&self, seed: u64) -> Result<SimConfig> {
        let mut c = SimConfig::new(seed);
        c.ensemble_size = self.ensemble;
        c.step = self.step;
        c.reinit = self.reinit.into();
        c.parallel = self.parallel;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Lowest a of the rate grid.
    #[arg(long, default_value_t = -0.5, allow_hyphen_values = true)]
    pub a_start: f64,
    /// Highest a of the rate grid.
    #[arg(long, default_value_t = 3.0)]
    pub a_end: f64,
    /// Grid spacing.
    #[arg(long, default_value_t = 0.05)]
    pub a_spacing: f64,
    /// Upper limit of the K0 integral.
    #[arg(long, default_value_t = 3.0)]
    pub a_max: f64,
    /// Rates at a >= this come from the asymptotic formula.
    #[arg(long, default_value_t = 2.5)]
    pub hybrid_switch: f64,
    #[arg(long, value_enum, default_value = "overdamped")]
    pub asymptote: AsymptoteArg,
    /// Relaxation time before counting escapes, rescaled time units.
    #[arg(long, default_value_t = 10.0)]
    pub burn_in: f64,
    /// Escapes to aim for per grid point.
    #[arg(long, default_value_t = 100.0)]
    pub target_escapes: f64,
    /// Cap on the counting time per grid point, rescaled time units.
    #[arg(long, default_value_t = 5000.0)]
    pub max_measure: f64,
    /// Add the asymptotic integral above a_max to K0.
    #[arg(long)]
    pub extend_tail: bool,
}

impl TableArgs {
    fn config(&self) -> Result<TableConfig> {
        if !(self.a_spacing > 0.0) || !(self.a_end >= self.a_start) {
            return Err(Error::param("a_grid", "need a_start <= a_end and positive spacing"));
        }
        let mut c = TableConfig {
            a_grid: grid(self.a_start, self.a_end, self.a_spacing),
            a_max: self.a_max.max(self.a_end),
            hybrid_switch: self.hybrid_switch,
            asymptote: self.asymptote.into(),
            burn_in: self.burn_in,
            target_escapes: self.target_escapes,
            max_measure: self.max_measure,
            extend_tail: self.extend_tail,
            ..TableConfig::default()
        };
        c.min_measure = c.min_measure.min(c.max_measure);
        if !(c.burn_in >= 0.0) || !(c.target_escapes > 0.0) || !(c.max_measure > 0.0) {
            return Err(Error::param("table", "burn-in, target and measuring time must be positive"));
        }
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct EscapeTableArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Output CSV (a,k0,k0_stderr,K0).
    #[arg(long, default_value = "escape_table.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PercentilesArgs {
    /// Existing escape table; built with the table flags when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[command(flatten)]
    pub table_args: TableArgs,
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Rescaled drift speeds; defaults to 13 log-spaced values from 1e-3 to 1.
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    /// Percent levels.
    #[arg(long, value_delimiter = ',', default_value = "5,25,50,75,95")]
    pub levels: Vec<f64>,
    /// Also run drifting ensembles for each drift speed.
    #[arg(long)]
    pub dynamic: bool,
    /// Starting control value of the drifting ensembles.
    #[arg(long, default_value_t = 3.0)]
    pub a0: f64,
    /// Stop the drifting ensembles once a falls to this value.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub a_stop: f64,
    /// Quasi-static output (epsilon,level,a).
    #[arg(long, default_value = "percentiles_quasistatic.csv")]
    pub out: PathBuf,
    /// Simulated output (epsilon,level,a).
    #[arg(long, default_value = "percentiles_dynamic.csv")]
    pub out_dynamic: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    MonteCarlo,
    QuasiStatic,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    /// Mean over valid windows.
    Mean,
    /// Last valid window.
    Cutoff,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub record: RecordArgs,
    /// Window size w = 2m + 1 in samples.
    #[arg(short = 'w', long = "window")]
    pub window: usize,
    /// Forecast horizon after the last valid window, record time units;
    /// defaults to three times the expected time for a to reach zero.
    #[arg(long)]
    pub horizon: Option<f64>,
    #[arg(long, value_enum, default_value = "monte-carlo")]
    pub mode: ModeArg,
    /// Escape table for quasi-static mode; built with default settings when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mean")]
    pub noise: NoiseArg,
    /// Forecast ensemble size.
    #[arg(long, default_value_t = 1000)]
    pub ensemble: usize,
    /// Largest Euler–Maruyama step, rescaled time units.
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long)]
    pub parallel: bool,
    /// Output directory for report.json, report.csv, cdf.csv and fingerprint.csv.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Data => 3,
        ErrorClass::Refusal => 4,
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let seed = || {
        cli.seed
            .ok_or_else(|| Error::param("seed", "--seed is required for this command"))
    };
    match &cli.command {
        Command::Fingerprint(a) => cmd_fingerprint(a),
        Command::Simulate(a) => cmd_simulate(a, seed()?),
        Command::EscapeTable(a) => cmd_escape_table(a, seed()?),
        Command::Percentiles(a) => cmd_percentiles(a, seed()?),
        Command::Predict(a) => cmd_predict(a, seed()?),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be positive, got {v}")))
    }
}

fn load_record(a: &RecordArgs) -> Result<TimeSeries> {
    positive("dt", a.dt)?;
    positive("bandwidth", a.bandwidth)?;
    let file = File::open(&a.input)?;
    let parsed = match a.format {
        InputFormat::Csv => parse_csv(file, a.time_col, a.value_col)?,
        InputFormat::Icecore => parse_icecore(file, a.time_col, a.value_col, a.reverse_time)?,
    };
    let mut series = parsed.series;
    if a.reverse_time && matches!(a.format, InputFormat::Csv) {
        let pts = series.times().iter().map(|t| -t).zip(series.values().iter().copied());
        series = TimeSeries::from_points(pts.collect())?;
    }
    if parsed.skipped_rows > 0 {
        eprintln!("note: skipped {} non-numeric rows", parsed.skipped_rows);
    }
    Ok(series)
}

fn scale_warnings(dt: f64, bandwidth: f64, window: usize) {
    if bandwidth < 5.0 * dt {
        eprintln!("warning: bandwidth {bandwidth} is below 5 dt; detrending may absorb fluctuations");
    }
    if (window as f64) * dt < 10.0 * bandwidth {
        eprintln!(
            "warning: window of {window} samples spans less than 10 bandwidths; \
             propagator estimates may be noisy"
        );
    }
}

fn fingerprint_with(a: &RecordArgs, series: &TimeSeries, window: usize) -> Result<FingerprintResult> {
    let cfg = FingerprintConfig::with_window(window, a.bandwidth)?;
    scale_warnings(a.dt, a.bandwidth, window);
    fingerprint_record(series, a.dt, a.cutoff, &cfg)
}

fn cmd_fingerprint(a: &FingerprintArgs) -> Result<()> {
    for &w in &a.windows {
        FingerprintConfig::with_window(w, a.record.bandwidth)?;
    }
    let series = load_record(&a.record)?;
    for &w in &a.windows {
        let fp = fingerprint_with(&a.record, &series, w)?;
        let path = PathBuf::from(format!("{}_w{w}.csv", a.out));
        let mut out = create(&path)?;
        fp.write_csv(&mut out)?;
        out.flush()?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

#[derive(Serialize)]
struct Truth {
    seed: u64,
    a0: f64,
    epsilon: f64,
    sigma: f64,
    q: f64,
    z0: f64,
    step: f64,
    sample_interval: f64,
    t_end: f64,
    x_threshold: f64,
    /// Time the control reaches zero.
    fold_time: Option<f64>,
    escaped_at: Option<f64>,
    escape_a: Option<f64>,
}

fn cmd_simulate(a: &SimulateArgs, seed: u64) -> Result<()> {
    let params = NormalFormParams {
        a0: a.a0,
        drift: Drift::Constant(a.epsilon),
        sigma: a.sigma,
        x_threshold: a.x_threshold,
    };
    params.validate()?;
    let mut cfg = SimConfig::new(seed);
    cfg.step = a.step;
    positive("step", a.step)?;
    let t_end = match a.t_end {
        Some(t) => t,
        None if a.epsilon > 0.0 => (a.a0 + 1.0) / a.epsilon,
        None => return Err(Error::param("t_end", "required when epsilon <= 0")),
    };
    let spec = RecordSpec {
        q: a.q,
        z0: a.z0,
        sample_interval: a.sample_interval,
        t_end,
    };
    let rec = synthetic_record(&params, &cfg, &spec)?;
    let mut out = create(&a.out)?;
    rec.series.write_csv(&mut out)?;
    out.flush()?;
    let truth = Truth {
        seed,
        a0: a.a0,
        epsilon: a.epsilon,
        sigma: a.sigma,
        q: a.q,
        z0: a.z0,
        step: a.step,
        sample_interval: a.sample_interval,
        t_end,
        x_threshold: a.x_threshold,
        fold_time: (a.epsilon > 0.0).then(|| a.a0 / a.epsilon),
        escaped_at: rec.escaped_at,
        escape_a: rec.escape_a,
    };
    let mut t = create(&a.truth)?;
    writeln!(t, "{}", serde_json::to_string_pretty(&truth)?)?;
    t.flush()?;
    Ok(())
}

fn cmd_escape_table(a: &EscapeTableArgs, seed: u64) -> Result<()> {
    let table_cfg = a.table.config()?;
    let cfg = a.ensemble.config(seed)?;
    let table = build_escape_table(&table_cfg, &cfg)?;
    let mut out = create(&a.out)?;
    table.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn default_epsilons() -> Vec<f64> {
    (0..13).map(|i| 10f64.powf(-3.0 + 0.25 * i as f64)).collect()
}

fn cmd_percentiles(a: &PercentilesArgs, seed: u64) -> Result<()> {
    let table_cfg = a.table_args.config()?;
    let cfg = a.ensemble.config(seed)?;
    let eps = a.epsilons.clone().unwrap_or_else(default_epsilons);
    let table = match &a.table {
        Some(p) => EscapeTable::read_csv(File::open(p)?)?,
        None => build_escape_table(&table_cfg, &cfg)?,
    };
    let quasi = percentile_surface(&table, &eps, &a.levels)?;
    let mut out = create(&a.out)?;
    quasi.write_csv(&mut out)?;
    out.flush()?;
    if a.dynamic {
        let dynamic =
            dynamic_percentile_surface(&eps, &a.levels, &cfg, a.a0, a.a_stop, table_cfg.x_threshold)?;
        let mut out = create(&a.out_dynamic)?;
        dynamic.write_csv(&mut out)?;
        out.flush()?;
    }
    Ok(())
}

fn write_report(dir: &Path, report: &Report) -> Result<()> {
    let mut j = create(&dir.join("report.json"))?;
    writeln!(j, "{}", report.to_json()?)?;
    j.flush()?;
    let mut c = create(&dir.join("report.csv"))?;
    report.write_csv(&mut c)?;
    c.flush()?;
    Ok(())
}

fn cmd_predict(a: &PredictArgs, seed: u64) -> Result<()> {
    FingerprintConfig::with_window(a.window, a.record.bandwidth)?;
    if let Some(h) = a.horizon {
        positive("horizon", h)?;
    }
    let mut cfg = SimConfig::new(seed);
    cfg.ensemble_size = a.ensemble;
    cfg.step = a.step;
    cfg.parallel = a.parallel;
    cfg.validate()?;
    std::fs::create_dir_all(&a.out_dir)?;

    let series = load_record(&a.record)?;
    let fp = fingerprint_with(&a.record, &series, a.window)?;
    let mut out = create(&a.out_dir.join("fingerprint.csv"))?;
    fp.write_csv(&mut out)?;
    out.flush()?;

    let noise = match a.noise {
        NoiseArg::Mean => NoiseAggregate::Mean,
        NoiseArg::Cutoff => NoiseAggregate::AtCutoff,
    };
    let estimate = match extract_normal_form(&fp, noise) {
        Ok(e) => e,
        Err(e) => {
            if e.class() == ErrorClass::Refusal {
                write_report(&a.out_dir, &Report::refused(Some(fp.cutoff_time), e.to_string()))?;
            }
            return Err(e);
        }
    };
    let sampler = epsilon_distribution(&estimate, fp.dt)?;
    let horizon = match a.horizon {
        Some(h) => h,
        None if sampler.mean > 0.0 => 3.0 * estimate.a_last / sampler.mean,
        None => {
            let reason = "mean drift speed is not positive; give --horizon explicitly";
            write_report(&a.out_dir, &Report::refused(Some(fp.cutoff_time), reason))?;
            return Err(Error::param("horizon", reason));
        }
    };
    let (mode, table) = match a.mode {
        ModeArg::MonteCarlo => (ForecastMode::MonteCarlo, None),
        ModeArg::QuasiStatic => {
            let t = match &a.table {
                Some(p) => EscapeTable::read_csv(File::open(p)?)?,
                None => build_escape_table(&TableConfig::default(), &SimConfig::new(seed))?,
            };
            (ForecastMode::QuasiStatic, Some(t))
        }
    };
    let fc = forecast(&estimate, &sampler, &cfg, horizon, mode, table.as_ref())?;
    let mut out = create(&a.out_dir.join("cdf.csv"))?;
    fc.write_csv(&mut out)?;
    out.flush()?;
    write_report(&a.out_dir, &forecast_report(&fc, &estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stochastic_commands_need_seed() {
        let code = run(["tipfit", "simulate", "--a0", "1", "--epsilon", "0.1", "--sigma", "0"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(run(["tipfit", "fingerprint", "--bogus"]), 2);
    }

    #[test]
    fn missing_input_is_data_error() {
        let code = run([
            "tipfit",
            "fingerprint",
            "/nonexistent/record.csv",
            "--dt",
            "1",
            "--bandwidth",
            "5",
            "-w",
            "11",
        ]);
        assert_eq!(code, 3);
    }

    #[test]
    fn bad_window_is_usage_error() {
        let code = run([
            "tipfit", "fingerprint", "x.csv", "--dt", "1", "--bandwidth", "5", "-w", "10",
        ]);
        assert_eq!(code, 2);
    }
}
