//! Frozen-parameter escape rates and quasi-static escape probabilities.
//!
//! With the drift switched off, an ensemble kept at constant size by putting
//! escaped members back into the well settles to a constant escape rate
//! `k0(a)`. Integrating it, `K0(a) = ∫_a^{a_max} k0`, gives the quasi-static
//! cumulative escape probability for a slowly drifting control,
//! `P_esc(a) = 1 - exp(-K0(a) / ε)`.
//!
//! Everything here is in the rescaled form with unit noise; [`Rescaling`]
//! converts to and from the original units.

use std::f64::consts::PI;
use std::io::{Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sde::{run_ensemble, Drift, Ensemble, NormalFormParams, SimConfig, StopRule};
use crate::streams::derive_seed;

/// Above this control value frozen-rate simulation is refused.
pub const RARE_EVENT_A: f64 = 10.0;

/// Large-`a` rate in the form `(2 sqrt(a) / π) exp(-2 sqrt(a))`.
///
/// This expression is kept for comparison only. It does not agree with the
/// simulated rates of the normal form; see [`kramers_rate_overdamped`].
pub fn kramers_rate(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("kramers rate needs a > 0, got {a}")));
    }
    let s = a.sqrt();
    Ok(2.0 * s / PI * (-2.0 * s).exp())
}

/// Overdamped Kramers rate for the cubic well `U(x) = -a x + x³/3` at unit
/// noise: curvature `2 sqrt(a)` at both the node and the saddle, barrier
/// `4/3 a^{3/2}`, diffusion `1/2`, hence `(sqrt(a) / π) exp(-8/3 a^{3/2})`.
pub fn kramers_rate_overdamped(a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("kramers rate needs a > 0, got {a}")));
    }
    let s = a.sqrt();
    Ok(s / PI * (-8.0 / 3.0 * a * s).exp())
}

/// Which closed-form rate covers the large-`a` end of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Asymptote {
    #[default]
    Overdamped,
    /// [`kramers_rate`].
    ExponentialRoot,
}

impl Asymptote {
    pub fn rate(self, a: f64) -> Result<f64> {
        match self {
            Asymptote::Overdamped => kramers_rate_overdamped(a),
            Asymptote::ExponentialRoot => kramers_rate(a),
        }
    }
}

/// A frozen-parameter escape rate measured by simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEstimate {
    pub a: f64,
    pub k0: f64,
    /// Poisson counting error, `sqrt(count) / (N * measure)`.
    pub stderr: f64,
    pub escapes: u64,
    pub measure: f64,
    /// No escape was observed; `k0 = 0` is only an upper-bounded estimate.
    pub upper_bound_only: bool,
}

/// Measures `k0(a)` at unit noise: an ensemble started at the node with
/// survivor resampling (or the configured re-initialization) runs for
/// `burn_in`, then escapes are counted over `measure` time units.
pub fn escape_rate_frozen(
    a: f64,
    x_threshold: f64,
    config: &SimConfig,
    burn_in: f64,
    measure: f64,
) -> Result<RateEstimate> {
    if a >= RARE_EVENT_A {
        return Err(Error::RareEvent { a });
    }
    if !(measure > 0.0) || !(burn_in >= 0.0) {
        return Err(Error::param("measure", "needs burn_in >= 0 and measure > 0"));
    }
    let params = NormalFormParams {
        a0: a,
        drift: Drift::Constant(0.0),
        sigma: 1.0,
        x_threshold,
    };
    let mut ens = Ensemble::new(&params, config)?;
    let burn_steps = (burn_in / config.step).round() as u64;
    let measure_steps = (measure / config.step).round().max(1.0) as u64;
    for _ in 0..burn_steps {
        if ens.step().depleted {
            return Err(Error::param("a", format!("ensemble depleted at a = {a}; step too large")));
        }
    }
    let mut escapes = 0u64;
    for _ in 0..measure_steps {
        let out = ens.step();
        if out.depleted {
            return Err(Error::param("a", format!("ensemble depleted at a = {a}; step too large")));
        }
        escapes += out.escaped as u64;
    }
    let measure = measure_steps as f64 * config.step;
    let exposure = config.ensemble_size as f64 * measure;
    Ok(RateEstimate {
        a,
        k0: escapes as f64 / exposure,
        stderr: (escapes as f64).sqrt() / exposure,
        escapes,
        measure,
        upper_bound_only: escapes == 0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateSource {
    Simulated,
    /// Simulated with zero escapes.
    UpperBound,
    Asymptotic,
}

/// Escape rates `k0` and their integral `K0(a) = ∫_a^{a_max} k0` on an
/// increasing grid ending at `a_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeTable {
    pub a_grid: Vec<f64>,
    pub k0: Vec<f64>,
    pub k0_stderr: Vec<f64>,
    pub big_k0: Vec<f64>,
    pub source: Vec<RateSource>,
    pub a_max: f64,
    /// Integral of the asymptote beyond `a_max`, already included in `big_k0`.
    pub tail: f64,
    pub asymptote: Asymptote,
}

impl EscapeTable {
    /// Builds a table from given rates; the grid must be strictly monotone
    /// (either direction) and end at `a_max`.
    pub fn from_rates(a_grid: Vec<f64>, k0: Vec<f64>, k0_stderr: Vec<f64>) -> Result<Self> {
        let n = a_grid.len();
        if n == 0 || k0.len() != n || k0_stderr.len() != n {
            return Err(Error::param("a_grid", "need at least one point and matching rates"));
        }
        let mut rows: Vec<(f64, f64, f64)> = (0..n).map(|i| (a_grid[i], k0[i], k0_stderr[i])).collect();
        if rows[0].0 > rows[n - 1].0 {
            rows.reverse();
        }
        if rows.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::param("a_grid", "must be strictly monotone"));
        }
        if rows.iter().any(|r| !(r.1 >= 0.0)) {
            return Err(Error::param("k0", "rates must be non-negative"));
        }
        let mut table = EscapeTable {
            a_grid: rows.iter().map(|r| r.0).collect(),
            k0: rows.iter().map(|r| r.1).collect(),
            k0_stderr: rows.iter().map(|r| r.2).collect(),
            big_k0: vec![0.0; n],
            source: vec![RateSource::Simulated; n],
            a_max: rows[n - 1].0,
            tail: 0.0,
            asymptote: Asymptote::default(),
        };
        table.integrate();
        Ok(table)
    }

    /// Trapezoid rule from each grid point up to `a_max`, plus the tail.
    fn integrate(&mut self) {
        let n = self.a_grid.len();
        self.big_k0[n - 1] = self.tail;
        for i in (0..n - 1).rev() {
            let h = self.a_grid[i + 1] - self.a_grid[i];
            self.big_k0[i] = self.big_k0[i + 1] + 0.5 * h * (self.k0[i] + self.k0[i + 1]);
        }
    }

    /// Adds `∫_{a_max}^∞` of the asymptote to every `K0` entry.
    pub fn with_tail(mut self) -> Result<Self> {
        self.tail = tail_integral(self.asymptote, self.a_max)?;
        self.integrate();
        Ok(self)
    }

    pub fn a_min(&self) -> f64 {
        self.a_grid[0]
    }

    /// `k0(a)` by linear interpolation; the asymptote above the grid and the
    /// first grid value below it.
    pub fn k0_at(&self, a: f64) -> f64 {
        if a >= self.a_max {
            return self.asymptote.rate(a).unwrap_or(0.0);
        }
        interpolate(&self.a_grid, &self.k0, a).0
    }

    /// `K0(a)` by linear interpolation, and whether `a` had to be clamped
    /// into the grid.
    pub fn big_k0_at(&self, a: f64) -> (f64, bool) {
        interpolate(&self.a_grid, &self.big_k0, a)
    }

    /// CSV with columns `a,k0,k0_stderr,K0`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "a,k0,k0_stderr,K0")?;
        for i in 0..self.a_grid.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.a_grid[i], self.k0[i], self.k0_stderr[i], self.big_k0[i]
            )?;
        }
        Ok(())
    }

    /// Reads a table written by [`EscapeTable::write_csv`]; `K0` is
    /// recomputed from the rates.
    pub fn read_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(source);
        let (mut a, mut k, mut s) = (vec![], vec![], vec![]);
        for rec in reader.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::param("table", format!("bad row {:?}", rec)))
            };
            a.push(field(0)?);
            k.push(field(1)?);
            s.push(field(2)?);
        }
        Self::from_rates(a, k, s)
    }
}

fn interpolate(x: &[f64], y: &[f64], at: f64) -> (f64, bool) {
    let n = x.len();
    if at <= x[0] {
        return (y[0], at < x[0]);
    }
    if at >= x[n - 1] {
        return (y[n - 1], at > x[n - 1]);
    }
    let i = x.partition_point(|&v| v <= at) - 1;
    let w = (at - x[i]) / (x[i + 1] - x[i]);
    (y[i] + w * (y[i + 1] - y[i]), false)
}

fn tail_integral(asymptote: Asymptote, from: f64) -> Result<f64> {
    if from <= 0.0 {
        return Err(Error::param("a_max", "tail needs a_max > 0"));
    }
    // composite Simpson on a stretch long enough for either asymptote to vanish
    let len = 400.0_f64.max(from * 4.0);
    let n = 200_000;
    let h = len / n as f64;
    let f = |a: f64| asymptote.rate(a).unwrap_or(0.0);
    let mut s = f(from) + f(from + len);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(from + i as f64 * h);
    }
    Ok(s * h / 3.0)
}

/// Settings for [`build_escape_table`].
#[derive(Debug, Clone, PartialEq)]
pub struct TableConfig {
    pub a_grid: Vec<f64>,
    pub a_max: f64,
    /// Rates at or above this come from the asymptote.
    pub hybrid_switch: f64,
    pub asymptote: Asymptote,
    pub x_threshold: f64,
    pub burn_in: f64,
    /// Escapes to aim for per simulated grid point; sets the measuring time.
    pub target_escapes: f64,
    pub min_measure: f64,
    pub max_measure: f64,
    pub extend_tail: bool,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig {
            a_grid: grid(-0.5, 3.0, 0.05),
            a_max: 3.0,
            hybrid_switch: 2.5,
            asymptote: Asymptote::Overdamped,
            x_threshold: -5.0,
            burn_in: 10.0,
            target_escapes: 100.0,
            min_measure: 50.0,
            max_measure: 5000.0,
            extend_tail: false,
        }
    }
}

/// Evenly spaced points from `start` to `end` inclusive.
pub fn grid(start: f64, end: f64, spacing: f64) -> Vec<f64> {
    let n = ((end - start) / spacing + 1e-9).floor() as usize;
    let mut g: Vec<f64> = (0..=n).map(|i| start + i as f64 * spacing).collect();
    if (g[n] - end).abs() < 1e-9 * spacing {
        g[n] = end;
    }
    g
}

impl TableConfig {
    fn measure_for(&self, a: f64, ensemble: usize) -> f64 {
        let guess = if a < 0.5 {
            0.1
        } else {
            kramers_rate_overdamped(a).unwrap_or(0.1).max(1e-12)
        };
        (self.target_escapes / (ensemble as f64 * guess)).clamp(self.min_measure, self.max_measure)
    }
}

/// Tabulates `k0` over the grid (simulated below the hybrid switch,
/// asymptotic above) and integrates `K0` up to `a_max`. Grid point `i`
/// simulates with seed `derive_seed(config.seed, i)`.
pub fn build_escape_table(table: &TableConfig, config: &SimConfig) -> Result<EscapeTable> {
    config.validate()?;
    let mut a_grid = table.a_grid.clone();
    if a_grid.is_empty() {
        return Err(Error::param("a_grid", "empty"));
    }
    if a_grid[0] > a_grid[a_grid.len() - 1] {
        a_grid.reverse();
    }
    if a_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::param("a_grid", "must be strictly monotone"));
    }
    let top = a_grid[a_grid.len() - 1];
    if table.a_max < top - 1e-12 {
        return Err(Error::param("a_max", "must not be below the grid"));
    }
    if table.a_max > top + 1e-12 {
        a_grid.push(table.a_max);
    }

    let rows: Vec<(f64, f64, RateSource)> = a_grid
        .par_iter()
        .enumerate()
        .map(|(i, &a)| -> Result<(f64, f64, RateSource)> {
            if a >= table.hybrid_switch {
                return Ok((table.asymptote.rate(a)?, 0.0, RateSource::Asymptotic));
            }
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, i as u64);
            cfg.parallel = false;
            let measure = table.measure_for(a, cfg.ensemble_size);
            let est = escape_rate_frozen(a, table.x_threshold, &cfg, table.burn_in, measure)?;
            let source = if est.upper_bound_only {
                RateSource::UpperBound
            } else {
                RateSource::Simulated
            };
            Ok((est.k0, est.stderr, source))
        })
        .collect::<Result<_>>()?;

    let n = a_grid.len();
    let mut out = EscapeTable {
        a_grid,
        k0: rows.iter().map(|r| r.0).collect(),
        k0_stderr: rows.iter().map(|r| r.1).collect(),
        big_k0: vec![0.0; n],
        source: rows.iter().map(|r| r.2).collect(),
        a_max: table.a_max,
        tail: 0.0,
        asymptote: table.asymptote,
    };
    out.integrate();
    if table.extend_tail {
        out = out.with_tail()?;
    }
    Ok(out)
}

/// `P_esc(a) = 1 - exp(-K0(a) / ε)` evaluated on a table.
#[derive(Debug, Clone, Copy)]
pub struct QuasiStaticCdf<'a> {
    table: &'a EscapeTable,
    epsilon: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probability {
    pub p: f64,
    /// The argument lay outside the table and was clamped.
    pub clamped: bool,
}

impl QuasiStaticCdf<'_> {
    pub fn eval(&self, a: f64) -> Probability {
        let (k, clamped) = self.table.big_k0_at(a);
        Probability {
            p: -(-k / self.epsilon).exp_m1(),
            clamped,
        }
    }
}

pub fn quasistatic_escape_cdf(table: &EscapeTable, epsilon: f64) -> Result<QuasiStaticCdf<'_>> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return Err(Error::param("epsilon", format!("must be positive, got {epsilon}")));
    }
    Ok(QuasiStaticCdf { table, epsilon })
}

/// Control values at which given fractions of the ensemble have escaped, per
/// drift speed. `None` marks a level not reached within the table or run.
#[derive(Debug, Clone, PartialEq)]
pub struct PercentileSurface {
    pub epsilon_grid: Vec<f64>,
    /// Percent, in (0, 100).
    pub levels: Vec<f64>,
    /// `a_at[i][j]` for `epsilon_grid[i]` and `levels[j]`.
    pub a_at: Vec<Vec<Option<f64>>>,
}

impl PercentileSurface {
    /// CSV with columns `epsilon,level,a` (NaN where unreachable).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "epsilon,level,a")?;
        for (i, eps) in self.epsilon_grid.iter().enumerate() {
            for (j, level) in self.levels.iter().enumerate() {
                writeln!(out, "{eps},{level},{}", self.a_at[i][j].unwrap_or(f64::NAN))?;
            }
        }
        Ok(())
    }
}

fn validate_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty()
        || levels.iter().any(|&l| !(l > 0.0 && l < 100.0))
        || levels.windows(2).any(|w| !(w[1] > w[0]))
    {
        return Err(Error::param(
            "levels",
            "must be strictly increasing percentages in (0, 100)",
        ));
    }
    Ok(())
}

fn validate_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() || eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
        return Err(Error::param("epsilon_grid", "drift speeds must be positive"));
    }
    Ok(())
}

/// Largest `a` with `K0(a) >= target`, by linear interpolation on the grid.
fn invert_big_k0(table: &EscapeTable, target: f64) -> Option<f64> {
    let n = table.a_grid.len();
    let i = (0..n).rev().find(|&i| table.big_k0[i] >= target)?;
    if i == n - 1 || table.big_k0[i] == target {
        return Some(table.a_grid[i]);
    }
    let (k_lo, k_hi) = (table.big_k0[i], table.big_k0[i + 1]);
    let w = (k_lo - target) / (k_lo - k_hi);
    Some(table.a_grid[i] + w * (table.a_grid[i + 1] - table.a_grid[i]))
}

/// Quasi-static percentiles: for each `ε`, the `a` solving
/// `1 - exp(-K0(a)/ε) = level`.
pub fn percentile_surface(
    table: &EscapeTable,
    epsilon_grid: &[f64],
    levels: &[f64],
) -> Result<PercentileSurface> {
    validate_levels(levels)?;
    validate_epsilons(epsilon_grid)?;
    let a_at = epsilon_grid
        .iter()
        .map(|&eps| {
            levels
                .iter()
                .map(|&level| invert_big_k0(table, -eps * (-level / 100.0).ln_1p()))
                .collect()
        })
        .collect();
    Ok(PercentileSurface {
        epsilon_grid: epsilon_grid.to_vec(),
        levels: levels.to_vec(),
        a_at,
    })
}

/// Percentiles observed in drifting-ensemble simulations started at `a0`
/// and stopped at `a_stop`. Drift speed `i` runs with seed
/// `derive_seed(config.seed, i)`.
pub fn dynamic_percentile_surface(
    epsilon_grid: &[f64],
    levels: &[f64],
    config: &SimConfig,
    a0: f64,
    a_stop: f64,
    x_threshold: f64,
) -> Result<PercentileSurface> {
    validate_levels(levels)?;
    validate_epsilons(epsilon_grid)?;
    let fractions: Vec<f64> = levels.iter().map(|l| l / 100.0).collect();
    let a_at = epsilon_grid
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| -> Result<Vec<Option<f64>>> {
            let mut cfg = config.clone();
            cfg.seed = derive_seed(config.seed, i as u64);
            let params = NormalFormParams {
                a0,
                drift: Drift::Constant(eps),
                sigma: 1.0,
                x_threshold,
            };
            let trace = run_ensemble(&params, &cfg, StopRule::at_a(a_stop))?;
            Ok(trace.escape_a_at(&fractions))
        })
        .collect::<Result<_>>()?;
    Ok(PercentileSurface {
        epsilon_grid: epsilon_grid.to_vec(),
        levels: levels.to_vec(),
        a_at,
    })
}

/// Time, state, control and drift speed of the normal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFormQuantities {
    pub t: f64,
    pub x: f64,
    pub a: f64,
    pub epsilon: f64,
}

/// Change of units that turns noise amplitude `σ` into 1:
/// `t σ^{2/3}`, `x σ^{-2/3}`, `a σ^{-4/3}`, `ε σ^{-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rescaling {
    sigma: f64,
    s23: f64,
}

impl Rescaling {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("rescaling needs sigma > 0, got {sigma}")));
        }
        Ok(Rescaling {
            sigma,
            s23: sigma.cbrt().powi(2),
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn time(&self, t: f64) -> f64 {
        t * self.s23
    }

    pub fn state(&self, x: f64) -> f64 {
        x / self.s23
    }

    pub fn control(&self, a: f64) -> f64 {
        a / (self.s23 * self.s23)
    }

    pub fn drift(&self, epsilon: f64) -> f64 {
        epsilon / (self.sigma * self.sigma)
    }

    pub fn forward(&self, q: NormalFormQuantities) -> NormalFormQuantities {
        NormalFormQuantities {
            t: self.time(q.t),
            x: self.state(q.x),
            a: self.control(q.a),
            epsilon: self.drift(q.epsilon),
        }
    }

    pub fn inverse(&self, q: NormalFormQuantities) -> NormalFormQuantities {
        NormalFormQuantities {
            t: q.t / self.s23,
            x: q.x * self.s23,
            a: q.a * self.s23 * self.s23,
            epsilon: q.epsilon * self.sigma * self.sigma,
        }
    }
}

pub fn rescale_parameters(sigma: f64, q: NormalFormQuantities) -> Result<NormalFormQuantities> {
    Ok(Rescaling::new(sigma)?.forward(q))
}
