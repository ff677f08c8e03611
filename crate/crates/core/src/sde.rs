//! Euler–Maruyama integration of the noisy drifting saddle-node normal form
//!
//! ```text
//! dx = (a - x²) dt + σ dW,    da = -ε dt
//! ```
//!
//! for single paths, for fixed-size ensembles that put escaped members back
//! into the well, and for independent path samples.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::streams::{stream, StreamRng, CONTROL_STREAM};
use crate::timeseries::TimeSeries;

/// Empirical distribution of drift speeds, resampled i.i.d. once per
/// `interval` of simulated time.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDrift {
    samples: Arc<[f64]>,
    interval: f64,
}

impl EmpiricalDrift {
    pub fn new(samples: Vec<f64>, interval: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::param("epsilon samples", "empty"));
        }
        if samples.iter().any(|e| !e.is_finite()) {
            return Err(Error::param("epsilon samples", "non-finite entry"));
        }
        if !(interval > 0.0) {
            return Err(Error::param("interval", "must be positive"));
        }
        Ok(EmpiricalDrift {
            samples: samples.into(),
            interval,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        self.samples[rng.random_range(0..self.samples.len())]
    }

    /// The same distribution with every sample scaled by `factor` and the
    /// hold interval scaled by `time_factor`.
    pub fn scaled(&self, factor: f64, time_factor: f64) -> Self {
        EmpiricalDrift {
            samples: self.samples.iter().map(|e| e * factor).collect(),
            interval: self.interval * time_factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Drift {
    Constant(f64),
    Empirical(EmpiricalDrift),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormParams {
    /// Control value at t = 0.
    pub a0: f64,
    pub drift: Drift,
    pub sigma: f64,
    /// A member counts as escaped once `x < x_threshold`.
    pub x_threshold: f64,
}

impl NormalFormParams {
    /// Rescaled form (σ = 1) with constant drift and threshold -5.
    pub fn rescaled(a0: f64, epsilon: f64) -> Self {
        NormalFormParams {
            a0,
            drift: Drift::Constant(epsilon),
            sigma: 1.0,
            x_threshold: -5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::param("sigma", format!("must be >= 0, got {}", self.sigma)));
        }
        if !self.a0.is_finite() || !self.x_threshold.is_finite() {
            return Err(Error::param("a0/x_threshold", "must be finite"));
        }
        if self.a0 > 0.0 && self.x_threshold >= -self.a0.sqrt() {
            return Err(Error::param(
                "x_threshold",
                format!(
                    "{} is not below the saddle at {}",
                    self.x_threshold,
                    -self.a0.sqrt()
                ),
            ));
        }
        if let Drift::Constant(e) = self.drift {
            if !e.is_finite() {
                return Err(Error::param("epsilon", "must be finite"));
            }
        }
        Ok(())
    }

    /// Bottom of the well, or 0 once the well has vanished.
    pub fn node(a: f64) -> f64 {
        if a > 0.0 {
            a.sqrt()
        } else {
            0.0
        }
    }
}

/// Variance used when re-placing a member around the node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NodeVariance {
    /// `σ² / sqrt(a)`, the value quoted with the original method.
    #[default]
    Stated,
    /// `σ² / (4 sqrt(a))`, the exact stationary variance of the
    /// linearization `dx = -2 sqrt(a) x dt + σ dW`.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReinitMode {
    /// Copy the state of a uniformly chosen surviving member.
    #[default]
    ResampleSurvivors,
    /// Draw from a normal centred at `sqrt(a)`; falls back to resampling
    /// survivors once `a <= 0`.
    GaussianAtNode(NodeVariance),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Euler–Maruyama step `h`.
    pub step: f64,
    pub ensemble_size: usize,
    pub seed: u64,
    pub reinit: ReinitMode,
    /// Advance members on the rayon pool. Results are identical either way.
    pub parallel: bool,
}

impl SimConfig {
    pub fn new(seed: u64) -> Self {
        SimConfig {
            step: 0.01,
            ensemble_size: 400,
            seed,
            reinit: ReinitMode::ResampleSurvivors,
            parallel: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::param("step", format!("must be positive, got {}", self.step)));
        }
        if self.ensemble_size < 2 {
            return Err(Error::param("ensemble_size", "must be at least 2"));
        }
        Ok(())
    }
}

/// `count` Wiener increments over steps of length `step`.
pub fn wiener_increments<R: Rng>(count: usize, step: f64, rng: &mut R) -> Vec<f64> {
    let scale = step.sqrt();
    (0..count)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

#[derive(Debug, Clone)]
struct Member {
    x: f64,
    a: f64,
    eps: f64,
    rng: StreamRng,
}

/// Drift value and redraw schedule shared by all members.
#[derive(Debug, Clone)]
struct Stepper {
    h: f64,
    sqrt_h: f64,
    sigma: f64,
    drift: Drift,
}

impl Stepper {
    fn new(params: &NormalFormParams, h: f64) -> Self {
        Stepper {
            h,
            sqrt_h: h.sqrt(),
            sigma: params.sigma,
            drift: params.drift.clone(),
        }
    }

    /// True if a new drift value is due at the start of step `n`.
    fn redraw_due(&self, n: u64) -> bool {
        match &self.drift {
            Drift::Constant(_) => false,
            Drift::Empirical(d) => {
                let slot = |k: u64| (k as f64 * self.h / d.interval() + 1e-9).floor();
                n == 0 || slot(n) != slot(n - 1)
            }
        }
    }

    fn initial_eps(&self) -> f64 {
        match self.drift {
            Drift::Constant(e) => e,
            Drift::Empirical(_) => 0.0,
        }
    }

    #[inline]
    fn advance(&self, m: &mut Member, redraw: bool) {
        if redraw {
            if let Drift::Empirical(d) = &self.drift {
                m.eps = d.draw(&mut m.rng);
            }
        }
        let xi: f64 = m.rng.sample(StandardNormal);
        m.x += (m.a - m.x * m.x) * self.h + self.sigma * self.sqrt_h * xi;
        m.a -= m.eps * self.h;
    }
}

/// One sample path, recorded every `stride` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// `(t, x, a)` triples, starting with the initial state.
    pub points: Vec<(f64, f64, f64)>,
    pub escaped_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOptions {
    /// Initial state; defaults to the bottom of the well.
    pub x0: Option<f64>,
    pub stride: usize,
    /// Random stream id within the configured seed.
    pub stream: u64,
}

impl Default for PathOptions {
    fn default() -> Self {
        PathOptions {
            x0: None,
            stride: 1,
            stream: 0,
        }
    }
}

/// Integrates one path until `t_end` or the first threshold crossing.
pub fn simulate_path(
    params: &NormalFormParams,
    config: &SimConfig,
    t_end: f64,
    options: PathOptions,
) -> Result<Path> {
    if !(config.step > 0.0) {
        return Err(Error::param("step", "must be positive"));
    }
    if !(t_end > 0.0) {
        return Err(Error::param("t_end", "must be positive"));
    }
    if options.stride == 0 {
        return Err(Error::param("stride", "must be at least 1"));
    }
    params.validate()?;
    let stepper = Stepper::new(params, config.step);
    let mut m = Member {
        x: options.x0.unwrap_or(NormalFormParams::node(params.a0)),
        a: params.a0,
        eps: stepper.initial_eps(),
        rng: stream(config.seed, options.stream),
    };
    let steps = (t_end / config.step).round() as u64;
    let mut points = vec![(0.0, m.x, m.a)];
    let mut escaped_at = None;
    for n in 0..steps {
        stepper.advance(&mut m, stepper.redraw_due(n));
        let t = (n + 1) as f64 * config.step;
        if m.x < params.x_threshold {
            points.push((t, m.x, m.a));
            escaped_at = Some(t);
            break;
        }
        if !m.x.is_finite() {
            return Err(Error::Diverged { t, x: m.x });
        }
        if (n + 1) % options.stride as u64 == 0 {
            points.push((t, m.x, m.a));
        }
    }
    Ok(Path { points, escaped_at })
}

/// When an ensemble run stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Stop once the (mean) control value drops to or below this.
    pub a_min: Option<f64>,
    /// Stop at this time.
    pub t_max: Option<f64>,
}

impl StopRule {
    pub fn at_a(a: f64) -> Self {
        StopRule {
            a_min: Some(a),
            t_max: None,
        }
    }

    pub fn at_time(t: f64) -> Self {
        StopRule {
            a_min: None,
            t_max: Some(t),
        }
    }
}

/// Outcome of one ensemble step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub escaped: usize,
    pub depleted: bool,
}

/// A fixed-size ensemble that re-initializes escaped members.
#[derive(Debug, Clone)]
pub struct Ensemble {
    stepper: Stepper,
    x_threshold: f64,
    reinit: ReinitMode,
    parallel: bool,
    members: Vec<Member>,
    control: StreamRng,
    steps_taken: u64,
    escaped_scratch: Vec<usize>,
    survivors_scratch: Vec<usize>,
}

impl Ensemble {
    pub fn new(params: &NormalFormParams, config: &SimConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let stepper = Stepper::new(params, config.step);
        let x0 = NormalFormParams::node(params.a0);
        let members = (0..config.ensemble_size)
            .map(|i| Member {
                x: x0,
                a: params.a0,
                eps: stepper.initial_eps(),
                rng: stream(config.seed, i as u64),
            })
            .collect();
        Ok(Ensemble {
            stepper,
            x_threshold: params.x_threshold,
            reinit: config.reinit,
            parallel: config.parallel,
            members,
            control: stream(config.seed, CONTROL_STREAM),
            steps_taken: 0,
            escaped_scratch: Vec::new(),
            survivors_scratch: Vec::new(),
        })
    }

    pub fn time(&self) -> f64 {
        self.steps_taken as f64 * self.stepper.h
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn mean_a(&self) -> f64 {
        match self.stepper.drift {
            Drift::Constant(_) => self.members[0].a,
            Drift::Empirical(_) => {
                self.members.iter().map(|m| m.a).sum::<f64>() / self.members.len() as f64
            }
        }
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.members.iter().map(|m| m.x)
    }

    /// Advances every member by one step, counts threshold crossings and
    /// re-initializes the escaped members in index order.
    pub fn step(&mut self) -> StepOutcome {
        let redraw = self.stepper.redraw_due(self.steps_taken);
        let stepper = &self.stepper;
        if self.parallel {
            self.members
                .par_iter_mut()
                .for_each(|m| stepper.advance(m, redraw));
        } else {
            for m in &mut self.members {
                stepper.advance(m, redraw);
            }
        }
        self.steps_taken += 1;

        self.escaped_scratch.clear();
        self.survivors_scratch.clear();
        for (i, m) in self.members.iter().enumerate() {
            // NaN only arises from overflow far beyond the threshold
            if m.x < self.x_threshold || m.x.is_nan() {
                self.escaped_scratch.push(i);
            } else {
                self.survivors_scratch.push(i);
            }
        }
        let escaped = self.escaped_scratch.len();
        if escaped == self.members.len() {
            return StepOutcome {
                escaped,
                depleted: true,
            };
        }
        for k in 0..escaped {
            let i = self.escaped_scratch[k];
            self.reinitialize(i);
        }
        StepOutcome {
            escaped,
            depleted: false,
        }
    }

    fn reinitialize(&mut self, i: usize) {
        let a = self.members[i].a;
        match self.reinit {
            ReinitMode::GaussianAtNode(variance) if a > 0.0 => {
                let var = match variance {
                    NodeVariance::Stated => self.stepper.sigma.powi(2) / a.sqrt(),
                    NodeVariance::Linearized => self.stepper.sigma.powi(2) / (4.0 * a.sqrt()),
                };
                let xi: f64 = self.control.sample(StandardNormal);
                self.members[i].x = a.sqrt() + var.sqrt() * xi;
            }
            _ => {
                let pick = self.control.random_range(0..self.survivors_scratch.len());
                let src = self.survivors_scratch[pick];
                let (x, a, eps) = {
                    let s = &self.members[src];
                    (s.x, s.a, s.eps)
                };
                let m = &mut self.members[i];
                m.x = x;
                m.a = a;
                m.eps = eps;
            }
        }
    }
}

/// Per-step record of an ensemble run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleTrace {
    pub ensemble_size: usize,
    pub times: Vec<f64>,
    pub a_values: Vec<f64>,
    pub escape_counts: Vec<usize>,
    /// Running sum of `ln((N - N_esc) / N)`.
    pub survivor_log: Vec<f64>,
    /// Every member escaped in the final step.
    pub depleted: bool,
}

impl EnsembleTrace {
    /// `1 - Π (N - N_esc)/N` after each step.
    pub fn cumulative_escape(&self) -> Vec<f64> {
        self.survivor_log.iter().map(|l| -(l.exp_m1())).collect()
    }

    /// Control values at which the cumulative escape probability first
    /// reaches each level (a fraction in (0, 1)), interpolated between steps.
    pub fn escape_a_at(&self, levels: &[f64]) -> Vec<Option<f64>> {
        self.crossings(levels, &self.a_values)
    }

    /// Times at which the cumulative escape probability first reaches each level.
    pub fn escape_time_at(&self, levels: &[f64]) -> Vec<Option<f64>> {
        self.crossings(levels, &self.times)
    }

    fn crossings(&self, levels: &[f64], axis: &[f64]) -> Vec<Option<f64>> {
        let p = self.cumulative_escape();
        levels
            .iter()
            .map(|&level| {
                let k = p.iter().position(|&v| v >= level)?;
                if k == 0 {
                    return Some(axis[0]);
                }
                let (p0, p1) = (p[k - 1], p[k]);
                let w = if p1 > p0 { (level - p0) / (p1 - p0) } else { 1.0 };
                Some(axis[k - 1] + w * (axis[k] - axis[k - 1]))
            })
            .collect()
    }

    /// CSV with columns `t,a,n_escaped,cum_escape_prob`, every `stride` steps.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> Result<()> {
        writeln!(out, "t,a,n_escaped,cum_escape_prob")?;
        let p = self.cumulative_escape();
        let stride = stride.max(1);
        let n = self.times.len();
        let mut pending = 0usize;
        for i in 0..n {
            pending += self.escape_counts[i];
            if (i + 1) % stride == 0 || i + 1 == n {
                writeln!(out, "{},{},{},{}", self.times[i], self.a_values[i], pending, p[i])?;
                pending = 0;
            }
        }
        Ok(())
    }
}

/// Runs a re-initializing ensemble until the stop rule fires or the
/// ensemble is depleted in a single step.
pub fn run_ensemble(
    params: &NormalFormParams,
    config: &SimConfig,
    stop: StopRule,
) -> Result<EnsembleTrace> {
    if stop.a_min.is_none() && stop.t_max.is_none() {
        return Err(Error::param("stop", "needs an a or time limit"));
    }
    if let (Some(a_min), None, Drift::Constant(e)) = (stop.a_min, stop.t_max, &params.drift) {
        if *e <= 0.0 && params.a0 > a_min {
            return Err(Error::param(
                "stop",
                "control never reaches the stop value without positive drift",
            ));
        }
    }
    let mut ens = Ensemble::new(params, config)?;
    let mut trace = EnsembleTrace {
        ensemble_size: config.ensemble_size,
        ..Default::default()
    };
    let n = config.ensemble_size as f64;
    let mut log_survival = 0.0;
    loop {
        if stop.a_min.is_some_and(|a| ens.mean_a() <= a)
            || stop.t_max.is_some_and(|t| ens.time() >= t - 0.5 * config.step)
        {
            break;
        }
        let out = ens.step();
        trace.times.push(ens.time());
        trace.a_values.push(ens.mean_a());
        trace.escape_counts.push(out.escaped);
        if out.depleted {
            trace.survivor_log.push(f64::NEG_INFINITY);
            trace.depleted = true;
            break;
        }
        log_survival += ((n - out.escaped as f64) / n).ln();
        trace.survivor_log.push(log_survival);
    }
    Ok(trace)
}

/// First events of one independent (never re-initialized) member.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathEvents {
    /// `(t, a)` at the first threshold crossing.
    pub escape: Option<(f64, f64)>,
    /// First time the control value reached zero.
    pub a_zero: Option<f64>,
}

/// Integrates `config.ensemble_size` independent members up to `horizon`,
/// recording each member's first escape and first crossing of `a = 0`.
/// Member `i` uses stream `i`; after escaping only its control value is
/// advanced further.
pub fn independent_paths(
    params: &NormalFormParams,
    config: &SimConfig,
    horizon: f64,
) -> Result<Vec<PathEvents>> {
    params.validate()?;
    config.validate()?;
    if !(horizon > 0.0) {
        return Err(Error::param("horizon", "must be positive"));
    }
    let stepper = Stepper::new(params, config.step);
    let steps = (horizon / config.step).ceil() as u64;
    let run = |i: usize| -> PathEvents {
        let mut m = Member {
            x: NormalFormParams::node(params.a0),
            a: params.a0,
            eps: stepper.initial_eps(),
            rng: stream(config.seed, i as u64),
        };
        let mut ev = PathEvents::default();
        if m.a <= 0.0 {
            ev.a_zero = Some(0.0);
        }
        for n in 0..steps {
            let t = (n + 1) as f64 * stepper.h;
            if ev.escape.is_none() {
                stepper.advance(&mut m, stepper.redraw_due(n));
                if m.x < params.x_threshold || m.x.is_nan() {
                    ev.escape = Some((t, m.a));
                }
            } else {
                // keep the random sequence aligned with the unescaped case
                if stepper.redraw_due(n) {
                    if let Drift::Empirical(d) = &stepper.drift {
                        m.eps = d.draw(&mut m.rng);
                    }
                }
                m.a -= m.eps * stepper.h;
            }
            if ev.a_zero.is_none() && m.a <= 0.0 {
                ev.a_zero = Some(t);
            }
            if ev.escape.is_some() && ev.a_zero.is_some() {
                break;
            }
        }
        ev
    };
    Ok(if config.parallel {
        (0..config.ensemble_size).into_par_iter().map(run).collect()
    } else {
        (0..config.ensemble_size).map(run).collect()
    })
}

/// Sampling of a simulated path as an observed record `z = z0 + q x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSpec {
    pub q: f64,
    pub z0: f64,
    /// Must be a whole number of integration steps.
    pub sample_interval: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRecord {
    pub series: TimeSeries,
    /// Escape time of the underlying path, if it crossed the threshold.
    pub escaped_at: Option<f64>,
    /// Control value at the escape.
    pub escape_a: Option<f64>,
}

/// Simulates one path on stream 0 and samples it every `sample_interval`.
/// The record ends at the last regular sample before an escape.
pub fn synthetic_record(
    params: &NormalFormParams,
    config: &SimConfig,
    spec: &RecordSpec,
) -> Result<SyntheticRecord> {
    if !(spec.q != 0.0) || !spec.q.is_finite() || !spec.z0.is_finite() {
        return Err(Error::param("q/z0", "q must be finite and non-zero, z0 finite"));
    }
    let ratio = spec.sample_interval / config.step;
    let stride = ratio.round();
    if !(stride >= 1.0) || (ratio - stride).abs() > 1e-6 * stride {
        return Err(Error::param(
            "sample_interval",
            format!("must be a whole multiple of the step {}", config.step),
        ));
    }
    let path = simulate_path(
        params,
        config,
        spec.t_end,
        PathOptions {
            stride: stride as usize,
            ..PathOptions::default()
        },
    )?;
    let mut points = path.points;
    let mut escape_a = None;
    if path.escaped_at.is_some() {
        escape_a = points.pop().map(|p| p.2);
    }
    let series = TimeSeries::from_points(
        points
            .iter()
            .map(|&(t, x, _)| (t, spec.z0 + spec.q * x))
            .collect(),
    )?;
    Ok(SyntheticRecord {
        series,
        escaped_at: path.escaped_at,
        escape_a,
    })
}
