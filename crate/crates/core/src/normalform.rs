//! Fold-normal-form fit of a fingerprinted record and tipping forecasts.
//!
//! Near the fold the record is modelled as
//! `dz = [q a(t) - (z - Z0)²/q] dt + σ_z dW`. Linearizing at the stable
//! equilibrium gives decay rate `κ = 2 sqrt(a)`, so each window yields
//! `a_k = κ_k² / 4`. The equilibrium satisfies `Z_k = q κ_k / 2 + Z0`, which
//! fixes `q` as the ratio of the trend slope to the slope of `κ_k / 2`.
//! With `x = (z - Z0) / q` the record obeys the normal form with noise
//! `σ = σ_z / |q|`. The control is extrapolated past the cutoff with
//! increments drawn from the observed `ε_k = (a_k - a_{k+1}) / Δt`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::escape::{EscapeTable, Rescaling};
use crate::fingerprint::FingerprintResult;
use crate::sde::{independent_paths, Drift, EmpiricalDrift, NormalFormParams, SimConfig};
use crate::stats::{censored_quantile, fit_line, mean, sample_std, LineFit};
use crate::streams::stream;

/// Escape threshold in rescaled units.
pub const FORECAST_THRESHOLD: f64 = -5.0;

/// Rescaled Euler steps are shortened so that `h * 2 sqrt(a0) <= this`.
const MAX_STIFFNESS_STEP: f64 = 0.2;

/// How the per-window noise amplitudes are combined into one `σ_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseAggregate {
    /// Mean over all valid windows.
    #[default]
    Mean,
    /// The last valid window.
    AtCutoff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormEstimate {
    /// Window-center times of the valid entries.
    pub times: Vec<f64>,
    /// `a_k = κ_k² / 4`.
    pub a: Vec<f64>,
    /// Signed width of the equilibrium parabola; negative means the stable
    /// branch lies below `z0`.
    pub q: f64,
    pub z0: f64,
    pub sigma_z: f64,
    /// `σ_z / |q|`.
    pub sigma_nf: f64,
    pub epsilon_samples: Vec<f64>,
    /// Last valid `a_k`; the forecast starts here.
    pub a_last: f64,
    /// Center time of the window that produced `a_last`.
    pub anchor_time: f64,
    pub cutoff_time: f64,
    pub dt: f64,
    pub trend_fit: LineFit,
    pub half_kappa_fit: LineFit,
}

impl NormalFormEstimate {
    /// Rescaled drift speed `mean(ε) / σ²`.
    pub fn eps_over_sigma2(&self) -> f64 {
        mean(&self.epsilon_samples) / (self.sigma_nf * self.sigma_nf)
    }
}

pub fn extract_normal_form(
    fp: &FingerprintResult,
    aggregate: NoiseAggregate,
) -> Result<NormalFormEstimate> {
    let valid: Vec<usize> = fp
        .valid_indices()
        .filter(|&i| fp.sigma_z[i].is_finite())
        .collect();
    if valid.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            available: valid.len(),
        });
    }
    let times: Vec<f64> = valid.iter().map(|&i| fp.center_times[i]).collect();
    let half_kappa: Vec<f64> = valid.iter().map(|&i| fp.kappa[i] / 2.0).collect();
    let trend: Vec<f64> = valid.iter().map(|&i| fp.trend[i]).collect();

    let half_kappa_fit = fit_line(&times, &half_kappa).ok_or(Error::InsufficientData {
        needed: 3,
        available: valid.len(),
    })?;
    // Overlapping windows make neighbouring estimates correlated over about
    // one window length, so the OLS error is widened by sqrt(window).
    let stderr = half_kappa_fit.slope_stderr * (fp.window.max(1) as f64).sqrt();
    // κ must be falling, and distinguishably so
    if !(half_kappa_fit.slope < 0.0) || half_kappa_fit.slope.abs() < stderr {
        return Err(Error::NoApproach {
            slope: 2.0 * half_kappa_fit.slope,
            stderr: 2.0 * stderr,
        });
    }
    let trend_fit = fit_line(&times, &trend).expect("same abscissae as the decay-rate fit");

    let q = trend_fit.slope / half_kappa_fit.slope;
    // where the fitted κ/2 line reaches zero the trend line sits at Z0
    let z0 = trend_fit.intercept - q * half_kappa_fit.intercept;

    let sigma_z = match aggregate {
        NoiseAggregate::Mean => mean(&valid.iter().map(|&i| fp.sigma_z[i]).collect::<Vec<_>>()),
        NoiseAggregate::AtCutoff => fp.sigma_z[*valid.last().expect("non-empty")],
    };
    let a: Vec<f64> = half_kappa.iter().map(|h| h * h).collect();

    let mut epsilon_samples = Vec::new();
    for (j, w) in valid.windows(2).enumerate() {
        if w[1] == w[0] + 1 {
            epsilon_samples.push((a[j] - a[j + 1]) / (times[j + 1] - times[j]));
        }
    }

    Ok(NormalFormEstimate {
        a_last: *a.last().expect("non-empty"),
        anchor_time: *times.last().expect("non-empty"),
        times,
        a,
        q,
        z0,
        sigma_z,
        sigma_nf: sigma_z / q.abs(),
        epsilon_samples,
        cutoff_time: fp.cutoff_time,
        dt: fp.dt,
        trend_fit,
        half_kappa_fit,
    })
}

/// Empirical drift-speed distribution, in record units.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSampler {
    pub drift: EmpiricalDrift,
    pub mean: f64,
    pub std: f64,
    pub warnings: Vec<String>,
}

pub fn epsilon_distribution(estimate: &NormalFormEstimate, dt: f64) -> Result<EpsilonSampler> {
    if estimate.epsilon_samples.is_empty() {
        return Err(Error::InsufficientData {
            needed: 2,
            available: estimate.a.len().min(1),
        });
    }
    let drift = EmpiricalDrift::new(estimate.epsilon_samples.clone(), dt)?;
    let m = mean(drift.samples());
    let mut warnings = Vec::new();
    if !(m > 0.0) {
        warnings.push(format!(
            "mean drift speed {m:.3e} is not positive; the control may never reach the fold"
        ));
    }
    Ok(EpsilonSampler {
        mean: m,
        std: sample_std(drift.samples()),
        drift,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForecastMode {
    /// Direct simulation of the rescaled normal form.
    #[default]
    MonteCarlo,
    /// `P_esc(t) = 1 - E[exp(-∫ k0(a(s)) ds)]` over sampled control paths.
    QuasiStatic,
}

/// Cumulative distributions of the time the control reaches `a = 0` and of
/// the time of escape.
#[derive(Debug, Clone, PartialEq)]
pub struct EscapeForecast {
    pub mode: ForecastMode,
    /// Record time past the cutoff. The grid starts at the anchor window,
    /// so the first entries are negative.
    pub times: Vec<f64>,
    pub p_a: Vec<f64>,
    pub p_esc: Vec<f64>,
    /// 25/50/75% crossing times, past the cutoff.
    pub quartiles_a: [Option<f64>; 3],
    pub quartiles_esc: [Option<f64>; 3],
    /// Quartile (Bowley) skewness.
    pub skew_a: Option<f64>,
    pub skew_esc: Option<f64>,
    /// Euler step actually used, rescaled units.
    pub step: f64,
    pub flags: Vec<String>,
}

impl EscapeForecast {
    /// CSV with columns `time,P_a,P_esc`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,P_a,P_esc")?;
        for i in 0..self.times.len() {
            writeln!(out, "{},{},{}", self.times[i], self.p_a[i], self.p_esc[i])?;
        }
        Ok(())
    }
}

const QUARTILES: [f64; 3] = [0.25, 0.5, 0.75];
const OUTPUT_POINTS: usize = 1001;

fn bowley(q: &[Option<f64>; 3]) -> Option<f64> {
    let (a, b, c) = (q[0]?, q[1]?, q[2]?);
    (c > a).then(|| (c + a - 2.0 * b) / (c - a))
}

fn empirical_cdf(sorted: &[f64], total: usize, grid: &[f64]) -> Vec<f64> {
    grid.iter()
        .map(|&t| sorted.partition_point(|&e| e <= t) as f64 / total as f64)
        .collect()
}

fn sample_quartiles(sorted: &[f64], total: usize) -> [Option<f64>; 3] {
    QUARTILES.map(|p| censored_quantile(sorted, total, p))
}

fn grid_quartiles(grid: &[f64], cdf: &[f64]) -> [Option<f64>; 3] {
    QUARTILES.map(|p| {
        let k = cdf.iter().position(|&v| v >= p)?;
        if k == 0 {
            return Some(grid[0]);
        }
        let w = (p - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
        Some(grid[k - 1] + w * (grid[k] - grid[k - 1]))
    })
}

/// Forecasts `P_a` and `P_esc` up to `horizon` record time units after the
/// anchor. The simulation runs in rescaled units (σ = 1, threshold
/// `min(-5, -2 sqrt(a0))`) with
/// `config.ensemble_size` members; member `i` uses random stream `i`.
/// Quasi-static mode needs an escape table.
pub fn forecast(
    estimate: &NormalFormEstimate,
    sampler: &EpsilonSampler,
    config: &SimConfig,
    horizon: f64,
    mode: ForecastMode,
    table: Option<&EscapeTable>,
) -> Result<EscapeForecast> {
    config.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::param("horizon", "must be positive"));
    }
    let scale = Rescaling::new(estimate.sigma_nf)?;
    let a0 = scale.control(estimate.a_last);
    let inv_s2 = 1.0 / (estimate.sigma_nf * estimate.sigma_nf);
    let drift = sampler.drift.scaled(inv_s2, scale.time(1.0));
    let horizon_r = scale.time(horizon);

    let mut flags = sampler.warnings.clone();
    let step = config
        .step
        .min(MAX_STIFFNESS_STEP / (2.0 * a0.max(1.0).sqrt()));
    if step < config.step {
        flags.push(format!("step reduced to {step:.3e} for a stiff well"));
    }

    let grid_r: Vec<f64> = (0..OUTPUT_POINTS)
        .map(|i| horizon_r * i as f64 / (OUTPUT_POINTS - 1) as f64)
        .collect();
    let n = config.ensemble_size;

    let (mut a_zero, p_esc, mut quartiles_esc) = match mode {
        ForecastMode::MonteCarlo => {
            let params = NormalFormParams {
                a0,
                drift: Drift::Empirical(drift),
                sigma: 1.0,
                // a deep starting well puts the saddle below -5
                x_threshold: FORECAST_THRESHOLD.min(-2.0 * a0.max(0.0).sqrt()),
            };
            let mut cfg = config.clone();
            cfg.step = step;
            let events = independent_paths(&params, &cfg, horizon_r)?;
            let a_zero: Vec<f64> = events.iter().filter_map(|e| e.a_zero).collect();
            let mut esc: Vec<f64> = events.iter().filter_map(|e| e.escape.map(|x| x.0)).collect();
            esc.sort_by(f64::total_cmp);
            let p_esc = empirical_cdf(&esc, n, &grid_r);
            (a_zero, p_esc, sample_quartiles(&esc, n))
        }
        ForecastMode::QuasiStatic => {
            let table = table.ok_or_else(|| {
                Error::param("table", "quasi-static forecasts need an escape table")
            })?;
            quasi_static(a0, &drift, table, config, step, &grid_r)?
        }
    };
    a_zero.sort_by(f64::total_cmp);
    let p_a = empirical_cdf(&a_zero, n, &grid_r);
    let mut quartiles_a = sample_quartiles(&a_zero, n);
    if quartiles_esc.iter().all(Option::is_none) && mode == ForecastMode::QuasiStatic {
        quartiles_esc = grid_quartiles(&grid_r, &p_esc);
    }

    // rescaled time since the anchor -> record time past the cutoff
    let offset = estimate.anchor_time - estimate.cutoff_time;
    let to_record = |t: f64| offset + t / scale.time(1.0);
    for q in quartiles_a.iter_mut().chain(quartiles_esc.iter_mut()) {
        *q = q.map(to_record);
    }
    if quartiles_a[1].is_none() {
        flags.push("unresolved-median: P_a median not reached within the horizon".into());
    }
    if quartiles_esc[1].is_none() {
        flags.push("unresolved-escape-median: P_esc median not reached within the horizon".into());
    }

    Ok(EscapeForecast {
        mode,
        times: grid_r.iter().map(|&t| to_record(t)).collect(),
        p_a,
        p_esc,
        skew_a: bowley(&quartiles_a),
        skew_esc: bowley(&quartiles_esc),
        quartiles_a,
        quartiles_esc,
        step,
        flags,
    })
}

/// Per control path, accumulates `K(t) = ∫ k0(a(s)) ds` and averages the
/// survival `exp(-K)` across paths.
fn quasi_static(
    a0: f64,
    drift: &EmpiricalDrift,
    table: &EscapeTable,
    config: &SimConfig,
    step: f64,
    grid: &[f64],
) -> Result<(Vec<f64>, Vec<f64>, [Option<f64>; 3])> {
    let n = config.ensemble_size;
    let horizon = *grid.last().expect("non-empty grid");
    let steps = (horizon / step).ceil() as u64;
    let slot = |k: u64| (k as f64 * step / drift.interval() + 1e-9).floor();
    let mut survival_sum = vec![0.0; grid.len()];
    let mut a_zero = Vec::new();
    for i in 0..n {
        let mut rng = stream(config.seed, i as u64);
        let mut a = a0;
        let mut eps = 0.0;
        let mut big_k = 0.0;
        let mut crossed = a <= 0.0;
        if crossed {
            a_zero.push(0.0);
        }
        let mut g = 0;
        survival_sum[0] += 1.0;
        g += 1;
        for s in 0..steps {
            if s == 0 || slot(s) != slot(s - 1) {
                eps = drift.draw(&mut rng);
            }
            let a_next = a - eps * step;
            // trapezoid in time along the piecewise-linear control path
            big_k += 0.5 * step * (table.k0_at(a) + table.k0_at(a_next));
            a = a_next;
            let t = (s + 1) as f64 * step;
            if !crossed && a <= 0.0 {
                crossed = true;
                a_zero.push(t);
            }
            while g < grid.len() && grid[g] <= t + 1e-12 {
                survival_sum[g] += (-big_k).exp();
                g += 1;
            }
        }
        while g < grid.len() {
            survival_sum[g] += (-big_k).exp();
            g += 1;
        }
    }
    let p_esc: Vec<f64> = survival_sum.iter().map(|s| 1.0 - s / n as f64).collect();
    Ok((a_zero, p_esc, [None; 3]))
}

/// Machine-readable summary of a fit and forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub cutoff_time: Option<f64>,
    pub anchor_time: Option<f64>,
    pub q: Option<f64>,
    pub z0: Option<f64>,
    pub sigma_z: Option<f64>,
    pub sigma_nf: Option<f64>,
    pub a_last: Option<f64>,
    pub eps_mean: Option<f64>,
    pub eps_std: Option<f64>,
    pub eps_over_sigma2: Option<f64>,
    #[serde(rename = "Pa_quartiles")]
    pub pa_quartiles: [Option<f64>; 3],
    #[serde(rename = "Pesc_quartiles")]
    pub pesc_quartiles: [Option<f64>; 3],
    pub regime: Option<String>,
    pub skewness_note: Option<String>,
    pub slope_estimator: String,
    pub flags: Vec<String>,
    pub refusal: Option<String>,
}

/// Regime boundary on the rescaled drift speed.
pub const DRIFT_DOMINATED_ABOVE: f64 = 1.0;

pub fn forecast_report(forecast: &EscapeForecast, estimate: &NormalFormEstimate) -> Report {
    let eps_mean = mean(&estimate.epsilon_samples);
    let ratio = estimate.eps_over_sigma2();
    let regime = if ratio >= DRIFT_DOMINATED_ABOVE {
        "drift-dominated"
    } else {
        "noise-dominated"
    };
    let skewness_note = match (forecast.skew_a, forecast.skew_esc) {
        (Some(a), Some(e)) => Some(format!(
            "quartile skewness P_a {a:.2}, P_esc {e:.2}; medians are the robust point estimates"
        )),
        _ => None,
    };
    let mut flags = forecast.flags.clone();
    flags.push(regime.to_string());
    if let (Some(ma), Some(me)) = (forecast.quartiles_a[1], forecast.quartiles_esc[1]) {
        flags.push(if me < ma {
            "early-escape: P_esc median precedes P_a median".to_string()
        } else {
            "late-escape: P_esc median follows P_a median".to_string()
        });
    }
    Report {
        cutoff_time: Some(estimate.cutoff_time),
        anchor_time: Some(estimate.anchor_time),
        q: Some(estimate.q),
        z0: Some(estimate.z0),
        sigma_z: Some(estimate.sigma_z),
        sigma_nf: Some(estimate.sigma_nf),
        a_last: Some(estimate.a_last),
        eps_mean: Some(eps_mean),
        eps_std: Some(sample_std(&estimate.epsilon_samples)),
        eps_over_sigma2: Some(ratio),
        pa_quartiles: forecast.quartiles_a,
        pesc_quartiles: forecast.quartiles_esc,
        regime: Some(regime.to_string()),
        skewness_note,
        slope_estimator: "ordinary least squares over valid windows".to_string(),
        flags,
        refusal: None,
    }
}

impl Report {
    /// Report for a prediction that was refused.
    pub fn refused(cutoff_time: Option<f64>, reason: impl Into<String>) -> Self {
        Report {
            cutoff_time,
            anchor_time: None,
            q: None,
            z0: None,
            sigma_z: None,
            sigma_nf: None,
            a_last: None,
            eps_mean: None,
            eps_std: None,
            eps_over_sigma2: None,
            pa_quartiles: [None; 3],
            pesc_quartiles: [None; 3],
            regime: None,
            skewness_note: None,
            slope_estimator: "ordinary least squares over valid windows".to_string(),
            flags: vec!["refused".to_string()],
            refusal: Some(reason.into()),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Two-column `field,value` table.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        fn opt(v: Option<f64>) -> String {
            v.map_or_else(String::new, |x| x.to_string())
        }
        writeln!(out, "field,value")?;
        let scalars = [
            ("cutoff_time", self.cutoff_time),
            ("anchor_time", self.anchor_time),
            ("q", self.q),
            ("z0", self.z0),
            ("sigma_z", self.sigma_z),
            ("sigma_nf", self.sigma_nf),
            ("a_last", self.a_last),
            ("eps_mean", self.eps_mean),
            ("eps_std", self.eps_std),
            ("eps_over_sigma2", self.eps_over_sigma2),
        ];
        for (name, v) in scalars {
            writeln!(out, "{name},{}", opt(v))?;
        }
        for (i, p) in ["25", "50", "75"].iter().enumerate() {
            writeln!(out, "Pa_t{p},{}", opt(self.pa_quartiles[i]))?;
        }
        for (i, p) in ["25", "50", "75"].iter().enumerate() {
            writeln!(out, "Pesc_t{p},{}", opt(self.pesc_quartiles[i]))?;
        }
        writeln!(out, "regime,{}", self.regime.as_deref().unwrap_or(""))?;
        writeln!(out, "flags,\"{}\"", self.flags.join("; ").replace('"', "'"))?;
        writeln!(out, "refusal,\"{}\"", self.refusal.as_deref().unwrap_or("").replace('"', "'"))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic_fp(n: usize, trend: impl Fn(f64) -> f64, half_kappa: impl Fn(f64) -> f64) -> FingerprintResult {
        let dt = 1.0;
        let t: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let kappa: Vec<f64> = t.iter().map(|&s| 2.0 * half_kappa(s)).collect();
        let c: Vec<f64> = kappa.iter().map(|k| (-k * dt).exp()).collect();
        FingerprintResult {
            dt,
            trend: t.iter().map(|&s| trend(s)).collect(),
            sigma_z: vec![0.5; n],
            theta: vec![0.1; n],
            valid: c.iter().map(|&c| c > 0.0 && c < 1.0).collect(),
            center_times: t,
            c,
            kappa,
            cutoff_time: n as f64,
            window: 1,
        }
    }

    #[test]
    fn slope_ratio_gives_q() {
        // Z_k = 2t and κ/2 falling at 0.004 per unit time: |q| = 500
        let fp = synthetic_fp(100, |t| -2.0 * t + 7.0, |t| 0.9 - 0.004 * t);
        let est = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
        assert!((est.q - 500.0).abs() < 1e-6);
        // Z0 = Z at the time κ/2 reaches zero (t = 225)
        assert!((est.z0 - (-2.0 * 225.0 + 7.0)).abs() < 1e-6);
        assert!((est.sigma_nf - 0.5 / 500.0).abs() < 1e-15);
    }

    #[test]
    fn epsilon_increments() {
        let fp = synthetic_fp(50, |t| 1.0 - 0.01 * t, |t| 1.0 - 0.01 * t);
        let est = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
        assert_eq!(est.epsilon_samples.len(), 49);
        for (j, e) in est.epsilon_samples.iter().enumerate() {
            assert!((e - (est.a[j] - est.a[j + 1])).abs() < 1e-15);
        }
        assert_eq!(est.a_last, *est.a.last().unwrap());
        assert_eq!(est.anchor_time, 49.0);
    }

    #[test]
    fn flat_decay_rate_is_refused() {
        let fp = synthetic_fp(50, |t| 1.0 + 0.0 * t, |t| 0.5 + 1e-3 * ((t * 1.7).sin()));
        assert!(matches!(
            extract_normal_form(&fp, NoiseAggregate::Mean),
            Err(Error::NoApproach { .. })
        ));
    }

    #[test]
    fn constant_a_warns() {
        let mut fp = synthetic_fp(20, |t| 1.0 - 0.01 * t, |t| 1.0 - 0.01 * t);
        let est = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
        let mut flat = est.clone();
        flat.epsilon_samples = vec![0.0; 19];
        let s = epsilon_distribution(&flat, 1.0).unwrap();
        assert_eq!(s.mean, 0.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.warnings.len(), 1);
        fp.valid = vec![false; 20];
        assert!(extract_normal_form(&fp, NoiseAggregate::Mean).is_err());
    }

    #[test]
    fn refused_report_round_trips() {
        let r = Report::refused(Some(12.5), "no approach to a fold");
        let back = Report::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let json: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in [
            "cutoff_time",
            "q",
            "z0",
            "sigma_z",
            "sigma_nf",
            "eps_mean",
            "eps_std",
            "eps_over_sigma2",
            "Pa_quartiles",
            "Pesc_quartiles",
            "flags",
        ] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn noise_free_escape_follows_fold() {
        // deep well, steady drift, almost no noise
        let fp = synthetic_fp(40, |t| 1.0 - 0.01 * t, |t| 1.0 - 0.01 * t);
        let mut est = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
        est.sigma_nf = 1e-3;
        let sampler = epsilon_distribution(&est, 1.0).unwrap();
        let mut cfg = SimConfig::new(1);
        cfg.ensemble_size = 50;
        let fc = forecast(&est, &sampler, &cfg, 200.0, ForecastMode::MonteCarlo, None).unwrap();
        let ma = fc.quartiles_a[1].unwrap();
        let me = fc.quartiles_esc[1].unwrap();
        assert!(me >= ma, "escape {me} before fold {ma}");
        assert!(fc.p_a.windows(2).all(|w| w[1] >= w[0]));
        assert!(fc.p_esc.windows(2).all(|w| w[1] >= w[0]));
    }
}
