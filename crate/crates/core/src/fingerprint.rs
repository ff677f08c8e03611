//! Sliding-window AR(1) propagator estimation ("degenerate fingerprinting").
//!
//! Each window of `w = 2m + 1` detrended samples is fitted with
//! `y[j+1] = c * y[j]` (no intercept). The propagator `c` is converted to a
//! linear decay rate `κ = -ln(c) / dt` and, together with the residual spread
//! `θ`, to the amplitude of the Ornstein–Uhlenbeck noise that discretizes to
//! that AR(1) map, `σ_z = θ * sqrt(2κ / (1 - c²))`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::stats::fit_line;
use crate::timeseries::{detrend_gaussian, interpolate_uniform, TimeSeries, UniformSeries};

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintConfig {
    /// `m`, so each window holds `2m + 1` samples.
    pub half_width: usize,
    /// Gaussian kernel bandwidth `d`, in record time units.
    pub bandwidth: f64,
    /// Last usable sample ("today"). Later samples are ignored entirely,
    /// including by the detrending kernel.
    pub cutoff_index: Option<usize>,
}

impl FingerprintConfig {
    pub fn new(half_width: usize, bandwidth: f64) -> Self {
        FingerprintConfig {
            half_width,
            bandwidth,
            cutoff_index: None,
        }
    }

    pub fn window(&self) -> usize {
        2 * self.half_width + 1
    }

    /// Configuration for an odd window size `w`.
    pub fn with_window(window: usize, bandwidth: f64) -> Result<Self> {
        if window < 3 || window % 2 == 0 {
            return Err(Error::param(
                "window",
                format!("must be odd and at least 3, got {window}"),
            ));
        }
        Ok(Self::new(window / 2, bandwidth))
    }
}

/// Per-window estimates aligned to window-center times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FingerprintResult {
    pub dt: f64,
    pub center_times: Vec<f64>,
    pub c: Vec<f64>,
    pub theta: Vec<f64>,
    /// Kernel average `Z_k` at the window center.
    pub trend: Vec<f64>,
    /// `-ln(c) / dt`; NaN where `c <= 0`.
    pub kappa: Vec<f64>,
    /// NaN where undefined (`c` outside `(0, 1)`).
    pub sigma_z: Vec<f64>,
    /// True iff `0 < c < 1`.
    pub valid: Vec<bool>,
    /// Time of the last sample that entered the analysis.
    pub cutoff_time: f64,
    /// Window size in samples; neighbouring entries share all but one sample.
    pub window: usize,
}

impl FingerprintResult {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn valid_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.valid
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
    }

    /// CSV with columns `center_time,c,theta,kappa,sigma_z,trend,valid_flag`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "center_time,c,theta,kappa,sigma_z,trend,valid_flag")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                self.center_times[i],
                self.c[i],
                self.theta[i],
                self.kappa[i],
                self.sigma_z[i],
                self.trend[i],
                u8::from(self.valid[i])
            )?;
        }
        Ok(())
    }
}

/// Least-squares propagator and residual spread for the window
/// `j = center - m ..= center + m`.
pub fn fit_ar1_window(residual: &[f64], center: usize, m: usize) -> Result<(f64, f64)> {
    if center < m || center + m + 1 >= residual.len() {
        return Err(Error::InsufficientData {
            needed: center + m + 2,
            available: residual.len(),
        });
    }
    let window = &residual[center - m..=center + m + 1];
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for pair in window.windows(2) {
        sxx += pair[0] * pair[0];
        sxy += pair[0] * pair[1];
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateFit { center });
    }
    let c = sxy / sxx;

    let n = (2 * m + 1) as f64;
    let mut mean = 0.0;
    for pair in window.windows(2) {
        mean += pair[1] - c * pair[0];
    }
    mean /= n;
    let mut var = 0.0;
    for pair in window.windows(2) {
        let e = pair[1] - c * pair[0] - mean;
        var += e * e;
    }
    Ok((c, (var / n).sqrt()))
}

/// Decay rate and OU noise amplitude for one `(c, θ)` pair.
pub fn ou_parameters(c: f64, theta: f64, dt: f64) -> (f64, f64) {
    let kappa = if c > 0.0 { -c.ln() / dt } else { f64::NAN };
    let sigma_z = if c > 0.0 && c < 1.0 {
        theta * (2.0 * kappa / (1.0 - c * c)).sqrt()
    } else {
        f64::NAN
    };
    (kappa, sigma_z)
}

/// Detrends `series` and fits every full window whose front end does not
/// pass the cutoff. Windows advance one sample at a time.
pub fn fingerprint(series: &UniformSeries, config: &FingerprintConfig) -> Result<FingerprintResult> {
    let m = config.half_width;
    if m == 0 {
        return Err(Error::param("half_width", "must be at least 1"));
    }
    let last = config
        .cutoff_index
        .map_or(series.len() - 1, |c| c.min(series.len() - 1));
    let used = UniformSeries::new(series.t0, series.dt, series.values[..=last].to_vec())?;
    let needed = 2 * m + 2;
    if used.len() < needed {
        return Err(Error::InsufficientData {
            needed,
            available: used.len(),
        });
    }
    let detrended = detrend_gaussian(&used, config.bandwidth)?;
    let y = &detrended.residual;
    // a flat record leaves only rounding noise after detrending
    let scale = used.values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if y.iter().all(|r| r.abs() <= 1e-12 * scale) {
        return Err(Error::DegenerateFit { center: m });
    }

    let centers: Vec<usize> = (m..used.len() - m - 1).collect();
    let fits: Vec<(f64, f64)> = centers
        .par_iter()
        .map(|&k| fit_ar1_window(y, k, m))
        .collect::<Result<_>>()?;

    let mut out = FingerprintResult {
        dt: series.dt,
        cutoff_time: used.time(last),
        window: config.window(),
        ..Default::default()
    };
    for (&k, &(c, theta)) in centers.iter().zip(&fits) {
        let (kappa, sigma_z) = ou_parameters(c, theta, series.dt);
        out.center_times.push(used.time(k));
        out.c.push(c);
        out.theta.push(theta);
        out.trend.push(detrended.trend[k]);
        out.kappa.push(kappa);
        out.sigma_z.push(sigma_z);
        out.valid.push(c > 0.0 && c < 1.0);
    }
    Ok(out)
}

/// Interpolates a raw record onto spacing `dt`, restricted to samples at or
/// before `cutoff_time`, and fingerprints it.
pub fn fingerprint_record(
    record: &TimeSeries,
    dt: f64,
    cutoff_time: Option<f64>,
    config: &FingerprintConfig,
) -> Result<FingerprintResult> {
    let record = match cutoff_time {
        Some(t) => record.truncate_after(t)?,
        None => record.clone(),
    };
    let uniform = interpolate_uniform(&record, dt)?;
    fingerprint(&uniform, config)
}

/// Linear-extrapolation baseline: where a straight line through the valid
/// propagators reaches `c = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    /// Crossing time; `+∞` when the fitted slope is not positive.
    pub t_hat: f64,
    pub slope: f64,
}

pub fn extrapolate_propagator(result: &FingerprintResult) -> Result<Extrapolation> {
    let (t, c): (Vec<f64>, Vec<f64>) = result
        .valid_indices()
        .map(|i| (result.center_times[i], result.c[i]))
        .unzip();
    let line = fit_line(&t, &c).ok_or(Error::InsufficientData {
        needed: 2,
        available: t.len(),
    })?;
    let t_hat = if line.slope > 0.0 {
        (1.0 - line.intercept) / line.slope
    } else {
        f64::INFINITY
    };
    Ok(Extrapolation {
        t_hat,
        slope: line.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_decay_is_exact() {
        let y: Vec<f64> = (0..60).map(|j| 0.9f64.powi(j)).collect();
        let (c, theta) = fit_ar1_window(&y, 20, 10).unwrap();
        assert!((c - 0.9).abs() < 1e-14);
        assert!(theta < 1e-14);
    }

    #[test]
    fn alternating_sign_gives_minus_one() {
        let y: Vec<f64> = (0..30).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let (c, _) = fit_ar1_window(&y, 10, 5).unwrap();
        assert_eq!(c, -1.0);
        let (kappa, sigma) = ou_parameters(c, 1.0, 1.0);
        assert!(kappa.is_nan() && sigma.is_nan());
    }

    #[test]
    fn all_zero_window_is_degenerate() {
        let y = vec![0.0; 20];
        assert!(matches!(
            fit_ar1_window(&y, 8, 3),
            Err(Error::DegenerateFit { center: 8 })
        ));
    }

    #[test]
    fn window_out_of_range() {
        let y = vec![1.0; 10];
        assert!(fit_ar1_window(&y, 2, 3).is_err());
        assert!(fit_ar1_window(&y, 6, 3).is_err());
        assert!(fit_ar1_window(&y, 5, 3).is_ok());
    }

    #[test]
    fn noise_amplitude_formula() {
        let (kappa, sigma) = ou_parameters((-1.0f64).exp(), 1.0, 1.0);
        assert!((kappa - 1.0).abs() < 1e-15);
        let expected = (2.0 / (1.0 - (-2.0f64).exp())).sqrt();
        assert!((sigma - expected).abs() < 1e-12);
        assert!((sigma - 1.52087).abs() < 1e-5);
    }

    #[test]
    fn unit_propagator_boundary() {
        let (kappa, sigma) = ou_parameters(1.0, 0.3, 1.0);
        assert_eq!(kappa, 0.0);
        assert!(sigma.is_nan());
    }

    #[test]
    fn extrapolation_exact_line() {
        let r = FingerprintResult {
            center_times: (0..8).map(f64::from).collect(),
            c: (0..8).map(|k| 0.5 + 0.05 * k as f64).collect(),
            valid: vec![true; 8],
            ..Default::default()
        };
        let e = extrapolate_propagator(&r).unwrap();
        assert!((e.t_hat - 10.0).abs() < 1e-9);
        assert!((e.slope - 0.05).abs() < 1e-12);
    }

    #[test]
    fn extrapolation_flat_is_infinite() {
        let r = FingerprintResult {
            center_times: (0..5).map(f64::from).collect(),
            c: vec![0.9; 5],
            valid: vec![true; 5],
            ..Default::default()
        };
        assert_eq!(extrapolate_propagator(&r).unwrap().t_hat, f64::INFINITY);
    }

    #[test]
    fn extrapolation_skips_flagged() {
        let r = FingerprintResult {
            center_times: vec![0.0, 1.0, 2.0],
            c: vec![0.5, 1.5, 0.6],
            valid: vec![true, false, true],
            ..Default::default()
        };
        let e = extrapolate_propagator(&r).unwrap();
        assert!((e.slope - 0.05).abs() < 1e-12);
    }

    #[test]
    fn fingerprint_stops_at_cutoff() {
        let values: Vec<f64> = (0..200).map(|k| ((k * 7919) % 101) as f64).collect();
        let u = UniformSeries::new(0.0, 1.0, values).unwrap();
        let mut cfg = FingerprintConfig::new(10, 5.0);
        cfg.cutoff_index = Some(120);
        let r = fingerprint(&u, &cfg).unwrap();
        // last center c satisfies c + m + 1 == cutoff
        assert_eq!(*r.center_times.last().unwrap(), 109.0);
        assert_eq!(r.center_times[0], 10.0);
        assert_eq!(r.cutoff_time, 120.0);
    }

    #[test]
    fn fingerprint_needs_a_full_window() {
        let u = UniformSeries::new(0.0, 1.0, vec![1.0, 2.0, 0.5, 3.0]).unwrap();
        assert!(matches!(
            fingerprint(&u, &FingerprintConfig::new(2, 1.0)),
            Err(Error::InsufficientData { .. })
        ));
    }

    #[test]
    fn window_must_be_odd() {
        assert!(FingerprintConfig::with_window(100, 1.0).is_err());
        assert_eq!(FingerprintConfig::with_window(101, 1.0).unwrap().half_width, 50);
    }
}
