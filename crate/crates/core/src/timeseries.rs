//! Record ingestion, uniform resampling and Gaussian-kernel detrending.
//!
//! A raw record is a set of `(t, z)` samples at possibly uneven times. Before
//! any propagator can be estimated it is linearly interpolated onto a uniform
//! grid of spacing `dt` and the slow drift of the equilibrium is removed by
//! subtracting a normalized Gaussian-kernel average of bandwidth `d`.

use std::io::{BufRead, BufReader, Read, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Ordered samples of a scalar record.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    times: Vec<f64>,
    values: Vec<f64>,
    pub label: String,
    pub unit: String,
}

impl TimeSeries {
    /// Builds a series from unordered samples. Samples are sorted by time and
    /// samples sharing a time stamp are averaged.
    pub fn from_points(mut points: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(t, z)) in points.iter().enumerate() {
            if !t.is_finite() || !z.is_finite() {
                return Err(Error::NonFinite { index: i });
            }
        }
        points.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut times: Vec<f64> = Vec::with_capacity(points.len());
        let mut values: Vec<f64> = Vec::with_capacity(points.len());
        let mut run = 0usize;
        for (t, z) in points {
            if times.last() == Some(&t) {
                let last = values.last_mut().expect("non-empty");
                run += 1;
                // running mean over the duplicates
                *last += (z - *last) / run as f64;
            } else {
                times.push(t);
                values.push(z);
                run = 1;
            }
        }
        if times.len() < 2 {
            return Err(Error::EmptyRecord { usable: times.len() });
        }
        Ok(TimeSeries {
            times,
            values,
            label: String::new(),
            unit: String::new(),
        })
    }

    pub fn with_label(mut self, label: impl Into<String>, unit: impl Into<String>) -> Self {
        self.label = label.into();
        self.unit = unit.into();
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Drops every sample later than `cutoff`.
    pub fn truncate_after(&self, cutoff: f64) -> Result<Self> {
        let keep = self.times.partition_point(|&t| t <= cutoff);
        if keep < 2 {
            return Err(Error::EmptyRecord { usable: keep });
        }
        Ok(TimeSeries {
            times: self.times[..keep].to_vec(),
            values: self.values[..keep].to_vec(),
            label: self.label.clone(),
            unit: self.unit.clone(),
        })
    }

    /// Writes `time,value` CSV with a header line. Values are printed in
    /// shortest round-trip form, so re-parsing reproduces the series exactly.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,value")?;
        for (t, z) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{z}")?;
        }
        Ok(())
    }
}

/// A parsed record plus the number of rows that were skipped.
#[derive(Debug, Clone)]
pub struct Parsed {
    pub series: TimeSeries,
    pub skipped_rows: usize,
}

fn parse_field(s: Option<&str>) -> Option<f64> {
    s.and_then(|f| f.trim().parse::<f64>().ok())
        .filter(|v| v.is_finite())
}

/// Parses comma-separated text. Rows whose selected columns are not both
/// finite numbers (headers included) are skipped and counted.
pub fn parse_csv<R: Read>(source: R, time_column: usize, value_column: usize) -> Result<Parsed> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(source);
    let mut points = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record?;
        match (
            parse_field(record.get(time_column)),
            parse_field(record.get(value_column)),
        ) {
            (Some(t), Some(z)) => points.push((t, z)),
            _ => skipped += 1,
        }
    }
    Ok(Parsed {
        series: TimeSeries::from_points(points)?,
        skipped_rows: skipped,
    })
}

/// Parses whitespace-delimited ice-core text (e.g. NOAA paleo files with
/// columns depth, ice age, deuterium, temperature anomaly). Any line whose
/// selected columns do not both parse is treated as preamble or comment.
///
/// With `reverse_time` the age (years before present) is negated so that time
/// increases toward the present.
pub fn parse_icecore<R: Read>(
    source: R,
    age_column: usize,
    value_column: usize,
    reverse_time: bool,
) -> Result<Parsed> {
    let mut points = Vec::new();
    let mut skipped = 0;
    for line in BufReader::new(source).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        match (
            parse_field(fields.get(age_column).copied()),
            parse_field(fields.get(value_column).copied()),
        ) {
            (Some(age), Some(z)) => points.push((if reverse_time { -age } else { age }, z)),
            _ => skipped += 1,
        }
    }
    Ok(Parsed {
        series: TimeSeries::from_points(points)?,
        skipped_rows: skipped,
    })
}

/// Values on the uniform grid `t0 + k * dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformSeries {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl UniformSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        if values.len() < 2 {
            return Err(Error::EmptyRecord {
                usable: values.len(),
            });
        }
        Ok(UniformSeries { t0, dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    /// Index of the last grid point not later than `t`.
    pub fn index_at_or_before(&self, t: f64) -> Option<usize> {
        if t < self.t0 {
            return None;
        }
        let k = ((t - self.t0) / self.dt + 1e-9).floor() as usize;
        Some(k.min(self.len() - 1))
    }

    pub fn to_time_series(&self) -> TimeSeries {
        TimeSeries {
            times: (0..self.len()).map(|k| self.time(k)).collect(),
            values: self.values.clone(),
            label: String::new(),
            unit: String::new(),
        }
    }
}

/// Linearly interpolates onto a uniform grid running from the first sample
/// to the last; nothing is extrapolated beyond the record.
pub fn interpolate_uniform(series: &TimeSeries, dt: f64) -> Result<UniformSeries> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::param("dt", format!("must be positive, got {dt}")));
    }
    let span = series.span();
    if dt >= span {
        return Err(Error::DegenerateGrid { dt, span });
    }
    let t0 = series.times[0];
    let t_last = series.times[series.len() - 1];
    let n = ((span / dt) * (1.0 + 1e-12)).floor() as usize + 1;

    let mut values = Vec::with_capacity(n);
    let mut i = 0;
    for k in 0..n {
        let t = (t0 + k as f64 * dt).min(t_last);
        while i + 2 < series.len() && series.times[i + 1] <= t {
            i += 1;
        }
        let (ta, tb) = (series.times[i], series.times[i + 1]);
        let (za, zb) = (series.values[i], series.values[i + 1]);
        let v = if t == tb {
            zb
        } else {
            za + (zb - za) * (t - ta) / (tb - ta)
        };
        values.push(v);
    }
    UniformSeries::new(t0, dt, values)
}

/// Output of [`detrend_gaussian`]: `trend[k] + residual[k] == input[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetrendResult {
    pub trend: Vec<f64>,
    pub residual: Vec<f64>,
    pub bandwidth: f64,
}

/// Relative kernel weight below which terms are dropped. At this level the
/// truncated sum differs from the full one by far less than 1e-10.
const KERNEL_CUTOFF: f64 = 1e-18;

/// Subtracts the Gaussian-kernel average
/// `Z_k = Σ_i G(t_i - t_k) z_i / Σ_i G(t_i - t_k)`, `G(s) ∝ exp(-s² / 2d²)`.
///
/// Weights are renormalized at every index, so near the ends of the record
/// the average is taken over the available one-sided neighbourhood.
pub fn detrend_gaussian(series: &UniformSeries, bandwidth: f64) -> Result<DetrendResult> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::param(
            "bandwidth",
            format!("must be positive, got {bandwidth}"),
        ));
    }
    let n = series.len();
    let reach = bandwidth * (-2.0 * KERNEL_CUTOFF.ln()).sqrt();
    let half = ((reach / series.dt).ceil() as usize).min(n - 1);
    let kernel: Vec<f64> = (0..=half)
        .map(|j| {
            let s = j as f64 * series.dt / bandwidth;
            (-0.5 * s * s).exp()
        })
        .collect();

    let z = &series.values;
    let trend: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + half).min(n - 1);
            let mut num = 0.0;
            let mut den = 0.0;
            for (i, &zi) in z.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(k)];
                num += w * zi;
                den += w;
            }
            num / den
        })
        .collect();
    let residual = z.iter().zip(&trend).map(|(zi, zk)| zi - zk).collect();
    Ok(DetrendResult {
        trend,
        residual,
        bandwidth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(f64, f64)]) -> TimeSeries {
        TimeSeries::from_points(points.to_vec()).unwrap()
    }

    #[test]
    fn csv_identity() {
        let p = parse_csv("0,1.0\n1,2.0\n2,3.0".as_bytes(), 0, 1).unwrap();
        assert_eq!(p.series.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(p.series.values(), &[1.0, 2.0, 3.0]);
        assert_eq!(p.skipped_rows, 0);
    }

    #[test]
    fn csv_sorts_rows() {
        let p = parse_csv("2,3\n0,1\n1,2".as_bytes(), 0, 1).unwrap();
        assert_eq!(p.series.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(p.series.values(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn csv_header_is_skipped_and_counted() {
        let p = parse_csv("time,value\n0,1\n1,2\n".as_bytes(), 0, 1).unwrap();
        assert_eq!(p.series.len(), 2);
        assert_eq!(p.skipped_rows, 1);
    }

    #[test]
    fn csv_duplicates_are_averaged() {
        let p = parse_csv("0,1\n1,2\n1,4\n2,0".as_bytes(), 0, 1).unwrap();
        assert_eq!(p.series.times(), &[0.0, 1.0, 2.0]);
        assert_eq!(p.series.values(), &[1.0, 3.0, 0.0]);
    }

    #[test]
    fn csv_too_few_rows() {
        let err = parse_csv("t,z\n0,1\nx,y".as_bytes(), 0, 1).unwrap_err();
        assert!(matches!(err, Error::EmptyRecord { usable: 1 }));
    }

    #[test]
    fn icecore_reverse_time() {
        let text = "Vostok deuterium\nDepth  Age  dD  dT\n\
                    1.0 100 -430.0 0.1\n2.0 200 -431.5 -0.2\n3.0 300 -432 0.0\n\
                    4.0 400 -429 0.5\n5.0 500 -440 -1.1\n";
        let p = parse_icecore(text.as_bytes(), 1, 2, true).unwrap();
        assert_eq!(p.series.len(), 5);
        assert!(p.series.times().windows(2).all(|w| w[0] < w[1]));
        assert_eq!(p.series.times()[0], -500.0);
        assert_eq!(p.series.values()[0], -440.0);
        assert_eq!(p.skipped_rows, 2);
    }

    #[test]
    fn icecore_interleaved_comments() {
        let text = "1 10 5\n# comment\n2 20 6\nmissing data here\n3 30 7\n";
        let p = parse_icecore(text.as_bytes(), 1, 2, false).unwrap();
        assert_eq!(p.series.values(), &[5.0, 6.0, 7.0]);
        assert_eq!(p.skipped_rows, 2);
    }

    #[test]
    fn interpolate_linear_midpoints() {
        let u = interpolate_uniform(&series(&[(0.0, 0.0), (1.0, 2.0)]), 0.5).unwrap();
        assert_eq!(u.values, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn interpolate_identity_on_uniform() {
        let s = series(&[(0.0, 3.0), (0.5, -1.0), (1.0, 2.0), (1.5, 7.0)]);
        let u = interpolate_uniform(&s, 0.5).unwrap();
        assert_eq!(u.values, s.values());
    }

    #[test]
    fn interpolate_degenerate_grid() {
        let s = series(&[(0.0, 0.0), (1.0, 2.0)]);
        assert!(matches!(
            interpolate_uniform(&s, 1.0),
            Err(Error::DegenerateGrid { .. })
        ));
        assert!(interpolate_uniform(&s, -1.0).is_err());
    }

    #[test]
    fn interpolate_quadratic_error_bound() {
        // uneven knots of t² on [0, 4]
        let mut knots = vec![0.0];
        let mut t: f64 = 0.0;
        let mut step = 0.05;
        while t < 4.0 {
            t = (t + step).min(4.0);
            knots.push(t);
            step = if step > 0.2 { 0.05 } else { step * 1.7 };
        }
        let s = series(&knots.iter().map(|&t| (t, t * t)).collect::<Vec<_>>());
        let u = interpolate_uniform(&s, 0.1).unwrap();
        for (k, &v) in u.values.iter().enumerate() {
            let tk = u.time(k).min(4.0);
            // bracketing knots, located independently of the implementation
            let j = knots.iter().rposition(|&x| x <= tk).unwrap().min(knots.len() - 2);
            let (a, b) = (knots[j], knots[j + 1]);
            let direct = a * a + (b * b - a * a) * (tk - a) / (b - a);
            assert!((v - direct).abs() < 1e-12, "k={k}");
            // |f - p| <= max|f''| h² / 8 with f'' = 2
            assert!((v - tk * tk).abs() <= (b - a).powi(2) / 4.0 + 1e-12);
        }
    }

    #[test]
    fn detrend_constant_series() {
        let u = UniformSeries::new(0.0, 0.1, vec![2.5; 300]).unwrap();
        let d = detrend_gaussian(&u, 1.0).unwrap();
        for (t, r) in d.trend.iter().zip(&d.residual) {
            assert!((t - 2.5).abs() < 1e-13);
            assert!(r.abs() < 1e-13);
        }
    }

    #[test]
    fn detrend_linear_interior() {
        let dt = 0.1;
        let d = 1.0;
        let u = UniformSeries::new(0.0, dt, (0..1000).map(|k| 3.0 + 0.7 * k as f64 * dt).collect())
            .unwrap();
        let out = detrend_gaussian(&u, d).unwrap();
        // one-sided truncation at distance L shifts the kernel mean by about
        // d φ(L/d); at 7d that is ~1e-11 d
        let margin = (7.0 * d / dt) as usize;
        for k in margin..u.len() - margin {
            assert!(out.residual[k].abs() < 1e-8 * out.trend[k].abs(), "k={k}");
        }
    }

    #[test]
    fn detrend_rejects_bad_bandwidth() {
        let u = UniformSeries::new(0.0, 0.1, vec![1.0, 2.0, 3.0]).unwrap();
        assert!(detrend_gaussian(&u, 0.0).is_err());
        assert!(detrend_gaussian(&u, f64::NAN).is_err());
    }

    #[test]
    fn detrend_matches_full_kernel_sum() {
        let dt = 0.05;
        let d = 0.8;
        let z: Vec<f64> = (0..600)
            .map(|k| {
                let t = k as f64 * dt;
                (0.3 * t).sin() + 0.1 * (7.0 * t).cos()
            })
            .collect();
        let u = UniformSeries::new(0.0, dt, z.clone()).unwrap();
        let out = detrend_gaussian(&u, d).unwrap();
        for k in (0..z.len()).step_by(37) {
            let (mut num, mut den) = (0.0, 0.0);
            for (i, zi) in z.iter().enumerate() {
                let s = (i as f64 - k as f64) * dt;
                let g = (-(s * s) / (2.0 * d * d)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * d);
                num += g * zi;
                den += g;
            }
            assert!((out.trend[k] - num / den).abs() < 1e-10);
        }
    }
}
