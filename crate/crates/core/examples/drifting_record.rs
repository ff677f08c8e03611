// A synthetic record of a slowly drifting fold: the lag-one propagator
// rises toward one and a straight line through it gives the classic
// early-warning extrapolation.

use tipfit::sde::{synthetic_record, RecordSpec};
use tipfit::{extrapolate_propagator, fingerprint_record, FingerprintConfig, NormalFormParams, SimConfig};

pub fn run_example() -> (Vec<f64>, f64) {
    let params = NormalFormParams {
        a0: 1.0,
        drift: tipfit::Drift::Constant(0.001),
        sigma: 0.02,
        x_threshold: -5.0,
    };
    let config = SimConfig::new(21);
    let spec = RecordSpec { q: 1.0, z0: 0.0, sample_interval: 0.1, t_end: 950.0 };
    let record = synthetic_record(&params, &config, &spec).unwrap();
    let fp = fingerprint_record(
        &record.series,
        0.1,
        Some(900.0),
        &FingerprintConfig::with_window(2001, 10.0).unwrap(),
    )
    .unwrap();
    let c: Vec<f64> = (0..fp.len()).step_by(700).map(|i| fp.c[i]).collect();
    for i in (0..fp.len()).step_by(700) {
        println!("t = {:>6.1}  c = {:.4}  kappa = {:.3}", fp.center_times[i], fp.c[i], fp.kappa[i]);
    }
    let line = extrapolate_propagator(&fp).unwrap();
    println!("propagator reaches 1 at t = {:.1} (fold at t = 1000)", line.t_hat);
    (c, line.t_hat)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
