// End-to-end forecast for a synthetic record: fingerprint up to a cutoff,
// fit the normal form and forecast when the control reaches the fold and
// when the record actually tips.

use tipfit::normalform::NoiseAggregate;
use tipfit::sde::{synthetic_record, RecordSpec};
use tipfit::{
    epsilon_distribution, extract_normal_form, fingerprint_record, forecast, forecast_report,
    Drift, FingerprintConfig, ForecastMode, NormalFormParams, Report, SimConfig,
};

pub fn run_example() -> Report {
    // fold at t = 1000, observed as z = 3 + 2 x
    let params = NormalFormParams {
        a0: 1.0,
        drift: Drift::Constant(0.001),
        sigma: 0.0063,
        x_threshold: -5.0,
    };
    let spec = RecordSpec { q: 2.0, z0: 3.0, sample_interval: 0.1, t_end: 850.0 };
    let record = synthetic_record(&params, &SimConfig::new(3), &spec).unwrap();

    let cutoff = 800.0;
    let fp = fingerprint_record(
        &record.series,
        0.1,
        Some(cutoff),
        &FingerprintConfig::with_window(2001, 10.0).unwrap(),
    )
    .unwrap();
    let estimate = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
    let sampler = epsilon_distribution(&estimate, fp.dt).unwrap();
    let mut config = SimConfig::new(4);
    config.ensemble_size = 500;
    let fc = forecast(&estimate, &sampler, &config, 600.0, ForecastMode::MonteCarlo, None).unwrap();
    let report = forecast_report(&fc, &estimate);
    println!("{}", report.to_json().unwrap());
    report
}

#[allow(dead_code)]
fn main() {
    run_example();
}
