mod fingerprint_ou {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/fingerprint_ou.rs"));
}

mod icecore_parse {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/icecore_parse.rs"));
}

mod drifting_record {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/drifting_record.rs"));
}

mod escape_rates {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/escape_rates.rs"));
}

mod percentiles {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/percentiles.rs"));
}

mod predict_record {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/predict_record.rs"));
}

#[test]
fn fingerprint_ou_example_runs() {
    let (kappa, sigma) = fingerprint_ou::run_example();
    assert!((kappa - 1.0).abs() < 0.15);
    assert!((sigma - 1.0).abs() < 0.1);
}

#[test]
fn icecore_example_runs() {
    let (n, skipped, times) = icecore_parse::run_example();
    assert_eq!((n, skipped), (6, 3));
    assert!(times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(times[0], -12427.0);
}

#[test]
fn drifting_record_example_runs() {
    let (c, t_hat) = drifting_record::run_example();
    assert!(c.last().unwrap() > c.first().unwrap());
    // a straight line through c overshoots the fold
    assert!(t_hat > 1000.0);
}

#[test]
fn escape_rates_example_runs() {
    let rows = escape_rates::run_example();
    assert!(rows.windows(2).all(|w| w[1].1 < w[0].1));
}

#[test]
fn percentiles_example_runs() {
    let (quasi, dynamic) = percentiles::run_example();
    assert_eq!(quasi.a_at.len(), 2);
    // faster drift escapes at smaller a
    assert!(dynamic.a_at[0][1].unwrap() < dynamic.a_at[1][1].unwrap());
}

#[test]
fn predict_example_runs() {
    let report = predict_record::run_example();
    assert!(report.refusal.is_none());
    assert!(report.eps_over_sigma2.unwrap() > 1.0);
    assert_eq!(report.regime.as_deref(), Some("drift-dominated"));
}
