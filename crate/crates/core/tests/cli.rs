use std::fs;
use std::path::Path;

use tempfile::TempDir;
use tipfit::cli::run;
use tipfit::normalform::{NoiseAggregate, Report};
use tipfit::stats::fit_line;
use tipfit::{
    epsilon_distribution, extract_normal_form, fingerprint_record, forecast, parse_csv,
    FingerprintConfig, ForecastMode, SimConfig, TimeSeries,
};

fn tipfit(args: &[&str]) -> i32 {
    let mut full = vec!["tipfit"];
    full.extend_from_slice(args);
    run(full)
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

/// Drifting record with fold at t = 1000, sampled every 0.1.
fn drifting_record(dir: &Path, seed: &str, t_end: &str) -> String {
    let out = p(dir, "record.csv");
    let code = tipfit(&[
        "--seed", seed, "simulate", "--a0", "1", "--epsilon", "0.001", "--sigma", "0.02",
        "--t-end", t_end, "--out", &out, "--truth", &p(dir, "truth.json"),
    ]);
    assert_eq!(code, 0);
    out
}

fn read_columns(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn fingerprint_writes_one_file_per_window() {
    let dir = TempDir::new().unwrap();
    let record = drifting_record(dir.path(), "5", "900");
    let prefix = p(dir.path(), "fp");
    let code = tipfit(&[
        "fingerprint", &record, "--dt", "0.1", "--bandwidth", "10", "-w", "1001", "-w", "2001",
        "--out", &prefix,
    ]);
    assert_eq!(code, 0);
    for w in [1001, 2001] {
        let rows = read_columns(&dir.path().join(format!("fp_w{w}.csv")));
        let (t, c): (Vec<f64>, Vec<f64>) = rows.iter().map(|r| (r[0], r[1])).unzip();
        // propagator rises toward the fold
        assert!(fit_line(&t, &c).unwrap().slope > 0.0, "w = {w}");
    }
}

#[test]
fn fingerprint_ignores_rows_after_cutoff() {
    let dir = TempDir::new().unwrap();
    let record = drifting_record(dir.path(), "6", "600");
    let text = fs::read_to_string(&record).unwrap();
    let mutated: String = text
        .lines()
        .map(|l| match l.split_once(',') {
            Some((t, _)) if t.parse::<f64>().is_ok_and(|t| t > 400.0) => format!("{t},123.5\n"),
            _ => format!("{l}\n"),
        })
        .collect();
    let other = p(dir.path(), "mutated.csv");
    fs::write(&other, mutated).unwrap();
    for (input, prefix) in [(&record, "a"), (&other, "b")] {
        let code = tipfit(&[
            "fingerprint", input, "--dt", "0.1", "--bandwidth", "10", "-w", "501", "--cutoff",
            "400", "--out", &p(dir.path(), prefix),
        ]);
        assert_eq!(code, 0);
    }
    assert_eq!(
        fs::read(dir.path().join("a_w501.csv")).unwrap(),
        fs::read(dir.path().join("b_w501.csv")).unwrap()
    );
}

#[test]
fn noise_free_simulation_follows_the_root() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "quiet.csv");
    let code = tipfit(&[
        "--seed", "1", "simulate", "--a0", "1", "--epsilon", "0.01", "--sigma", "0",
        "--step", "0.001", "--sample-interval", "0.5", "--t-end", "95", "--out", &out,
        "--truth", &p(dir.path(), "t.json"),
    ]);
    assert_eq!(code, 0);
    for row in read_columns(Path::new(&out)).iter().skip(4) {
        let a: f64 = 1.0 - 0.01 * row[0];
        // the state lags the root by about eps / (2a)
        assert!((row[1] - a.sqrt()).abs() < 0.01 / a, "t = {}", row[0]);
    }
}

#[test]
fn seeded_simulation_repeats() {
    let dir = TempDir::new().unwrap();
    drifting_record(dir.path(), "9", "200");
    let first = fs::read(dir.path().join("record.csv")).unwrap();
    drifting_record(dir.path(), "9", "200");
    assert_eq!(first, fs::read(dir.path().join("record.csv")).unwrap());
    drifting_record(dir.path(), "10", "200");
    assert_ne!(first, fs::read(dir.path().join("record.csv")).unwrap());
}

#[test]
fn single_point_escape_table() {
    let dir = TempDir::new().unwrap();
    let out = p(dir.path(), "table.csv");
    let code = tipfit(&[
        "--seed", "3", "escape-table", "--a-start", "1", "--a-end", "1", "--a-max", "1",
        "--max-measure", "100", "--out", &out,
    ]);
    assert_eq!(code, 0);
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("a,k0,k0_stderr,K0\n1,"));
}

#[test]
fn percentiles_emit_both_surfaces() {
    let dir = TempDir::new().unwrap();
    let table = p(dir.path(), "table.csv");
    assert_eq!(
        tipfit(&[
            "--seed", "4", "escape-table", "--a-spacing", "0.5", "--max-measure", "300",
            "--out", &table,
        ]),
        0
    );
    let quasi = p(dir.path(), "q.csv");
    let dynamic = p(dir.path(), "d.csv");
    let code = tipfit(&[
        "--seed", "4", "percentiles", "--table", &table, "--epsilons", "0.1,0.01", "--levels",
        "25,50,75", "--dynamic", "--out", &quasi, "--out-dynamic", &dynamic,
    ]);
    assert_eq!(code, 0);
    for f in [&quasi, &dynamic] {
        let rows = read_columns(Path::new(f));
        assert_eq!(rows.len(), 6);
        // within one drift speed, higher levels are reached at smaller a
        assert!(rows[0][2] > rows[1][2] && rows[1][2] > rows[2][2]);
    }
}

#[test]
fn stochastic_commands_require_a_seed() {
    assert_eq!(tipfit(&["escape-table", "--out", "/dev/null"]), 2);
    assert_eq!(tipfit(&["predict", "x.csv", "--dt", "1", "--bandwidth", "5", "-w", "11"]), 2);
}

#[test]
fn receding_record_is_refused() {
    let dir = TempDir::new().unwrap();
    let record = p(dir.path(), "record.csv");
    // the well deepens over time
    let code = tipfit(&[
        "--seed", "12", "simulate", "--a0", "0.3", "--epsilon=-0.001", "--sigma", "0.02",
        "--t-end", "800", "--out", &record, "--truth", &p(dir.path(), "t.json"),
    ]);
    assert_eq!(code, 0);
    let out = p(dir.path(), "out");
    let code = tipfit(&[
        "--seed", "13", "predict", &record, "--dt", "0.1", "--bandwidth", "10", "-w", "2001",
        "--out-dir", &out,
    ]);
    assert_eq!(code, 4);
    let report =
        Report::from_json(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert!(report.refusal.unwrap().contains("no approach to a fold"));
    assert_eq!(report.pesc_quartiles, [None; 3]);
}

#[test]
fn constant_record_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let record = p(dir.path(), "flat.csv");
    let rows: String = (0..500).map(|k| format!("{},2.5\n", k as f64 * 0.5)).collect();
    fs::write(&record, rows).unwrap();
    let code = tipfit(&[
        "--seed", "1", "predict", &record, "--dt", "0.5", "--bandwidth", "5", "-w", "101",
        "--out-dir", &p(dir.path(), "out"),
    ]);
    assert_eq!(code, 3);
}

#[test]
fn predict_ignores_rows_after_cutoff() {
    let dir = TempDir::new().unwrap();
    let record = drifting_record(dir.path(), "14", "900");
    let text = fs::read_to_string(&record).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let n = lines.len();
    lines[n - 10] = format!("{},-7.25", lines[n - 10].split(',').next().unwrap());
    let other = p(dir.path(), "mutated.csv");
    fs::write(&other, lines.join("\n")).unwrap();
    let mut outputs = Vec::new();
    for (input, sub) in [(&record, "a"), (&other, "b")] {
        let code = tipfit(&[
            "--seed", "15", "predict", input, "--dt", "0.1", "--bandwidth", "10", "-w", "2001",
            "--cutoff", "850", "--ensemble", "200", "--out-dir", &p(dir.path(), sub),
        ]);
        assert_eq!(code, 0);
        outputs.push(
            ["report.json", "cdf.csv"]
                .map(|f| fs::read(dir.path().join(sub).join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn affine_change_of_units_leaves_forecast_unchanged() {
    let dir = TempDir::new().unwrap();
    let record = drifting_record(dir.path(), "16", "850");
    let series = parse_csv(fs::File::open(&record).unwrap(), 0, 1).unwrap().series;
    let shifted = TimeSeries::from_points(
        series
            .times()
            .iter()
            .zip(series.values())
            .map(|(&t, &z)| (t, 3.0 * z + 7.0))
            .collect(),
    )
    .unwrap();
    let config = FingerprintConfig::with_window(2001, 10.0).unwrap();
    let run = |s: &TimeSeries| {
        let fp = fingerprint_record(s, 0.1, None, &config).unwrap();
        let est = extract_normal_form(&fp, NoiseAggregate::Mean).unwrap();
        let sampler = epsilon_distribution(&est, fp.dt).unwrap();
        let mut sim = SimConfig::new(2);
        sim.ensemble_size = 200;
        let fc = forecast(&est, &sampler, &sim, 400.0, ForecastMode::MonteCarlo, None).unwrap();
        (est, fc)
    };
    let (e1, f1) = run(&series);
    let (e2, f2) = run(&shifted);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * a.abs().max(b.abs()).max(1e-300);
    assert!(close(e2.q, 3.0 * e1.q));
    assert!(close(e2.sigma_z, 3.0 * e1.sigma_z));
    assert!(close(e2.sigma_nf, e1.sigma_nf));
    assert!(e1.a.iter().zip(&e2.a).all(|(x, y)| close(*x, *y)));
    assert!(e1.epsilon_samples.iter().zip(&e2.epsilon_samples).all(|(x, y)| (x - y).abs() < 1e-8));
    assert!(f1.p_a.iter().zip(&f2.p_a).all(|(x, y)| (x - y).abs() < 1e-8));
    assert!(f1.p_esc.iter().zip(&f2.p_esc).all(|(x, y)| (x - y).abs() < 1e-8));
}
