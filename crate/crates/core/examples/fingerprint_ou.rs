// Fingerprint of a stationary Ornstein–Uhlenbeck record: the recovered
// decay rate and noise amplitude should match the generating values.

use rand_distr::{Distribution, StandardNormal};
use tipfit::streams::stream;
use tipfit::{fingerprint, FingerprintConfig, UniformSeries};

/// Exact AR(1) discretization of `dy = -κ y dt + σ dW`.
pub fn ou_record(kappa: f64, sigma: f64, dt: f64, n: usize, seed: u64) -> UniformSeries {
    let c = (-kappa * dt).exp();
    let innovation = sigma * ((1.0 - c * c) / (2.0 * kappa)).sqrt();
    let mut rng = stream(seed, 0);
    let mut y = 0.0;
    let values = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            y = c * y + innovation * z;
            y
        })
        .collect();
    UniformSeries::new(0.0, dt, values).unwrap()
}

pub fn run_example() -> (f64, f64) {
    let series = ou_record(1.0, 1.0, 0.1, 20_000, 5);
    let config = FingerprintConfig::with_window(501, 50.0).unwrap();
    let fp = fingerprint(&series, &config).unwrap();
    let valid: Vec<usize> = fp.valid_indices().collect();
    let kappa = valid.iter().map(|&i| fp.kappa[i]).sum::<f64>() / valid.len() as f64;
    let sigma = valid.iter().map(|&i| fp.sigma_z[i]).sum::<f64>() / valid.len() as f64;
    println!("windows: {} ({} valid)", fp.len(), valid.len());
    println!("mean decay rate   {kappa:.4} (true 1)");
    println!("mean noise level  {sigma:.4} (true 1)");
    (kappa, sigma)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
