// Reading a whitespace-column ice-core file with a free-text preamble and
// turning ages before present into forward time.

use tipfit::{interpolate_uniform, parse_icecore};

const SAMPLE: &str = "\
Vostok deuterium excerpt (synthetic values)
Columns: depth(m)  ice age(GT4)  deltaD  deltaTS
--------------------------------------------
 149.1   5679  -438.0  0.00
 173.4   6828  -438.0  0.00
 198.7   8063  -440.1 -0.35
 231.2   9736  -442.4 -0.73
 255.6  11015  -449.7 -1.95
 282.2  12427  -466.2 -4.70
";

pub fn run_example() -> (usize, usize, Vec<f64>) {
    let parsed = parse_icecore(SAMPLE.as_bytes(), 1, 2, true).unwrap();
    let series = parsed.series;
    println!("{} samples, {} preamble lines skipped", series.len(), parsed.skipped_rows);
    for (t, z) in series.times().iter().zip(series.values()) {
        println!("{t:>8} {z:>8}");
    }
    let uniform = interpolate_uniform(&series, 500.0).unwrap();
    println!("{} points after interpolation to 500 year spacing", uniform.len());
    (series.len(), parsed.skipped_rows, series.times().to_vec())
}

#[allow(dead_code)]
fn main() {
    run_example();
}
