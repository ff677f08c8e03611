// Escape percentiles of the drifting normal form: the quasi-static
// estimate from a tabulated escape rate against drifting ensembles.

use tipfit::escape::{dynamic_percentile_surface, grid, TableConfig};
use tipfit::{build_escape_table, percentile_surface, PercentileSurface, SimConfig};

pub fn run_example() -> (PercentileSurface, PercentileSurface) {
    let table_config = TableConfig {
        a_grid: grid(-0.5, 3.0, 0.25),
        target_escapes: 60.0,
        max_measure: 1000.0,
        ..TableConfig::default()
    };
    let config = SimConfig::new(7);
    let table = build_escape_table(&table_config, &config).unwrap();
    println!("{:>6} {:>12} {:>12}", "a", "k0", "K0");
    for i in 0..table.a_grid.len() {
        println!("{:>6.2} {:>12.4e} {:>12.4e}", table.a_grid[i], table.k0[i], table.big_k0[i]);
    }

    let eps = [0.1, 0.01];
    let levels = [5.0, 50.0, 95.0];
    let quasi = percentile_surface(&table, &eps, &levels).unwrap();
    let dynamic = dynamic_percentile_surface(&eps, &levels, &config, 3.0, -1.0, -5.0).unwrap();
    for (i, e) in eps.iter().enumerate() {
        for (j, l) in levels.iter().enumerate() {
            println!(
                "eps {e:<5} level {l:>4}%  quasi-static a = {:>6.3}  drifting a = {:>6.3}",
                quasi.a_at[i][j].unwrap_or(f64::NAN),
                dynamic.a_at[i][j].unwrap_or(f64::NAN)
            );
        }
    }
    (quasi, dynamic)
}

#[allow(dead_code)]
fn main() {
    run_example();
}
