// Detection-delay table and profit landscape from an authored observation
// file, using both seeded sampling and exact enumeration.

use std::error::Error;
use std::path::Path;

use exgen::econ::{
    break_even_crossings, exact_success_probability, mc_success_probability, EconConfig,
    EmpiricalDistribution,
};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/econ/example.toml");
    let config: EconConfig = toml::from_str(&std::fs::read_to_string(path)?)?;

    for cell in config.delay_table()? {
        println!(
            "{:>14} delay {:>6} min: p = {:.4} [{:.4}, {:.4}]",
            cell.model, cell.delay_minutes, cell.p, cell.ci_low, cell.ci_high
        );
    }

    let grid = config.profit_grid()?;
    for change in break_even_crossings(&grid) {
        println!("{change:?}");
    }

    let runtimes = EmpiricalDistribution::new(vec![4.0, 9.0, 30.0])?;
    let windows = EmpiricalDistribution::new(vec![10.0, 60.0])?;
    let sampled = mc_success_probability(&runtimes, &windows, 5.0, 100_000, 1)?;
    let exact = exact_success_probability(&runtimes, &windows, 5.0)?;
    println!("sampled {:.4} +/- {:.4}, exact {exact:.4}", sampled.p, sampled.standard_error());
    assert!((sampled.p - exact).abs() <= 3.0 * sampled.standard_error().max(1e-9));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
