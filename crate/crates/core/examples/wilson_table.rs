// Success rate by iteration budget with 95% Wilson intervals, from the
// iteration at which each run first succeeded.

use std::error::Error;

use exgen::econ::{success_by_budget_counts, wilson_interval};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // 72 runs: 39 succeed, mostly early.
    let mut firsts = Vec::new();
    for (iteration, count) in [(1u32, 10usize), (2, 17), (3, 6), (4, 4), (5, 2)] {
        firsts.extend(std::iter::repeat_n(Some(iteration), count));
    }
    firsts.extend(std::iter::repeat_n(None, 72 - firsts.len()));

    for rate in success_by_budget_counts(&firsts, 5) {
        println!("{rate:?}");
    }
    let (lo, hi) = wilson_interval(39, 72, 0.95)?;
    println!("39/72 -> [{:.0}, {:.0}]%", lo * 100.0, hi * 100.0);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
