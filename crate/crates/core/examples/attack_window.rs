// Finds the block where a vulnerability was introduced by bisecting a
// monotone exploitability oracle.

use std::error::Error;

use exgen::econ::{bisect_attack_window, bisect_attack_window_verified, probe_bound};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (genesis, attack) = (17_000_000u64, 18_041_975u64);
    let introduced = 17_734_112u64;
    let mut seen = Vec::new();
    let found = bisect_attack_window(
        |b| {
            seen.push(b);
            b >= introduced
        },
        genesis,
        attack,
    )?;
    println!(
        "introduced at {} ({} blocks before the attack), {} probes, bound {}",
        found.introduced,
        found.window_blocks,
        found.probes,
        probe_bound(genesis, attack)
    );
    println!("probed: {seen:?}");

    // A flaky oracle is caught by the spot checks.
    let flaky = bisect_attack_window_verified(|b| b >= introduced && b != attack, genesis, attack);
    println!("non-monotone oracle: {flaky:?}");
    assert!(flaky.is_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
