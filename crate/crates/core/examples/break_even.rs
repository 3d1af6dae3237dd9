// Symmetric attacker/defender race: exact break-even exploit values and
// payoff curves over vulnerability incidence.

use std::error::Error;

use exgen::econ::{break_even_values, race_curves};
use rust_decimal::Decimal;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let scan_cost = Decimal::from(3);
    let bounty = Decimal::new(1, 1);
    let rhos = [Decimal::new(1, 3), Decimal::new(1, 4), Decimal::new(1, 5)];
    for rho in rhos {
        let be = break_even_values(rho, scan_cost, bounty)?;
        let (attacker, defender) = be.to_decimals().ok_or("value out of range")?;
        println!("incidence {rho}: attacker breaks even at ${attacker}, defender at ${defender}");
    }
    let values = [Decimal::from(10_000), Decimal::from(100_000), Decimal::from(1_000_000)];
    for row in race_curves(&rhos, &values, scan_cost, bounty) {
        println!("{row:?}");
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
