// Per-call USD cost from token usage and the bundled price list.

use std::error::Error;

use exgen::llm::{PricingTable, TokenUsage};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let pricing = PricingTable::bundled();
    let usage = TokenUsage::new(5_407, 12_161, 11_012);
    for model in ["o3-pro", "o3", "gemini-pro", "gemini-flash", "r1", "qwen3-moe"] {
        let cost = pricing.cost(model, &usage)?;
        println!("{model:>13}: ${}", cost.round_dp(4));
    }
    match pricing.cost("gpt-unknown", &usage) {
        Err(e) => println!("unpriced model: {e}"),
        Ok(c) => println!("unexpected price {c}"),
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
