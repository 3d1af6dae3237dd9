// Settles a strategy's leftover token balances back into base currency and
// reports the profit metric.

use std::error::Error;

use exgen::dex::{Dex, DexRegistry, DexStyle, Pool, PoolV2};
use exgen::domain::{base_currency, Address, ChainId, TokenAmount};
use exgen::revenue::{initial_provisioning, reconcile, USDC_ETH};
use ruint::aliases::U256;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let chain = ChainId::Ethereum;
    let weth = base_currency(chain).wrapped;
    let loot = Address::from_low_u64(0x7070);
    let e18 = U256::from(10u64).pow(U256::from(18u8));
    let e6 = U256::from(1_000_000u32);

    let registry = DexRegistry::new(
        weth,
        vec![Dex { id: "cp".into(), style: DexStyle::V2, fee_tiers: vec![3000] }],
        vec![],
        vec![
            Pool::V2(PoolV2::new("cp", loot, weth, U256::from(1000u32) * e18, U256::from(1000u32) * e18, 3000)),
            Pool::V2(PoolV2::new("cp", USDC_ETH, weth, U256::from(20_000_000u32) * e6, U256::from(10_000u32) * e18, 3000)),
        ],
    )?;

    let initial = initial_provisioning(chain);
    let mut after = initial.clone();
    // The strategy walked away with 10 loot tokens but spent 500 USDC.
    after.set(loot, TokenAmount::whole(10, 18)?);
    after.set(USDC_ETH, initial.get(USDC_ETH).unwrap().checked_sub(TokenAmount::whole(500, 6)?)?);

    let rec = reconcile(&initial, &after, &registry)?;
    for leg in &rec.legs {
        println!("{:?}: {} in, {} out via {}", leg.kind, leg.amount_in, leg.amount_out, leg.quote);
    }
    println!("profit: {} ETH", rec.profit);
    assert!(rec.sheet.raw(USDC_ETH) >= initial.raw(USDC_ETH));
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
