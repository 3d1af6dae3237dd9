// Picks the deepest route from WETH to a token across a V2 and a V3 dex,
// then quotes a swap along it.

use std::error::Error;

use exgen::dex::{Dex, DexRegistry, DexStyle, Pool, PoolV2, PoolV3};
use exgen::domain::{base_currency, Address, ChainId};
use ruint::aliases::U256;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let weth = base_currency(ChainId::Ethereum).wrapped;
    let usdc = Address::from_low_u64(0xc0);
    let token = Address::from_low_u64(0x70);
    let e18 = U256::from(10u64).pow(U256::from(18u8));

    let registry = DexRegistry::new(
        weth,
        vec![
            Dex { id: "uni-v2".into(), style: DexStyle::V2, fee_tiers: vec![3000] },
            Dex { id: "uni-v3".into(), style: DexStyle::V3, fee_tiers: vec![500, 3000] },
        ],
        vec![usdc],
        vec![
            // Shallow direct pool.
            Pool::V2(PoolV2::new("uni-v2", weth, token, U256::from(5u8) * e18, U256::from(5_000u32) * e18, 3000)),
            // Deep route through USDC on the concentrated dex.
            Pool::V3(PoolV3 {
                dex_id: "uni-v3".into(),
                token_a: weth,
                token_b: usdc,
                fee_tier: 500,
                liquidity: U256::from(1_000u32) * e18,
                price_num: U256::from(2_000u32),
                price_den: U256::from(1u8),
            }),
            Pool::V3(PoolV3 {
                dex_id: "uni-v3".into(),
                token_a: usdc,
                token_b: token,
                fee_tier: 3000,
                liquidity: U256::from(50_000u32) * e18,
                price_num: U256::from(1u8),
                price_den: U256::from(2u8),
            }),
        ],
    )?;

    let route = registry.best_path(token)?;
    println!("best route: {route}");
    let out = registry.quote_out(&route, e18)?;
    println!("1 WETH buys {out} raw units of the token");
    let back = registry.quote_out(&route.reversed(), out)?;
    println!("selling them back returns {back} raw WETH");
    assert!(back < e18, "a round trip pays fees twice");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
