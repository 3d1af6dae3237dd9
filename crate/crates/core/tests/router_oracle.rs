mod common;

use common::{gen_router_case, RouterCase};
use exgen::dex::{Dex, DexError, DexRegistry, DexStyle, Pool, PoolV2};
use exgen::domain::Address;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ruint::aliases::U256;

fn check(case: &RouterCase, rng: &mut ChaCha8Rng) {
    let expected = case.brute_force();
    for _ in 0..3 {
        let got = case.registry(rng).best_path(case.target);
        match (&got, &expected) {
            (Ok(g), Ok(e)) => assert_eq!(g, e, "case {case:?}"),
            (Err(DexError::NoPathFound), Err(DexError::NoPathFound)) => {}
            (Err(DexError::SameToken), _) if case.base == case.target => {}
            _ => panic!("router {got:?} vs enumeration {expected:?} for {case:?}"),
        }
    }
}

#[test]
fn best_path_matches_enumeration_on_random_registries() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let (mut ties, mut found) = (0, 0);
    for _ in 0..1500 {
        let case = gen_router_case(&mut rng);
        check(&case, &mut rng);
        ties += usize::from(case.has_tie());
        found += usize::from(case.brute_force().is_ok());
    }
    assert!(ties >= 100, "only {ties} tie cases generated");
    assert!(found >= 750, "only {found} cases had a route");
}

fn v2(dex: &str, x: u64, y: u64, rx: u64, ry: u64, fee: u32) -> Pool {
    Pool::V2(PoolV2::new(
        dex,
        Address::from_low_u64(x),
        Address::from_low_u64(y),
        U256::from(rx),
        U256::from(ry),
        fee,
    ))
}

fn dex(id: &str, fees: &[u32]) -> Dex {
    Dex {
        id: id.into(),
        style: DexStyle::V2,
        fee_tiers: fees.to_vec(),
    }
}

#[test]
fn equal_liquidity_prefers_direct_then_lower_fee_then_dex_order() {
    let (b, m, t) = (1, 10, 99);
    let reg = DexRegistry::new(
        Address::from_low_u64(b),
        vec![dex("a", &[3000]), dex("b", &[2500])],
        vec![Address::from_low_u64(m)],
        vec![
            v2("a", b, m, 500, 500, 3000),
            v2("a", m, t, 500, 500, 3000),
            v2("b", b, t, 500, 500, 2500),
            v2("a", b, t, 500, 500, 3000),
        ],
    )
    .unwrap();
    let q = reg.best_path(Address::from_low_u64(t)).unwrap();
    assert_eq!((q.dex_id.as_str(), q.fees.as_slice()), ("b", &[2500][..]));

    let reg = DexRegistry::new(
        Address::from_low_u64(b),
        vec![dex("a", &[3000]), dex("b", &[3000])],
        vec![],
        vec![v2("b", b, t, 500, 1, 3000), v2("a", b, t, 500, 9, 3000)],
    )
    .unwrap();
    assert_eq!(reg.best_path(Address::from_low_u64(t)).unwrap().dex_id, "a");
}

#[test]
fn zero_liquidity_everywhere_is_no_path() {
    let reg = DexRegistry::new(
        Address::from_low_u64(1),
        vec![dex("a", &[3000])],
        vec![Address::from_low_u64(10)],
        vec![v2("a", 1, 99, 0, 100, 3000), v2("a", 1, 10, 100, 0, 3000)],
    )
    .unwrap();
    assert_eq!(
        reg.best_path(Address::from_low_u64(99)),
        Err(DexError::NoPathFound)
    );
}
