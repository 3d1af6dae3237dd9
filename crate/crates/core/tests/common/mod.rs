//! Randomized registry and balance-sheet generators shared by the
//! integration suites, plus oracles computed without the library's math.

#![allow(dead_code)]

use std::collections::BTreeMap;

use exgen::dex::{Dex, DexError, DexRegistry, DexStyle, PathQuote, Pool, PoolV2, PoolV3};
use exgen::domain::{base_currency, Address, ChainId, TokenAmount};
use exgen::revenue::{initial_provisioning, BalanceSheet, USDC_ETH, USDT_ETH};
use num_bigint::{BigInt, BigUint};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use ruint::aliases::U256;

pub fn big(v: U256) -> BigUint {
    BigUint::from_bytes_be(&v.to_be_bytes::<32>())
}

pub fn u256(v: &BigUint) -> U256 {
    U256::from_be_slice(&v.to_bytes_be())
}

/// Largest `s` with `s² · den ≤ l² · num`, by bisection.
pub fn floor_sqrt_ratio(l: &BigUint, num: &BigUint, den: &BigUint) -> BigUint {
    if den == &BigUint::ZERO {
        return BigUint::ZERO;
    }
    let target = l * l * num;
    let (mut lo, mut hi) = (BigUint::ZERO, l * num + 1u32);
    while &hi - &lo > BigUint::from(1u32) {
        let mid = (&lo + &hi) >> 1;
        if &mid * &mid * den <= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// One pool as the generator authored it.
#[derive(Debug, Clone)]
pub enum PoolSpec {
    V2 {
        dex: String,
        x: Address,
        y: Address,
        rx: U256,
        ry: U256,
        fee: u32,
    },
    V3 {
        dex: String,
        a: Address,
        b: Address,
        liquidity: U256,
        num: U256,
        den: U256,
        fee: u32,
    },
}

impl PoolSpec {
    pub fn dex(&self) -> &str {
        match self {
            PoolSpec::V2 { dex, .. } | PoolSpec::V3 { dex, .. } => dex,
        }
    }

    pub fn fee(&self) -> u32 {
        match self {
            PoolSpec::V2 { fee, .. } | PoolSpec::V3 { fee, .. } => *fee,
        }
    }

    pub fn joins(&self, p: Address, q: Address) -> bool {
        let (u, v) = match self {
            PoolSpec::V2 { x, y, .. } => (*x, *y),
            PoolSpec::V3 { a, b, .. } => (*a, *b),
        };
        (u == p && v == q) || (u == q && v == p)
    }

    /// Reserve on the `side` token, in that token's units.
    pub fn side_liquidity(&self, side: Address) -> BigUint {
        match self {
            PoolSpec::V2 { x, rx, ry, .. } => big(if side == *x { *rx } else { *ry }),
            PoolSpec::V3 {
                a,
                liquidity,
                num,
                den,
                ..
            } => {
                if num.is_zero() || den.is_zero() {
                    return BigUint::ZERO;
                }
                let (n, d) = if side == *a { (den, num) } else { (num, den) };
                floor_sqrt_ratio(&big(*liquidity), &big(*n), &big(*d))
            }
        }
    }

    pub fn to_pool(&self) -> Pool {
        match self.clone() {
            PoolSpec::V2 {
                dex,
                x,
                y,
                rx,
                ry,
                fee,
            } => Pool::V2(PoolV2::new(&dex, x, y, rx, ry, fee)),
            PoolSpec::V3 {
                dex,
                a,
                b,
                liquidity,
                num,
                den,
                fee,
            } => Pool::V3(PoolV3 {
                dex_id: dex,
                token_a: a,
                token_b: b,
                fee_tier: fee,
                liquidity,
                price_num: num,
                price_den: den,
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RouterCase {
    pub base: Address,
    pub target: Address,
    pub dexes: Vec<Dex>,
    pub intermediates: Vec<Address>,
    pub pools: Vec<PoolSpec>,
}

impl RouterCase {
    pub fn registry(&self, rng: &mut ChaCha8Rng) -> DexRegistry {
        let mut pools: Vec<Pool> = self.pools.iter().map(PoolSpec::to_pool).collect();
        pools.shuffle(rng);
        DexRegistry::new(self.base, self.dexes.clone(), self.intermediates.clone(), pools)
            .expect("generated registry is valid")
    }

    fn hop(&self, dex: &str, x: Address, y: Address, fee: u32) -> BigUint {
        self.pools
            .iter()
            .find(|p| p.dex() == dex && p.fee() == fee && p.joins(x, y))
            .map_or(BigUint::ZERO, |p| p.side_liquidity(x))
    }

    /// Every route, ranked, and the first one with positive liquidity.
    pub fn brute_force(&self) -> Result<PathQuote, DexError> {
        type Rank = (std::cmp::Reverse<BigUint>, usize, u64, usize, usize, Vec<usize>);
        let mut all: Vec<(Rank, PathQuote)> = Vec::new();
        for (di, d) in self.dexes.iter().enumerate() {
            for (fi, &f) in d.fee_tiers.iter().enumerate() {
                let l = self.hop(&d.id, self.base, self.target, f);
                all.push((
                    (std::cmp::Reverse(l.clone()), 1, f as u64, di, 0, vec![fi]),
                    PathQuote {
                        dex_id: d.id.clone(),
                        path: vec![self.base, self.target],
                        fees: vec![f],
                        liquidity: u256(&l),
                    },
                ));
                for (mi, &m) in self.intermediates.iter().enumerate() {
                    if m == self.target {
                        continue;
                    }
                    for (gi, &g) in d.fee_tiers.iter().enumerate() {
                        let l1 = self.hop(&d.id, self.base, m, f);
                        let l2 = self.hop(&d.id, m, self.target, g);
                        let l = l1.min(l2);
                        all.push((
                            (std::cmp::Reverse(l.clone()), 2, f as u64 + g as u64, di, mi, vec![fi, gi]),
                            PathQuote {
                                dex_id: d.id.clone(),
                                path: vec![self.base, m, self.target],
                                fees: vec![f, g],
                                liquidity: u256(&l),
                            },
                        ));
                    }
                }
            }
        }
        all.retain(|(r, _)| r.0 .0 > BigUint::ZERO);
        all.sort_by(|a, b| a.0.cmp(&b.0));
        all.into_iter().next().map(|(_, q)| q).ok_or(DexError::NoPathFound)
    }

    /// Whether another route shares the winner's liquidity.
    pub fn has_tie(&self) -> bool {
        let Ok(best) = self.brute_force() else {
            return false;
        };
        let mut same = 0;
        for d in &self.dexes {
            for &f in &d.fee_tiers {
                if u256(&self.hop(&d.id, self.base, self.target, f)) == best.liquidity {
                    same += 1;
                }
                for &m in &self.intermediates {
                    if m == self.target {
                        continue;
                    }
                    for &g in &d.fee_tiers {
                        let l = self
                            .hop(&d.id, self.base, m, f)
                            .min(self.hop(&d.id, m, self.target, g));
                        if u256(&l) == best.liquidity {
                            same += 1;
                        }
                    }
                }
            }
        }
        same > 1
    }
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

/// A registry with up to 4 dexes and 5 intermediates. Amounts come from a
/// small menu so equal liquidities, and hence ties, are common.
pub fn gen_router_case(rng: &mut ChaCha8Rng) -> RouterCase {
    let base = Address::from_low_u64(1);
    let n_inter = rng.random_range(0..=5usize);
    let mut intermediates: Vec<Address> = (0..n_inter).map(|i| Address::from_low_u64(10 + i as u64)).collect();
    let target = if n_inter > 0 && rng.random_bool(0.1) {
        intermediates[rng.random_range(0..n_inter)]
    } else {
        Address::from_low_u64(99)
    };
    intermediates.shuffle(rng);
    let n_dex = rng.random_range(1..=4usize);
    let mut dexes = Vec::new();
    for i in 0..n_dex {
        let v3 = rng.random_bool(0.5);
        let menu: &[u32] = if v3 { &[100, 500, 3000, 10000] } else { &[2500, 3000] };
        let mut tiers: Vec<u32> = menu.iter().copied().filter(|_| rng.random_bool(0.6)).collect();
        if tiers.is_empty() {
            tiers.push(pick(rng, menu));
        }
        tiers.shuffle(rng);
        dexes.push(Dex {
            id: format!("dex{i}"),
            style: if v3 { DexStyle::V3 } else { DexStyle::V2 },
            fee_tiers: tiers,
        });
    }
    let amounts = [0u128, 1_000, 2_000, 4_000, 1_000_000_000_000_000_000_000];
    let prices: [(u64, u64); 5] = [(1, 1), (4, 1), (1, 4), (2, 1), (9, 4)];
    let mut pairs: Vec<(Address, Address)> = vec![(base, target)];
    for &m in &intermediates {
        pairs.push((base, m));
        pairs.push((m, target));
    }
    if intermediates.len() >= 2 {
        pairs.push((intermediates[0], intermediates[1]));
    }
    let mut seen = Vec::new();
    pairs.retain(|&(p, q)| {
        let key = if p < q { (p, q) } else { (q, p) };
        let fresh = p != q && !seen.contains(&key);
        seen.push(key);
        fresh
    });
    let mut pools = Vec::new();
    for d in &dexes {
        for &(p, q) in &pairs {
            for &fee in &d.fee_tiers {
                if !rng.random_bool(0.55) {
                    continue;
                }
                let (x, y) = if rng.random_bool(0.5) { (p, q) } else { (q, p) };
                pools.push(match d.style {
                    DexStyle::V2 => PoolSpec::V2 {
                        dex: d.id.clone(),
                        x,
                        y,
                        rx: U256::from(pick(rng, &amounts)),
                        ry: U256::from(pick(rng, &amounts)),
                        fee,
                    },
                    DexStyle::V3 => {
                        let (n, dd) = pick(rng, &prices);
                        PoolSpec::V3 {
                            dex: d.id.clone(),
                            a: x,
                            b: y,
                            liquidity: U256::from(pick(rng, &amounts)),
                            num: U256::from(n),
                            den: U256::from(dd),
                            fee,
                        }
                    }
                });
            }
        }
    }
    RouterCase {
        base,
        target,
        dexes,
        intermediates,
        pools,
    }
}

/// `(initial, final, registry)` on Ethereum with the provisioned stables
/// plus up to three extra tokens, some of which lack a route to base.
pub struct NormalizerCase {
    pub initial: BalanceSheet,
    pub final_sheet: BalanceSheet,
    pub registry: DexRegistry,
}

const E18: u128 = 1_000_000_000_000_000_000;

pub fn gen_normalizer_case(rng: &mut ChaCha8Rng) -> NormalizerCase {
    let chain = ChainId::Ethereum;
    let weth = base_currency(chain).wrapped;
    let mut initial = initial_provisioning(chain);
    let extras: Vec<Address> = (0..rng.random_range(0..=3u64))
        .map(|i| Address::from_low_u64(0x1000 + i))
        .collect();
    for &x in &extras {
        let units = if rng.random_bool(0.5) { 0 } else { rng.random_range(1..1_000u64) };
        initial.set(x, TokenAmount::whole(units, 18).unwrap());
    }
    let dexes = vec![
        Dex {
            id: "cp".into(),
            style: DexStyle::V2,
            fee_tiers: vec![3000],
        },
        Dex {
            id: "cl".into(),
            style: DexStyle::V3,
            fee_tiers: vec![500, 3000],
        },
    ];
    let mut pools = Vec::new();
    let mut depth: BTreeMap<Address, u128> = BTreeMap::new();
    let mut tokens = vec![(USDC_ETH, 6u8), (USDT_ETH, 6u8)];
    tokens.extend(extras.iter().map(|&x| (x, 18u8)));
    for &(t, dec) in &tokens {
        let unit = 10u128.pow(dec as u32);
        let routed = t == USDC_ETH || rng.random_bool(0.8);
        if !routed {
            continue;
        }
        let base_units: u128 = rng.random_range(1_000..1_000_000);
        let tok_units: u128 = rng.random_range(1_000..100_000_000);
        depth.insert(t, tok_units * unit);
        if rng.random_bool(0.5) {
            pools.push(Pool::V2(PoolV2::new(
                "cp",
                weth,
                t,
                U256::from(base_units * E18),
                U256::from(tok_units * unit),
                3000,
            )));
        } else {
            // L = sqrt(rb · rt), price = rt / rb.
            let rb = BigUint::from(base_units * E18);
            let rt = BigUint::from(tok_units * unit);
            let l = (&rb * &rt).sqrt();
            let (a, b, num, den) = if rng.random_bool(0.5) {
                (weth, t, rt.clone(), rb.clone())
            } else {
                (t, weth, rb.clone(), rt.clone())
            };
            pools.push(Pool::V3(PoolV3 {
                dex_id: "cl".into(),
                token_a: a,
                token_b: b,
                fee_tier: pick(rng, &[500u32, 3000]),
                liquidity: u256(&l),
                price_num: u256(&num),
                price_den: u256(&den),
            }));
        }
    }
    pools.shuffle(rng);
    let intermediates = if rng.random_bool(0.5) { vec![USDC_ETH] } else { vec![] };
    let registry = DexRegistry::new(weth, dexes, intermediates, pools).unwrap();

    let mut final_sheet = initial.clone();
    for &(t, dec) in &tokens {
        let have = initial.raw(t);
        let cap = depth.get(&t).copied().unwrap_or(10u128.pow(dec as u32) * 1_000) / 50;
        let d = U256::from(rng.random_range(0..=cap.max(1)));
        let new = match rng.random_range(0..3) {
            0 => have,
            1 => have + d,
            _ => have.saturating_sub(d),
        };
        final_sheet.set(t, TokenAmount::new(new, dec).unwrap());
    }
    for b in [Address::NATIVE, weth] {
        let have = initial.raw(b);
        let d = U256::from(rng.random_range(0..1_000u128) * E18);
        let new = if rng.random_bool(0.5) { have + d } else { have - d };
        final_sheet.set(b, TokenAmount::new(new, 18).unwrap());
    }
    NormalizerCase {
        initial,
        final_sheet,
        registry,
    }
}

/// Native plus wrapped base as a signed integer.
pub fn base_sum(sheet: &BalanceSheet) -> BigInt {
    let weth = base_currency(sheet.chain).wrapped;
    BigInt::from(big(sheet.raw(Address::NATIVE))) + BigInt::from(big(sheet.raw(weth)))
}

pub fn signed(a: &exgen::domain::SignedAmount) -> BigInt {
    let m = BigInt::from(big(a.magnitude.raw));
    if a.negative {
        -m
    } else {
        m
    }
}

/// Violations of the post-reconciliation invariants, empty when all hold.
pub fn normalizer_violations(case: &NormalizerCase, rec: &exgen::revenue::Reconciliation) -> Vec<String> {
    let mut bad = Vec::new();
    let weth = base_currency(case.initial.chain).wrapped;
    for t in case.initial.balances.keys().chain(case.final_sheet.balances.keys()) {
        if *t == Address::NATIVE || *t == weth {
            continue;
        }
        let floor = case.initial.raw(*t);
        if rec.sheet.raw(*t) < floor {
            bad.push(format!("{t} ended at {} below {}", rec.sheet.raw(*t), floor));
        }
    }
    let delta = base_sum(&rec.sheet) - base_sum(&case.initial);
    if signed(&rec.profit) != delta {
        bad.push(format!("profit {} differs from base delta {delta}", signed(&rec.profit)));
    }
    bad
}

/// Constant-product output `in·(1−f)·R_out / (R_in + in·(1−f))`, exact.
pub fn cp_out(amount_in: u128, r_in: u128, r_out: u128, fee_ppm: u32) -> BigUint {
    let a = BigUint::from(amount_in) * BigUint::from(1_000_000 - fee_ppm);
    let num = &a * BigUint::from(r_out);
    let den = BigUint::from(r_in) * BigUint::from(1_000_000u32) + a;
    num / den
}
