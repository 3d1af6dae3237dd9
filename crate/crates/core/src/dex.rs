//! Simulated AMM pools, best-liquidity path selection and swap execution.
//!
//! Liquidity of a hop `(x, y)` is the `x`-side reserve of the pool in raw
//! `x` units: the actual reserve for constant-product pools and the virtual
//! reserve `L / sqrt(P)` (or `L * sqrt(P)`) for concentrated pools priced at
//! their spot price. For a hop starting at the base token this is a base
//! amount, so direct and two-hop candidates compare in the same unit.

use std::cmp::Reverse;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use ruint::aliases::{U256, U512};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{parse_address, Address};

pub const FEE_DENOMINATOR: u32 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DexError {
    #[error("no path with nonzero liquidity")]
    NoPathFound,
    #[error("source and target token are the same")]
    SameToken,
    #[error("amount in must be positive")]
    ZeroInput,
    #[error("insufficient liquidity")]
    InsufficientLiquidity,
    #[error("unknown dex {0:?}")]
    UnknownDex(String),
    #[error("no pool on {dex} for {token_in} -> {token_out} at fee {fee}")]
    NoPool {
        dex: String,
        token_in: Address,
        token_out: Address,
        fee: u32,
    },
    #[error("invalid registry: {0}")]
    InvalidRegistry(String),
    #[error("pool fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DexStyle {
    V2,
    V3,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dex {
    pub id: String,
    pub style: DexStyle,
    pub fee_tiers: Vec<u32>,
}

/// Constant-product pool. `token0 < token1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolV2 {
    pub dex_id: String,
    pub token0: Address,
    pub token1: Address,
    pub reserve0: U256,
    pub reserve1: U256,
    pub fee_ppm: u32,
}

/// Concentrated-liquidity pool reduced to one active range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolV3 {
    pub dex_id: String,
    pub token_a: Address,
    pub token_b: Address,
    pub fee_tier: u32,
    pub liquidity: U256,
    /// Spot price as `price_num / price_den` units of B per unit of A.
    pub price_num: U256,
    pub price_den: U256,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pool {
    V2(PoolV2),
    V3(PoolV3),
}

fn isqrt512(n: U512) -> U512 {
    n.root(2)
}

fn narrow(v: U512) -> U256 {
    U256::checked_from_limbs_slice(v.as_limbs()).unwrap_or(U256::MAX)
}

impl PoolV2 {
    pub fn new(
        dex_id: &str,
        token_x: Address,
        token_y: Address,
        reserve_x: U256,
        reserve_y: U256,
        fee_ppm: u32,
    ) -> Self {
        let (token0, token1, reserve0, reserve1) = if token_x < token_y {
            (token_x, token_y, reserve_x, reserve_y)
        } else {
            (token_y, token_x, reserve_y, reserve_x)
        };
        PoolV2 {
            dex_id: dex_id.to_string(),
            token0,
            token1,
            reserve0,
            reserve1,
            fee_ppm,
        }
    }

    pub fn reserve_of(&self, token: Address) -> Option<U256> {
        if token == self.token0 {
            Some(self.reserve0)
        } else if token == self.token1 {
            Some(self.reserve1)
        } else {
            None
        }
    }

    /// `in·(1e6−f)·R_out / (R_in·1e6 + in·(1e6−f))`, floored once.
    pub fn amount_out(&self, token_in: Address, amount_in: U256) -> Result<U256, DexError> {
        if amount_in.is_zero() {
            return Err(DexError::ZeroInput);
        }
        let (r_in, r_out) = if token_in == self.token0 {
            (self.reserve0, self.reserve1)
        } else if token_in == self.token1 {
            (self.reserve1, self.reserve0)
        } else {
            return Err(DexError::InvalidRegistry("token not in pool".into()));
        };
        if r_in.is_zero() || r_out.is_zero() {
            return Err(DexError::InsufficientLiquidity);
        }
        let fee_mul = U512::from(FEE_DENOMINATOR - self.fee_ppm);
        let in_fee = U512::from(amount_in) * fee_mul;
        let num = in_fee * U512::from(r_out);
        let den = U512::from(r_in) * U512::from(FEE_DENOMINATOR) + in_fee;
        let out = narrow(num / den);
        if out.is_zero() || out >= r_out {
            return Err(DexError::InsufficientLiquidity);
        }
        Ok(out)
    }

    pub fn swap_exact_in(&mut self, token_in: Address, amount_in: U256) -> Result<U256, DexError> {
        let out = self.amount_out(token_in, amount_in)?;
        if token_in == self.token0 {
            self.reserve0 = self.reserve0.checked_add(amount_in).ok_or(DexError::InsufficientLiquidity)?;
            self.reserve1 -= out;
        } else {
            self.reserve1 = self.reserve1.checked_add(amount_in).ok_or(DexError::InsufficientLiquidity)?;
            self.reserve0 -= out;
        }
        Ok(out)
    }
}

impl PoolV3 {
    /// Virtual reserves `(r_a, r_b)` at the current price.
    pub fn virtual_reserves(&self) -> (U256, U256) {
        if self.liquidity.is_zero() || self.price_num.is_zero() || self.price_den.is_zero() {
            return (U256::ZERO, U256::ZERO);
        }
        let l2 = U512::from(self.liquidity) * U512::from(self.liquidity);
        let ra = isqrt512(l2 * U512::from(self.price_den) / U512::from(self.price_num));
        let rb = isqrt512(l2 * U512::from(self.price_num) / U512::from(self.price_den));
        (narrow(ra), narrow(rb))
    }

    pub fn reserve_of(&self, token: Address) -> Option<U256> {
        let (ra, rb) = self.virtual_reserves();
        if token == self.token_a {
            Some(ra)
        } else if token == self.token_b {
            Some(rb)
        } else {
            None
        }
    }

    pub fn amount_out(&self, token_in: Address, amount_in: U256) -> Result<(U256, U256, U256), DexError> {
        if amount_in.is_zero() {
            return Err(DexError::ZeroInput);
        }
        let (ra, rb) = self.virtual_reserves();
        let (r_in, r_out) = if token_in == self.token_a {
            (ra, rb)
        } else if token_in == self.token_b {
            (rb, ra)
        } else {
            return Err(DexError::InvalidRegistry("token not in pool".into()));
        };
        if r_in.is_zero() || r_out.is_zero() {
            return Err(DexError::InsufficientLiquidity);
        }
        let in_eff = narrow(
            U512::from(amount_in) * U512::from(FEE_DENOMINATOR - self.fee_tier)
                / U512::from(FEE_DENOMINATOR),
        );
        let out = narrow(U512::from(r_out) * U512::from(in_eff) / (U512::from(r_in) + U512::from(in_eff)));
        if out.is_zero() || out >= r_out {
            return Err(DexError::InsufficientLiquidity);
        }
        let new_in = r_in.checked_add(in_eff).ok_or(DexError::InsufficientLiquidity)?;
        let new_out = r_out - out;
        Ok((out, new_in, new_out))
    }

    pub fn swap_exact_in(&mut self, token_in: Address, amount_in: U256) -> Result<U256, DexError> {
        let (out, new_in, new_out) = self.amount_out(token_in, amount_in)?;
        let (ra, rb) = if token_in == self.token_a {
            (new_in, new_out)
        } else {
            (new_out, new_in)
        };
        self.price_num = rb;
        self.price_den = ra;
        Ok(out)
    }
}

impl Pool {
    pub fn dex_id(&self) -> &str {
        match self {
            Pool::V2(p) => &p.dex_id,
            Pool::V3(p) => &p.dex_id,
        }
    }

    pub fn tokens(&self) -> (Address, Address) {
        match self {
            Pool::V2(p) => (p.token0, p.token1),
            Pool::V3(p) => (p.token_a, p.token_b),
        }
    }

    pub fn fee(&self) -> u32 {
        match self {
            Pool::V2(p) => p.fee_ppm,
            Pool::V3(p) => p.fee_tier,
        }
    }

    pub fn reserve_of(&self, token: Address) -> Option<U256> {
        match self {
            Pool::V2(p) => p.reserve_of(token),
            Pool::V3(p) => p.reserve_of(token),
        }
    }

    pub fn amount_out(&self, token_in: Address, amount_in: U256) -> Result<U256, DexError> {
        match self {
            Pool::V2(p) => p.amount_out(token_in, amount_in),
            Pool::V3(p) => p.amount_out(token_in, amount_in).map(|r| r.0),
        }
    }

    pub fn swap_exact_in(&mut self, token_in: Address, amount_in: U256) -> Result<U256, DexError> {
        match self {
            Pool::V2(p) => p.swap_exact_in(token_in, amount_in),
            Pool::V3(p) => p.swap_exact_in(token_in, amount_in),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathQuote {
    pub dex_id: String,
    pub path: Vec<Address>,
    pub fees: Vec<u32>,
    #[serde(with = "u256_text")]
    pub liquidity: U256,
}

impl PathQuote {
    /// The same route traversed from the last token back to the first.
    pub fn reversed(&self) -> PathQuote {
        PathQuote {
            dex_id: self.dex_id.clone(),
            path: self.path.iter().rev().copied().collect(),
            fees: self.fees.iter().rev().copied().collect(),
            liquidity: self.liquidity,
        }
    }
}

impl fmt::Display for PathQuote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hops: Vec<String> = self.path.iter().map(|a| a.to_string()).collect();
        write!(
            f,
            "{} [{}] fees {:?} L={}",
            self.dex_id,
            hops.join(" -> "),
            self.fees,
            self.liquidity
        )
    }
}

pub(crate) mod u256_text {
    use ruint::aliases::U256;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &U256, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<U256, D::Error> {
        let t = String::deserialize(d)?;
        U256::from_str_radix(&t, 10).map_err(serde::de::Error::custom)
    }
}

type PoolKey = (usize, Address, Address, u32);

/// Registered dexes, their pools, the intermediate token set and the base.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DexRegistry {
    dexes: Vec<Dex>,
    pools: Vec<Pool>,
    intermediates: Vec<Address>,
    base: Address,
    index: BTreeMap<PoolKey, usize>,
}

fn pair(a: Address, b: Address) -> (Address, Address) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl DexRegistry {
    pub fn new(
        base: Address,
        dexes: Vec<Dex>,
        intermediates: Vec<Address>,
        pools: Vec<Pool>,
    ) -> Result<Self, DexError> {
        if intermediates.contains(&base) {
            return Err(DexError::InvalidRegistry("intermediates must exclude the base".into()));
        }
        for (i, d) in dexes.iter().enumerate() {
            if dexes[..i].iter().any(|e| e.id == d.id) {
                return Err(DexError::InvalidRegistry(format!("duplicate dex {}", d.id)));
            }
        }
        let mut index = BTreeMap::new();
        for (pi, pool) in pools.iter().enumerate() {
            let di = dexes
                .iter()
                .position(|d| d.id == pool.dex_id())
                .ok_or_else(|| DexError::UnknownDex(pool.dex_id().to_string()))?;
            let style_ok = matches!(
                (dexes[di].style, pool),
                (DexStyle::V2, Pool::V2(_)) | (DexStyle::V3, Pool::V3(_))
            );
            if !style_ok {
                return Err(DexError::InvalidRegistry(format!(
                    "pool style differs from dex {}",
                    pool.dex_id()
                )));
            }
            if !dexes[di].fee_tiers.contains(&pool.fee()) {
                return Err(DexError::InvalidRegistry(format!(
                    "fee {} not offered by {}",
                    pool.fee(),
                    pool.dex_id()
                )));
            }
            if pool.fee() >= FEE_DENOMINATOR {
                return Err(DexError::InvalidRegistry("fee must be below 100%".into()));
            }
            let (a, b) = pool.tokens();
            if a == b {
                return Err(DexError::InvalidRegistry("pool with identical tokens".into()));
            }
            let (lo, hi) = pair(a, b);
            if index.insert((di, lo, hi, pool.fee()), pi).is_some() {
                return Err(DexError::InvalidRegistry(format!(
                    "duplicate pool on {} for {lo}/{hi} fee {}",
                    pool.dex_id(),
                    pool.fee()
                )));
            }
        }
        Ok(DexRegistry {
            dexes,
            pools,
            intermediates,
            base,
            index,
        })
    }

    pub fn empty(base: Address) -> Self {
        DexRegistry::new(base, Vec::new(), Vec::new(), Vec::new()).expect("empty registry is valid")
    }

    pub fn base(&self) -> Address {
        self.base
    }

    pub fn dexes(&self) -> &[Dex] {
        &self.dexes
    }

    pub fn pools(&self) -> &[Pool] {
        &self.pools
    }

    pub fn intermediates(&self) -> &[Address] {
        &self.intermediates
    }

    fn dex_index(&self, dex: &str) -> Option<usize> {
        self.dexes.iter().position(|d| d.id == dex)
    }

    pub fn pool(&self, dex: &str, x: Address, y: Address, fee: u32) -> Option<&Pool> {
        let (lo, hi) = pair(x, y);
        let di = self.dex_index(dex)?;
        self.index.get(&(di, lo, hi, fee)).map(|&i| &self.pools[i])
    }

    fn pool_index(&self, dex: &str, x: Address, y: Address, fee: u32) -> Result<usize, DexError> {
        let (lo, hi) = pair(x, y);
        let di = self
            .dex_index(dex)
            .ok_or_else(|| DexError::UnknownDex(dex.to_string()))?;
        self.index
            .get(&(di, lo, hi, fee))
            .copied()
            .ok_or(DexError::NoPool {
                dex: dex.to_string(),
                token_in: x,
                token_out: y,
                fee,
            })
    }

    /// The `token_x`-side reserve of the `(x, y, fee)` pool on `dex`; zero
    /// when absent.
    pub fn compute_liquidity(&self, dex: &str, token_x: Address, token_y: Address, fee: u32) -> U256 {
        self.pool(dex, token_x, token_y, fee)
            .and_then(|p| p.reserve_of(token_x))
            .unwrap_or(U256::ZERO)
    }

    /// Highest-liquidity route from the registry base to `target`.
    ///
    /// Ties on liquidity prefer a direct route, then the lower total fee,
    /// then registry order of the dex, of the intermediate, and finally of
    /// the fee tiers.
    pub fn best_path(&self, target: Address) -> Result<PathQuote, DexError> {
        self.best_path_from(self.base, target)
    }

    pub fn best_path_from(&self, base: Address, target: Address) -> Result<PathQuote, DexError> {
        if base == target {
            return Err(DexError::SameToken);
        }
        type Key = (Reverse<U256>, usize, u64, usize, usize, Vec<usize>);
        let mut best: Option<(Key, PathQuote)> = None;
        let mut consider = |key: Key, quote: PathQuote| {
            if key.0 .0.is_zero() {
                return;
            }
            if best.as_ref().is_none_or(|(k, _)| key < *k) {
                best = Some((key, quote));
            }
        };
        for (di, d) in self.dexes.iter().enumerate() {
            for (fi, &f) in d.fee_tiers.iter().enumerate() {
                let l = self.compute_liquidity(&d.id, base, target, f);
                consider(
                    (Reverse(l), 1, f as u64, di, 0, vec![fi]),
                    PathQuote {
                        dex_id: d.id.clone(),
                        path: vec![base, target],
                        fees: vec![f],
                        liquidity: l,
                    },
                );
            }
            for (mi, &m) in self.intermediates.iter().enumerate() {
                if m == target {
                    continue;
                }
                for (f1i, &f1) in d.fee_tiers.iter().enumerate() {
                    let l1 = self.compute_liquidity(&d.id, base, m, f1);
                    if l1.is_zero() {
                        continue;
                    }
                    for (f2i, &f2) in d.fee_tiers.iter().enumerate() {
                        let l2 = self.compute_liquidity(&d.id, m, target, f2);
                        let l = l1.min(l2);
                        consider(
                            (Reverse(l), 2, f1 as u64 + f2 as u64, di, mi, vec![f1i, f2i]),
                            PathQuote {
                                dex_id: d.id.clone(),
                                path: vec![base, m, target],
                                fees: vec![f1, f2],
                                liquidity: l,
                            },
                        );
                    }
                }
            }
        }
        best.map(|(_, q)| q).ok_or(DexError::NoPathFound)
    }

    /// Output of running `quote` without touching pool state.
    pub fn quote_out(&self, quote: &PathQuote, amount_in: U256) -> Result<U256, DexError> {
        self.clone().execute_path(quote, amount_in)
    }

    /// Swaps along `quote`; all hops apply or none.
    pub fn execute_path(&mut self, quote: &PathQuote, amount_in: U256) -> Result<U256, DexError> {
        if quote.fees.len() + 1 != quote.path.len() {
            return Err(DexError::InvalidRegistry("fees must have one entry per hop".into()));
        }
        let mut staged: Vec<(usize, Pool)> = Vec::new();
        let mut amount = amount_in;
        for (hop, &fee) in quote.fees.iter().enumerate() {
            let (x, y) = (quote.path[hop], quote.path[hop + 1]);
            let pi = self.pool_index(&quote.dex_id, x, y, fee)?;
            let pos = staged.iter().position(|(i, _)| *i == pi);
            let pool = match pos {
                Some(p) => &mut staged[p].1,
                None => {
                    staged.push((pi, self.pools[pi].clone()));
                    &mut staged.last_mut().expect("just pushed").1
                }
            };
            amount = pool.swap_exact_in(x, amount)?;
        }
        for (i, p) in staged {
            self.pools[i] = p;
        }
        Ok(amount)
    }

    pub fn load(path: &Path) -> Result<Self, DexError> {
        let text = std::fs::read_to_string(path).map_err(|e| DexError::Fixture {
            line: 0,
            reason: format!("{}: {e}", path.display()),
        })?;
        DexRegistry::parse(&text)
    }

    /// Line format:
    ///
    /// ```text
    /// base <address>
    /// intermediate <address>
    /// dex <id> V2|V3 <fee>[,<fee>...]
    /// pool <dex> <tokenX> <tokenY> <reserveX> <reserveY> <fee>            (V2)
    /// pool <dex> <tokenA> <tokenB> L=<liquidity> price=<num>/<den> <fee>  (V3)
    /// ```
    pub fn parse(text: &str) -> Result<Self, DexError> {
        let mut base = None;
        let mut dexes: Vec<Dex> = Vec::new();
        let mut intermediates = Vec::new();
        let mut pools = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let l = raw.trim();
            if l.is_empty() || l.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| DexError::Fixture {
                line,
                reason: reason.to_string(),
            };
            let w: Vec<&str> = l.split_whitespace().collect();
            let addr = |s: &str| parse_address(s).map_err(|_| bad("bad address"));
            let num = |s: &str| U256::from_str_radix(s, 10).map_err(|_| bad("bad integer"));
            let fee = |s: &str| s.parse::<u32>().map_err(|_| bad("bad fee"));
            match (w[0], w.len()) {
                ("base", 2) => base = Some(addr(w[1])?),
                ("intermediate", 2) => intermediates.push(addr(w[1])?),
                ("dex", 4) => {
                    let style = match w[2] {
                        "V2" => DexStyle::V2,
                        "V3" => DexStyle::V3,
                        _ => return Err(bad("style must be V2 or V3")),
                    };
                    let fee_tiers = w[3].split(',').map(fee).collect::<Result<Vec<_>, _>>()?;
                    dexes.push(Dex {
                        id: w[1].to_string(),
                        style,
                        fee_tiers,
                    });
                }
                ("pool", 7) => {
                    let style = dexes
                        .iter()
                        .find(|d| d.id == w[1])
                        .map(|d| d.style)
                        .ok_or_else(|| bad("pool references an undeclared dex"))?;
                    let (a, b) = (addr(w[2])?, addr(w[3])?);
                    pools.push(match style {
                        DexStyle::V2 => Pool::V2(PoolV2::new(w[1], a, b, num(w[4])?, num(w[5])?, fee(w[6])?)),
                        DexStyle::V3 => {
                            let liquidity = num(w[4].strip_prefix("L=").ok_or_else(|| bad("expected L="))?)?;
                            let (pn, pd) = w[5]
                                .strip_prefix("price=")
                                .and_then(|p| p.split_once('/'))
                                .ok_or_else(|| bad("expected price=<num>/<den>"))?;
                            let (price_num, price_den) = (num(pn)?, num(pd)?);
                            if price_den.is_zero() {
                                return Err(bad("zero price denominator"));
                            }
                            Pool::V3(PoolV3 {
                                dex_id: w[1].to_string(),
                                token_a: a,
                                token_b: b,
                                fee_tier: fee(w[6])?,
                                liquidity,
                                price_num,
                                price_den,
                            })
                        }
                    });
                }
                _ => return Err(bad("unrecognised line")),
            }
        }
        let base = base.ok_or(DexError::Fixture {
            line: 0,
            reason: "missing base line".into(),
        })?;
        DexRegistry::new(base, dexes, intermediates, pools)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const E18: u128 = 1_000_000_000_000_000_000;

    fn a(n: u64) -> Address {
        Address::from_low_u64(n)
    }

    fn v2dex(id: &str) -> Dex {
        Dex {
            id: id.into(),
            style: DexStyle::V2,
            fee_tiers: vec![3000],
        }
    }

    #[test]
    fn v2_liquidity_is_base_side_reserve() {
        let (b, t) = (a(1), a(2));
        let r = DexRegistry::new(
            b,
            vec![v2dex("u")],
            vec![],
            vec![Pool::V2(PoolV2::new("u", b, t, U256::from(1000), U256::from(5000), 3000))],
        )
        .unwrap();
        assert_eq!(r.compute_liquidity("u", b, t, 3000), U256::from(1000));
        assert_eq!(r.compute_liquidity("u", b, a(3), 3000), U256::ZERO);
    }

    #[test]
    fn v3_zero_liquidity() {
        let p = PoolV3 {
            dex_id: "v3".into(),
            token_a: a(1),
            token_b: a(2),
            fee_tier: 500,
            liquidity: U256::ZERO,
            price_num: U256::from(1),
            price_den: U256::from(1),
        };
        assert_eq!(p.reserve_of(a(1)), Some(U256::ZERO));
    }

    #[test]
    fn v3_virtual_reserves_at_price_four() {
        let p = PoolV3 {
            dex_id: "v3".into(),
            token_a: a(1),
            token_b: a(2),
            fee_tier: 500,
            liquidity: U256::from(1000),
            price_num: U256::from(4),
            price_den: U256::from(1),
        };
        // x = L / sqrt(P) = 500, y = L * sqrt(P) = 2000
        assert_eq!(p.virtual_reserves(), (U256::from(500), U256::from(2000)));
    }

    #[test]
    fn swap_ten_into_thousand() {
        let (t, b) = (a(2), a(1));
        let mut p = PoolV2::new("u", t, b, U256::from(1000 * E18), U256::from(1000 * E18), 3000);
        let out = p.swap_exact_in(t, U256::from(10 * E18)).unwrap();
        // 10 * 997000 * 1000 / (1000 * 1e6 + 10 * 997000), in 1e18 units.
        assert_eq!(out, U256::from(9_871_580_343_970_612_988u128));
        assert_eq!(p.reserve_of(t), Some(U256::from(1010 * E18)));
    }

    #[test]
    fn swap_errors() {
        let mut p = PoolV2::new("u", a(1), a(2), U256::from(1000), U256::from(1000), 3000);
        assert_eq!(p.swap_exact_in(a(1), U256::ZERO), Err(DexError::ZeroInput));
        assert_eq!(p.swap_exact_in(a(1), U256::from(1)), Err(DexError::InsufficientLiquidity));
    }

    #[test]
    fn direct_beats_weaker_two_hop() {
        let (b, m, t) = (a(1), a(2), a(3));
        let r = DexRegistry::new(
            b,
            vec![v2dex("u")],
            vec![m],
            vec![
                Pool::V2(PoolV2::new("u", b, t, U256::from(100), U256::from(100), 3000)),
                Pool::V2(PoolV2::new("u", b, m, U256::from(50), U256::from(50), 3000)),
                Pool::V2(PoolV2::new("u", m, t, U256::from(200), U256::from(200), 3000)),
            ],
        )
        .unwrap();
        let q = r.best_path(t).unwrap();
        assert_eq!(q.path, vec![b, t]);
        assert_eq!(q.liquidity, U256::from(100));
    }

    #[test]
    fn two_hop_when_direct_absent() {
        let (b, m, t) = (a(1), a(2), a(3));
        let r = DexRegistry::new(
            b,
            vec![v2dex("u")],
            vec![m],
            vec![
                Pool::V2(PoolV2::new("u", b, m, U256::from(300), U256::from(300), 3000)),
                Pool::V2(PoolV2::new("u", m, t, U256::from(120), U256::from(120), 3000)),
            ],
        )
        .unwrap();
        let q = r.best_path(t).unwrap();
        assert_eq!(q.path, vec![b, m, t]);
        assert_eq!(q.liquidity, U256::from(120));
    }

    #[test]
    fn empty_registry_has_no_path() {
        assert_eq!(DexRegistry::empty(a(1)).best_path(a(2)), Err(DexError::NoPathFound));
        assert_eq!(DexRegistry::empty(a(1)).best_path(a(1)), Err(DexError::SameToken));
    }

    #[test]
    fn second_hop_failure_rolls_back() {
        let (b, m, t) = (a(1), a(2), a(3));
        let mut r = DexRegistry::new(
            b,
            vec![v2dex("u")],
            vec![m],
            vec![
                Pool::V2(PoolV2::new("u", b, m, U256::from(1_000_000), U256::from(1_000_000), 3000)),
                Pool::V2(PoolV2::new("u", m, t, U256::from(1_000_000), U256::from(1), 3000)),
            ],
        )
        .unwrap();
        let before = r.clone();
        let q = PathQuote {
            dex_id: "u".into(),
            path: vec![b, m, t],
            fees: vec![3000, 3000],
            liquidity: U256::ZERO,
        };
        assert_eq!(r.execute_path(&q, U256::from(1000)), Err(DexError::InsufficientLiquidity));
        assert_eq!(r, before);
    }

    #[test]
    fn fixture_parse() {
        let text = "base 0x0000000000000000000000000000000000000001\n\
                    intermediate 0x0000000000000000000000000000000000000002\n\
                    dex u2 V2 3000\n\
                    dex u3 V3 500,3000\n\
                    pool u2 0x0000000000000000000000000000000000000003 0x0000000000000000000000000000000000000001 10 20 3000\n\
                    pool u3 0x0000000000000000000000000000000000000001 0x0000000000000000000000000000000000000003 L=1000 price=4/1 500\n";
        let r = DexRegistry::parse(text).unwrap();
        assert_eq!(r.pools().len(), 2);
        assert_eq!(r.compute_liquidity("u2", a(1), a(3), 3000), U256::from(20));
        assert_eq!(r.compute_liquidity("u3", a(1), a(3), 500), U256::from(500));
        let bad = text.replace("L=1000", "1000");
        assert!(matches!(DexRegistry::parse(&bad), Err(DexError::Fixture { line: 6, .. })));
    }
}
