//! Initial provisioning, post-run reconciliation and the base-currency
//! profit metric.

use std::collections::BTreeMap;
use std::sync::Arc;

use ruint::aliases::U256;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dex::{DexError, DexRegistry, PathQuote};
use crate::domain::{base_currency, hex20, Address, ChainId, DomainError, SignedAmount, TokenAmount};
use crate::tools::{address_arg, arg, Tool, ToolError, ToolOutput, REVENUE_NORMALIZER};

/// Surpluses below this many raw units are left in place.
pub const DUST_RAW: u64 = 1_000;

/// Buy rounds allowed per deficit token.
pub const MAX_DEFICIT_ROUNDS: usize = 16;

pub const USDC_ETH: Address = Address(hex20("a0b86991c6218b36c1d19d4a2e9eb0ce3606eb48"));
pub const USDT_ETH: Address = Address(hex20("dac17f958d2ee523a2206206994597c13d831ec7"));
pub const USDT_BSC: Address = Address(hex20("55d398326f99059ff775485246999027b3197955"));
pub const BUSD_BSC: Address = Address(hex20("e9e7cea3dcae0c8a0b8d4b52ec0d25e2a7e7f9b4"));

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RevenueError {
    #[error("balance sheets are on different chains")]
    ChainMismatch,
    #[error("registry base {0} is not the chain's wrapped base")]
    BaseMismatch(Address),
    #[error("deficit in {0} cannot be covered")]
    ReconciliationInfeasible(Address),
    #[error("balance of {0} fell below its initial value")]
    InvariantViolated(Address),
    #[error(transparent)]
    Amount(#[from] DomainError),
}

/// Per-token balances of one chain. `Address::NATIVE` keys the native
/// currency; the wrapped base is a separate entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSheet {
    pub chain: ChainId,
    pub balances: BTreeMap<Address, TokenAmount>,
}

impl BalanceSheet {
    pub fn new(chain: ChainId) -> Self {
        BalanceSheet {
            chain,
            balances: BTreeMap::new(),
        }
    }

    pub fn get(&self, token: Address) -> Option<TokenAmount> {
        self.balances.get(&token).copied()
    }

    pub fn raw(&self, token: Address) -> U256 {
        self.get(token).map_or(U256::ZERO, |a| a.raw)
    }

    pub fn set(&mut self, token: Address, amount: TokenAmount) {
        self.balances.insert(token, amount);
    }

    /// Native plus wrapped base.
    pub fn base_total(&self) -> Result<TokenAmount, DomainError> {
        let b = base_currency(self.chain);
        let zero = TokenAmount::zero(b.decimals);
        let native = self.get(Address::NATIVE).unwrap_or(zero);
        let wrapped = self.get(b.wrapped).unwrap_or(zero);
        native.checked_add(wrapped)
    }

    pub fn is_base(&self, token: Address) -> bool {
        token == Address::NATIVE || token == base_currency(self.chain).wrapped
    }
}

/// Starting balances of the exploit contract.
pub fn initial_provisioning(chain: ChainId) -> BalanceSheet {
    let base = base_currency(chain);
    let whole = |units, decimals| TokenAmount::whole(units, decimals).expect("small constant");
    let mut s = BalanceSheet::new(chain);
    s.set(Address::NATIVE, whole(100_000, 18));
    s.set(base.wrapped, whole(100_000, 18));
    match chain {
        ChainId::Ethereum => {
            s.set(USDC_ETH, whole(10_000_000, 6));
            s.set(USDT_ETH, whole(10_000_000, 6));
        }
        ChainId::Bsc => {
            s.set(USDT_BSC, whole(10_000_000, 18));
            s.set(BUSD_BSC, whole(10_000_000, 18));
        }
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LegKind {
    SellSurplus,
    BuyDeficit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapLeg {
    pub kind: LegKind,
    pub token: Address,
    pub quote: PathQuote,
    pub amount_in: TokenAmount,
    pub amount_out: TokenAmount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reconciliation {
    pub sheet: BalanceSheet,
    pub profit: SignedAmount,
    pub legs: Vec<SwapLeg>,
    /// Surpluses with no route to base (or too small to trade); they stay
    /// on the sheet and add nothing to profit.
    pub unrealizable: Vec<(Address, TokenAmount)>,
}

fn out_or_zero(reg: &DexRegistry, quote: &PathQuote, amount: U256) -> U256 {
    if amount.is_zero() {
        return U256::ZERO;
    }
    reg.quote_out(quote, amount).unwrap_or(U256::ZERO)
}

/// Smallest input in `(0, hi]` whose quote covers `want`, to one raw unit.
fn min_input_for(reg: &DexRegistry, quote: &PathQuote, want: U256, hi: U256) -> Option<U256> {
    if out_or_zero(reg, quote, hi) < want {
        return None;
    }
    let (mut lo, mut hi) = (U256::ZERO, hi);
    while hi - lo > U256::from(1u8) {
        let mid = lo + (hi - lo) / U256::from(2u8);
        if out_or_zero(reg, quote, mid) >= want {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Sells every surplus for base and buys back every deficit with base, on
/// a private copy of `registry`.
pub fn reconcile(
    initial: &BalanceSheet,
    final_sheet: &BalanceSheet,
    registry: &DexRegistry,
) -> Result<Reconciliation, RevenueError> {
    if initial.chain != final_sheet.chain {
        return Err(RevenueError::ChainMismatch);
    }
    let base = base_currency(initial.chain);
    if registry.base() != base.wrapped {
        return Err(RevenueError::BaseMismatch(registry.base()));
    }
    let mut reg = registry.clone();
    let mut sheet = final_sheet.clone();
    for (t, a) in &initial.balances {
        sheet
            .balances
            .entry(*t)
            .or_insert(TokenAmount::zero(a.decimals));
    }
    let mut legs = Vec::new();
    let mut unrealizable = Vec::new();
    let tokens: Vec<Address> = sheet
        .balances
        .keys()
        .copied()
        .filter(|t| !sheet.is_base(*t))
        .collect();
    let initial_of = |t: Address, decimals: u8| initial.get(t).unwrap_or(TokenAmount::zero(decimals));

    for &t in &tokens {
        let have = sheet.get(t).expect("present");
        let start = initial_of(t, have.decimals);
        if have.raw <= start.raw {
            continue;
        }
        let surplus = have.checked_sub(start)?;
        if surplus.raw < U256::from(DUST_RAW) {
            unrealizable.push((t, surplus));
            continue;
        }
        let Ok(sell) = reg.best_path(t).map(|q| q.reversed()) else {
            unrealizable.push((t, surplus));
            continue;
        };
        match reg.execute_path(&sell, surplus.raw) {
            Ok(out) => {
                let out = TokenAmount::new(out, base.decimals)?;
                sheet.set(t, start);
                let w = sheet.get(base.wrapped).unwrap_or(TokenAmount::zero(base.decimals));
                sheet.set(base.wrapped, w.checked_add(out)?);
                legs.push(SwapLeg {
                    kind: LegKind::SellSurplus,
                    token: t,
                    quote: sell,
                    amount_in: surplus,
                    amount_out: out,
                });
            }
            Err(_) => unrealizable.push((t, surplus)),
        }
    }

    for &t in &tokens {
        let have = sheet.get(t).expect("present");
        let start = initial_of(t, have.decimals);
        if have.raw >= start.raw {
            continue;
        }
        let buy = reg
            .best_path(t)
            .map_err(|_| RevenueError::ReconciliationInfeasible(t))?;
        let mut rounds = 0;
        loop {
            let have = sheet.get(t).expect("present");
            if have.raw >= start.raw {
                break;
            }
            if rounds == MAX_DEFICIT_ROUNDS {
                return Err(RevenueError::ReconciliationInfeasible(t));
            }
            rounds += 1;
            let need = start.raw - have.raw;
            let funds = sheet.base_total()?.raw;
            let x = min_input_for(&reg, &buy, need, funds)
                .ok_or(RevenueError::ReconciliationInfeasible(t))?;
            let got = reg
                .execute_path(&buy, x)
                .map_err(|_| RevenueError::ReconciliationInfeasible(t))?;
            if got.is_zero() {
                return Err(RevenueError::ReconciliationInfeasible(t));
            }
            // Spend wrapped base first, then native.
            let w = sheet.raw(base.wrapped);
            let from_wrapped = w.min(x);
            sheet.set(base.wrapped, TokenAmount::new(w - from_wrapped, base.decimals)?);
            let n = sheet.raw(Address::NATIVE);
            sheet.set(
                Address::NATIVE,
                TokenAmount::new(n - (x - from_wrapped), base.decimals)?,
            );
            sheet.set(t, TokenAmount::new(have.raw + got, have.decimals)?);
            legs.push(SwapLeg {
                kind: LegKind::BuyDeficit,
                token: t,
                quote: buy.clone(),
                amount_in: TokenAmount::new(x, base.decimals)?,
                amount_out: TokenAmount::new(got, have.decimals)?,
            });
        }
    }

    let profit = profit_metric(initial, &sheet)?;
    Ok(Reconciliation {
        sheet,
        profit,
        legs,
        unrealizable,
    })
}

/// `B_f(BASE) − B_i(BASE)` with native and wrapped base summed. Fails when
/// any other token ended below its initial balance.
pub fn profit_metric(
    initial: &BalanceSheet,
    reconciled: &BalanceSheet,
) -> Result<SignedAmount, RevenueError> {
    if initial.chain != reconciled.chain {
        return Err(RevenueError::ChainMismatch);
    }
    for (t, a) in &initial.balances {
        if initial.is_base(*t) {
            continue;
        }
        if reconciled.raw(*t) < a.raw {
            return Err(RevenueError::InvariantViolated(*t));
        }
    }
    Ok(SignedAmount::delta(initial.base_total()?, reconciled.base_total()?)?)
}

/// Quotes what an amount of a token is worth in base along the best route.
pub struct RevenueNormalizerTool {
    pub registry: Arc<DexRegistry>,
}

impl Tool for RevenueNormalizerTool {
    fn name(&self) -> &'static str {
        REVENUE_NORMALIZER
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let token = address_arg(REVENUE_NORMALIZER, args, "token")?;
        let amount_text = arg(REVENUE_NORMALIZER, args, "amount")?;
        let amount = U256::from_str_radix(amount_text, 10).map_err(|e| ToolError::BadArgument {
            tool: REVENUE_NORMALIZER.into(),
            arg: "amount".into(),
            reason: e.to_string(),
        })?;
        let failed = |e: DexError| ToolError::Failed {
            tool: REVENUE_NORMALIZER.into(),
            message: e.to_string(),
        };
        let sell = self.registry.best_path(token).map_err(failed)?.reversed();
        let out = self.registry.quote_out(&sell, amount).map_err(failed)?;
        Ok(ToolOutput {
            text: format!("{amount} raw of {token} -> {out} raw base via {sell}\n"),
            data: json!({"route": sell, "amount_in": amount.to_string(), "base_out": out.to_string()}),
        })
    }
}
