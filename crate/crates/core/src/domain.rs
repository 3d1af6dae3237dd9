//! Shared identifiers and value types.
//!
//! Everything here is an immutable value: addresses, token amounts, block
//! references and the records that flow between the tools, the execution
//! harness and the agent loop.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use ruint::aliases::U256;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::llm::TokenUsage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DomainError {
    #[error("malformed address {0:?}: {1}")]
    MalformedAddress(String, &'static str),
    #[error("unsupported chain id {0}")]
    UnsupportedChain(u64),
    #[error("decimals {0} out of range 0..=36")]
    BadDecimals(u8),
    #[error("token amount overflow")]
    Overflow,
    #[error("token amount underflow")]
    Underflow,
    #[error("decimals mismatch: {0} vs {1}")]
    DecimalsMismatch(u8, u8),
    #[error("malformed amount {0:?}")]
    MalformedAmount(String),
    #[error("invalid target: {0}")]
    InvalidTarget(&'static str),
    #[error("invalid candidate: {0}")]
    InvalidCandidate(&'static str),
    #[error("record invariant violated: {0}")]
    RecordInvariant(String),
}

/// A 20-byte account identifier. Text form is always lowercase `0x` hex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Address(pub [u8; 20]);

impl Address {
    pub const ZERO: Address = Address([0u8; 20]);

    /// Sentinel used as the token key for a chain's native currency.
    pub const NATIVE: Address = Address([0xee; 20]);

    pub fn from_low_u64(v: u64) -> Self {
        let mut bytes = [0u8; 20];
        bytes[12..].copy_from_slice(&v.to_be_bytes());
        Address(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 20] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0u8; 20]
    }

    /// Left-pads the address into a 32-byte word.
    pub fn to_word(&self) -> [u8; 32] {
        let mut w = [0u8; 32];
        w[12..].copy_from_slice(&self.0);
        w
    }

    /// Reads the low 20 bytes of a word.
    pub fn from_word(word: &[u8; 32]) -> Self {
        let mut b = [0u8; 20];
        b.copy_from_slice(&word[12..]);
        Address(b)
    }

    pub fn to_u256(&self) -> U256 {
        U256::from_be_bytes(self.to_word())
    }

    pub fn from_u256(v: U256) -> Self {
        Address::from_word(&v.to_be_bytes::<32>())
    }
}

/// Parses `0x` followed by exactly 40 hex digits, any letter case.
pub fn parse_address(text: &str) -> Result<Address, DomainError> {
    let digits = text
        .strip_prefix("0x")
        .or_else(|| text.strip_prefix("0X"))
        .ok_or_else(|| DomainError::MalformedAddress(text.to_string(), "missing 0x prefix"))?;
    if digits.len() != 40 {
        return Err(DomainError::MalformedAddress(
            text.to_string(),
            "expected 40 hex digits",
        ));
    }
    let mut out = [0u8; 20];
    for (i, chunk) in digits.as_bytes().chunks(2).enumerate() {
        let hi = hex_val(chunk[0]);
        let lo = hex_val(chunk[1]);
        match (hi, lo) {
            (Some(h), Some(l)) => out[i] = (h << 4) | l,
            _ => {
                return Err(DomainError::MalformedAddress(
                    text.to_string(),
                    "non-hex character",
                ))
            }
        }
    }
    Ok(Address(out))
}

fn hex_val(c: u8) -> Option<u8> {
    match c {
        b'0'..=b'9' => Some(c - b'0'),
        b'a'..=b'f' => Some(c - b'a' + 10),
        b'A'..=b'F' => Some(c - b'A' + 10),
        _ => None,
    }
}

impl FromStr for Address {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_address(s)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("0x")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Address({self})")
    }
}

impl Serialize for Address {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Address {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_address(&s).map_err(serde::de::Error::custom)
    }
}

/// Supported networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ChainId {
    Ethereum,
    Bsc,
}

/// The native currency of a chain and its wrapped ERC-20 form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseCurrency {
    pub symbol: &'static str,
    pub wrapped_symbol: &'static str,
    pub wrapped: Address,
    pub decimals: u8,
}

const WETH: [u8; 20] = hex20("c02aaa39b223fe8d0a0e5c4f27ead9083c756cc2");
const WBNB: [u8; 20] = hex20("bb4cdb9cbd36b01bd1cbaebf2de08d9173bc095c");

/// Compile-time hex decoding for well-known token addresses.
pub(crate) const fn hex20(s: &str) -> [u8; 20] {
    let b = s.as_bytes();
    let mut out = [0u8; 20];
    let mut i = 0;
    while i < 20 {
        out[i] = (nib(b[2 * i]) << 4) | nib(b[2 * i + 1]);
        i += 1;
    }
    out
}

const fn nib(c: u8) -> u8 {
    match c {
        b'0'..=b'9' => c - b'0',
        b'a'..=b'f' => c - b'a' + 10,
        _ => panic!("bad hex"),
    }
}

impl ChainId {
    pub fn id(self) -> u64 {
        match self {
            ChainId::Ethereum => 1,
            ChainId::Bsc => 56,
        }
    }

    pub fn base_currency(self) -> BaseCurrency {
        base_currency(self)
    }
}

pub fn base_currency(chain: ChainId) -> BaseCurrency {
    match chain {
        ChainId::Ethereum => BaseCurrency {
            symbol: "ETH",
            wrapped_symbol: "WETH",
            wrapped: Address(WETH),
            decimals: 18,
        },
        ChainId::Bsc => BaseCurrency {
            symbol: "BNB",
            wrapped_symbol: "WBNB",
            wrapped: Address(WBNB),
            decimals: 18,
        },
    }
}

impl TryFrom<u64> for ChainId {
    type Error = DomainError;
    fn try_from(v: u64) -> Result<Self, Self::Error> {
        match v {
            1 => Ok(ChainId::Ethereum),
            56 => Ok(ChainId::Bsc),
            other => Err(DomainError::UnsupportedChain(other)),
        }
    }
}

impl FromStr for ChainId {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "eth" | "ethereum" | "mainnet" => Ok(ChainId::Ethereum),
            "bsc" | "bnb" => Ok(ChainId::Bsc),
            other => {
                let id: u64 = other
                    .parse()
                    .map_err(|_| DomainError::UnsupportedChain(0))?;
                ChainId::try_from(id)
            }
        }
    }
}

impl fmt::Display for ChainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

impl Serialize for ChainId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(self.id())
    }
}

impl<'de> Deserialize<'de> for ChainId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u64::deserialize(d)?;
        ChainId::try_from(v).map_err(serde::de::Error::custom)
    }
}

/// An unsigned token quantity in the token's smallest unit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TokenAmount {
    pub raw: U256,
    pub decimals: u8,
}

pub const MAX_DECIMALS: u8 = 36;

impl TokenAmount {
    pub fn new(raw: U256, decimals: u8) -> Result<Self, DomainError> {
        if decimals > MAX_DECIMALS {
            return Err(DomainError::BadDecimals(decimals));
        }
        Ok(TokenAmount { raw, decimals })
    }

    pub fn zero(decimals: u8) -> Self {
        TokenAmount {
            raw: U256::ZERO,
            decimals,
        }
    }

    /// `units * 10^decimals`, i.e. whole tokens.
    pub fn whole(units: u64, decimals: u8) -> Result<Self, DomainError> {
        let scale = pow10(decimals)?;
        let raw = U256::from(units)
            .checked_mul(scale)
            .ok_or(DomainError::Overflow)?;
        TokenAmount::new(raw, decimals)
    }

    pub fn is_zero(&self) -> bool {
        self.raw.is_zero()
    }

    pub fn checked_add(self, other: TokenAmount) -> Result<TokenAmount, DomainError> {
        self.same_decimals(&other)?;
        let raw = self.raw.checked_add(other.raw).ok_or(DomainError::Overflow)?;
        Ok(TokenAmount { raw, ..self })
    }

    pub fn checked_sub(self, other: TokenAmount) -> Result<TokenAmount, DomainError> {
        self.same_decimals(&other)?;
        let raw = self
            .raw
            .checked_sub(other.raw)
            .ok_or(DomainError::Underflow)?;
        Ok(TokenAmount { raw, ..self })
    }

    fn same_decimals(&self, other: &TokenAmount) -> Result<(), DomainError> {
        if self.decimals != other.decimals {
            return Err(DomainError::DecimalsMismatch(self.decimals, other.decimals));
        }
        Ok(())
    }

    /// Parses a decimal string such as `"12.04"` into raw units.
    pub fn from_decimal_str(text: &str, decimals: u8) -> Result<Self, DomainError> {
        let bad = || DomainError::MalformedAmount(text.to_string());
        let (int, frac) = match text.split_once('.') {
            Some((i, f)) => (i, f),
            None => (text, ""),
        };
        if int.is_empty() && frac.is_empty() {
            return Err(bad());
        }
        if !int.bytes().all(|c| c.is_ascii_digit()) || !frac.bytes().all(|c| c.is_ascii_digit())
        {
            return Err(bad());
        }
        if frac.len() > decimals as usize {
            return Err(bad());
        }
        let mut digits = String::with_capacity(int.len() + decimals as usize);
        digits.push_str(int);
        digits.push_str(frac);
        for _ in frac.len()..decimals as usize {
            digits.push('0');
        }
        let digits = digits.trim_start_matches('0');
        let raw = if digits.is_empty() {
            U256::ZERO
        } else {
            U256::from_str_radix(digits, 10).map_err(|_| bad())?
        };
        TokenAmount::new(raw, decimals)
    }

    /// Exact decimal rendering of `raw / 10^decimals`, trailing zeros trimmed.
    pub fn to_decimal_string(&self) -> String {
        format_scaled(self.raw, self.decimals)
    }

    /// Lossy conversion for reporting.
    pub fn to_f64(&self) -> f64 {
        self.to_decimal_string().parse().unwrap_or(f64::NAN)
    }
}

pub(crate) fn format_scaled(raw: U256, decimals: u8) -> String {
    let s = raw.to_string();
    let d = decimals as usize;
    if d == 0 {
        return s;
    }
    let padded = if s.len() <= d {
        format!("{}{}", "0".repeat(d + 1 - s.len()), s)
    } else {
        s
    };
    let (int, frac) = padded.split_at(padded.len() - d);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        int.to_string()
    } else {
        format!("{int}.{frac}")
    }
}

pub fn pow10(decimals: u8) -> Result<U256, DomainError> {
    if decimals > MAX_DECIMALS {
        return Err(DomainError::BadDecimals(decimals));
    }
    Ok(U256::from(10u64).pow(U256::from(decimals)))
}

impl fmt::Display for TokenAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal_string())
    }
}

impl PartialOrd for TokenAmount {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.decimals == other.decimals {
            Some(self.raw.cmp(&other.raw))
        } else {
            None
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TokenAmountRepr {
    raw: String,
    decimals: u8,
}

impl Serialize for TokenAmount {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TokenAmountRepr {
            raw: self.raw.to_string(),
            decimals: self.decimals,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TokenAmount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = TokenAmountRepr::deserialize(d)?;
        let raw = U256::from_str_radix(&r.raw, 10).map_err(serde::de::Error::custom)?;
        TokenAmount::new(raw, r.decimals).map_err(serde::de::Error::custom)
    }
}

/// A signed quantity of base currency (profit may be negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignedAmount {
    pub negative: bool,
    pub magnitude: TokenAmount,
}

impl SignedAmount {
    pub fn zero(decimals: u8) -> Self {
        SignedAmount {
            negative: false,
            magnitude: TokenAmount::zero(decimals),
        }
    }

    /// `after - before`.
    pub fn delta(before: TokenAmount, after: TokenAmount) -> Result<Self, DomainError> {
        if after.decimals != before.decimals {
            return Err(DomainError::DecimalsMismatch(after.decimals, before.decimals));
        }
        Ok(if after.raw >= before.raw {
            SignedAmount {
                negative: false,
                magnitude: after.checked_sub(before)?,
            }
        } else {
            SignedAmount {
                negative: true,
                magnitude: before.checked_sub(after)?,
            }
        })
    }

    pub fn is_positive(&self) -> bool {
        !self.negative && !self.magnitude.is_zero()
    }

    /// The positive part, zero otherwise.
    pub fn positive_part(&self) -> TokenAmount {
        if self.negative {
            TokenAmount::zero(self.magnitude.decimals)
        } else {
            self.magnitude
        }
    }

    pub fn to_f64(&self) -> f64 {
        let v = self.magnitude.to_f64();
        if self.negative {
            -v
        } else {
            v
        }
    }
}

impl fmt::Display for SignedAmount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negative && !self.magnitude.is_zero() {
            write!(f, "-{}", self.magnitude)
        } else {
            write!(f, "+{}", self.magnitude)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockRef {
    pub chain: ChainId,
    pub number: u64,
}

impl PartialOrd for BlockRef {
    /// Blocks on different chains are unordered.
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        if self.chain == other.chain {
            Some(self.number.cmp(&other.number))
        } else {
            None
        }
    }
}

/// The unit of analysis: a chain, one or more contracts and a pinned block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TargetSpecRepr")]
pub struct TargetSpec {
    chain: ChainId,
    contracts: Vec<Address>,
    block: BlockRef,
}

#[derive(Deserialize)]
struct TargetSpecRepr {
    chain: ChainId,
    contracts: Vec<Address>,
    block: BlockRef,
}

impl TryFrom<TargetSpecRepr> for TargetSpec {
    type Error = DomainError;
    fn try_from(r: TargetSpecRepr) -> Result<Self, Self::Error> {
        if r.block.chain != r.chain {
            return Err(DomainError::InvalidTarget("block chain differs from target chain"));
        }
        TargetSpec::new(r.chain, r.contracts, r.block.number)
    }
}

impl TargetSpec {
    pub fn new(chain: ChainId, contracts: Vec<Address>, block: u64) -> Result<Self, DomainError> {
        if contracts.is_empty() {
            return Err(DomainError::InvalidTarget("at least one contract is required"));
        }
        Ok(TargetSpec {
            chain,
            contracts,
            block: BlockRef {
                chain,
                number: block,
            },
        })
    }

    pub fn chain(&self) -> ChainId {
        self.chain
    }

    pub fn contracts(&self) -> &[Address] {
        &self.contracts
    }

    pub fn block(&self) -> BlockRef {
        self.block
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploitCandidate {
    pub source: String,
    pub iteration: u32,
}

impl ExploitCandidate {
    pub fn new(source: String, iteration: u32, budget: u32) -> Result<Self, DomainError> {
        if source.trim().is_empty() {
            return Err(DomainError::InvalidCandidate("empty source"));
        }
        if iteration == 0 || iteration > budget {
            return Err(DomainError::InvalidCandidate("iteration outside 1..=budget"));
        }
        Ok(ExploitCandidate { source, iteration })
    }
}

/// One call frame of an execution trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub depth: u32,
    pub caller: Address,
    pub callee: Address,
    pub function: String,
    pub success: bool,
}

/// Outcome of one concrete run of a candidate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub profitable: bool,
    /// Positive part of the normalized profit, in base currency.
    pub revenue: TokenAmount,
    /// Signed normalized profit; `None` when the run never reached normalization.
    pub profit: Option<SignedAmount>,
    pub trace: Vec<TraceFrame>,
    pub revert_reason: Option<String>,
    /// Set when the candidate could not be turned into an executable strategy.
    pub compile_error: Option<String>,
    pub gas_used: u64,
}

impl ExecutionReport {
    pub fn compile_failure(message: impl Into<String>, decimals: u8) -> Self {
        ExecutionReport {
            profitable: false,
            revenue: TokenAmount::zero(decimals),
            profit: None,
            trace: Vec::new(),
            revert_reason: None,
            compile_error: Some(message.into()),
            gas_used: 0,
        }
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.profitable != !self.revenue.is_zero() {
            return Err(DomainError::RecordInvariant(
                "profitable must equal revenue > 0".into(),
            ));
        }
        if self.profit.is_some_and(|p| p.positive_part() != self.revenue) {
            return Err(DomainError::RecordInvariant(
                "revenue must be the positive part of profit".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    Exhausted,
    Error,
}

/// A context tool invocation recorded during a turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInvocation {
    pub tool: String,
    pub arguments: std::collections::BTreeMap<String, String>,
    pub ok: bool,
    pub seconds: f64,
}

/// One model turn. A turn whose output held no usable code block carries
/// no candidate and no report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub turn: u32,
    pub candidate: Option<ExploitCandidate>,
    pub report: Option<ExecutionReport>,
    pub feedback: String,
    pub usage: TokenUsage,
    pub backend: String,
    pub model_seconds: f64,
    pub tool_seconds: f64,
    #[serde(default)]
    pub tool_calls: Vec<ToolInvocation>,
}

impl IterationRecord {
    pub fn duration_seconds(&self) -> f64 {
        self.model_seconds + self.tool_seconds
    }
}

/// Full trace of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub target: TargetSpec,
    pub model_id: String,
    pub seed: u64,
    pub budget: u32,
    pub iterations: Vec<IterationRecord>,
    pub outcome: Outcome,
    pub best_revenue: TokenAmount,
    #[serde(default)]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn executions(&self) -> impl Iterator<Item = &ExecutionReport> {
        self.iterations.iter().filter_map(|i| i.report.as_ref())
    }

    pub fn execution_count(&self) -> usize {
        self.executions().count()
    }

    /// Number of concrete executions up to and including the first
    /// profitable one.
    pub fn success_iteration(&self) -> Option<u32> {
        self.executions()
            .position(|r| r.profitable)
            .map(|i| i as u32 + 1)
    }

    pub fn final_report(&self) -> Option<&ExecutionReport> {
        self.executions().last()
    }

    pub fn total_usage(&self) -> TokenUsage {
        self.iterations
            .iter()
            .fold(TokenUsage::default(), |acc, i| acc + i.usage)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let n = self.execution_count();
        if n > self.budget as usize {
            return Err(DomainError::RecordInvariant(format!(
                "{n} executions exceed budget {}",
                self.budget
            )));
        }
        let any_profit = self.executions().any(|r| r.profitable);
        if (self.outcome == Outcome::Success) != any_profit {
            return Err(DomainError::RecordInvariant(
                "outcome Success must match a profitable report".into(),
            ));
        }
        let best = self
            .executions()
            .map(|r| r.revenue.raw)
            .max()
            .unwrap_or(U256::ZERO);
        if best != self.best_revenue.raw {
            return Err(DomainError::RecordInvariant(
                "best_revenue must be the maximum report revenue".into(),
            ));
        }
        for r in self.executions() {
            r.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_table_address_to_canonical_lowercase() {
        let a = parse_address("0x9B9baD4c6513E0fF3fB77c739359D59601c7cAfF").unwrap();
        assert_eq!(a.to_string(), "0x9b9bad4c6513e0ff3fb77c739359d59601c7caff");
    }

    #[test]
    fn zero_address() {
        let a = parse_address(&format!("0x{}", "0".repeat(40))).unwrap();
        assert!(a.is_zero());
        assert_eq!(a, Address::ZERO);
    }

    #[test]
    fn malformed_addresses() {
        assert!(matches!(
            parse_address("0x1234"),
            Err(DomainError::MalformedAddress(_, _))
        ));
        assert!(parse_address(&"a".repeat(40)).is_err());
        assert!(parse_address(&format!("0x{}g", "0".repeat(39))).is_err());
    }

    #[test]
    fn base_currency_per_chain() {
        assert_eq!(base_currency(ChainId::Ethereum).symbol, "ETH");
        assert_eq!(base_currency(ChainId::Ethereum).wrapped_symbol, "WETH");
        assert_eq!(base_currency(ChainId::Bsc).symbol, "BNB");
        assert_eq!(base_currency(ChainId::Bsc).wrapped_symbol, "WBNB");
        assert_eq!(base_currency(ChainId::Bsc), base_currency(ChainId::Bsc));
        assert_eq!(
            base_currency(ChainId::Ethereum).wrapped.to_string(),
            "0xc02aaa39b223fe8d0a0e5c4f27ead9083c756cc2"
        );
    }

    #[test]
    fn chain_ids() {
        assert_eq!(ChainId::try_from(56).unwrap(), ChainId::Bsc);
        assert!(ChainId::try_from(137).is_err());
        assert_eq!("eth".parse::<ChainId>().unwrap(), ChainId::Ethereum);
        assert_eq!("56".parse::<ChainId>().unwrap(), ChainId::Bsc);
    }

    #[test]
    fn token_amount_decimal_text() {
        let a = TokenAmount::from_decimal_str("12.04", 18).unwrap();
        assert_eq!(a.raw, U256::from(12_040_000_000_000_000_000u128));
        assert_eq!(a.to_decimal_string(), "12.04");
        assert_eq!(TokenAmount::zero(6).to_decimal_string(), "0");
        assert_eq!(
            TokenAmount::new(U256::from(5u8), 3).unwrap().to_decimal_string(),
            "0.005"
        );
        assert!(TokenAmount::from_decimal_str("1.2.3", 18).is_err());
        assert!(TokenAmount::new(U256::ZERO, 37).is_err());
    }

    #[test]
    fn subtraction_below_zero_is_checked() {
        let a = TokenAmount::whole(1, 18).unwrap();
        let b = TokenAmount::whole(2, 18).unwrap();
        assert_eq!(a.checked_sub(b), Err(DomainError::Underflow));
        assert_eq!(b.checked_sub(a).unwrap(), a);
    }

    #[test]
    fn target_requires_contracts() {
        assert!(TargetSpec::new(ChainId::Bsc, vec![], 1).is_err());
        let t = TargetSpec::new(ChainId::Bsc, vec![Address::ZERO], 6_920_000).unwrap();
        assert_eq!(t.block().chain, ChainId::Bsc);
        let json = serde_json::to_string(&t).unwrap();
        let bad = json.replace("\"block\":{\"chain\":56", "\"block\":{\"chain\":1");
        assert!(serde_json::from_str::<TargetSpec>(&bad).is_err());
    }

    #[test]
    fn block_ordering_only_within_chain() {
        let a = BlockRef { chain: ChainId::Bsc, number: 1 };
        let b = BlockRef { chain: ChainId::Bsc, number: 2 };
        let c = BlockRef { chain: ChainId::Ethereum, number: 2 };
        assert!(a < b);
        assert_eq!(a.partial_cmp(&c), None);
    }

    #[test]
    fn candidate_bounds() {
        assert!(ExploitCandidate::new("contract X {}".into(), 1, 5).is_ok());
        assert!(ExploitCandidate::new("  ".into(), 1, 5).is_err());
        assert!(ExploitCandidate::new("c".into(), 6, 5).is_err());
        assert!(ExploitCandidate::new("c".into(), 0, 5).is_err());
    }

    proptest! {
        #[test]
        fn address_round_trip(bytes in proptest::array::uniform20(any::<u8>()), upper in any::<bool>()) {
            let a = Address(bytes);
            let text = a.to_string();
            let input = if upper { format!("0x{}", text[2..].to_uppercase()) } else { text.clone() };
            let back = parse_address(&input).unwrap();
            prop_assert_eq!(back, a);
            prop_assert_eq!(back.to_string(), text);
        }

        #[test]
        fn exact_add_sub_up_to_1e38(a in 0u128..=100_000_000_000_000_000_000_000_000_000_000_000_000u128,
                                    b in 0u128..=100_000_000_000_000_000_000_000_000_000_000_000_000u128) {
            let x = TokenAmount::new(U256::from(a), 18).unwrap();
            let y = TokenAmount::new(U256::from(b), 18).unwrap();
            let s = x.checked_add(y).unwrap();
            prop_assert_eq!(s.raw, U256::from(a) + U256::from(b));
            prop_assert_eq!(s.checked_sub(y).unwrap(), x);
            if a < b {
                prop_assert!(x.checked_sub(y).is_err());
            }
        }

        #[test]
        fn decimal_string_round_trip(raw in any::<u128>(), decimals in 0u8..=36) {
            let a = TokenAmount::new(U256::from(raw), decimals).unwrap();
            let back = TokenAmount::from_decimal_str(&a.to_decimal_string(), decimals).unwrap();
            prop_assert_eq!(back, a);
        }
    }
}
