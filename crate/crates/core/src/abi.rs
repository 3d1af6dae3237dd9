//! Elementary Solidity ABI: type tags, values, head/tail encoding and
//! decoding, selectors and a human-readable ABI line format.

use std::fmt;

use ruint::aliases::U256;
use thiserror::Error;
use tiny_keccak::{Hasher, Keccak};

use crate::domain::{parse_address, Address};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AbiError {
    #[error("abi decode error at byte {offset}: {reason}")]
    Decode { offset: usize, reason: &'static str },
    #[error("unsupported abi type {0:?}")]
    UnsupportedType(String),
    #[error("malformed abi line {0:?}")]
    MalformedLine(String),
    #[error("value {text:?} does not fit type {ty}")]
    BadValue { ty: String, text: String },
}

pub fn keccak256(data: &[u8]) -> [u8; 32] {
    let mut k = Keccak::v256();
    k.update(data);
    let mut out = [0u8; 32];
    k.finalize(&mut out);
    out
}

pub fn selector(signature: &str) -> [u8; 4] {
    let h = keccak256(signature.as_bytes());
    [h[0], h[1], h[2], h[3]]
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AbiType {
    Address,
    Bool,
    Uint(u16),
    Int(u16),
    FixedBytes(u8),
    Bytes,
    String,
    /// One-dimensional dynamic array of an elementary type.
    Array(Box<AbiType>),
}

impl AbiType {
    pub fn parse(text: &str) -> Result<AbiType, AbiError> {
        let t = text.trim();
        let unsupported = || AbiError::UnsupportedType(t.to_string());
        if let Some(inner) = t.strip_suffix("[]") {
            let elem = AbiType::parse(inner)?;
            if matches!(elem, AbiType::Array(_)) {
                return Err(unsupported());
            }
            return Ok(AbiType::Array(Box::new(elem)));
        }
        let sized = |prefix: &str| -> Option<Result<u16, AbiError>> {
            let rest = t.strip_prefix(prefix)?;
            if rest.is_empty() {
                return Some(Ok(256));
            }
            Some(match rest.parse::<u16>() {
                Ok(n) if n > 0 && n <= 256 && n % 8 == 0 => Ok(n),
                _ => Err(unsupported()),
            })
        };
        match t {
            "address" => return Ok(AbiType::Address),
            "bool" => return Ok(AbiType::Bool),
            "bytes" => return Ok(AbiType::Bytes),
            "string" => return Ok(AbiType::String),
            _ => {}
        }
        if let Some(r) = sized("uint") {
            return r.map(AbiType::Uint);
        }
        if let Some(r) = sized("int") {
            return r.map(AbiType::Int);
        }
        if let Some(rest) = t.strip_prefix("bytes") {
            return match rest.parse::<u8>() {
                Ok(n) if (1..=32).contains(&n) => Ok(AbiType::FixedBytes(n)),
                _ => Err(unsupported()),
            };
        }
        Err(unsupported())
    }

    pub fn is_dynamic(&self) -> bool {
        matches!(self, AbiType::Bytes | AbiType::String | AbiType::Array(_))
    }
}

impl fmt::Display for AbiType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbiType::Address => f.write_str("address"),
            AbiType::Bool => f.write_str("bool"),
            AbiType::Uint(n) => write!(f, "uint{n}"),
            AbiType::Int(n) => write!(f, "int{n}"),
            AbiType::FixedBytes(n) => write!(f, "bytes{n}"),
            AbiType::Bytes => f.write_str("bytes"),
            AbiType::String => f.write_str("string"),
            AbiType::Array(e) => write!(f, "{e}[]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AbiValue {
    Address(Address),
    Bool(bool),
    Uint(U256, u16),
    /// Two's-complement 256-bit word.
    Int(U256, u16),
    FixedBytes(Vec<u8>),
    Bytes(Vec<u8>),
    String(String),
    Array(AbiType, Vec<AbiValue>),
}

fn to_hex(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(2 + bytes.len() * 2);
    s.push_str("0x");
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

pub fn parse_hex(text: &str) -> Option<Vec<u8>> {
    let h = text.strip_prefix("0x")?;
    if h.len() % 2 != 0 {
        return None;
    }
    (0..h.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(h.get(i..i + 2)?, 16).ok())
        .collect()
}

pub fn hex_string(bytes: &[u8]) -> String {
    to_hex(bytes)
}

fn int_is_negative(w: U256) -> bool {
    w.bit(255)
}

fn int_fits(w: U256, bits: u16) -> bool {
    if bits == 256 {
        return true;
    }
    // All bits at and above bits-1 must equal the sign bit.
    let sign = int_is_negative(w);
    (bits as usize - 1..256).all(|i| w.bit(i) == sign)
}

impl AbiValue {
    pub fn abi_type(&self) -> AbiType {
        match self {
            AbiValue::Address(_) => AbiType::Address,
            AbiValue::Bool(_) => AbiType::Bool,
            AbiValue::Uint(_, n) => AbiType::Uint(*n),
            AbiValue::Int(_, n) => AbiType::Int(*n),
            AbiValue::FixedBytes(b) => AbiType::FixedBytes(b.len() as u8),
            AbiValue::Bytes(_) => AbiType::Bytes,
            AbiValue::String(_) => AbiType::String,
            AbiValue::Array(t, _) => AbiType::Array(Box::new(t.clone())),
        }
    }

    pub fn int_from_i128(v: i128, bits: u16) -> AbiValue {
        let w = if v < 0 {
            U256::ZERO.wrapping_sub(U256::from(v.unsigned_abs()))
        } else {
            U256::from(v as u128)
        };
        AbiValue::Int(w, bits)
    }

    /// Parses the text form used in fixtures and tool output.
    pub fn parse_text(ty: &AbiType, text: &str) -> Result<AbiValue, AbiError> {
        let t = text.trim();
        let bad = || AbiError::BadValue {
            ty: ty.to_string(),
            text: t.to_string(),
        };
        let parse_uint = |s: &str| -> Option<U256> {
            if let Some(h) = s.strip_prefix("0x") {
                U256::from_str_radix(h, 16).ok()
            } else {
                U256::from_str_radix(s, 10).ok()
            }
        };
        Ok(match ty {
            AbiType::Address => AbiValue::Address(parse_address(t).map_err(|_| bad())?),
            AbiType::Bool => match t {
                "true" => AbiValue::Bool(true),
                "false" => AbiValue::Bool(false),
                _ => return Err(bad()),
            },
            AbiType::Uint(n) => {
                let v = parse_uint(t).ok_or_else(bad)?;
                if *n < 256 && v.bit_len() > *n as usize {
                    return Err(bad());
                }
                AbiValue::Uint(v, *n)
            }
            AbiType::Int(n) => {
                let (neg, mag) = match t.strip_prefix('-') {
                    Some(m) => (true, m),
                    None => (false, t),
                };
                let m = parse_uint(mag).ok_or_else(bad)?;
                let w = if neg { U256::ZERO.wrapping_sub(m) } else { m };
                if (neg && !m.is_zero() && !int_is_negative(w))
                    || (!neg && int_is_negative(w))
                    || !int_fits(w, *n)
                {
                    return Err(bad());
                }
                AbiValue::Int(w, *n)
            }
            AbiType::FixedBytes(n) => {
                let b = parse_hex(t).ok_or_else(bad)?;
                if b.len() != *n as usize {
                    return Err(bad());
                }
                AbiValue::FixedBytes(b)
            }
            AbiType::Bytes => AbiValue::Bytes(parse_hex(t).ok_or_else(bad)?),
            AbiType::String => AbiValue::String(if t.starts_with('"') {
                serde_json::from_str::<String>(t).map_err(|_| bad())?
            } else {
                text.to_string()
            }),
            AbiType::Array(elem) => {
                let inner = t
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(bad)?;
                let items = split_top_level(inner).ok_or_else(bad)?;
                let vals = items
                    .iter()
                    .map(|s| AbiValue::parse_text(elem, s))
                    .collect::<Result<Vec<_>, _>>()?;
                AbiValue::Array((**elem).clone(), vals)
            }
        })
    }
}

/// Splits on commas outside of double-quoted strings.
fn split_top_level(s: &str) -> Option<Vec<String>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut in_str = false;
    let mut escaped = false;
    for c in s.chars() {
        if in_str {
            cur.push(c);
            if escaped {
                escaped = false;
            } else if c == '\\' {
                escaped = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => {
                in_str = true;
                cur.push(c);
            }
            ',' => out.push(std::mem::take(&mut cur).trim().to_string()),
            _ => cur.push(c),
        }
    }
    if in_str {
        return None;
    }
    out.push(cur.trim().to_string());
    Some(out)
}

impl fmt::Display for AbiValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AbiValue::Address(a) => write!(f, "{a}"),
            AbiValue::Bool(b) => write!(f, "{b}"),
            AbiValue::Uint(v, _) => write!(f, "{v}"),
            AbiValue::Int(w, _) => {
                if int_is_negative(*w) {
                    write!(f, "-{}", U256::ZERO.wrapping_sub(*w))
                } else {
                    write!(f, "{w}")
                }
            }
            AbiValue::FixedBytes(b) | AbiValue::Bytes(b) => f.write_str(&to_hex(b)),
            AbiValue::String(s) => {
                f.write_str(&serde_json::to_string(s).expect("string serializes"))
            }
            AbiValue::Array(_, items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
        }
    }
}

fn word_u256(v: U256) -> [u8; 32] {
    v.to_be_bytes::<32>()
}

fn padded(data: &[u8]) -> Vec<u8> {
    let mut out = data.to_vec();
    out.resize(data.len().div_ceil(32) * 32, 0);
    out
}

fn encode_static(v: &AbiValue) -> [u8; 32] {
    match v {
        AbiValue::Address(a) => a.to_word(),
        AbiValue::Bool(b) => word_u256(U256::from(*b as u8)),
        AbiValue::Uint(x, _) | AbiValue::Int(x, _) => word_u256(*x),
        AbiValue::FixedBytes(b) => {
            let mut w = [0u8; 32];
            w[..b.len()].copy_from_slice(b);
            w
        }
        _ => unreachable!("dynamic value in static position"),
    }
}

fn encode_tail(v: &AbiValue) -> Vec<u8> {
    match v {
        AbiValue::Bytes(b) => {
            let mut out = word_u256(U256::from(b.len())).to_vec();
            out.extend(padded(b));
            out
        }
        AbiValue::String(s) => encode_tail(&AbiValue::Bytes(s.as_bytes().to_vec())),
        AbiValue::Array(_, items) => {
            let mut out = word_u256(U256::from(items.len())).to_vec();
            out.extend(encode(items));
            out
        }
        _ => unreachable!("static value in tail position"),
    }
}

/// Standard head/tail encoding of a parameter list.
pub fn encode(values: &[AbiValue]) -> Vec<u8> {
    let head_len = 32 * values.len();
    let mut head = Vec::with_capacity(head_len);
    let mut tail = Vec::new();
    for v in values {
        if v.abi_type().is_dynamic() {
            head.extend(word_u256(U256::from(head_len + tail.len())));
            tail.extend(encode_tail(v));
        } else {
            head.extend(encode_static(v));
        }
    }
    head.extend(tail);
    head
}

fn read_word(data: &[u8], at: usize) -> Result<[u8; 32], AbiError> {
    data.get(at..at + 32)
        .map(|s| s.try_into().expect("32-byte slice"))
        .ok_or(AbiError::Decode {
            offset: at,
            reason: "truncated word",
        })
}

fn read_usize(data: &[u8], at: usize) -> Result<usize, AbiError> {
    let v = U256::from_be_bytes(read_word(data, at)?);
    usize::try_from(v)
        .ok()
        .filter(|n| *n <= data.len())
        .ok_or(AbiError::Decode {
            offset: at,
            reason: "offset or length out of range",
        })
}

fn decode_static(ty: &AbiType, data: &[u8], at: usize) -> Result<AbiValue, AbiError> {
    let w = read_word(data, at)?;
    let err = |reason| AbiError::Decode { offset: at, reason };
    let x = U256::from_be_bytes(w);
    Ok(match ty {
        AbiType::Address => {
            if w[..12].iter().any(|b| *b != 0) {
                return Err(err("dirty address padding"));
            }
            AbiValue::Address(Address::from_word(&w))
        }
        AbiType::Bool => match x.to::<u128>() {
            _ if x > U256::from(1u8) => return Err(err("bool out of range")),
            v => AbiValue::Bool(v == 1),
        },
        AbiType::Uint(n) => {
            if x.bit_len() > *n as usize {
                return Err(err("uint out of range"));
            }
            AbiValue::Uint(x, *n)
        }
        AbiType::Int(n) => {
            if !int_fits(x, *n) {
                return Err(err("int out of range"));
            }
            AbiValue::Int(x, *n)
        }
        AbiType::FixedBytes(n) => {
            if w[*n as usize..].iter().any(|b| *b != 0) {
                return Err(err("dirty fixed-bytes padding"));
            }
            AbiValue::FixedBytes(w[..*n as usize].to_vec())
        }
        _ => unreachable!(),
    })
}

fn decode_at(types: &[AbiType], data: &[u8], base: usize) -> Result<Vec<AbiValue>, AbiError> {
    let mut out = Vec::with_capacity(types.len());
    for (i, ty) in types.iter().enumerate() {
        let head = base + 32 * i;
        if !ty.is_dynamic() {
            out.push(decode_static(ty, data, head)?);
            continue;
        }
        let start = base + read_usize(data, head)?;
        let len = read_usize(data, start)?;
        let body = start + 32;
        let v = match ty {
            AbiType::Bytes | AbiType::String => {
                let bytes = data.get(body..body + len).ok_or(AbiError::Decode {
                    offset: body,
                    reason: "truncated bytes",
                })?;
                if ty == &AbiType::Bytes {
                    AbiValue::Bytes(bytes.to_vec())
                } else {
                    AbiValue::String(String::from_utf8(bytes.to_vec()).map_err(|_| {
                        AbiError::Decode {
                            offset: body,
                            reason: "string is not utf-8",
                        }
                    })?)
                }
            }
            AbiType::Array(elem) => {
                if elem.is_dynamic() {
                    return Err(AbiError::Decode {
                        offset: head,
                        reason: "nested dynamic types are not supported",
                    });
                }
                let elems = vec![(**elem).clone(); len];
                AbiValue::Array((**elem).clone(), decode_at(&elems, data, body)?)
            }
            _ => unreachable!(),
        };
        out.push(v);
    }
    Ok(out)
}

pub fn decode(types: &[AbiType], data: &[u8]) -> Result<Vec<AbiValue>, AbiError> {
    decode_at(types, data, 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mutability {
    View,
    Pure,
    NonPayable,
    Payable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: AbiType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbiFunction {
    pub name: String,
    pub inputs: Vec<Param>,
    pub outputs: Vec<Param>,
    pub mutability: Mutability,
}

impl AbiFunction {
    pub fn signature(&self) -> String {
        let args: Vec<String> = self.inputs.iter().map(|p| p.ty.to_string()).collect();
        format!("{}({})", self.name, args.join(","))
    }

    pub fn selector(&self) -> [u8; 4] {
        selector(&self.signature())
    }

    pub fn is_view(&self) -> bool {
        matches!(self.mutability, Mutability::View | Mutability::Pure)
    }

    pub fn input_types(&self) -> Vec<AbiType> {
        self.inputs.iter().map(|p| p.ty.clone()).collect()
    }

    pub fn output_types(&self) -> Vec<AbiType> {
        self.outputs.iter().map(|p| p.ty.clone()).collect()
    }
}

/// A contract interface in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContractAbi {
    pub functions: Vec<AbiFunction>,
    pub constructor: Option<Vec<Param>>,
}

fn parse_params(text: &str) -> Result<Vec<Param>, AbiError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|p| {
            let mut words = p.split_whitespace().filter(|w| {
                !matches!(*w, "memory" | "calldata" | "storage" | "indexed")
            });
            let ty = AbiType::parse(words.next().unwrap_or(""))?;
            let name = words.next().unwrap_or("").to_string();
            Ok(Param { name, ty })
        })
        .collect()
}

impl ContractAbi {
    /// One item per line:
    /// `function name(type a, ...) [view|pure|payable] [returns (type, ...)]`
    /// or `constructor(type a, ...)`. `#` starts a comment line.
    pub fn parse(text: &str) -> Result<ContractAbi, AbiError> {
        let mut abi = ContractAbi::default();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || AbiError::MalformedLine(line.to_string());
            let (head, rest) = line.split_once('(').ok_or_else(bad)?;
            let (args, tail) = rest.split_once(')').ok_or_else(bad)?;
            let inputs = parse_params(args)?;
            let head = head.trim();
            if head == "constructor" {
                if abi.constructor.is_some() {
                    return Err(bad());
                }
                abi.constructor = Some(inputs);
                continue;
            }
            let name = head.strip_prefix("function ").ok_or_else(bad)?.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
                return Err(bad());
            }
            let (mods, outputs) = match tail.split_once("returns") {
                Some((m, r)) => {
                    let r = r.trim();
                    let inner = r
                        .strip_prefix('(')
                        .and_then(|s| s.strip_suffix(')'))
                        .ok_or_else(bad)?;
                    (m, parse_params(inner)?)
                }
                None => (tail, Vec::new()),
            };
            let mut mutability = Mutability::NonPayable;
            for m in mods.split_whitespace() {
                mutability = match m {
                    "view" => Mutability::View,
                    "pure" => Mutability::Pure,
                    "payable" => Mutability::Payable,
                    "nonpayable" => Mutability::NonPayable,
                    "external" | "public" => mutability,
                    _ => return Err(bad()),
                };
            }
            abi.functions.push(AbiFunction {
                name: name.to_string(),
                inputs,
                outputs,
                mutability,
            });
        }
        Ok(abi)
    }

    pub fn function(&self, name: &str) -> Option<&AbiFunction> {
        self.functions.iter().find(|f| f.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_selector() {
        assert_eq!(selector("transfer(address,uint256)"), [0xa9, 0x05, 0x9c, 0xbb]);
        assert_eq!(selector("totalSupply()"), [0x18, 0x16, 0x0d, 0xdd]);
    }

    #[test]
    fn type_parsing() {
        assert_eq!(AbiType::parse("uint").unwrap(), AbiType::Uint(256));
        assert_eq!(AbiType::parse("int24").unwrap(), AbiType::Int(24));
        assert_eq!(AbiType::parse("bytes32").unwrap(), AbiType::FixedBytes(32));
        assert_eq!(
            AbiType::parse("address[]").unwrap(),
            AbiType::Array(Box::new(AbiType::Address))
        );
        for bad in ["uint7", "bytes33", "uint[][]", "tuple", "uint264"] {
            assert!(AbiType::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn human_readable_lines() {
        let abi = ContractAbi::parse(
            "constructor(address owner, uint256 fee)\n\
             function name() view returns (string)\n\
             function transfer(address to, uint256 amount) returns (bool)\n\
             function deposit() payable\n",
        )
        .unwrap();
        assert_eq!(abi.constructor.as_ref().unwrap().len(), 2);
        assert_eq!(abi.functions.len(), 3);
        assert!(abi.functions[0].is_view());
        assert_eq!(abi.functions[1].signature(), "transfer(address,uint256)");
        assert_eq!(abi.functions[2].mutability, Mutability::Payable);
        assert!(ContractAbi::parse("event Foo(uint)").is_err());
    }

    #[test]
    fn signed_text_round_trip() {
        let v = AbiValue::parse_text(&AbiType::Int(8), "-128").unwrap();
        assert_eq!(v.to_string(), "-128");
        assert!(AbiValue::parse_text(&AbiType::Int(8), "128").is_err());
        assert!(AbiValue::parse_text(&AbiType::Uint(8), "256").is_err());
        let arr = AbiValue::parse_text(
            &AbiType::Array(Box::new(AbiType::String)),
            r#"["a,b","c"]"#,
        )
        .unwrap();
        assert_eq!(arr.to_string(), r#"["a,b","c"]"#);
    }

    #[test]
    fn truncated_input_reports_offset() {
        let data = encode(&[AbiValue::Uint(U256::from(5u8), 256)]);
        let err = decode(&[AbiType::Uint(256), AbiType::Uint(256)], &data).unwrap_err();
        assert_eq!(
            err,
            AbiError::Decode {
                offset: 32,
                reason: "truncated word"
            }
        );
    }

    #[test]
    fn nested_dynamic_is_rejected() {
        // Hand-built: offset 0x20, length 1, then an element head.
        let mut data = vec![0u8; 96];
        data[31] = 0x20;
        data[63] = 1;
        let ty = AbiType::Array(Box::new(AbiType::String));
        assert!(matches!(
            decode(&[ty], &data),
            Err(AbiError::Decode { reason: "nested dynamic types are not supported", .. })
        ));
    }
}
