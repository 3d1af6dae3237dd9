//! Tokenizer shared by the behavior DSL and the strategy translator.

use ruint::aliases::U256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Punct(&'static str),
}

impl Tok {
    pub fn is(&self, p: &str) -> bool {
        matches!(self, Tok::Punct(q) if *q == p)
    }

    pub fn is_ident(&self, name: &str) -> bool {
        matches!(self, Tok::Ident(n) if n == name)
    }
}

const PUNCTS: [&str; 40] = [
    "**", "++", "--", "<<", ">>", "=>", "==", "!=", "<=", ">=", "&&", "||", "+=", "-=", "*=", "/=",
    "(", ")", "{", "}", "[", "]", ",", ";", ".", ":", "=", "<", ">", "+", "-", "*", "/", "%", "!",
    "^", "|", "&", "?", "~",
];

pub fn tokenize(src: &str) -> Result<Vec<Tok>, String> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            let s = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_' || b[i] == b'$') {
                i += 1;
            }
            out.push(Tok::Ident(src[s..i].to_string()));
        } else if c.is_ascii_digit() {
            let s = i;
            if c == b'0' && i + 1 < b.len() && (b[i + 1] == b'x' || b[i + 1] == b'X') {
                i += 2;
                while i < b.len() && b[i].is_ascii_hexdigit() {
                    i += 1;
                }
            } else {
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                    i += 1;
                }
                if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                        i += 1;
                    }
                }
                if i + 1 < b.len() && (b[i] == b'e' || b[i] == b'E') && b[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Tok::Num(src[s..i].to_string()));
        } else if c == b'"' || c == b'\'' {
            let q = c;
            let s = i + 1;
            i += 1;
            while i < b.len() && b[i] != q {
                if b[i] == b'\\' {
                    i += 1;
                }
                i += 1;
            }
            if i >= b.len() {
                return Err("unterminated string literal".into());
            }
            out.push(Tok::Str(src[s..i].to_string()));
            i += 1;
        } else if !c.is_ascii() {
            let ch = src[i..].chars().next().expect("char boundary");
            return Err(format!("unexpected character {ch:?}"));
        } else {
            let p = PUNCTS
                .iter()
                .find(|p| src[i..].starts_with(**p))
                .ok_or_else(|| format!("unexpected character {:?}", c as char))?;
            out.push(Tok::Punct(p));
            i += p.len();
        }
    }
    Ok(out)
}

/// Parses a numeric literal, scaled by `10^extra_exp`. Fractions must
/// vanish after scaling.
pub fn parse_number(text: &str, extra_exp: u32) -> Result<U256, String> {
    let bad = || format!("bad number literal {text:?}");
    if let Some(hex) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
        let v = U256::from_str_radix(hex, 16).map_err(|_| bad())?;
        return v
            .checked_mul(U256::from(10u8).checked_pow(U256::from(extra_exp)).ok_or_else(bad)?)
            .ok_or_else(bad);
    }
    let clean: String = text.chars().filter(|c| *c != '_').collect();
    let (mantissa, exp) = match clean.split_once(['e', 'E']) {
        Some((m, e)) => (m.to_string(), e.parse::<u32>().map_err(|_| bad())?),
        None => (clean, 0),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((&mantissa, ""));
    let total_exp = exp + extra_exp;
    let frac = frac.trim_end_matches('0');
    if frac.len() as u32 > total_exp {
        return Err(format!("{text:?} is not an integer"));
    }
    let digits = format!("{int}{frac}");
    let v = U256::from_str_radix(&digits, 10).map_err(|_| bad())?;
    let scale = U256::from(10u8)
        .checked_pow(U256::from(total_exp - frac.len() as u32))
        .ok_or_else(bad)?;
    v.checked_mul(scale).ok_or_else(bad)
}
