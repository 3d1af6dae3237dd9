//! Line protocol shared with the external forge-style harness.
//!
//! ```text
//! A1_REVENUE: <decimal>        signed, in base units
//! A1_RESULT: PASS|FAIL
//! A1_REVERT: <text>
//! A1_TRACE: <depth> <address> <function> <OK|REVERT>
//! ```
//!
//! Lines without the `A1_` prefix are ignored (the harness prints plenty of
//! other output); a malformed `A1_` line, a duplicate result or revenue
//! line, or a missing result line is an error.

use ruint::aliases::U256;

use super::ExecError;
use crate::domain::{parse_address, Address, ExecutionReport, SignedAmount, TokenAmount, TraceFrame};

const BASE_DECIMALS: u8 = 18;

fn err(line: usize, reason: impl Into<String>) -> ExecError {
    ExecError::AdapterParse {
        line,
        reason: reason.into(),
    }
}

pub fn parse_external_report(text: &str) -> Result<ExecutionReport, ExecError> {
    let mut result: Option<bool> = None;
    let mut revenue: Option<SignedAmount> = None;
    let mut reverts: Vec<String> = Vec::new();
    let mut trace = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        last_line = n;
        let line = raw.trim();
        if !line.starts_with("A1_") {
            continue;
        }
        let (key, rest) = line
            .split_once(": ")
            .ok_or_else(|| err(n, "expected `KEY: value`"))?;
        match key {
            "A1_RESULT" => {
                if result.is_some() {
                    return Err(err(n, "duplicate A1_RESULT"));
                }
                result = Some(match rest {
                    "PASS" => true,
                    "FAIL" => false,
                    _ => return Err(err(n, "A1_RESULT must be PASS or FAIL")),
                });
            }
            "A1_REVENUE" => {
                if revenue.is_some() {
                    return Err(err(n, "duplicate A1_REVENUE"));
                }
                let (negative, digits) = match rest.strip_prefix('-') {
                    Some(d) => (true, d),
                    None => (false, rest),
                };
                let magnitude = TokenAmount::from_decimal_str(digits, BASE_DECIMALS)
                    .map_err(|e| err(n, e.to_string()))?;
                revenue = Some(SignedAmount {
                    negative: negative && !magnitude.is_zero(),
                    magnitude,
                });
            }
            "A1_REVERT" => {
                if rest.is_empty() {
                    return Err(err(n, "empty revert reason"));
                }
                reverts.push(rest.to_string());
            }
            "A1_TRACE" => {
                let f: Vec<&str> = rest.split(' ').collect();
                let [depth, address, function, status] = f.as_slice() else {
                    return Err(err(n, "A1_TRACE takes 4 fields"));
                };
                let depth: u32 = depth.parse().map_err(|_| err(n, "bad depth"))?;
                let callee = parse_address(&address.to_ascii_lowercase())
                    .map_err(|e| err(n, e.to_string()))?;
                let success = match *status {
                    "OK" => true,
                    "REVERT" => false,
                    _ => return Err(err(n, "status must be OK or REVERT")),
                };
                trace.push(TraceFrame {
                    depth,
                    caller: Address::ZERO,
                    callee,
                    function: function.to_string(),
                    success,
                });
            }
            other => return Err(err(n, format!("unknown directive {other}"))),
        }
    }
    let passed = result.ok_or_else(|| err(last_line + 1, "missing A1_RESULT line"))?;
    // A failed suite's revenue is not trusted.
    let profit = if passed { revenue } else { None };
    let revenue = profit.map_or(TokenAmount::zero(BASE_DECIMALS), |p| p.positive_part());
    Ok(ExecutionReport {
        profitable: !revenue.is_zero(),
        revenue,
        profit,
        gas_used: trace.len() as u64,
        trace,
        revert_reason: (!reverts.is_empty()).then(|| reverts.join("; ")),
        compile_error: None,
    })
}

/// Renders a report in the adapter protocol; the inverse of
/// [`parse_external_report`] for the fields the protocol carries.
pub fn format_external_report(report: &ExecutionReport) -> String {
    let mut out = String::new();
    for f in &report.trace {
        out.push_str(&format!(
            "A1_TRACE: {} {} {} {}\n",
            f.depth,
            f.callee,
            f.function,
            if f.success { "OK" } else { "REVERT" }
        ));
    }
    if let Some(r) = &report.revert_reason {
        out.push_str(&format!("A1_REVERT: {r}\n"));
    }
    if let Some(p) = &report.profit {
        let sign = if p.negative && p.magnitude.raw > U256::ZERO { "-" } else { "" };
        out.push_str(&format!("A1_REVENUE: {sign}{}\n", p.magnitude.to_decimal_string()));
    }
    let pass = report.compile_error.is_none() && report.profit.is_some();
    out.push_str(if pass { "A1_RESULT: PASS\n" } else { "A1_RESULT: FAIL\n" });
    out
}
