//! Context-assembly tools and the uniform tool interface the agent calls.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde_json::{json, Value};
use thiserror::Error;

use crate::abi::{decode, encode, AbiError, AbiValue};
use crate::chain::{call_view, ChainError, ChainSnapshot};
use crate::domain::{parse_address, Address, TargetSpec};
use crate::sanitize::sanitize;

pub const SOURCE_CODE: &str = "source_code";
pub const BLOCKCHAIN_STATE: &str = "blockchain_state";
pub const CONSTRUCTOR_PARAMETER: &str = "constructor_parameter";
pub const CODE_SANITIZER: &str = "code_sanitizer";
pub const REVENUE_NORMALIZER: &str = "revenue_normalizer";
pub const CONCRETE_EXECUTION: &str = "concrete_execution";

/// Every tool name the registry accepts.
pub const TOOL_NAMES: [&str; 6] = [
    SOURCE_CODE,
    BLOCKCHAIN_STATE,
    CONSTRUCTOR_PARAMETER,
    CODE_SANITIZER,
    REVENUE_NORMALIZER,
    CONCRETE_EXECUTION,
];

#[derive(Debug, Error)]
pub enum ToolError {
    #[error("unknown tool {0:?}")]
    UnknownTool(String),
    #[error("tool {tool}: missing argument {arg:?}")]
    MissingArgument { tool: String, arg: String },
    #[error("tool {tool}: bad argument {arg:?}: {reason}")]
    BadArgument {
        tool: String,
        arg: String,
        reason: String,
    },
    #[error("proxy cycle through {0}")]
    ProxyCycle(Address),
    #[error("proxy resolution from {0} exceeds depth {MAX_PROXY_DEPTH}")]
    DepthExceeded(Address),
    #[error("no code at {0}")]
    NotAContract(Address),
    #[error("source unavailable for {0}")]
    SourceUnavailable(Address),
    #[error("no deployment record for {0}")]
    NoDeploymentRecord(Address),
    #[error("constructor arguments: {0}")]
    AbiDecode(AbiError),
    #[error("tool {tool} failed: {message}")]
    Failed { tool: String, message: String },
}

/// A tool request: one of the registered names plus string arguments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToolCall {
    pub tool_name: String,
    pub arguments: BTreeMap<String, String>,
}

impl ToolCall {
    pub fn new(tool_name: &str, arguments: &[(&str, &str)]) -> Result<Self, ToolError> {
        if !TOOL_NAMES.contains(&tool_name) {
            return Err(ToolError::UnknownTool(tool_name.to_string()));
        }
        Ok(ToolCall {
            tool_name: tool_name.to_string(),
            arguments: arguments
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToolOutput {
    /// Rendered for the model.
    pub text: String,
    /// Structured form for the run record.
    pub data: Value,
}

pub trait Tool: Send + Sync {
    fn name(&self) -> &'static str;
    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError>;
}

pub(crate) fn arg<'a>(
    tool: &str,
    args: &'a BTreeMap<String, String>,
    key: &str,
) -> Result<&'a str, ToolError> {
    args.get(key)
        .map(String::as_str)
        .ok_or_else(|| ToolError::MissingArgument {
            tool: tool.to_string(),
            arg: key.to_string(),
        })
}

pub(crate) fn address_arg(
    tool: &str,
    args: &BTreeMap<String, String>,
    key: &str,
) -> Result<Address, ToolError> {
    parse_address(arg(tool, args, key)?).map_err(|e| ToolError::BadArgument {
        tool: tool.to_string(),
        arg: key.to_string(),
        reason: e.to_string(),
    })
}

/// Name-indexed tool table.
#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<&'static str, Box<dyn Tool>>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        ToolRegistry::default()
    }

    /// The four context tools over one snapshot.
    pub fn with_context_tools(snapshot: Arc<ChainSnapshot>, target: TargetSpec) -> Self {
        let mut r = ToolRegistry::new();
        r.register(Box::new(SourceCodeTool {
            snapshot: snapshot.clone(),
            target,
        }));
        r.register(Box::new(BlockchainStateTool {
            snapshot: snapshot.clone(),
        }));
        r.register(Box::new(ConstructorParameterTool {
            snapshot: snapshot.clone(),
        }));
        r.register(Box::new(CodeSanitizerTool { snapshot }));
        r
    }

    pub fn register(&mut self, tool: Box<dyn Tool>) {
        debug_assert!(TOOL_NAMES.contains(&tool.name()));
        self.tools.insert(tool.name(), tool);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.tools.keys().copied().collect()
    }

    pub fn invoke(&self, call: &ToolCall) -> Result<ToolOutput, ToolError> {
        let tool = self
            .tools
            .get(call.tool_name.as_str())
            .ok_or_else(|| ToolError::UnknownTool(call.tool_name.clone()))?;
        tool.invoke(&call.arguments)
    }
}

pub const MAX_PROXY_DEPTH: usize = 4;

pub const EIP1967_IMPLEMENTATION_SLOT: [u8; 32] = [
    0x36, 0x08, 0x94, 0xa1, 0x3b, 0xa1, 0xa3, 0x21, 0x06, 0x67, 0xc8, 0x28, 0x49, 0x2d, 0xb9, 0x8d,
    0xca, 0x3e, 0x20, 0x76, 0xcc, 0x37, 0x35, 0xa9, 0x20, 0xa3, 0xca, 0x50, 0x5d, 0x38, 0x2b, 0xbc,
];

const MINIMAL_PROXY_PREFIX: [u8; 10] = [0x36, 0x3d, 0x3d, 0x37, 0x3d, 0x3d, 0x3d, 0x36, 0x3d, 0x73];
const MINIMAL_PROXY_SUFFIX: [u8; 15] = [
    0x5a, 0xf4, 0x3d, 0x82, 0x80, 0x3e, 0x90, 0x3d, 0x91, 0x60, 0x2b, 0x57, 0xfd, 0x5b, 0xf3,
];

/// Runtime code of a minimal delegating proxy to `implementation`.
pub fn minimal_proxy_code(implementation: Address) -> Vec<u8> {
    let mut code = MINIMAL_PROXY_PREFIX.to_vec();
    code.extend_from_slice(implementation.as_bytes());
    code.extend_from_slice(&MINIMAL_PROXY_SUFFIX);
    code
}

/// One delegation step: the EIP-1967 slot, then the minimal-proxy pattern.
fn delegate_of(snap: &ChainSnapshot, address: Address) -> Option<Address> {
    let slot = snap.storage_at(address, &EIP1967_IMPLEMENTATION_SLOT);
    if slot[..12].iter().all(|b| *b == 0) && slot[12..].iter().any(|b| *b != 0) {
        return Some(Address::from_word(&slot));
    }
    let code = snap.code.get(&address)?;
    if code.len() == 45 && code.starts_with(&MINIMAL_PROXY_PREFIX) && code.ends_with(&MINIMAL_PROXY_SUFFIX)
    {
        let mut a = [0u8; 20];
        a.copy_from_slice(&code[10..30]);
        return Some(Address(a));
    }
    None
}

/// Follows delegation to the final implementation, if `address` is a proxy.
pub fn resolve_proxy(snap: &ChainSnapshot, address: Address) -> Result<Option<Address>, ToolError> {
    if !snap.code.contains_key(&address) {
        return Err(ToolError::NotAContract(address));
    }
    let mut seen = BTreeSet::from([address]);
    let mut current = address;
    let mut depth = 0;
    while let Some(next) = delegate_of(snap, current) {
        if !seen.insert(next) {
            return Err(ToolError::ProxyCycle(next));
        }
        depth += 1;
        if depth > MAX_PROXY_DEPTH {
            return Err(ToolError::DepthExceeded(address));
        }
        current = next;
    }
    Ok((current != address).then_some(current))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceRole {
    Direct,
    ProxyImplementation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceEntry {
    pub address: Address,
    pub role: SourceRole,
    pub source: String,
    pub constructor_params: Option<Vec<AbiValue>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceBundle {
    pub block: crate::domain::BlockRef,
    pub entries: Vec<SourceEntry>,
}

impl SourceBundle {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let role = match e.role {
                SourceRole::Direct => "direct",
                SourceRole::ProxyImplementation => "proxy implementation",
            };
            writeln!(out, "// ---- {} ({role}) @ block {}", e.address, self.block.number).unwrap();
            if let Some(params) = &e.constructor_params {
                let p: Vec<String> = params.iter().map(|v| v.to_string()).collect();
                writeln!(out, "// constructor arguments: [{}]", p.join(", ")).unwrap();
            }
            out.push_str(&e.source);
            if !e.source.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.entries
                .iter()
                .map(|e| {
                    json!({
                        "address": e.address.to_string(),
                        "role": match e.role {
                            SourceRole::Direct => "direct",
                            SourceRole::ProxyImplementation => "proxy_implementation",
                        },
                        "source_bytes": e.source.len(),
                        "constructor_params": e.constructor_params.as_ref().map(|p| {
                            p.iter().map(|v| v.to_string()).collect::<Vec<_>>()
                        }),
                    })
                })
                .collect(),
        )
    }
}

/// Sources for every target, each followed by its implementation when the
/// target is a proxy. A proxy without its own verified source contributes
/// only the implementation entry.
pub fn fetch_source(snap: &ChainSnapshot, target: &TargetSpec) -> Result<SourceBundle, ToolError> {
    let mut entries = Vec::new();
    for &address in target.contracts() {
        let implementation = if snap.code.contains_key(&address) {
            resolve_proxy(snap, address)?
        } else {
            None
        };
        let mut found = false;
        for (addr, role) in std::iter::once((address, SourceRole::Direct))
            .chain(implementation.map(|i| (i, SourceRole::ProxyImplementation)))
        {
            if let Some(v) = snap.sources.get(&addr) {
                found = true;
                entries.push(SourceEntry {
                    address: addr,
                    role,
                    source: v.source.clone(),
                    constructor_params: decode_constructor_params(snap, addr).ok(),
                });
            }
        }
        if !found {
            return Err(ToolError::SourceUnavailable(address));
        }
    }
    Ok(SourceBundle {
        block: snap.block,
        entries,
    })
}

/// Decodes the constructor arguments appended to the creation calldata.
///
/// The creation code length is not recorded, so the argument block is the
/// shortest 32-byte-aligned suffix that decodes and re-encodes canonically.
pub fn decode_constructor_params(
    snap: &ChainSnapshot,
    address: Address,
) -> Result<Vec<AbiValue>, ToolError> {
    let deployment = snap
        .deployments
        .get(&address)
        .ok_or(ToolError::NoDeploymentRecord(address))?;
    let params = snap
        .sources
        .get(&address)
        .and_then(|s| s.abi.constructor.clone())
        .unwrap_or_default();
    if params.is_empty() {
        return Ok(Vec::new());
    }
    let types: Vec<_> = params.iter().map(|p| p.ty.clone()).collect();
    let data = &deployment.calldata;
    let min = 32 * types.len();
    if data.len() < min {
        let start = data.len() - data.len() % 32;
        return Err(ToolError::AbiDecode(AbiError::Decode {
            offset: start.min(data.len()),
            reason: "calldata shorter than the static argument head",
        }));
    }
    let mut first_err = None;
    let mut len = min;
    while len <= data.len() {
        let start = data.len() - len;
        let tail = &data[start..];
        match decode(&types, tail) {
            Ok(vals) if encode(&vals) == tail => return Ok(vals),
            Ok(_) => {}
            Err(AbiError::Decode { offset, reason }) => {
                first_err.get_or_insert(AbiError::Decode {
                    offset: start + offset,
                    reason,
                });
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
        if !types.iter().any(|t| t.is_dynamic()) {
            break;
        }
        len += 32;
    }
    Err(ToolError::AbiDecode(first_err.unwrap_or(AbiError::Decode {
        offset: data.len() - min,
        reason: "no canonical argument encoding found",
    })))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StateValue {
    Values(Vec<AbiValue>),
    Reverted(String),
}

/// Calls every zero-argument view/pure function once, in declaration order.
/// A proxy is read through its implementation's interface.
pub fn read_state(
    snap: &ChainSnapshot,
    address: Address,
) -> Result<Vec<(String, StateValue)>, ToolError> {
    let implementation = if snap.code.contains_key(&address) {
        resolve_proxy(snap, address)?
    } else {
        None
    };
    let abi = snap
        .sources
        .get(&address)
        .or_else(|| implementation.and_then(|i| snap.sources.get(&i)))
        .map(|s| &s.abi)
        .ok_or(ToolError::SourceUnavailable(address))?;
    Ok(abi
        .functions
        .iter()
        .filter(|f| f.is_view() && f.inputs.is_empty())
        .map(|f| {
            let v = match call_view(snap, address, f, &[]) {
                Ok(vals) => StateValue::Values(vals),
                Err(ChainError::CallReverted(r)) => StateValue::Reverted(r),
                Err(e) => StateValue::Reverted(e.to_string()),
            };
            (f.name.clone(), v)
        })
        .collect())
}

struct SourceCodeTool {
    snapshot: Arc<ChainSnapshot>,
    target: TargetSpec,
}

impl Tool for SourceCodeTool {
    fn name(&self) -> &'static str {
        SOURCE_CODE
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let target = match args.get("address") {
            Some(_) => TargetSpec::new(
                self.target.chain(),
                vec![address_arg(SOURCE_CODE, args, "address")?],
                self.target.block().number,
            )
            .expect("one contract"),
            None => self.target.clone(),
        };
        let bundle = fetch_source(&self.snapshot, &target)?;
        Ok(ToolOutput {
            text: bundle.render(),
            data: bundle.to_json(),
        })
    }
}

struct BlockchainStateTool {
    snapshot: Arc<ChainSnapshot>,
}

impl Tool for BlockchainStateTool {
    fn name(&self) -> &'static str {
        BLOCKCHAIN_STATE
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let address = address_arg(BLOCKCHAIN_STATE, args, "address")?;
        let rows = read_state(&self.snapshot, address)?;
        let mut text = format!("state of {address} @ block {}\n", self.snapshot.block.number);
        let mut data = serde_json::Map::new();
        for (name, v) in &rows {
            let shown = match v {
                StateValue::Values(vals) => {
                    vals.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
                }
                StateValue::Reverted(r) => format!("<reverted: {r}>"),
            };
            writeln!(text, "{name}() = {shown}").unwrap();
            data.insert(name.clone(), Value::String(shown));
        }
        Ok(ToolOutput {
            text,
            data: Value::Object(data),
        })
    }
}

struct ConstructorParameterTool {
    snapshot: Arc<ChainSnapshot>,
}

impl Tool for ConstructorParameterTool {
    fn name(&self) -> &'static str {
        CONSTRUCTOR_PARAMETER
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let address = address_arg(CONSTRUCTOR_PARAMETER, args, "address")?;
        let params = decode_constructor_params(&self.snapshot, address)?;
        let names = self
            .snapshot
            .sources
            .get(&address)
            .and_then(|s| s.abi.constructor.clone())
            .unwrap_or_default();
        let mut text = format!("constructor arguments of {address}\n");
        let mut data = Vec::new();
        for (p, v) in names.iter().zip(&params) {
            writeln!(text, "{} {} = {v}", p.ty, p.name).unwrap();
            data.push(json!({"name": p.name, "type": p.ty.to_string(), "value": v.to_string()}));
        }
        Ok(ToolOutput {
            text,
            data: Value::Array(data),
        })
    }
}

struct CodeSanitizerTool {
    snapshot: Arc<ChainSnapshot>,
}

impl Tool for CodeSanitizerTool {
    fn name(&self) -> &'static str {
        CODE_SANITIZER
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let source = match args.get("source") {
            Some(s) => s.clone(),
            None => {
                let address = address_arg(CODE_SANITIZER, args, "address")?;
                self.snapshot
                    .sources
                    .get(&address)
                    .ok_or(ToolError::SourceUnavailable(address))?
                    .source
                    .clone()
            }
        };
        let clean = sanitize(&source).map_err(|e| ToolError::Failed {
            tool: CODE_SANITIZER.into(),
            message: e.to_string(),
        })?;
        Ok(ToolOutput {
            data: json!({"bytes_before": source.len(), "bytes_after": clean.len()}),
            text: clean,
        })
    }
}
