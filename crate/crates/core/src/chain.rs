//! Read-only chain state pinned at one block, backed by fixture directories.
//!
//! Layout of a snapshot directory:
//!
//! ```text
//! manifest.kv        chain, block, target addresses, compiler metadata
//! state.kv           code, deployments, storage slots, scripted view results
//! sources/<addr>.sol verified source
//! abi/<addr>.abi     human-readable ABI, one item per line
//! ```
//!
//! Keys in `state.kv` carry the chain id (`code.56.0x...`); an entry keyed
//! to another chain than the manifest is rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::abi::{hex_string, parse_hex, AbiError, AbiFunction, AbiValue, ContractAbi};
use crate::domain::{parse_address, Address, BlockRef, ChainId};

#[derive(Debug, Error)]
pub enum ChainError {
    #[error("fixture not found: {0}")]
    FixtureNotFound(String),
    #[error("corrupt fixture {file}:{line}: {reason}")]
    FixtureCorrupt {
        file: String,
        line: usize,
        reason: String,
    },
    #[error("{0} is not a view function")]
    NotAViewFunction(String),
    #[error("no contract at {0}")]
    NoSuchContract(Address),
    #[error("call reverted: {0}")]
    CallReverted(String),
    #[error(transparent)]
    Abi(#[from] AbiError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Source, interface and compiler string of a verified contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifiedSource {
    pub source: String,
    pub abi_text: String,
    pub abi: ContractAbi,
    pub compiler: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeploymentTx {
    pub deployer: Address,
    pub calldata: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedView {
    /// Text form of the return values, `|`-separated for multiple outputs.
    Value(String),
    Revert(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainSnapshot {
    pub block: BlockRef,
    pub targets: Vec<Address>,
    pub code: BTreeMap<Address, Vec<u8>>,
    pub storage: BTreeMap<(Address, [u8; 32]), [u8; 32]>,
    /// Keyed by `(address, call key)`; the call key is the function name for
    /// zero-argument calls and `name(arg,...)` otherwise.
    pub views: BTreeMap<(Address, String), ScriptedView>,
    pub sources: BTreeMap<Address, VerifiedSource>,
    pub deployments: BTreeMap<Address, DeploymentTx>,
}

impl ChainSnapshot {
    pub fn empty(block: BlockRef) -> Self {
        ChainSnapshot {
            block,
            targets: Vec::new(),
            code: BTreeMap::new(),
            storage: BTreeMap::new(),
            views: BTreeMap::new(),
            sources: BTreeMap::new(),
            deployments: BTreeMap::new(),
        }
    }

    pub fn chain(&self) -> ChainId {
        self.block.chain
    }

    /// Zero word when the slot was never written.
    pub fn storage_at(&self, address: Address, slot: &[u8; 32]) -> [u8; 32] {
        self.storage
            .get(&(address, *slot))
            .copied()
            .unwrap_or([0u8; 32])
    }

    pub fn has_contract(&self, address: Address) -> bool {
        self.code.contains_key(&address)
            || self.views.keys().any(|(a, _)| *a == address)
    }
}

/// Root of the bundled fixtures; `EXGEN_FIXTURES` overrides it.
pub fn fixture_root() -> PathBuf {
    std::env::var_os("EXGEN_FIXTURES")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"))
}

/// Resolves `name@block` under `<root>/snapshots`, or treats the argument as
/// a directory path.
pub fn resolve_fixture(id_or_path: &str) -> PathBuf {
    let p = Path::new(id_or_path);
    if p.is_dir() {
        return p.to_path_buf();
    }
    fixture_root().join("snapshots").join(id_or_path)
}

fn read(path: &Path) -> Result<String, ChainError> {
    std::fs::read_to_string(path).map_err(|source| ChainError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn corrupt(file: &str, line: usize, reason: impl Into<String>) -> ChainError {
    ChainError::FixtureCorrupt {
        file: file.to_string(),
        line,
        reason: reason.into(),
    }
}

/// `key = value` lines; blank lines and `#` comments are skipped.
fn kv_lines(text: &str) -> impl Iterator<Item = (usize, Option<(&str, &str)>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') {
            return None;
        }
        Some((i + 1, t.split_once(" = ").map(|(k, v)| (k.trim(), v.trim()))))
    })
}

fn word(text: &str) -> Option<[u8; 32]> {
    let b = parse_hex(text)?;
    b.try_into().ok()
}

pub fn load_snapshot(id_or_path: &str) -> Result<ChainSnapshot, ChainError> {
    let dir = resolve_fixture(id_or_path);
    if !dir.join("manifest.kv").is_file() {
        return Err(ChainError::FixtureNotFound(id_or_path.to_string()));
    }
    load_snapshot_dir(&dir)
}

pub fn load_snapshot_dir(dir: &Path) -> Result<ChainSnapshot, ChainError> {
    let manifest = read(&dir.join("manifest.kv"))?;
    let mut chain = None;
    let mut number = None;
    let mut targets = Vec::new();
    let mut compilers = BTreeMap::new();
    for (line, kv) in kv_lines(&manifest) {
        let (k, v) = kv.ok_or_else(|| corrupt("manifest.kv", line, "expected `key = value`"))?;
        let bad = |r: &str| corrupt("manifest.kv", line, r);
        match k {
            "chain" => {
                let id: u64 = v.parse().map_err(|_| bad("bad chain id"))?;
                chain = Some(ChainId::try_from(id).map_err(|_| bad("unsupported chain"))?);
            }
            "block" => number = Some(v.parse::<u64>().map_err(|_| bad("bad block"))?),
            "target" => targets.push(parse_address(v).map_err(|_| bad("bad target address"))?),
            _ => {
                let addr = k
                    .strip_prefix("compiler.")
                    .ok_or_else(|| bad("unknown manifest key"))?;
                let a = parse_address(addr).map_err(|_| bad("bad compiler address"))?;
                compilers.insert(a, v.to_string());
            }
        }
    }
    let chain = chain.ok_or_else(|| corrupt("manifest.kv", 0, "missing chain"))?;
    let number = number.ok_or_else(|| corrupt("manifest.kv", 0, "missing block"))?;
    let mut snap = ChainSnapshot::empty(BlockRef { chain, number });
    snap.targets = targets;

    let state_path = dir.join("state.kv");
    let state = if state_path.is_file() {
        read(&state_path)?
    } else {
        String::new()
    };
    let chain_tag = chain.id().to_string();
    for (line, kv) in kv_lines(&state) {
        let (k, v) = kv.ok_or_else(|| corrupt("state.kv", line, "expected `key = value`"))?;
        let bad = |r: &str| corrupt("state.kv", line, r);
        let mut parts = k.splitn(4, '.');
        let kind = parts.next().unwrap_or("");
        let tag = parts.next().ok_or_else(|| bad("missing chain tag"))?;
        if tag != chain_tag {
            return Err(bad("entry keyed to a different chain"));
        }
        let addr = parse_address(parts.next().ok_or_else(|| bad("missing address"))?)
            .map_err(|_| bad("bad address"))?;
        let rest = parts.next();
        match (kind, rest) {
            ("code", None) => {
                snap.code.insert(addr, parse_hex(v).ok_or_else(|| bad("bad code hex"))?);
            }
            ("deploy", None) => {
                let (deployer, data) = v
                    .split_once(' ')
                    .ok_or_else(|| bad("expected `<deployer> <calldata>`"))?;
                snap.deployments.insert(
                    addr,
                    DeploymentTx {
                        deployer: parse_address(deployer).map_err(|_| bad("bad deployer"))?,
                        calldata: parse_hex(data).ok_or_else(|| bad("bad calldata hex"))?,
                    },
                );
            }
            ("storage", Some(slot)) => {
                let s = word(slot).ok_or_else(|| bad("slot must be a 32-byte word"))?;
                let w = word(v).ok_or_else(|| bad("value must be a 32-byte word"))?;
                snap.storage.insert((addr, s), w);
            }
            ("view", Some(key)) => {
                let view = match v.strip_prefix('!') {
                    Some(reason) => ScriptedView::Revert(reason.to_string()),
                    None => ScriptedView::Value(v.to_string()),
                };
                snap.views.insert((addr, key.to_string()), view);
            }
            _ => return Err(bad("unknown state key")),
        }
    }

    let src_dir = dir.join("sources");
    if src_dir.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(&src_dir)
            .map_err(|source| ChainError::Io {
                path: src_dir.display().to_string(),
                source,
            })?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "sol"))
            .collect();
        entries.sort();
        for path in entries {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            let file = format!("sources/{stem}.sol");
            let addr = parse_address(stem).map_err(|_| corrupt(&file, 0, "file name is not an address"))?;
            let abi_path = dir.join("abi").join(format!("{stem}.abi"));
            let abi_text = if abi_path.is_file() {
                read(&abi_path)?
            } else {
                String::new()
            };
            let abi = ContractAbi::parse(&abi_text)
                .map_err(|e| corrupt(&format!("abi/{stem}.abi"), 0, e.to_string()))?;
            snap.sources.insert(
                addr,
                VerifiedSource {
                    source: read(&path)?,
                    abi_text,
                    abi,
                    compiler: compilers.remove(&addr).unwrap_or_default(),
                },
            );
        }
    }
    if let Some(addr) = compilers.keys().next() {
        return Err(corrupt("manifest.kv", 0, format!("compiler entry for {addr} without source")));
    }
    Ok(snap)
}

/// Writes the canonical fixture form; `load_snapshot_dir` of the result is
/// equal to `snap`.
pub fn save_snapshot(snap: &ChainSnapshot, dir: &Path) -> Result<(), ChainError> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| ChainError::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let mut m = String::new();
    writeln!(m, "chain = {}", snap.chain().id()).unwrap();
    writeln!(m, "block = {}", snap.block.number).unwrap();
    for t in &snap.targets {
        writeln!(m, "target = {t}").unwrap();
    }
    for (a, s) in &snap.sources {
        if !s.compiler.is_empty() {
            writeln!(m, "compiler.{a} = {}", s.compiler).unwrap();
        }
    }
    let p = dir.join("manifest.kv");
    std::fs::write(&p, m).map_err(io(&p))?;

    let c = snap.chain().id();
    let mut s = String::new();
    for (a, code) in &snap.code {
        writeln!(s, "code.{c}.{a} = {}", hex_string(code)).unwrap();
    }
    for (a, d) in &snap.deployments {
        writeln!(s, "deploy.{c}.{a} = {} {}", d.deployer, hex_string(&d.calldata)).unwrap();
    }
    for ((a, slot), w) in &snap.storage {
        writeln!(s, "storage.{c}.{a}.{} = {}", hex_string(slot), hex_string(w)).unwrap();
    }
    for ((a, key), v) in &snap.views {
        match v {
            ScriptedView::Value(t) => writeln!(s, "view.{c}.{a}.{key} = {t}").unwrap(),
            ScriptedView::Revert(r) => writeln!(s, "view.{c}.{a}.{key} = !{r}").unwrap(),
        }
    }
    let p = dir.join("state.kv");
    std::fs::write(&p, s).map_err(io(&p))?;

    if !snap.sources.is_empty() {
        for sub in ["sources", "abi"] {
            let d = dir.join(sub);
            std::fs::create_dir_all(&d).map_err(io(&d))?;
        }
    }
    for (a, src) in &snap.sources {
        let p = dir.join("sources").join(format!("{a}.sol"));
        std::fs::write(&p, &src.source).map_err(io(&p))?;
        if !src.abi_text.is_empty() {
            let p = dir.join("abi").join(format!("{a}.abi"));
            std::fs::write(&p, &src.abi_text).map_err(io(&p))?;
        }
    }
    Ok(())
}

/// The lookup key for a scripted call.
pub fn call_key(function: &AbiFunction, args: &[AbiValue]) -> String {
    if args.is_empty() {
        function.name.clone()
    } else {
        let a: Vec<String> = args.iter().map(|v| v.to_string()).collect();
        format!("{}({})", function.name, a.join(","))
    }
}

/// Resolves a view or pure call from the scripted table.
pub fn call_view(
    snap: &ChainSnapshot,
    address: Address,
    function: &AbiFunction,
    args: &[AbiValue],
) -> Result<Vec<AbiValue>, ChainError> {
    if !function.is_view() {
        return Err(ChainError::NotAViewFunction(function.signature()));
    }
    if !snap.has_contract(address) {
        return Err(ChainError::NoSuchContract(address));
    }
    match snap.views.get(&(address, call_key(function, args))) {
        None => Err(ChainError::CallReverted("no result scripted for call".into())),
        Some(ScriptedView::Revert(r)) => Err(ChainError::CallReverted(r.clone())),
        Some(ScriptedView::Value(text)) => {
            let outs = function.output_types();
            let parts: Vec<&str> = if outs.len() <= 1 {
                vec![text.as_str()]
            } else {
                text.split('|').collect()
            };
            if parts.len() != outs.len() {
                return Err(ChainError::CallReverted(format!(
                    "scripted result has {} values, function returns {}",
                    parts.len(),
                    outs.len()
                )));
            }
            Ok(outs
                .iter()
                .zip(parts)
                .map(|(t, p)| AbiValue::parse_text(t, p))
                .collect::<Result<_, _>>()?)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ruint::aliases::U256;

    fn write_fixture(dir: &Path, manifest: &str, state: &str) {
        std::fs::write(dir.join("manifest.kv"), manifest).unwrap();
        std::fs::write(dir.join("state.kv"), state).unwrap();
    }

    #[test]
    fn wrong_chain_key_is_corrupt() {
        let d = tempfile::tempdir().unwrap();
        write_fixture(
            d.path(),
            "chain = 56\nblock = 1\n",
            &format!("storage.1.{}.0x{:064x} = 0x{:064x}\n", Address::from_low_u64(1), 0, 1),
        );
        match load_snapshot_dir(d.path()) {
            Err(ChainError::FixtureCorrupt { file, line, .. }) => {
                assert_eq!(file, "state.kv");
                assert_eq!(line, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_fixture_has_empty_maps() {
        let d = tempfile::tempdir().unwrap();
        write_fixture(d.path(), "chain = 1\nblock = 10\n", "");
        let s = load_snapshot_dir(d.path()).unwrap();
        assert!(s.code.is_empty() && s.storage.is_empty() && s.sources.is_empty());
        assert_eq!(s.block.number, 10);
    }

    #[test]
    fn missing_fixture() {
        assert!(matches!(
            load_snapshot("does-not-exist@1"),
            Err(ChainError::FixtureNotFound(_))
        ));
    }

    #[test]
    fn view_calls() {
        let token = Address::from_low_u64(0x70);
        let mut s = ChainSnapshot::empty(BlockRef { chain: ChainId::Bsc, number: 1 });
        s.code.insert(token, vec![0x60]);
        s.views.insert(
            (token, "totalSupply".into()),
            ScriptedView::Value("1000000000000000000000000".into()),
        );
        s.views
            .insert((token, "owner".into()), ScriptedView::Revert("paused".into()));
        let abi = ContractAbi::parse(
            "function totalSupply() view returns (uint256)\n\
             function owner() view returns (address)\n\
             function mint(address to, uint256 amount)\n",
        )
        .unwrap();
        let before = s.clone();
        let out = call_view(&s, token, &abi.functions[0], &[]).unwrap();
        assert_eq!(out, vec![AbiValue::Uint(U256::from(10u128.pow(24)), 256)]);
        assert!(matches!(
            call_view(&s, token, &abi.functions[1], &[]),
            Err(ChainError::CallReverted(r)) if r == "paused"
        ));
        assert!(matches!(
            call_view(&s, token, &abi.functions[2], &[]),
            Err(ChainError::NotAViewFunction(_))
        ));
        assert!(matches!(
            call_view(&s, Address::from_low_u64(9), &abi.functions[0], &[]),
            Err(ChainError::NoSuchContract(_))
        ));
        assert_eq!(s, before);
    }
}
