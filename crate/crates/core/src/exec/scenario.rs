//! Scenarios: a fixture snapshot, a DEX registry and scripted contract
//! behaviors.
//!
//! Behavior file grammar (`behaviors.txt` beside the snapshot), one
//! directive per line, `#` starts a comment line:
//!
//! ```text
//! token <address> <decimals> [symbol]
//! balance <token|native> <holder> <raw amount>
//! var <contract> <name>[\[<key>\]] <value>
//! helper <id>
//! on <contract|helper:id> <function>(<types>)
//!   require <expr> [<cmp> <expr>] ["reason"]
//!   set <name>[\[<key>\]] = <expr>
//!   transfer <token> <from> <to> <amount>
//!   mint <token> <to> <amount>
//!   burn <token> <from> <amount>
//!   call <target> <function>(<args>)
//!   hook <target>
//!   revert "reason"
//!   return <expr>
//! end
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use ruint::aliases::U256;
use serde::{Deserialize, Serialize};

use super::lex::{tokenize, Tok};
use super::script::{CallExpr, Dialect, Expr, Op, Parser, Rule};
use super::ExecError;
use crate::chain::{load_snapshot_dir, resolve_fixture, ChainError, ChainSnapshot};
use crate::dex::DexRegistry;
use crate::domain::{base_currency, Address};
use crate::revenue::initial_provisioning;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenInfo {
    pub decimals: u8,
    pub symbol: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub snapshot: ChainSnapshot,
    pub registry: DexRegistry,
    pub tokens: BTreeMap<Address, TokenInfo>,
    /// Initial holdings keyed (token, holder); `Address::NATIVE` for native.
    pub balances: BTreeMap<(Address, Address), U256>,
    /// Initial storage keyed (contract, slot name).
    pub vars: BTreeMap<(Address, String), U256>,
    pub behaviors: BTreeMap<(Address, String), Rule>,
    pub helpers: BTreeMap<String, BTreeMap<String, Rule>>,
}

pub fn slot_name(var: &str, key: Option<U256>) -> String {
    match key {
        Some(k) => format!("{var}[{k:#x}]"),
        None => var.to_string(),
    }
}

enum RuleOwner {
    Contract(Address),
    Helper(String),
}

impl Scenario {
    /// Scenario with no scripted behaviors.
    pub fn new(snapshot: ChainSnapshot, registry: DexRegistry) -> Result<Self, ExecError> {
        Scenario::with_behaviors(snapshot, registry, "")
    }

    pub fn with_behaviors(
        snapshot: ChainSnapshot,
        registry: DexRegistry,
        behaviors: &str,
    ) -> Result<Self, ExecError> {
        let chain = snapshot.chain();
        let wrapped = base_currency(chain).wrapped;
        if registry.base() != wrapped {
            return Err(ExecError::ScenarioInvalid(format!(
                "registry base {} is not {wrapped}",
                registry.base()
            )));
        }
        let mut tokens = BTreeMap::new();
        for (t, a) in initial_provisioning(chain).balances {
            if t != Address::NATIVE {
                tokens.insert(
                    t,
                    TokenInfo {
                        decimals: a.decimals,
                        symbol: String::new(),
                    },
                );
            }
        }
        let mut s = Scenario {
            snapshot,
            registry,
            tokens,
            balances: BTreeMap::new(),
            vars: BTreeMap::new(),
            behaviors: BTreeMap::new(),
            helpers: BTreeMap::new(),
        };
        s.parse_behaviors(behaviors)?;
        s.validate()?;
        Ok(s)
    }

    /// Loads `<dir>/` snapshot files plus optional `pools.txt` and
    /// `behaviors.txt`.
    pub fn load(id_or_path: &str) -> Result<Self, ExecError> {
        let dir = resolve_fixture(id_or_path);
        if !dir.join("manifest.kv").is_file() {
            return Err(ChainError::FixtureNotFound(id_or_path.to_string()).into());
        }
        Scenario::load_dir(&dir)
    }

    pub fn load_dir(dir: &Path) -> Result<Self, ExecError> {
        let snapshot = load_snapshot_dir(dir)?;
        let pools = dir.join("pools.txt");
        let registry = if pools.exists() {
            DexRegistry::load(&pools)?
        } else {
            DexRegistry::empty(base_currency(snapshot.chain()).wrapped)
        };
        let behaviors_path = dir.join("behaviors.txt");
        let behaviors = if behaviors_path.exists() {
            fs::read_to_string(&behaviors_path).map_err(|e| ExecError::Io(e.to_string()))?
        } else {
            String::new()
        };
        Scenario::with_behaviors(snapshot, registry, &behaviors)
    }

    pub fn is_token(&self, a: Address) -> bool {
        self.tokens.contains_key(&a)
    }

    /// Whether a call target exists in the scenario.
    pub fn knows(&self, a: Address) -> bool {
        self.snapshot.has_contract(a)
            || self.is_token(a)
            || self.behaviors.keys().any(|(c, _)| *c == a)
    }

    fn parse_behaviors(&mut self, text: &str) -> Result<(), ExecError> {
        let no_consts = BTreeMap::new();
        let no_locals = BTreeSet::new();
        let mut open: Option<(RuleOwner, Rule, usize)> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |reason: String| ExecError::Behavior {
                line: line_no,
                reason,
            };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let toks = tokenize(line).map_err(err)?;
            let mut p = Parser::new(&toks, Dialect::Rule, &no_consts, &no_locals);
            let head = p.ident().map_err(err)?;
            if let Some((owner, mut rule, start)) = open.take() {
                if head == "end" {
                    if !p.at_end() {
                        return Err(err("trailing tokens after end".into()));
                    }
                    let name = rule.function.clone();
                    let dup = match owner {
                        RuleOwner::Contract(a) => self.behaviors.insert((a, name), rule).is_some(),
                        RuleOwner::Helper(h) => self
                            .helpers
                            .get_mut(&h)
                            .expect("declared")
                            .insert(name, rule)
                            .is_some(),
                    };
                    if dup {
                        return Err(ExecError::Behavior {
                            line: start,
                            reason: "duplicate rule".into(),
                        });
                    }
                    continue;
                }
                rule.ops.push(parse_op(head, &mut p).map_err(err)?);
                if !p.at_end() {
                    return Err(err(format!("trailing tokens: {:?}", &toks[p.pos..])));
                }
                open = Some((owner, rule, start));
                continue;
            }
            match head {
                "token" => {
                    let a = literal_address(&mut p).map_err(err)?;
                    let d = match p.next().map_err(err)? {
                        Tok::Num(n) => n.parse::<u8>().map_err(|e| err(e.to_string()))?,
                        t => return Err(err(format!("expected decimals, found {t:?}"))),
                    };
                    let symbol = match p.peek() {
                        Some(Tok::Ident(s)) => {
                            p.pos += 1;
                            s.clone()
                        }
                        _ => String::new(),
                    };
                    self.tokens.insert(a, TokenInfo { decimals: d, symbol });
                }
                "balance" => {
                    let token = if p.peek().is_some_and(|t| t.is_ident("native")) {
                        p.pos += 1;
                        Address::NATIVE
                    } else {
                        literal_address(&mut p).map_err(err)?
                    };
                    let holder = literal_address(&mut p).map_err(err)?;
                    let v = literal(&mut p).map_err(err)?;
                    self.balances.insert((token, holder), v);
                }
                "var" => {
                    let c = literal_address(&mut p).map_err(err)?;
                    let name = p.ident().map_err(err)?.to_string();
                    let key = if p.eat("[") {
                        let k = literal(&mut p).map_err(err)?;
                        p.expect("]").map_err(err)?;
                        Some(k)
                    } else {
                        None
                    };
                    let v = literal(&mut p).map_err(err)?;
                    self.vars.insert((c, slot_name(&name, key)), v);
                }
                "helper" => {
                    let id = p.ident().map_err(err)?.to_string();
                    self.helpers.entry(id).or_default();
                }
                "on" => {
                    let owner = if p.peek().is_some_and(|t| t.is_ident("helper")) {
                        p.pos += 1;
                        p.expect(":").map_err(err)?;
                        let id = p.ident().map_err(err)?.to_string();
                        if !self.helpers.contains_key(&id) {
                            return Err(err(format!("undeclared helper {id:?}")));
                        }
                        RuleOwner::Helper(id)
                    } else {
                        RuleOwner::Contract(literal_address(&mut p).map_err(err)?)
                    };
                    let function = p.ident().map_err(err)?.to_string();
                    p.expect("(").map_err(err)?;
                    let mut params = Vec::new();
                    while !p.eat(")") {
                        params.push(p.ident().map_err(err)?.to_string());
                        if !p.eat(",") && !p.peek().is_some_and(|t| t.is(")")) {
                            return Err(err("expected , or )".into()));
                        }
                    }
                    open = Some((
                        owner,
                        Rule {
                            function,
                            params,
                            ops: Vec::new(),
                        },
                        line_no,
                    ));
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
            if !p.at_end() {
                return Err(err(format!("trailing tokens: {:?}", &toks[p.pos..])));
            }
        }
        if let Some((_, _, start)) = open {
            return Err(ExecError::Behavior {
                line: start,
                reason: "rule not closed with end".into(),
            });
        }
        Ok(())
    }

    /// Token operands that are literals must be declared tokens (or
    /// native); `$self` as a token requires the rule owner to be a token.
    fn validate(&self) -> Result<(), ExecError> {
        let check = |owner: Option<Address>, token: &Expr, f: &str| -> Result<(), ExecError> {
            match token {
                Expr::Lit(v) => {
                    let a = Address::from_u256(*v);
                    if a != Address::NATIVE && !self.is_token(a) {
                        return Err(ExecError::ScenarioInvalid(format!(
                            "{f}: {a} is not a declared token"
                        )));
                    }
                }
                Expr::This
                    if !owner.is_some_and(|o| self.is_token(o)) => {
                        return Err(ExecError::ScenarioInvalid(format!(
                            "{f}: $self used as a token by a non-token contract"
                        )));
                    }
                _ => {}
            }
            Ok(())
        };
        let rules = self
            .behaviors
            .iter()
            .map(|((a, _), r)| (Some(*a), r))
            .chain(self.helpers.values().flat_map(|h| h.values().map(|r| (None, r))));
        for (owner, rule) in rules {
            for op in &rule.ops {
                match op {
                    Op::Transfer { token, .. } | Op::Mint { token, .. } | Op::Burn { token, .. } => {
                        check(owner, token, &rule.function)?
                    }
                    _ => {}
                }
            }
        }
        for (c, _) in self.behaviors.keys() {
            if !self.snapshot.has_contract(*c) && !self.is_token(*c) {
                return Err(ExecError::ScenarioInvalid(format!(
                    "behavior for {c}, which is neither in the snapshot nor a token"
                )));
            }
        }
        for (t, _) in self.balances.keys() {
            if *t != Address::NATIVE && !self.is_token(*t) {
                return Err(ExecError::ScenarioInvalid(format!("balance of undeclared token {t}")));
            }
        }
        Ok(())
    }
}

fn literal(p: &mut Parser) -> Result<U256, String> {
    match p.expr()? {
        Expr::Lit(v) => Ok(v),
        e => Err(format!("expected a literal, found {e:?}")),
    }
}

fn literal_address(p: &mut Parser) -> Result<Address, String> {
    match p.next()? {
        Tok::Num(n) if n.len() == 42 => crate::domain::parse_address(&n.to_ascii_lowercase())
            .map_err(|e| e.to_string()),
        t => Err(format!("expected an address, found {t:?}")),
    }
}

fn parse_op(head: &str, p: &mut Parser) -> Result<Op, String> {
    Ok(match head {
        "require" => {
            let lhs = p.expr()?;
            let cmp = match p.cmp() {
                Some(c) => Some((c, p.expr()?)),
                None => None,
            };
            let reason = if p.at_end() {
                "require failed".to_string()
            } else {
                p.string()?.to_string()
            };
            Op::Require { lhs, cmp, reason }
        }
        "set" => {
            let var = p.ident()?.to_string();
            let key = if p.eat("[") {
                let k = p.expr()?;
                p.expect("]")?;
                Some(k)
            } else {
                None
            };
            p.expect("=")?;
            Op::Set {
                var,
                key,
                value: p.expr()?,
            }
        }
        "transfer" => Op::Transfer {
            token: p.expr()?,
            from: p.expr()?,
            to: p.expr()?,
            amount: p.expr()?,
        },
        "mint" => Op::Mint {
            token: p.expr()?,
            to: p.expr()?,
            amount: p.expr()?,
        },
        "burn" => Op::Burn {
            token: p.expr()?,
            from: p.expr()?,
            amount: p.expr()?,
        },
        "call" => {
            let target = p.expr()?;
            let function = p.ident()?.to_string();
            let args = p.args()?;
            Op::Call(CallExpr {
                target,
                function,
                args,
                value: None,
            })
        }
        "hook" => Op::Hook(p.expr()?),
        "revert" => Op::Revert(p.string()?.to_string()),
        "return" => Op::Return(p.expr()?),
        other => return Err(format!("unknown operation {other:?}")),
    })
}
