//! Deterministic simulated execution of exploit strategies.
//!
//! A [`Scenario`] supplies the world (snapshot, pools, scripted contract
//! behaviors); a [`StrategyScript`] supplies the attacker's actions. The
//! interpreter runs the steps, records one trace frame per call, rolls back
//! reverted steps and normalizes the final holdings of all
//! strategy-controlled accounts to base currency.

mod adapter;
mod lex;
mod scenario;
mod script;
mod translate;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;

use ruint::aliases::U256;
use serde_json::json;
use thiserror::Error;

pub use adapter::{format_external_report, parse_external_report};
pub use lex::parse_number;
pub use scenario::{slot_name, Scenario, TokenInfo};
pub use script::{BinOp, CallExpr, Cmp, Expr, Op, Rule, Step, StrategyScript, SwapKind};
pub use translate::{translate, ENTRY_NAMES};

use crate::chain::ChainError;
use crate::dex::{DexError, DexRegistry};
use crate::domain::{base_currency, Address, ExecutionReport, TokenAmount, TraceFrame};
use crate::revenue::{initial_provisioning, reconcile, BalanceSheet};
use crate::tools::{arg, Tool, ToolError, ToolOutput, CONCRETE_EXECUTION};

/// Deepest call frame before a call reverts.
pub const MAX_CALL_DEPTH: u32 = 32;

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("scenario invalid: {0}")]
    ScenarioInvalid(String),
    #[error("behavior file line {line}: {reason}")]
    Behavior { line: usize, reason: String },
    #[error("adapter output line {line}: {reason}")]
    AdapterParse { line: usize, reason: String },
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Dex(#[from] DexError),
    #[error("io: {0}")]
    Io(String),
}

/// Address of strategy actor `i`; actor 0 is the exploit contract.
pub fn actor_address(i: usize) -> Address {
    Address::from_low_u64(0xa1_0000 + i as u64)
}

/// Address of the `n`-th helper contract deployed by a strategy.
pub fn helper_address(n: usize) -> Address {
    Address::from_low_u64(0xb1_0000 + n as u64)
}

/// Callee recorded for swap-helper frames.
pub fn router_address() -> Address {
    Address::from_low_u64(0xd0_0000)
}

#[derive(Clone)]
struct World {
    balances: BTreeMap<(Address, Address), U256>,
    allowances: BTreeMap<(Address, Address, Address), U256>,
    storage: BTreeMap<(Address, String), U256>,
    registry: DexRegistry,
    helpers: BTreeMap<Address, String>,
}

type Revert = String;

struct RuleCtx<'c> {
    sender: Address,
    value: U256,
    args: &'c [U256],
}

struct Env<'c> {
    /// Depth of frames created by calls made in this environment.
    depth: u32,
    /// Account issuing calls; the running contract for rules.
    caller: Address,
    rule: Option<RuleCtx<'c>>,
}

struct Machine<'a> {
    sc: &'a Scenario,
    strategy: &'a StrategyScript,
    w: World,
    trace: Vec<TraceFrame>,
    locals: BTreeMap<String, U256>,
    revert_reason: Option<String>,
    wrapped: Address,
    provision: BalanceSheet,
}

fn addr(v: U256) -> Address {
    Address::from_u256(v)
}

impl<'a> Machine<'a> {
    fn bal(&self, token: Address, who: Address) -> U256 {
        self.w.balances.get(&(token, who)).copied().unwrap_or_default()
    }

    fn credit(&mut self, token: Address, who: Address, amount: U256) -> Result<(), Revert> {
        let b = self.bal(token, who);
        let nb = b.checked_add(amount).ok_or("balance overflow")?;
        self.w.balances.insert((token, who), nb);
        Ok(())
    }

    fn debit(&mut self, token: Address, who: Address, amount: U256) -> Result<(), Revert> {
        let b = self.bal(token, who);
        let nb = b
            .checked_sub(amount)
            .ok_or_else(|| format!("insufficient balance of {token} for {who}"))?;
        self.w.balances.insert((token, who), nb);
        Ok(())
    }

    fn controlled(&self, a: Address) -> bool {
        (0..self.strategy.actors).any(|i| actor_address(i) == a) || self.w.helpers.contains_key(&a)
    }

    fn eval(&mut self, e: &Expr, env: &Env) -> Result<U256, Revert> {
        let rule = || env.rule.as_ref().ok_or("rule context value used outside a rule");
        Ok(match e {
            Expr::Lit(v) => *v,
            Expr::This => env.caller.to_u256(),
            Expr::Sender => rule()?.sender.to_u256(),
            Expr::Value => rule()?.value,
            Expr::Arg(i) => *rule()?
                .args
                .get(*i)
                .ok_or_else(|| format!("argument {i} out of range"))?,
            Expr::Var(name) => self
                .w
                .storage
                .get(&(env.caller, name.clone()))
                .copied()
                .unwrap_or_default(),
            Expr::Entry(name, k) => {
                let k = self.eval(k, env)?;
                self.w
                    .storage
                    .get(&(env.caller, slot_name(name, Some(k))))
                    .copied()
                    .unwrap_or_default()
            }
            Expr::Balance(t, h) => {
                let t = addr(self.eval(t, env)?);
                let h = addr(self.eval(h, env)?);
                self.bal(t, h)
            }
            Expr::Local(n) => *self
                .locals
                .get(n)
                .ok_or_else(|| format!("local {n} is unset"))?,
            Expr::Actor(i) => actor_address(*i).to_u256(),
            Expr::Call(c) => {
                let target = addr(self.eval(&c.target, env)?);
                let mut args = Vec::with_capacity(c.args.len());
                for a in &c.args {
                    args.push(self.eval(a, env)?);
                }
                let value = match &c.value {
                    Some(v) => self.eval(v, env)?,
                    None => U256::ZERO,
                };
                self.call(env.depth, env.caller, target, &c.function, &args, value)?
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (self.eval(a, env)?, self.eval(b, env)?);
                match op {
                    BinOp::Add => a.checked_add(b).ok_or("arithmetic overflow")?,
                    BinOp::Sub => a.checked_sub(b).ok_or("arithmetic underflow")?,
                    BinOp::Mul => a.checked_mul(b).ok_or("arithmetic overflow")?,
                    BinOp::Div => a.checked_div(b).ok_or("division by zero")?,
                    BinOp::Mod => a.checked_rem(b).ok_or("division by zero")?,
                }
            }
        })
    }

    /// Pushes a frame, runs `body`, and marks the frame failed on revert.
    fn framed<F>(&mut self, depth: u32, caller: Address, callee: Address, function: &str, body: F) -> Result<U256, Revert>
    where
        F: FnOnce(&mut Self) -> Result<U256, Revert>,
    {
        let idx = self.trace.len();
        self.trace.push(TraceFrame {
            depth,
            caller,
            callee,
            function: function.to_string(),
            success: true,
        });
        if depth > MAX_CALL_DEPTH {
            self.trace[idx].success = false;
            return Err("max call depth exceeded".into());
        }
        let r = body(self);
        if r.is_err() {
            self.trace[idx].success = false;
        }
        r
    }

    fn call(
        &mut self,
        depth: u32,
        caller: Address,
        target: Address,
        function: &str,
        args: &[U256],
        value: U256,
    ) -> Result<U256, Revert> {
        self.framed(depth, caller, target, function, |m| {
            if !value.is_zero() {
                m.debit(Address::NATIVE, caller, value)?;
                m.credit(Address::NATIVE, target, value)?;
            }
            m.dispatch(depth, caller, target, function, args, value)
        })
    }

    fn dispatch(
        &mut self,
        depth: u32,
        caller: Address,
        target: Address,
        function: &str,
        args: &[U256],
        value: U256,
    ) -> Result<U256, Revert> {
        let sc = self.sc;
        let rule = match self.w.helpers.get(&target) {
            Some(tpl) => sc.helpers.get(tpl).and_then(|h| h.get(function)),
            None => sc.behaviors.get(&(target, function.to_string())),
        };
        if let Some(rule) = rule {
            return self.run_rule(rule, depth, caller, target, args, value);
        }
        if let Some(r) = self.builtin_token(caller, target, function, args, value) {
            return r;
        }
        if self.controlled(target) {
            if (function == "receive" || function == "fallback")
                && !self.strategy.callback.is_empty()
                && (0..self.strategy.actors).any(|i| actor_address(i) == target)
            {
                let cb = &self.strategy.callback;
                self.run_steps(cb, depth + 1, target, false)?;
            }
            return Ok(U256::ZERO);
        }
        if args.is_empty() {
            if let Some(v) = self.w.storage.get(&(target, function.to_string())) {
                return Ok(*v);
            }
        }
        Err(format!("{function} is not supported on {target}"))
    }

    fn builtin_token(
        &mut self,
        caller: Address,
        token: Address,
        function: &str,
        args: &[U256],
        value: U256,
    ) -> Option<Result<U256, Revert>> {
        let info = self.sc.tokens.get(&token)?;
        let one = U256::from(1u8);
        let arity = |n: usize| -> Result<(), Revert> {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{function} expects {n} argument(s)"))
            }
        };
        let r = match function {
            "balanceOf" => arity(1).map(|_| self.bal(token, addr(args[0]))),
            "decimals" => arity(0).map(|_| U256::from(info.decimals)),
            "totalSupply" => arity(0).map(|_| {
                self.w
                    .balances
                    .iter()
                    .filter(|((t, _), _)| *t == token)
                    .fold(U256::ZERO, |acc, (_, v)| acc.saturating_add(*v))
            }),
            "allowance" => arity(2).map(|_| {
                self.w
                    .allowances
                    .get(&(token, addr(args[0]), addr(args[1])))
                    .copied()
                    .unwrap_or_default()
            }),
            "approve" => arity(2).map(|_| {
                self.w
                    .allowances
                    .insert((token, caller, addr(args[0])), args[1]);
                one
            }),
            "transfer" => arity(2).and_then(|_| {
                self.debit(token, caller, args[1])?;
                self.credit(token, addr(args[0]), args[1])?;
                Ok(one)
            }),
            "transferFrom" => arity(3).and_then(|_| {
                let (from, to, amt) = (addr(args[0]), addr(args[1]), args[2]);
                if from != caller {
                    let key = (token, from, caller);
                    let allowed = self.w.allowances.get(&key).copied().unwrap_or_default();
                    if allowed < amt {
                        return Err("insufficient allowance".into());
                    }
                    if allowed != U256::MAX {
                        self.w.allowances.insert(key, allowed - amt);
                    }
                }
                self.debit(token, from, amt)?;
                self.credit(token, to, amt)?;
                Ok(one)
            }),
            "deposit" if token == self.wrapped => arity(0).and_then(|_| {
                self.credit(token, caller, value)?;
                Ok(U256::ZERO)
            }),
            "withdraw" if token == self.wrapped => arity(1).and_then(|_| {
                self.debit(token, caller, args[0])?;
                self.credit(Address::NATIVE, caller, args[0])?;
                Ok(U256::ZERO)
            }),
            _ => return None,
        };
        Some(r)
    }

    fn run_rule(
        &mut self,
        rule: &Rule,
        depth: u32,
        sender: Address,
        this: Address,
        args: &[U256],
        value: U256,
    ) -> Result<U256, Revert> {
        if args.len() != rule.params.len() {
            return Err(format!(
                "{} expects {} argument(s), got {}",
                rule.function,
                rule.params.len(),
                args.len()
            ));
        }
        let env = Env {
            depth: depth + 1,
            caller: this,
            rule: Some(RuleCtx {
                sender,
                value,
                args,
            }),
        };
        for op in &rule.ops {
            match op {
                Op::Require { lhs, cmp, reason } => {
                    let l = self.eval(lhs, &env)?;
                    let ok = match cmp {
                        Some((c, rhs)) => {
                            let r = self.eval(rhs, &env)?;
                            c.holds(l, r)
                        }
                        None => !l.is_zero(),
                    };
                    if !ok {
                        return Err(reason.clone());
                    }
                }
                Op::Set { var, key, value } => {
                    let k = match key {
                        Some(k) => Some(self.eval(k, &env)?),
                        None => None,
                    };
                    let v = self.eval(value, &env)?;
                    self.w.storage.insert((this, slot_name(var, k)), v);
                }
                Op::Transfer {
                    token,
                    from,
                    to,
                    amount,
                } => {
                    let t = addr(self.eval(token, &env)?);
                    let f = addr(self.eval(from, &env)?);
                    let to = addr(self.eval(to, &env)?);
                    let a = self.eval(amount, &env)?;
                    self.debit(t, f, a)?;
                    self.credit(t, to, a)?;
                }
                Op::Mint { token, to, amount } => {
                    let t = addr(self.eval(token, &env)?);
                    let to = addr(self.eval(to, &env)?);
                    let a = self.eval(amount, &env)?;
                    self.credit(t, to, a)?;
                }
                Op::Burn {
                    token,
                    from,
                    amount,
                } => {
                    let t = addr(self.eval(token, &env)?);
                    let f = addr(self.eval(from, &env)?);
                    let a = self.eval(amount, &env)?;
                    self.debit(t, f, a)?;
                }
                Op::Call(c) => {
                    self.eval(&Expr::Call(Box::new(c.clone())), &env)?;
                }
                Op::Hook(target) => {
                    let t = addr(self.eval(target, &env)?);
                    if self.controlled(t) {
                        self.call(depth + 1, this, t, "receive", &[], U256::ZERO)?;
                    }
                }
                Op::Revert(reason) => return Err(reason.clone()),
                Op::Return(e) => return self.eval(e, &env),
            }
        }
        Ok(U256::ZERO)
    }

    fn swap(&mut self, kind: SwapKind, who: Address, token: Address, amount: Option<U256>) -> Result<U256, Revert> {
        let dex = |e: DexError| e.to_string();
        match kind {
            SwapKind::TokenToBase | SwapKind::ExcessToBase => {
                let amount = match amount {
                    Some(a) => a,
                    None => {
                        let held = self.bal(token, who);
                        let floor = if who == actor_address(0) {
                            self.provision.raw(token)
                        } else {
                            U256::ZERO
                        };
                        held.saturating_sub(floor)
                    }
                };
                if amount.is_zero() {
                    return Ok(U256::ZERO);
                }
                let path = self.w.registry.best_path(token).map_err(dex)?.reversed();
                self.debit(token, who, amount)?;
                let out = self.w.registry.execute_path(&path, amount).map_err(dex)?;
                self.credit(self.wrapped, who, out)?;
                Ok(out)
            }
            SwapKind::BaseToToken => {
                let amount = amount.unwrap_or_default();
                let path = self.w.registry.best_path(token).map_err(dex)?;
                self.debit(self.wrapped, who, amount)?;
                let out = self.w.registry.execute_path(&path, amount).map_err(dex)?;
                self.credit(token, who, out)?;
                Ok(out)
            }
        }
    }

    fn run_step(&mut self, step: &Step, depth: u32, who: &mut Address) -> Result<(), Revert> {
        match step {
            Step::Exec { expr, bind, .. } => {
                let env = Env {
                    depth,
                    caller: *who,
                    rule: None,
                };
                let v = self.eval(expr, &env)?;
                if let Some(b) = bind {
                    self.locals.insert(b.clone(), v);
                }
            }
            Step::ActAs(i) => *who = actor_address(*i),
            Step::DeployHelper { template, bind } => {
                let h = helper_address(self.w.helpers.len());
                self.w.helpers.insert(h, template.clone());
                let sc = self.sc;
                let ctor = sc.helpers.get(template).and_then(|t| t.get("constructor"));
                let caller = *who;
                self.framed(depth, caller, h, "constructor", |m| match ctor {
                    Some(rule) => m.run_rule(rule, depth, caller, h, &[], U256::ZERO),
                    None => Ok(U256::ZERO),
                })?;
                if let Some(b) = bind {
                    self.locals.insert(b.clone(), h.to_u256());
                }
            }
            Step::Swap {
                kind,
                token,
                amount,
                bind,
            } => {
                let env = Env {
                    depth,
                    caller: *who,
                    rule: None,
                };
                let t = addr(self.eval(token, &env)?);
                let a = match amount {
                    Some(a) => Some(self.eval(a, &env)?),
                    None => None,
                };
                let caller = *who;
                let out = self.framed(depth, caller, router_address(), kind.function_name(), |m| {
                    m.swap(*kind, caller, t, a)
                })?;
                if let Some(b) = bind {
                    self.locals.insert(b.clone(), out);
                }
            }
        }
        Ok(())
    }

    /// Runs steps in order. A reverted step is rolled back; execution goes
    /// on only if the step was tolerant. Nested bodies propagate the revert.
    fn run_steps(&mut self, steps: &[Step], depth: u32, start: Address, top: bool) -> Result<(), Revert> {
        let mut who = start;
        for step in steps {
            let saved = self.w.clone();
            if let Err(reason) = self.run_step(step, depth, &mut who) {
                self.w = saved;
                let tolerant = matches!(step, Step::Exec { tolerant: true, .. });
                if tolerant || top {
                    self.revert_reason = Some(reason.clone());
                }
                if !tolerant {
                    return if top { Ok(()) } else { Err(reason) };
                }
            }
        }
        Ok(())
    }

    /// Summed holdings of every strategy-controlled account.
    fn final_sheet(&self) -> BalanceSheet {
        let mut holders: Vec<Address> = (0..self.strategy.actors).map(actor_address).collect();
        holders.extend(self.w.helpers.keys().copied());
        let mut sheet = BalanceSheet::new(self.provision.chain);
        let mut tokens: Vec<(Address, u8)> = vec![(Address::NATIVE, 18)];
        tokens.extend(self.sc.tokens.iter().map(|(t, i)| (*t, i.decimals)));
        for (t, d) in tokens {
            let sum = holders
                .iter()
                .fold(U256::ZERO, |acc, h| acc.saturating_add(self.bal(t, *h)));
            if !sum.is_zero() || self.provision.get(t).is_some() {
                let amount = TokenAmount::new(sum, d).expect("declared decimals are valid");
                sheet.set(t, amount);
            }
        }
        sheet
    }
}

fn check_targets(sc: &Scenario, strategy: &StrategyScript) -> Result<(), ExecError> {
    fn walk(e: &Expr, sc: &Scenario, actors: usize) -> Result<(), ExecError> {
        match e {
            Expr::Call(c) => {
                if let Expr::Lit(v) = c.target {
                    let a = Address::from_u256(v);
                    let own = (0..actors).any(|i| actor_address(i) == a);
                    if !own && !sc.knows(a) {
                        return Err(ExecError::ScenarioInvalid(format!("no contract at {a}")));
                    }
                }
                walk(&c.target, sc, actors)?;
                for a in &c.args {
                    walk(a, sc, actors)?;
                }
                if let Some(v) = &c.value {
                    walk(v, sc, actors)?;
                }
            }
            Expr::Actor(i) if *i >= actors => {
                return Err(ExecError::ScenarioInvalid(format!("actor {i} out of range")))
            }
            Expr::Bin(_, a, b) | Expr::Balance(a, b) => {
                walk(a, sc, actors)?;
                walk(b, sc, actors)?;
            }
            Expr::Entry(_, k) => walk(k, sc, actors)?,
            _ => {}
        }
        Ok(())
    }
    let n = strategy.actors;
    if n == 0 {
        return Err(ExecError::ScenarioInvalid("a strategy needs at least one actor".into()));
    }
    for step in strategy.steps.iter().chain(&strategy.callback) {
        match step {
            Step::Exec { expr, .. } => walk(expr, sc, n)?,
            Step::ActAs(i) if *i >= n => {
                return Err(ExecError::ScenarioInvalid(format!("actor {i} out of range")))
            }
            Step::ActAs(_) => {}
            Step::DeployHelper { template, .. } => {
                if !sc.helpers.contains_key(template) {
                    return Err(ExecError::ScenarioInvalid(format!("unknown helper {template:?}")));
                }
            }
            Step::Swap { token, amount, .. } => {
                if let Expr::Lit(v) = token {
                    let t = Address::from_u256(*v);
                    if !sc.is_token(t) {
                        return Err(ExecError::ScenarioInvalid(format!("{t} is not a scenario token")));
                    }
                }
                walk(token, sc, n)?;
                if let Some(a) = amount {
                    walk(a, sc, n)?;
                }
            }
        }
    }
    Ok(())
}

/// Runs `strategy` against `scenario`. Only pre-validation failures are
/// errors; runtime failures are report contents.
pub fn execute(scenario: &Scenario, strategy: &StrategyScript) -> Result<ExecutionReport, ExecError> {
    check_targets(scenario, strategy)?;
    let chain = scenario.snapshot.chain();
    let base = base_currency(chain);
    let provision = initial_provisioning(chain);
    let mut balances = scenario.balances.clone();
    for (t, a) in &provision.balances {
        let slot = balances.entry((*t, actor_address(0))).or_default();
        *slot = slot.saturating_add(a.raw);
    }
    let mut m = Machine {
        sc: scenario,
        strategy,
        w: World {
            balances,
            allowances: BTreeMap::new(),
            storage: scenario.vars.clone(),
            registry: scenario.registry.clone(),
            helpers: BTreeMap::new(),
        },
        trace: Vec::new(),
        locals: BTreeMap::new(),
        revert_reason: None,
        wrapped: base.wrapped,
        provision,
    };
    m.run_steps(&strategy.steps, 0, actor_address(0), true)
        .expect("top-level steps never propagate");
    let fin = m.final_sheet();
    let (profit, revert_reason) = match reconcile(&m.provision, &fin, &m.w.registry) {
        Ok(r) => (Some(r.profit), m.revert_reason.clone()),
        Err(e) => (
            None,
            Some(m.revert_reason.clone().unwrap_or_else(|| format!("normalization failed: {e}"))),
        ),
    };
    let revenue = profit.map_or(TokenAmount::zero(base.decimals), |p| p.positive_part());
    Ok(ExecutionReport {
        profitable: profit.is_some_and(|p| p.is_positive()),
        revenue,
        profit,
        gas_used: m.trace.len() as u64,
        trace: m.trace,
        revert_reason,
        compile_error: None,
    })
}

/// Turns candidate source into a report, counting compile failures as
/// executions.
pub trait Executor: Send + Sync {
    fn run_candidate(&self, source: &str) -> ExecutionReport;
}

/// In-process executor over a fixture scenario.
pub struct SimulatedExecutor {
    pub scenario: Arc<Scenario>,
}

impl Executor for SimulatedExecutor {
    fn run_candidate(&self, source: &str) -> ExecutionReport {
        let decimals = base_currency(self.scenario.snapshot.chain()).decimals;
        let script = match translate(source) {
            Ok(s) => s,
            Err(e) => return ExecutionReport::compile_failure(e, decimals),
        };
        match execute(&self.scenario, &script) {
            Ok(r) => r,
            Err(e) => ExecutionReport::compile_failure(e.to_string(), decimals),
        }
    }
}

/// Runs an external forge-style process and parses its adapter output.
pub struct ExternalExecutor {
    pub program: String,
    pub args: Vec<String>,
    pub workdir: PathBuf,
    /// Where the candidate is written, relative to `workdir`.
    pub source_file: PathBuf,
}

impl ExternalExecutor {
    pub fn forge(workdir: PathBuf) -> Self {
        ExternalExecutor {
            program: "forge".into(),
            args: vec!["test".into(), "-vvvvv".into()],
            workdir,
            source_file: PathBuf::from("src/Exploit.sol"),
        }
    }
}

impl Executor for ExternalExecutor {
    fn run_candidate(&self, source: &str) -> ExecutionReport {
        let path = self.workdir.join(&self.source_file);
        if let Err(e) = std::fs::write(&path, source) {
            return ExecutionReport::compile_failure(format!("writing {}: {e}", path.display()), 18);
        }
        let out = match Command::new(&self.program)
            .args(&self.args)
            .current_dir(&self.workdir)
            .output()
        {
            Ok(o) => o,
            Err(e) => return ExecutionReport::compile_failure(format!("{}: {e}", self.program), 18),
        };
        let mut text = String::from_utf8_lossy(&out.stdout).into_owned();
        text.push_str(&String::from_utf8_lossy(&out.stderr));
        parse_external_report(&text)
            .unwrap_or_else(|e| ExecutionReport::compile_failure(e.to_string(), 18))
    }
}

/// The concrete execution tool: `source` in, report JSON out.
pub struct ConcreteExecutionTool {
    pub executor: Arc<dyn Executor>,
}

impl Tool for ConcreteExecutionTool {
    fn name(&self) -> &'static str {
        CONCRETE_EXECUTION
    }

    fn invoke(&self, args: &BTreeMap<String, String>) -> Result<ToolOutput, ToolError> {
        let source = arg(CONCRETE_EXECUTION, args, "source")?;
        let report = self.executor.run_candidate(source);
        let text = match (&report.compile_error, &report.profit) {
            (Some(e), _) => format!("compile error: {e}\n"),
            (None, Some(p)) => format!("profit {p}, {} frames\n", report.trace.len()),
            (None, None) => format!(
                "not normalized: {}\n",
                report.revert_reason.as_deref().unwrap_or("unknown")
            ),
        };
        Ok(ToolOutput {
            text,
            data: json!(report),
        })
    }
}

#[cfg(test)]
mod tests;
