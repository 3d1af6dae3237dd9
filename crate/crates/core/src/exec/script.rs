//! Expression trees, behavior rules and strategy steps, plus the
//! expression parser used by both the behavior DSL and the translator.

use std::collections::{BTreeMap, BTreeSet};

use ruint::aliases::U256;
use serde::{Deserialize, Serialize};

use super::lex::{parse_number, Tok};
use crate::domain::Address;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds(self, a: U256, b: U256) -> bool {
        match self {
            Cmp::Eq => a == b,
            Cmp::Ne => a != b,
            Cmp::Lt => a < b,
            Cmp::Le => a <= b,
            Cmp::Gt => a > b,
            Cmp::Ge => a >= b,
        }
    }

    fn from_tok(t: &Tok) -> Option<Cmp> {
        Some(match t {
            Tok::Punct("==") => Cmp::Eq,
            Tok::Punct("!=") => Cmp::Ne,
            Tok::Punct("<") => Cmp::Lt,
            Tok::Punct("<=") => Cmp::Le,
            Tok::Punct(">") => Cmp::Gt,
            Tok::Punct(">=") => Cmp::Ge,
            _ => return None,
        })
    }
}

/// Values are 256-bit words; addresses are stored in their low 160 bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expr {
    Lit(U256),
    /// The contract whose rule is running.
    This,
    Sender,
    Value,
    Arg(usize),
    /// Storage variable of the running contract.
    Var(String),
    /// Mapping entry of the running contract.
    Entry(String, Box<Expr>),
    /// `balance(token, holder)`.
    Balance(Box<Expr>, Box<Expr>),
    /// Strategy local variable.
    Local(String),
    /// Strategy actor address.
    Actor(usize),
    Call(Box<CallExpr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallExpr {
    pub target: Expr,
    pub function: String,
    pub args: Vec<Expr>,
    pub value: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    Require {
        lhs: Expr,
        cmp: Option<(Cmp, Expr)>,
        reason: String,
    },
    Set {
        var: String,
        key: Option<Expr>,
        value: Expr,
    },
    Transfer {
        token: Expr,
        from: Expr,
        to: Expr,
        amount: Expr,
    },
    Mint {
        token: Expr,
        to: Expr,
        amount: Expr,
    },
    Burn {
        token: Expr,
        from: Expr,
        amount: Expr,
    },
    Call(CallExpr),
    /// Calls back into the strategy if the target is strategy-controlled.
    Hook(Expr),
    Revert(String),
    Return(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub function: String,
    pub params: Vec<String>,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SwapKind {
    /// `swapExactTokenToBaseToken(token, amount)`
    TokenToBase,
    /// `swapExactBaseTokenToToken(token, baseAmount)`
    BaseToToken,
    /// `swapExcessTokensToBaseToken(token)`
    ExcessToBase,
}

impl SwapKind {
    pub fn function_name(self) -> &'static str {
        match self {
            SwapKind::TokenToBase => "swapExactTokenToBaseToken",
            SwapKind::BaseToToken => "swapExactBaseTokenToToken",
            SwapKind::ExcessToBase => "swapExcessTokensToBaseToken",
        }
    }

    pub fn from_name(name: &str) -> Option<SwapKind> {
        [SwapKind::TokenToBase, SwapKind::BaseToToken, SwapKind::ExcessToBase]
            .into_iter()
            .find(|k| k.function_name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Step {
    Exec {
        expr: Expr,
        bind: Option<String>,
        tolerant: bool,
    },
    ActAs(usize),
    DeployHelper {
        template: String,
        bind: Option<String>,
    },
    Swap {
        kind: SwapKind,
        token: Expr,
        amount: Option<Expr>,
        bind: Option<String>,
    },
}

/// An interpreted exploit strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyScript {
    pub steps: Vec<Step>,
    /// Body run when the exploit contract is called back (`receive`).
    pub callback: Vec<Step>,
    pub actors: usize,
}

impl StrategyScript {
    pub fn new(steps: Vec<Step>) -> Self {
        let mut s = StrategyScript {
            steps,
            callback: Vec::new(),
            actors: 1,
        };
        s.actors = s.max_actor() + 1;
        s
    }

    /// Highest actor index referenced anywhere.
    pub fn max_actor(&self) -> usize {
        fn expr(e: &Expr, m: &mut usize) {
            match e {
                Expr::Actor(i) => *m = (*m).max(*i),
                Expr::Entry(_, k) => expr(k, m),
                Expr::Balance(a, b) | Expr::Bin(_, a, b) => {
                    expr(a, m);
                    expr(b, m);
                }
                Expr::Call(c) => {
                    expr(&c.target, m);
                    c.args.iter().for_each(|a| expr(a, m));
                    if let Some(v) = &c.value {
                        expr(v, m);
                    }
                }
                _ => {}
            }
        }
        let mut m = 0;
        for s in self.steps.iter().chain(&self.callback) {
            match s {
                Step::ActAs(i) => m = m.max(*i),
                Step::Exec { expr: e, .. } => expr(e, &mut m),
                Step::Swap { token, amount, .. } => {
                    expr(token, &mut m);
                    if let Some(a) = amount {
                        expr(a, &mut m);
                    }
                }
                Step::DeployHelper { .. } => {}
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    Rule,
    Strategy,
}

/// Recursive-descent expression parser over a token slice.
pub struct Parser<'a> {
    pub toks: &'a [Tok],
    pub pos: usize,
    pub dialect: Dialect,
    pub consts: &'a BTreeMap<String, U256>,
    pub locals: &'a BTreeSet<String>,
}

pub fn addr_word(a: Address) -> U256 {
    a.to_u256()
}

impl<'a> Parser<'a> {
    pub fn new(
        toks: &'a [Tok],
        dialect: Dialect,
        consts: &'a BTreeMap<String, U256>,
        locals: &'a BTreeSet<String>,
    ) -> Self {
        Parser {
            toks,
            pos: 0,
            dialect,
            consts,
            locals,
        }
    }

    pub fn peek(&self) -> Option<&'a Tok> {
        self.toks.get(self.pos)
    }

    pub fn peek_at(&self, k: usize) -> Option<&'a Tok> {
        self.toks.get(self.pos + k)
    }

    pub fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub fn next(&mut self) -> Result<&'a Tok, String> {
        let t = self.toks.get(self.pos).ok_or("unexpected end of input")?;
        self.pos += 1;
        Ok(t)
    }

    pub fn eat(&mut self, p: &str) -> bool {
        if self.peek().is_some_and(|t| t.is(p)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub fn expect(&mut self, p: &str) -> Result<(), String> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(format!("expected {p:?}, found {:?}", self.peek()))
        }
    }

    pub fn ident(&mut self) -> Result<&'a str, String> {
        match self.next()? {
            Tok::Ident(s) => Ok(s),
            t => Err(format!("expected identifier, found {t:?}")),
        }
    }

    pub fn string(&mut self) -> Result<&'a str, String> {
        match self.next()? {
            Tok::Str(s) => Ok(s),
            t => Err(format!("expected string, found {t:?}")),
        }
    }

    pub fn cmp(&mut self) -> Option<Cmp> {
        let c = self.peek().and_then(Cmp::from_tok)?;
        self.pos += 1;
        Some(c)
    }

    pub fn expr(&mut self) -> Result<Expr, String> {
        let mut lhs = self.term()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(lhs);
            };
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.postfix()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else if self.eat("%") {
                BinOp::Mod
            } else {
                return Ok(lhs);
            };
            let rhs = self.postfix()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    /// Primary followed by any number of `.fn{value: v}(args)` calls.
    fn postfix(&mut self) -> Result<Expr, String> {
        let mut e = self.primary()?;
        while self.dialect == Dialect::Strategy && self.peek().is_some_and(|t| t.is(".")) {
            self.pos += 1;
            let function = self.ident()?.to_string();
            if function == "balance" && !self.peek().is_some_and(|t| t.is("(")) {
                e = Expr::Balance(Box::new(Expr::Lit(addr_word(Address::NATIVE))), Box::new(e));
                continue;
            }
            let value = if self.eat("{") {
                let key = self.ident()?;
                if key != "value" {
                    return Err(format!("unsupported call option {key:?}"));
                }
                self.expect(":")?;
                let v = self.expr()?;
                self.expect("}")?;
                Some(v)
            } else {
                None
            };
            let args = self.args()?;
            e = Expr::Call(Box::new(CallExpr {
                target: e,
                function,
                args,
                value,
            }));
        }
        Ok(e)
    }

    pub fn args(&mut self) -> Result<Vec<Expr>, String> {
        self.expect("(")?;
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn number(&mut self, text: &str) -> Result<Expr, String> {
        let hex = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X"));
        if hex.is_some_and(|h| h.len() == 40) {
            let a = crate::domain::parse_address(&text.to_ascii_lowercase())
                .map_err(|e| e.to_string())?;
            return Ok(Expr::Lit(addr_word(a)));
        }
        let exp = match self.peek() {
            Some(Tok::Ident(u)) if u == "ether" => 18,
            Some(Tok::Ident(u)) if u == "gwei" => 9,
            Some(Tok::Ident(u)) if u == "wei" => 0,
            _ => return parse_number(text, 0).map(Expr::Lit),
        };
        self.pos += 1;
        parse_number(text, exp).map(Expr::Lit)
    }

    fn primary(&mut self) -> Result<Expr, String> {
        let t = self.next()?;
        match t {
            Tok::Num(n) => self.number(n),
            Tok::Punct("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => match self.dialect {
                Dialect::Rule => self.rule_ident(name),
                Dialect::Strategy => self.strategy_ident(name),
            },
            other => Err(format!("unexpected token {other:?}")),
        }
    }

    fn rule_ident(&mut self, name: &str) -> Result<Expr, String> {
        match name {
            "$sender" => return Ok(Expr::Sender),
            "$self" => return Ok(Expr::This),
            "$value" => return Ok(Expr::Value),
            "native" => return Ok(Expr::Lit(addr_word(Address::NATIVE))),
            "balance" => {
                let mut a = self.args()?;
                if a.len() != 2 {
                    return Err("balance takes (token, holder)".into());
                }
                let holder = a.pop().expect("two");
                let token = a.pop().expect("two");
                return Ok(Expr::Balance(Box::new(token), Box::new(holder)));
            }
            _ => {}
        }
        if let Some(n) = name.strip_prefix("$arg") {
            return n
                .parse()
                .map(Expr::Arg)
                .map_err(|_| format!("bad argument reference {name:?}"));
        }
        if name.starts_with('$') {
            return Err(format!("unknown context value {name:?}"));
        }
        if self.eat("[") {
            let k = self.expr()?;
            self.expect("]")?;
            return Ok(Expr::Entry(name.to_string(), Box::new(k)));
        }
        Ok(Expr::Var(name.to_string()))
    }

    fn strategy_ident(&mut self, name: &str) -> Result<Expr, String> {
        match name {
            "address" | "payable" | "uint256" | "uint" | "uint160" => {
                if self.peek_at(0).is_some_and(|t| t.is("("))
                    && self.peek_at(1).is_some_and(|t| t.is_ident("this"))
                    && self.peek_at(2).is_some_and(|t| t.is(")"))
                {
                    self.pos += 3;
                    return Ok(Expr::Actor(0));
                }
                self.expect("(")?;
                let e = self.expr()?;
                self.expect(")")?;
                return Ok(e);
            }
            "actor" => {
                let a = self.args()?;
                return match a.as_slice() {
                    [Expr::Lit(v)] if *v < U256::from(64u8) => Ok(Expr::Actor(v.to::<usize>())),
                    _ => Err("actor() takes a small integer literal".into()),
                };
            }
            "type" => {
                self.expect("(")?;
                let ty = self.ident()?;
                self.expect(")")?;
                self.expect(".")?;
                let m = self.ident()?;
                return match (ty, m) {
                    ("uint256" | "uint", "max") => Ok(Expr::Lit(U256::MAX)),
                    ("uint256" | "uint", "min") => Ok(Expr::Lit(U256::ZERO)),
                    _ => Err(format!("unsupported type({ty}).{m}")),
                };
            }
            "this" => return Ok(Expr::Actor(0)),
            _ => {}
        }
        if self.locals.contains(name) {
            return Ok(Expr::Local(name.to_string()));
        }
        if let Some(v) = self.consts.get(name) {
            return Ok(Expr::Lit(*v));
        }
        // Interface cast: `IFoo(expr)` yields the address.
        if name.starts_with(|c: char| c.is_ascii_uppercase()) && self.peek().is_some_and(|t| t.is("(")) {
            self.expect("(")?;
            let e = self.expr()?;
            self.expect(")")?;
            return Ok(e);
        }
        Err(format!("unknown identifier {name:?}"))
    }
}
