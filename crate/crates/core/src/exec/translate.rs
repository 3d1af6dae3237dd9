//! Restricted Solidity-to-strategy translator.
//!
//! Recognized inside the entry function (`exploit`, `testExploit`,
//! `attack` or `run`) and inside `receive()`:
//! interface calls `IFoo(addr).fn{value: v}(args)`, locals
//! `<type> name = expr`, assignments, `try <call> {} catch {}` (a step whose
//! revert is tolerated), `actAs(n)` / `vm.startPrank(actor(n))` /
//! `vm.stopPrank()`, the three swap helpers, `deployHelper("id")`.
//! `console.log` and `emit` statements are skipped. Anything else is a
//! compile error. Contract-level constants are folded into literals.

use std::collections::{BTreeMap, BTreeSet};

use ruint::aliases::U256;

use super::lex::{tokenize, Tok};
use super::script::{BinOp, Dialect, Expr, Parser, Step, StrategyScript, SwapKind};
use crate::sanitize::{strip_comments, CUT};

pub const ENTRY_NAMES: [&str; 4] = ["exploit", "testExploit", "attack", "run"];

const VALUE_TYPES: [&str; 8] = [
    "uint256", "uint", "uint128", "uint112", "uint8", "address", "bool", "int256",
];

fn render(toks: &[Tok]) -> String {
    let mut s = String::new();
    for t in toks {
        match t {
            Tok::Ident(x) | Tok::Num(x) => {
                if s.ends_with(|c: char| c.is_ascii_alphanumeric() || c == '_') {
                    s.push(' ');
                }
                s.push_str(x);
            }
            Tok::Str(x) => {
                s.push('"');
                s.push_str(x);
                s.push('"');
            }
            Tok::Punct(p) => s.push_str(p),
        }
    }
    s
}

/// Index just past the bracket matching the opener at `open`.
fn matching(toks: &[Tok], open: usize) -> Result<usize, String> {
    let (o, c) = match &toks[open] {
        Tok::Punct("{") => ("{", "}"),
        Tok::Punct("(") => ("(", ")"),
        Tok::Punct("[") => ("[", "]"),
        t => return Err(format!("not a bracket: {t:?}")),
    };
    let mut depth = 0usize;
    for (i, t) in toks.iter().enumerate().skip(open) {
        if t.is(o) {
            depth += 1;
        } else if t.is(c) {
            depth -= 1;
            if depth == 0 {
                return Ok(i + 1);
            }
        }
    }
    Err(format!("unbalanced {o}"))
}

struct Function<'t> {
    name: String,
    body: &'t [Tok],
}

/// Contract-level constants and function bodies.
fn scan(toks: &[Tok]) -> Result<(BTreeMap<String, U256>, Vec<Function<'_>>), String> {
    let mut consts = BTreeMap::new();
    let mut funcs = Vec::new();
    let mut i = 0;
    let mut depth = 0usize;
    let mut stmt_start = 0;
    while i < toks.len() {
        let t = &toks[i];
        if depth == 1 && (t.is_ident("function") || t.is_ident("receive") || t.is_ident("fallback")) {
            let name = if t.is_ident("function") {
                match toks.get(i + 1) {
                    Some(Tok::Ident(n)) => n.clone(),
                    _ => return Err("function without a name".into()),
                }
            } else {
                match t {
                    Tok::Ident(n) => n.clone(),
                    _ => unreachable!(),
                }
            };
            let mut j = i + 1;
            while j < toks.len() && !toks[j].is("{") && !toks[j].is(";") {
                j += 1;
            }
            if j >= toks.len() {
                return Err(format!("function {name} has no body"));
            }
            if toks[j].is(";") {
                // Declaration only (interface or abstract).
                i = j + 1;
                stmt_start = i;
                continue;
            }
            let end = matching(toks, j)?;
            funcs.push(Function {
                name,
                body: &toks[j + 1..end - 1],
            });
            i = end;
            stmt_start = i;
            continue;
        }
        if t.is("{") {
            depth += 1;
            stmt_start = i + 1;
        } else if t.is("}") {
            depth = depth.saturating_sub(1);
            stmt_start = i + 1;
        } else if t.is(";") {
            if depth == 1 {
                if let Some((name, v)) = constant(&toks[stmt_start..i], &consts)? {
                    consts.insert(name, v);
                }
            }
            stmt_start = i + 1;
        }
        i += 1;
    }
    Ok((consts, funcs))
}

/// `<type> [modifiers] NAME = <literal expr>`; other declarations yield None.
fn constant(stmt: &[Tok], consts: &BTreeMap<String, U256>) -> Result<Option<(String, U256)>, String> {
    let Some(eq) = stmt.iter().position(|t| t.is("=")) else {
        return Ok(None);
    };
    if eq < 2 {
        return Ok(None);
    }
    let Tok::Ident(name) = &stmt[eq - 1] else {
        return Ok(None);
    };
    let no_locals = BTreeSet::new();
    let rhs = &stmt[eq + 1..];
    let mut p = Parser::new(rhs, Dialect::Strategy, consts, &no_locals);
    let e = p
        .expr()
        .map_err(|e| format!("in declaration of {name}: {e}"))?;
    if !p.at_end() {
        return Err(format!("unsupported declaration: {}", render(stmt)));
    }
    match fold(&e) {
        Some(v) => Ok(Some((name.clone(), v))),
        None => Err(format!("{name} is not a compile-time constant")),
    }
}

fn fold(e: &Expr) -> Option<U256> {
    match e {
        Expr::Lit(v) => Some(*v),
        Expr::Bin(op, a, b) => {
            let (a, b) = (fold(a)?, fold(b)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                BinOp::Div => a.checked_div(b),
                BinOp::Mod => a.checked_rem(b),
            }
        }
        _ => None,
    }
}

fn is_type_start(t: &Tok) -> bool {
    match t {
        Tok::Ident(n) => {
            VALUE_TYPES.contains(&n.as_str()) || n.starts_with(|c: char| c.is_ascii_uppercase())
        }
        _ => false,
    }
}

fn small_literal(e: &Expr) -> Result<usize, String> {
    match e {
        Expr::Lit(v) if *v < U256::from(64u8) => Ok(v.to::<usize>()),
        Expr::Actor(i) => Ok(*i),
        _ => Err("actor index must be a small integer literal".into()),
    }
}

struct Body<'c> {
    consts: &'c BTreeMap<String, U256>,
    locals: BTreeSet<String>,
    steps: Vec<Step>,
}

impl Body<'_> {
    fn parse(&mut self, toks: &[Tok]) -> Result<(), String> {
        let mut i = 0;
        while i < toks.len() {
            if toks[i].is_ident("try") {
                i = self.try_stmt(toks, i)?;
                continue;
            }
            if toks[i].is("{") {
                return Err("nested blocks are not supported".into());
            }
            let mut j = i;
            let mut depth = 0i32;
            while j < toks.len() {
                let t = &toks[j];
                if t.is("(") || t.is("[") || t.is("{") {
                    depth += 1;
                } else if t.is(")") || t.is("]") || t.is("}") {
                    depth -= 1;
                } else if t.is(";") && depth == 0 {
                    break;
                }
                j += 1;
            }
            if j >= toks.len() {
                return Err(format!("missing ';' after {}", render(&toks[i..])));
            }
            self.statement(&toks[i..j])
                .map_err(|e| format!("{e} in `{}`", render(&toks[i..j])))?;
            i = j + 1;
        }
        Ok(())
    }

    fn try_stmt(&mut self, toks: &[Tok], start: usize) -> Result<usize, String> {
        let mut j = start + 1;
        let mut depth = 0i32;
        while j < toks.len() {
            let t = &toks[j];
            if t.is("(") || t.is("[") {
                depth += 1;
            } else if t.is(")") || t.is("]") {
                depth -= 1;
            } else if t.is("{") && depth == 0 {
                let is_option = toks.get(j + 1).is_some_and(|t| t.is_ident("value"))
                    && toks.get(j + 2).is_some_and(|t| t.is(":"));
                if !is_option {
                    break;
                }
                j = matching(toks, j)?;
                continue;
            }
            j += 1;
        }
        if j >= toks.len() {
            return Err("malformed try statement".into());
        }
        let head = &toks[start + 1..j];
        let call_end = head
            .iter()
            .position(|t| t.is_ident("returns"))
            .unwrap_or(head.len());
        let expr = self.expr(&head[..call_end])?;
        if !matches!(expr, Expr::Call(_)) {
            return Err("try requires an external call".into());
        }
        let mut k = matching(toks, j)?;
        if k - j > 2 {
            return Err("try blocks must be empty".into());
        }
        let mut catches = 0;
        while toks.get(k).is_some_and(|t| t.is_ident("catch")) {
            let mut b = k + 1;
            while b < toks.len() && !toks[b].is("{") {
                b += 1;
            }
            if b >= toks.len() {
                return Err("malformed catch clause".into());
            }
            let end = matching(toks, b)?;
            if end - b > 2 {
                return Err("catch blocks must be empty".into());
            }
            k = end;
            catches += 1;
        }
        if catches == 0 {
            return Err("try without catch".into());
        }
        self.steps.push(Step::Exec {
            expr,
            bind: None,
            tolerant: true,
        });
        Ok(k)
    }

    fn expr(&self, toks: &[Tok]) -> Result<Expr, String> {
        let mut p = Parser::new(toks, Dialect::Strategy, self.consts, &self.locals);
        let e = p.expr()?;
        if !p.at_end() {
            return Err(format!("unexpected {:?}", toks[p.pos]));
        }
        Ok(e)
    }

    fn special(&mut self, rhs: &[Tok], bind: Option<String>) -> Result<Option<()>, String> {
        let Some(Tok::Ident(head)) = rhs.first() else {
            return Ok(None);
        };
        if let Some(kind) = SwapKind::from_name(head) {
            let mut p = Parser::new(&rhs[1..], Dialect::Strategy, self.consts, &self.locals);
            let mut args = p.args()?;
            if !p.at_end() {
                return Err("unexpected tokens after swap helper".into());
            }
            let want = if kind == SwapKind::ExcessToBase { 1 } else { 2 };
            if args.len() != want {
                return Err(format!("{head} takes {want} argument(s)"));
            }
            let amount = (want == 2).then(|| args.pop().expect("two"));
            let token = args.pop().expect("one");
            self.steps.push(Step::Swap {
                kind,
                token,
                amount,
                bind,
            });
            return Ok(Some(()));
        }
        if head == "deployHelper" {
            match rhs {
                [_, o, Tok::Str(id), c] if o.is("(") && c.is(")") => {
                    self.steps.push(Step::DeployHelper {
                        template: id.clone(),
                        bind,
                    });
                    return Ok(Some(()));
                }
                _ => return Err("deployHelper takes one string literal".into()),
            }
        }
        Ok(None)
    }

    fn statement(&mut self, s: &[Tok]) -> Result<(), String> {
        let Some(first) = s.first() else {
            return Ok(());
        };
        if first.is_ident("console") || first.is_ident("console2") || first.is_ident("emit") {
            return Ok(());
        }
        if first.is_ident("return") && s.len() == 1 {
            return Ok(());
        }
        if first.is_ident("actAs") {
            let e = self.expr(&s[1..])?;
            self.steps.push(Step::ActAs(small_literal(&e)?));
            return Ok(());
        }
        if first.is_ident("vm") {
            return match s.get(2) {
                Some(Tok::Ident(m)) if m == "startPrank" && s.get(1).is_some_and(|t| t.is(".")) => {
                    let e = self.expr(&s[3..])?;
                    self.steps.push(Step::ActAs(small_literal(&e)?));
                    Ok(())
                }
                Some(Tok::Ident(m)) if m == "stopPrank" => {
                    self.steps.push(Step::ActAs(0));
                    Ok(())
                }
                _ => Err("unsupported cheatcode".into()),
            };
        }
        // Local declaration: <type> [payable|memory] name = rhs
        if s.len() >= 4 && is_type_start(first) {
            let eq = s.iter().position(|t| t.is("="));
            if let Some(eq) = eq {
                let modifiers_ok = s[1..eq - 1]
                    .iter()
                    .all(|t| t.is_ident("payable") || t.is_ident("memory"));
                if let (true, Tok::Ident(name)) = (modifiers_ok && eq >= 2, &s[eq - 1]) {
                    let rhs = &s[eq + 1..];
                    if self.special(rhs, Some(name.clone()))?.is_none() {
                        let expr = self.expr(rhs)?;
                        self.steps.push(Step::Exec {
                            expr,
                            bind: Some(name.clone()),
                            tolerant: false,
                        });
                    }
                    self.locals.insert(name.clone());
                    return Ok(());
                }
            }
        }
        // Assignment to an existing local.
        if let (Tok::Ident(name), Some(op)) = (first, s.get(1)) {
            if self.locals.contains(name) && (op.is("=") || op.is("+=") || op.is("-=")) {
                let rhs = &s[2..];
                if op.is("=") && self.special(rhs, Some(name.clone()))?.is_some() {
                    return Ok(());
                }
                let mut expr = self.expr(rhs)?;
                if !op.is("=") {
                    let bin = if op.is("+=") { BinOp::Add } else { BinOp::Sub };
                    expr = Expr::Bin(bin, Box::new(Expr::Local(name.clone())), Box::new(expr));
                }
                self.steps.push(Step::Exec {
                    expr,
                    bind: Some(name.clone()),
                    tolerant: false,
                });
                return Ok(());
            }
        }
        if self.special(s, None)?.is_some() {
            return Ok(());
        }
        let expr = self.expr(s)?;
        if !matches!(expr, Expr::Call(_)) {
            return Err("statement has no effect".into());
        }
        self.steps.push(Step::Exec {
            expr,
            bind: None,
            tolerant: false,
        });
        Ok(())
    }
}

/// Translates candidate source into a strategy, or explains why not.
pub fn translate(source: &str) -> Result<StrategyScript, String> {
    let clean = strip_comments(source)
        .map_err(|e| e.to_string())?
        .replace(CUT, " ");
    let toks = tokenize(&clean)?;
    let (consts, funcs) = scan(&toks)?;
    let entry = ENTRY_NAMES
        .iter()
        .find_map(|n| funcs.iter().find(|f| f.name == *n))
        .ok_or_else(|| format!("no entry function (expected one of {})", ENTRY_NAMES.join(", ")))?;
    let mut main = Body {
        consts: &consts,
        locals: BTreeSet::new(),
        steps: Vec::new(),
    };
    main.parse(entry.body)?;
    let callback_fn = funcs
        .iter()
        .find(|f| f.name == "receive")
        .or_else(|| funcs.iter().find(|f| f.name == "fallback"));
    let mut cb = Body {
        consts: &consts,
        locals: BTreeSet::new(),
        steps: Vec::new(),
    };
    if let Some(f) = callback_fn {
        cb.parse(f.body)?;
    }
    let mut script = StrategyScript {
        steps: main.steps,
        callback: cb.steps,
        actors: 1,
    };
    script.actors = script.max_actor() + 1;
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SRC: &str = r#"
pragma solidity ^0.8.0;
interface IToken { function mint(address to, uint256 amount) external; }
contract Exploit {
    address constant TOKEN = 0x9e52dB44d62A8c9762FA847Bd2eBa9d0585782d1; // target
    uint256 constant AMOUNT = 2.36 ether;
    function exploit() external {
        IToken(TOKEN).transferOwnership(address(this));
        /* second actor */
        vm.startPrank(actor(1));
        uint256 bal = IToken(TOKEN).balanceOf(actor(1));
        bal += AMOUNT / 2;
        try IToken(TOKEN).mint(actor(1), bal) {} catch {}
        vm.stopPrank();
        swapExcessTokensToBaseToken(TOKEN);
        console.log("done");
    }
    receive() external payable {
        IToken(TOKEN).poke();
    }
}
"#;

    #[test]
    fn translates_supported_subset() {
        let s = translate(SRC).unwrap();
        assert_eq!(s.actors, 2);
        assert_eq!(s.steps.len(), 7);
        assert!(matches!(s.steps[1], Step::ActAs(1)));
        assert!(matches!(s.steps[4], Step::Exec { tolerant: true, .. }));
        assert!(matches!(s.steps[5], Step::ActAs(0)));
        assert!(matches!(s.steps[6], Step::Swap { kind: SwapKind::ExcessToBase, .. }));
        assert_eq!(s.callback.len(), 1);
    }

    #[test]
    fn rejects_unsupported() {
        let src = "contract X { function exploit() external { for (uint i; i < 2; i++) {} } }";
        assert!(translate(src).is_err());
        let src = "contract X { function exploit() external { require(true, \"x\"); } }";
        assert!(translate(src).is_err());
        assert!(translate("contract X { function other() external {} }").is_err());
        let src = "contract X { function exploit() external { IFoo(undefinedLocal).f(); } }";
        assert!(translate(src).is_err());
    }

    #[test]
    fn empty_entry() {
        let s = translate("contract X { function exploit() external {} }").unwrap();
        assert!(s.steps.is_empty());
        assert_eq!(s.actors, 1);
    }
}
