//! Source sanitizer: strips comments, unused imports and unreferenced
//! file-level constants while leaving the remaining token stream intact.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SanitizeError {
    #[error("unterminated block comment starting at byte {0}")]
    UnterminatedComment(usize),
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedString(usize),
}

/// Placeholder for removed text while lines are being reassembled.
pub(crate) const CUT: char = '\u{E000}';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Seg {
    Code,
    Str,
    LineComment,
    BlockComment,
}

fn segments(src: &str) -> Result<Vec<(Seg, usize, usize)>, SanitizeError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let mut code_start = 0;
    let flush = |out: &mut Vec<_>, from: usize, to: usize| {
        if to > from {
            out.push((Seg::Code, from, to));
        }
    };
    while i < b.len() {
        match b[i] {
            b'/' if b.get(i + 1) == Some(&b'/') => {
                flush(&mut out, code_start, i);
                let end = src[i..].find('\n').map_or(b.len(), |n| i + n);
                out.push((Seg::LineComment, i, end));
                i = end;
                code_start = i;
            }
            b'/' if b.get(i + 1) == Some(&b'*') => {
                flush(&mut out, code_start, i);
                let end = src[i + 2..]
                    .find("*/")
                    .map(|n| i + 2 + n + 2)
                    .ok_or(SanitizeError::UnterminatedComment(i))?;
                out.push((Seg::BlockComment, i, end));
                i = end;
                code_start = i;
            }
            q @ (b'"' | b'\'') => {
                flush(&mut out, code_start, i);
                let start = i;
                i += 1;
                loop {
                    match b.get(i) {
                        None | Some(b'\n') => return Err(SanitizeError::UnterminatedString(start)),
                        Some(b'\\') => i += 2,
                        Some(c) if *c == q => {
                            i += 1;
                            break;
                        }
                        Some(_) => i += 1,
                    }
                }
                out.push((Seg::Str, start, i));
                code_start = i;
            }
            _ => i += 1,
        }
    }
    flush(&mut out, code_start, b.len());
    Ok(out)
}

pub(crate) fn strip_comments(src: &str) -> Result<String, SanitizeError> {
    let mut out = String::with_capacity(src.len());
    for (seg, s, e) in segments(src)? {
        match seg {
            Seg::Code | Seg::Str => out.push_str(&src[s..e]),
            Seg::LineComment => out.push(CUT),
            Seg::BlockComment => {
                let before = out.chars().rev().find(|c| *c != CUT);
                let after = src[e..].chars().next();
                let glued = |c: Option<char>| c.is_some_and(|c| !c.is_whitespace());
                out.push(CUT);
                if glued(before) && glued(after) {
                    out.push(' ');
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct Tok {
    text: String,
    start: usize,
    end: usize,
    ident: bool,
}

fn tokens(code: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut it = code.char_indices().peekable();
    while let Some((i, c)) = it.next() {
        if c.is_whitespace() || c == CUT {
            continue;
        }
        if c == '"' || c == '\'' {
            let mut end = i + 1;
            let mut esc = false;
            for (j, d) in it.by_ref() {
                end = j + d.len_utf8();
                if esc {
                    esc = false;
                } else if d == '\\' {
                    esc = true;
                } else if d == c {
                    break;
                }
            }
            out.push(Tok { text: code[i..end].to_string(), start: i, end, ident: false });
        } else if c.is_alphanumeric() || c == '_' || c == '$' {
            let mut end = i + c.len_utf8();
            while let Some(&(j, d)) = it.peek() {
                if d.is_alphanumeric() || d == '_' || d == '$' {
                    end = j + d.len_utf8();
                    it.next();
                } else {
                    break;
                }
            }
            let text = code[i..end].to_string();
            let ident = !c.is_ascii_digit();
            out.push(Tok { text, start: i, end, ident });
        } else {
            out.push(Tok { text: c.to_string(), start: i, end: i + c.len_utf8(), ident: false });
        }
    }
    out
}

/// A removable file-level statement: token index range and the names it binds.
struct Removable {
    from: usize,
    to: usize,
    names: Vec<String>,
}

fn removable_statements(toks: &[Tok]) -> Vec<Removable> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut i = 0;
    let mut stmt_start = 0;
    while i < toks.len() {
        let t = &toks[i].text;
        if depth == 0 && i == stmt_start && t == "import" {
            // Import braces are not blocks.
            while i < toks.len() && toks[i].text != ";" {
                i += 1;
            }
            if i < toks.len() {
                if let Some(names) = import_names(&toks[stmt_start..i]) {
                    out.push(Removable { from: stmt_start, to: i, names });
                }
            }
            i += 1;
            stmt_start = i;
            continue;
        }
        match t.as_str() {
            "{" => depth += 1,
            "}" => {
                depth -= 1;
                if depth == 0 {
                    stmt_start = i + 1;
                }
            }
            ";" if depth == 0 => {
                let stmt = &toks[stmt_start..i];
                if let Some(names) = import_names(stmt).or_else(|| constant_name(stmt)) {
                    out.push(Removable { from: stmt_start, to: i, names });
                }
                stmt_start = i + 1;
            }
            _ => {}
        }
        i += 1;
    }
    out
}

/// Local names bound by an import; `None` for plain `import "x";`, which is
/// always kept.
fn import_names(stmt: &[Tok]) -> Option<Vec<String>> {
    if stmt.first()?.text != "import" {
        return None;
    }
    let texts: Vec<&str> = stmt.iter().map(|t| t.text.as_str()).collect();
    if texts.get(1) == Some(&"{") {
        let close = texts.iter().position(|t| *t == "}")?;
        let mut names = Vec::new();
        for item in texts[2..close].split(|t| *t == ",") {
            match item {
                [name] => names.push(name.to_string()),
                [_, "as", alias] => names.push(alias.to_string()),
                _ => return None,
            }
        }
        return Some(names);
    }
    let as_pos = texts.iter().position(|t| *t == "as")?;
    texts.get(as_pos + 1).map(|n| vec![n.to_string()])
}

fn constant_name(stmt: &[Tok]) -> Option<Vec<String>> {
    const BLOCKS: [&str; 14] = [
        "contract", "interface", "library", "abstract", "pragma", "import", "struct", "enum",
        "function", "event", "error", "using", "type", "modifier",
    ];
    if BLOCKS.contains(&stmt.first()?.text.as_str()) {
        return None;
    }
    let k = stmt.iter().position(|t| t.text == "constant")?;
    let name = stmt.get(k + 1).filter(|t| t.ident)?;
    (stmt.get(k + 2)?.text == "=").then(|| vec![name.text.clone()])
}

fn strip_unused(code: &str) -> String {
    let toks = tokens(code);
    let candidates = removable_statements(&toks);
    let mut removed = vec![false; candidates.len()];
    loop {
        let mut in_removed = vec![false; toks.len()];
        for (c, r) in candidates.iter().zip(&removed) {
            if *r {
                in_removed[c.from..=c.to].iter_mut().for_each(|x| *x = true);
            }
        }
        let mut changed = false;
        for (ci, c) in candidates.iter().enumerate() {
            if removed[ci] {
                continue;
            }
            let used: BTreeSet<&str> = toks
                .iter()
                .enumerate()
                .filter(|(ti, t)| t.ident && !in_removed[*ti] && (*ti < c.from || *ti > c.to))
                .map(|(_, t)| t.text.as_str())
                .collect();
            if !c.names.iter().any(|n| used.contains(n.as_str())) {
                removed[ci] = true;
                changed = true;
                break;
            }
        }
        if !changed {
            break;
        }
    }
    let mut out = String::with_capacity(code.len());
    let mut pos = 0;
    for (c, r) in candidates.iter().zip(&removed) {
        if *r {
            out.push_str(&code[pos..toks[c.from].start]);
            out.push(CUT);
            pos = toks[c.to].end;
        }
    }
    out.push_str(&code[pos..]);
    out
}

fn tidy(text: &str, trailing_newline: bool) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut prev_blank = false;
    for line in text.split('\n') {
        let had_cut = line.contains(CUT);
        let clean: String = line.chars().filter(|c| *c != CUT).collect();
        let clean = clean.trim_end().to_string();
        let blank = clean.is_empty();
        if blank && had_cut {
            continue;
        }
        if blank && prev_blank {
            continue;
        }
        prev_blank = blank;
        lines.push(clean);
    }
    while lines.first().is_some_and(|l| l.is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.is_empty()) {
        lines.pop();
    }
    let mut out = lines.join("\n");
    if trailing_newline && !out.is_empty() {
        out.push('\n');
    }
    out
}

pub fn sanitize(source: &str) -> Result<String, SanitizeError> {
    let stripped = strip_comments(source)?;
    let pruned = strip_unused(&stripped);
    Ok(tidy(&pruned, source.ends_with('\n')))
}
