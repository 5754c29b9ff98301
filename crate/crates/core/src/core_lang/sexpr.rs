//! Round-trippable S-expression text for core terms.
//!
//! Types are embedded in braces using the arrow notation of the surface
//! language with full effect rows, e.g. `{1 -[print : str ~> 1]> 1}`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use super::term::{Clause, HandleKind, Handler, Term};
use crate::typesys::{EffMap, EffectType, OpType, ValueType};

#[derive(Clone, Debug, PartialEq, Eq)]
enum Sx {
    Sym(String),
    Str(String),
    Ty(String),
    List(Vec<Sx>),
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("core syntax error at byte {pos}: {msg}")]
pub struct SexprError {
    pub pos: usize,
    pub msg: String,
}

fn sym(s: &str) -> Sx {
    Sx::Sym(s.to_string())
}

fn ty(t: &ValueType) -> Sx {
    Sx::Ty(t.to_string())
}

fn eff(e: &EffectType) -> Sx {
    Sx::Ty(e.to_string())
}

fn to_sx(t: &Term) -> Sx {
    let list = |v: Vec<Sx>| Sx::List(v);
    match t {
        Term::Var(x) => sym(x),
        Term::True => sym("true"),
        Term::False => sym("false"),
        Term::Unit => sym("()"),
        Term::Str(s) => Sx::Str(s.clone()),
        Term::Err => sym("err"),
        Term::Lam(x, a, b) => list(vec![sym("lam"), sym(x), ty(a), to_sx(b)]),
        Term::Fix(f, a, b) => list(vec![sym("fix"), sym(f), ty(a), to_sx(b)]),
        Term::App(f, a) => list(vec![sym("app"), to_sx(f), to_sx(a)]),
        Term::Let(x, a, m, n) => list(vec![sym("let"), sym(x), ty(a), to_sx(m), to_sx(n)]),
        Term::If(c, a, b) => list(vec![sym("if"), to_sx(c), to_sx(a), to_sx(b)]),
        Term::Raise { op, req, resp, arg } => list(vec![sym("raise"), sym(op), ty(req), ty(resp), to_sx(arg)]),
        Term::Handle(m, h) => {
            let kind = match h.kind {
                HandleKind::Deep => "handle",
                HandleKind::Shallow => "shallow-handle",
            };
            let mut v = vec![sym(kind), eff(&h.eff), ty(&h.ty), to_sx(m)];
            v.push(list(vec![sym("ret"), sym(&h.ret_var), ty(&h.ret_ty), to_sx(&h.ret_body)]));
            for (n, c) in &h.clauses {
                v.push(list(vec![sym(n), sym(&c.x), sym(&c.k), ty(&c.req), ty(&c.resp), to_sx(&c.body)]));
            }
            list(v)
        }
        Term::ValUp(a, b, m) => list(vec![sym("up"), ty(a), ty(b), to_sx(m)]),
        Term::ValDown(a, b, m) => list(vec![sym("down"), ty(a), ty(b), to_sx(m)]),
        Term::EffUp(a, b, m) => list(vec![sym("eff-up"), eff(a), eff(b), to_sx(m)]),
        Term::EffDown(a, b, m) => list(vec![sym("eff-down"), eff(a), eff(b), to_sx(m)]),
        Term::Concat(a, b) => list(vec![sym("++"), to_sx(a), to_sx(b)]),
        Term::StrEq(a, b) => list(vec![sym("=="), to_sx(a), to_sx(b)]),
        Term::QueueVal(a, vs) => {
            let mut v = vec![sym("queue"), ty(a)];
            v.extend(vs.iter().map(to_sx));
            list(v)
        }
        Term::Enqueue(q, x) => list(vec![sym("enqueue"), to_sx(q), to_sx(x)]),
        Term::CaseQueue { scrut, elem, empty, x, q, cons } => list(vec![
            sym("case-queue"),
            ty(elem),
            to_sx(scrut),
            to_sx(empty),
            sym(x),
            sym(q),
            to_sx(cons),
        ]),
    }
}

fn flat(sx: &Sx, out: &mut String) {
    match sx {
        Sx::Sym(s) => out.push_str(s),
        Sx::Str(s) => {
            let _ = write!(out, "{s:?}");
        }
        Sx::Ty(s) => {
            let _ = write!(out, "{{{s}}}");
        }
        Sx::List(v) => {
            out.push('(');
            for (i, x) in v.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                flat(x, out);
            }
            out.push(')');
        }
    }
}

const WIDTH: usize = 88;

fn pretty(sx: &Sx, indent: usize, out: &mut String) {
    let mut one = String::new();
    flat(sx, &mut one);
    let Sx::List(v) = sx else {
        out.push_str(&one);
        return;
    };
    if indent + one.len() <= WIDTH || v.len() < 2 {
        out.push_str(&one);
        return;
    }
    // Keep the head and any leading atoms on the first line.
    out.push('(');
    let mut i = 0;
    while i < v.len() && !matches!(v[i], Sx::List(_)) && (i == 0 || i < 4) {
        if i > 0 {
            out.push(' ');
        }
        flat(&v[i], out);
        i += 1;
    }
    for x in &v[i..] {
        out.push('\n');
        out.push_str(&" ".repeat(indent + 2));
        pretty(x, indent + 2, out);
    }
    out.push(')');
}

/// Single-line rendering.
pub fn print_term(t: &Term) -> String {
    let mut s = String::new();
    flat(&to_sx(t), &mut s);
    s
}

/// Indented rendering for humans; parses back to the same term.
pub fn pretty_term(t: &Term) -> String {
    let mut s = String::new();
    pretty(&to_sx(t), 0, &mut s);
    s
}

struct Reader<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn fail<T>(&self, msg: impl Into<String>) -> Result<T, SexprError> {
        Err(SexprError { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<(usize, Sx), SexprError> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[self.pos..];
        let Some(c) = rest.chars().next() else { return self.fail("unexpected end of input") };
        match c {
            '(' if rest.starts_with("()") => {
                self.pos += 2;
                Ok((start, sym("()")))
            }
            '(' => {
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.src[self.pos..].chars().next() {
                        Some(')') => {
                            self.pos += 1;
                            return Ok((start, Sx::List(items)));
                        }
                        Some(_) => items.push(self.read()?.1),
                        None => return self.fail("unclosed parenthesis"),
                    }
                }
            }
            ')' => self.fail("unexpected `)`"),
            '"' => {
                let mut out = String::new();
                let mut chars = rest.char_indices().skip(1);
                while let Some((i, ch)) = chars.next() {
                    match ch {
                        '"' => {
                            self.pos += i + 1;
                            return Ok((start, Sx::Str(out)));
                        }
                        '\\' => match chars.next() {
                            Some((_, 'n')) => out.push('\n'),
                            Some((_, 't')) => out.push('\t'),
                            Some((_, 'r')) => out.push('\r'),
                            Some((_, '0')) => out.push('\0'),
                            Some((_, 'u')) => {
                                let mut code = String::new();
                                for (_, h) in chars.by_ref() {
                                    if h == '}' {
                                        break;
                                    }
                                    if h != '{' {
                                        code.push(h);
                                    }
                                }
                                match u32::from_str_radix(&code, 16).ok().and_then(char::from_u32) {
                                    Some(c) => out.push(c),
                                    None => return self.fail("bad unicode escape"),
                                }
                            }
                            Some((_, other)) => out.push(other),
                            None => break,
                        },
                        _ => out.push(ch),
                    }
                }
                self.fail("unterminated string")
            }
            '{' => {
                let mut depth = 0usize;
                for (i, ch) in rest.char_indices() {
                    match ch {
                        '{' => depth += 1,
                        '}' => {
                            depth -= 1;
                            if depth == 0 {
                                self.pos += i + 1;
                                return Ok((start, Sx::Ty(rest[1..i].to_string())));
                            }
                        }
                        _ => {}
                    }
                }
                self.fail("unterminated type")
            }
            _ => {
                let len = rest.find(|c: char| c.is_whitespace() || c == '(' || c == ')').unwrap_or(rest.len());
                self.pos += len;
                Ok((start, Sx::Sym(rest[..len].to_string())))
            }
        }
    }
}

/// Parses the output of [`print_term`] or [`pretty_term`].
pub fn parse_term(src: &str) -> Result<Term, SexprError> {
    let mut r = Reader { src, pos: 0 };
    let (_, sx) = r.read()?;
    r.skip_ws();
    if r.pos != src.len() {
        return r.fail("trailing input");
    }
    from_sx(&sx).map_err(|msg| SexprError { pos: 0, msg })
}

fn as_sym(sx: &Sx) -> Result<String, String> {
    match sx {
        Sx::Sym(s) => Ok(s.clone()),
        other => Err(format!("expected a name, found {other:?}")),
    }
}

fn as_ty(sx: &Sx) -> Result<ValueType, String> {
    match sx {
        Sx::Ty(s) => parse_value_type(s),
        other => Err(format!("expected a type, found {other:?}")),
    }
}

fn as_eff(sx: &Sx) -> Result<EffectType, String> {
    match sx {
        Sx::Ty(s) => parse_effect_type(s),
        other => Err(format!("expected an effect type, found {other:?}")),
    }
}

fn from_sx(sx: &Sx) -> Result<Term, String> {
    let b = |sx: &Sx| from_sx(sx).map(Box::new);
    match sx {
        Sx::Str(s) => Ok(Term::Str(s.clone())),
        Sx::Ty(_) => Err("unexpected type".into()),
        Sx::Sym(s) => Ok(match s.as_str() {
            "true" => Term::True,
            "false" => Term::False,
            "()" => Term::Unit,
            "err" => Term::Err,
            _ => Term::Var(s.clone()),
        }),
        Sx::List(v) => {
            let head = v.first().map(as_sym).transpose()?.ok_or("empty list")?;
            let args = &v[1..];
            let arity = |n: usize| {
                if args.len() == n {
                    Ok(())
                } else {
                    Err(format!("`{head}` expects {n} arguments, found {}", args.len()))
                }
            };
            match head.as_str() {
                "lam" | "fix" => {
                    arity(3)?;
                    let (x, a, body) = (as_sym(&args[0])?, as_ty(&args[1])?, b(&args[2])?);
                    Ok(if head == "lam" { Term::Lam(x, a, body) } else { Term::Fix(x, a, body) })
                }
                "app" => {
                    arity(2)?;
                    Ok(Term::App(b(&args[0])?, b(&args[1])?))
                }
                "let" => {
                    arity(4)?;
                    Ok(Term::Let(as_sym(&args[0])?, as_ty(&args[1])?, b(&args[2])?, b(&args[3])?))
                }
                "if" => {
                    arity(3)?;
                    Ok(Term::If(b(&args[0])?, b(&args[1])?, b(&args[2])?))
                }
                "raise" => {
                    arity(4)?;
                    Ok(Term::Raise { op: as_sym(&args[0])?, req: as_ty(&args[1])?, resp: as_ty(&args[2])?, arg: b(&args[3])? })
                }
                "handle" | "shallow-handle" => {
                    if args.len() < 4 {
                        return Err("handle needs effect, type, scrutinee and return clause".into());
                    }
                    let kind = if head == "handle" { HandleKind::Deep } else { HandleKind::Shallow };
                    let (e, t, m) = (as_eff(&args[0])?, as_ty(&args[1])?, from_sx(&args[2])?);
                    let Sx::List(ret) = &args[3] else { return Err("expected return clause".into()) };
                    if ret.len() != 4 || as_sym(&ret[0])? != "ret" {
                        return Err("malformed return clause".into());
                    }
                    let mut clauses = BTreeMap::new();
                    for c in &args[4..] {
                        let Sx::List(c) = c else { return Err("expected an operation clause".into()) };
                        if c.len() != 6 {
                            return Err("malformed operation clause".into());
                        }
                        let name = as_sym(&c[0])?;
                        let clause = Clause {
                            x: as_sym(&c[1])?,
                            k: as_sym(&c[2])?,
                            req: as_ty(&c[3])?,
                            resp: as_ty(&c[4])?,
                            body: from_sx(&c[5])?,
                        };
                        if clauses.insert(name.clone(), clause).is_some() {
                            return Err(format!("duplicate clause {name}"));
                        }
                    }
                    let h = Handler {
                        kind,
                        ret_var: as_sym(&ret[1])?,
                        ret_ty: as_ty(&ret[2])?,
                        ret_body: from_sx(&ret[3])?,
                        clauses,
                        eff: e,
                        ty: t,
                    };
                    Ok(Term::handle(m, h))
                }
                "up" | "down" => {
                    arity(3)?;
                    let (lo, hi, m) = (as_ty(&args[0])?, as_ty(&args[1])?, b(&args[2])?);
                    Ok(if head == "up" { Term::ValUp(lo, hi, m) } else { Term::ValDown(lo, hi, m) })
                }
                "eff-up" | "eff-down" => {
                    arity(3)?;
                    let (lo, hi, m) = (as_eff(&args[0])?, as_eff(&args[1])?, b(&args[2])?);
                    Ok(if head == "eff-up" { Term::EffUp(lo, hi, m) } else { Term::EffDown(lo, hi, m) })
                }
                "++" => {
                    arity(2)?;
                    Ok(Term::Concat(b(&args[0])?, b(&args[1])?))
                }
                "==" => {
                    arity(2)?;
                    Ok(Term::StrEq(b(&args[0])?, b(&args[1])?))
                }
                "queue" => {
                    let a = as_ty(args.first().ok_or("queue needs a type")?)?;
                    Ok(Term::QueueVal(a, args[1..].iter().map(from_sx).collect::<Result<_, _>>()?))
                }
                "enqueue" => {
                    arity(2)?;
                    Ok(Term::Enqueue(b(&args[0])?, b(&args[1])?))
                }
                "case-queue" => {
                    arity(6)?;
                    Ok(Term::CaseQueue {
                        elem: as_ty(&args[0])?,
                        scrut: b(&args[1])?,
                        empty: b(&args[2])?,
                        x: as_sym(&args[3])?,
                        q: as_sym(&args[4])?,
                        cons: b(&args[5])?,
                    })
                }
                other => Err(format!("unknown form `{other}`")),
            }
        }
    }
}

/// Parser for the type notation produced by `Display` on core types.
struct TyReader<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> TyReader<'a> {
    fn ws(&mut self) {
        while self.s[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.s[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.ws();
        if self.s[self.pos..].starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), String> {
        if self.eat(tok) {
            Ok(())
        } else {
            Err(format!("expected `{tok}` at {} in `{}`", self.pos, self.s))
        }
    }

    fn ident(&mut self) -> Result<String, String> {
        self.ws();
        let rest = &self.s[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_alphanumeric() || matches!(c, '_' | '\'' | '-' | '.' | '#' | '$')))
            .unwrap_or(rest.len());
        // `-` only continues a name when followed by a name character.
        let mut end = 0;
        let bytes = rest.as_bytes();
        while end < len {
            if bytes[end] == b'-' && !(end + 1 < len && (bytes[end + 1] as char).is_alphanumeric()) {
                break;
            }
            end += 1;
        }
        if end == 0 {
            return Err(format!("expected a name at {} in `{}`", self.pos, self.s));
        }
        self.pos += end;
        Ok(rest[..end].to_string())
    }

    fn value(&mut self) -> Result<ValueType, String> {
        let dom = self.atom()?;
        if self.eat("-[") {
            let e = self.row_or_dyn("]>")?;
            let cod = self.value()?;
            return Ok(ValueType::arrow(dom, e, cod));
        }
        Ok(dom)
    }

    fn atom(&mut self) -> Result<ValueType, String> {
        if self.eat("(") {
            let t = self.value()?;
            self.expect(")")?;
            return Ok(t);
        }
        if self.eat("1") {
            return Ok(ValueType::Unit);
        }
        match self.ident()?.as_str() {
            "bool" => Ok(ValueType::Bool),
            "str" => Ok(ValueType::Str),
            "Queue" => Ok(ValueType::queue(self.atom()?)),
            other => Err(format!("unknown type `{other}`")),
        }
    }

    fn row_or_dyn(&mut self, close: &str) -> Result<EffectType, String> {
        if self.eat("?") {
            self.expect(close)?;
            return Ok(EffectType::Dyn);
        }
        let mut row = EffMap::new();
        if self.eat(close) {
            return Ok(EffectType::Concrete(row));
        }
        loop {
            let n = self.ident()?;
            self.expect(":")?;
            let req = self.value()?;
            self.expect("~>")?;
            let resp = self.value()?;
            row.insert(n, OpType::new(req, resp));
            if self.eat(close) {
                return Ok(EffectType::Concrete(row));
            }
            self.expect(",")?;
        }
    }

    fn done(&mut self) -> Result<(), String> {
        self.ws();
        if self.pos == self.s.len() {
            Ok(())
        } else {
            Err(format!("trailing input in type `{}`", self.s))
        }
    }
}

pub fn parse_value_type(s: &str) -> Result<ValueType, String> {
    let mut r = TyReader { s, pos: 0 };
    let t = r.value()?;
    r.done()?;
    Ok(t)
}

pub fn parse_effect_type(s: &str) -> Result<EffectType, String> {
    let mut r = TyReader { s, pos: 0 };
    let e = if r.eat("?") {
        EffectType::Dyn
    } else {
        r.expect("[")?;
        r.row_or_dyn("]")?
    };
    r.done()?;
    Ok(e)
}
