//! Pretty-printer whose output re-parses to an equal tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_type(t: &SType) -> String {
    let mut s = String::new();
    ty(&mut s, t);
    s
}

pub fn pretty_effect(e: &SEffect) -> String {
    match e {
        SEffect::Dyn => "?".into(),
        SEffect::Set(ns) => ns.iter().cloned().collect::<Vec<_>>().join(","),
    }
}

fn ty(out: &mut String, t: &SType) {
    match t {
        SType::Bool => out.push_str("bool"),
        SType::Unit => out.push('1'),
        SType::Str => out.push_str("str"),
        SType::Queue(a) => {
            out.push_str("Queue ");
            ty_atom(out, a);
        }
        SType::Arrow(a, e, b) => {
            match **a {
                SType::Arrow(..) => {
                    out.push('(');
                    ty(out, a);
                    out.push(')');
                }
                _ => ty(out, a),
            }
            let _ = write!(out, " -[{}]> ", pretty_effect(e));
            ty(out, b);
        }
    }
}

fn ty_atom(out: &mut String, t: &SType) {
    if matches!(t, SType::Queue(_) | SType::Arrow(..)) {
        out.push('(');
        ty(out, t);
        out.push(')');
    } else {
        ty(out, t);
    }
}

pub fn quote(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

// Precedence levels, loosest first.
const BINDER: u8 = 0;
const ASC: u8 = 1;
const CMP: u8 = 2;
const CAT: u8 = 3;
const APP: u8 = 4;
const ATOM: u8 = 5;

fn prec(t: &STerm) -> u8 {
    match &t.kind {
        TermKind::Lam(..)
        | TermKind::Let(..)
        | TermKind::If(..)
        | TermKind::Handle(_)
        | TermKind::Match { .. }
        | TermKind::Seq(..) => BINDER,
        TermKind::AscribeType(..) | TermKind::AscribeEff(..) => ASC,
        TermKind::StrEq(..) => CMP,
        TermKind::Concat(..) => CAT,
        TermKind::App(..) | TermKind::Raise(..) | TermKind::Enqueue(..) => APP,
        _ => ATOM,
    }
}

pub fn pretty_term(t: &STerm) -> String {
    let mut p = Printer { out: String::new(), indent: 0 };
    p.term(t, BINDER);
    p.out
}

struct Printer {
    out: String,
    indent: usize,
}

impl Printer {
    fn nl(&mut self) {
        self.out.push('\n');
        for _ in 0..self.indent {
            self.out.push_str("  ");
        }
    }

    fn term(&mut self, t: &STerm, min: u8) {
        if prec(t) < min {
            self.out.push('(');
            self.term(t, BINDER);
            self.out.push(')');
            return;
        }
        match &t.kind {
            TermKind::Var(x) => self.out.push_str(x),
            TermKind::True => self.out.push_str("true"),
            TermKind::False => self.out.push_str("false"),
            TermKind::Unit => self.out.push_str("()"),
            TermKind::Str(s) => self.out.push_str(&quote(s)),
            TermKind::Empty(None) => self.out.push_str("empty"),
            TermKind::Empty(Some(a)) => {
                self.out.push_str("empty[");
                ty(&mut self.out, a);
                self.out.push(']');
            }
            TermKind::Lam(x, ann, body) => {
                self.out.push_str("lambda ");
                self.out.push_str(x);
                if let Some(a) = ann {
                    self.out.push_str(" : ");
                    ty(&mut self.out, a);
                }
                self.out.push_str(". ");
                self.term(body, BINDER);
            }
            TermKind::Let(x, m, n) => {
                let _ = write!(self.out, "let {x} = ");
                self.term(m, BINDER);
                self.out.push_str(" in");
                self.nl();
                self.term(n, BINDER);
            }
            TermKind::If(c, a, b) => {
                self.out.push_str("if ");
                self.term(c, BINDER);
                self.out.push_str(" then ");
                self.term(a, BINDER);
                self.out.push_str(" else ");
                self.term(b, BINDER);
            }
            TermKind::Seq(a, b) => {
                self.term(a, ASC);
                self.out.push(';');
                self.nl();
                self.term(b, BINDER);
            }
            TermKind::AscribeType(m, a) => {
                self.term(m, ASC);
                self.out.push_str(" :: ");
                ty(&mut self.out, a);
            }
            TermKind::AscribeEff(m, e) => {
                self.term(m, ASC);
                let _ = write!(self.out, " :: [{}]", pretty_effect(e));
            }
            TermKind::StrEq(a, b) => {
                self.term(a, CAT);
                self.out.push_str(" == ");
                self.term(b, CAT);
            }
            TermKind::Concat(a, b) => {
                self.term(a, CAT);
                self.out.push_str(" ++ ");
                self.term(b, APP);
            }
            TermKind::App(f, a) => {
                self.term(f, APP);
                self.out.push(' ');
                self.term(a, ATOM);
            }
            TermKind::Raise(op, a) => {
                let _ = write!(self.out, "raise {op} ");
                self.term(a, ATOM);
            }
            TermKind::Enqueue(q, v) => {
                self.out.push_str("enqueue ");
                self.term(q, ATOM);
                self.out.push(' ');
                self.term(v, ATOM);
            }
            TermKind::Match { scrut, empty, x, q, cons } => {
                self.out.push_str("match ");
                self.term(scrut, BINDER);
                self.out.push_str(" with");
                self.indent += 1;
                self.nl();
                self.out.push_str("| empty -> ");
                self.term(empty, ASC);
                self.nl();
                let _ = write!(self.out, "| dequeue({x}, {q}) -> ");
                self.term(cons, ASC);
                self.indent -= 1;
            }
            TermKind::Handle(h) => {
                let kw = match h.kind {
                    HandleKind::Deep => "handle",
                    HandleKind::Shallow => "shallow-handle",
                };
                let _ = write!(self.out, "{kw} ");
                self.term(&h.scrut, BINDER);
                let _ = write!(self.out, " at [{}] ", pretty_effect(&h.eff));
                ty(&mut self.out, &h.ty);
                self.out.push_str(" with");
                self.indent += 1;
                self.nl();
                let _ = write!(self.out, "| ret {} -> ", h.ret_var);
                self.term(&h.ret_body, ASC);
                for c in &h.clauses {
                    self.nl();
                    let _ = write!(self.out, "| {}({}, {}) -> ", c.op, c.x, c.k);
                    self.term(&c.body, ASC);
                }
                self.indent -= 1;
            }
        }
    }

    fn decl(&mut self, d: &Decl, in_block: bool) {
        match &d.kind {
            DeclKind::NewEffect { name, req, resp } => {
                let _ = write!(self.out, "effect {name} : {} ~> {}", pretty_type(req), pretty_type(resp));
            }
            DeclKind::ImportEffect { module, name, req, resp } => {
                let _ = write!(
                    self.out,
                    "import {module}.{name} : {} ~> {}",
                    pretty_type(req),
                    pretty_type(resp)
                );
            }
            DeclKind::ImportValue { module, source, local, ty } => {
                let _ = write!(self.out, "import {module}.{source}");
                if source != local {
                    let _ = write!(self.out, " as {local}");
                }
                let _ = write!(self.out, " : {}", pretty_type(ty));
            }
            DeclKind::Define { name, ty, body } => {
                let _ = write!(self.out, "define {name} : {} =", pretty_type(ty));
                self.indent += 1;
                self.nl();
                // Inside a block the `;` separator would be swallowed by a
                // binder body, so those are parenthesized.
                self.term(body, if in_block { ASC } else { BINDER });
                self.indent -= 1;
            }
        }
        if in_block {
            self.out.push(';');
        }
    }
}

pub fn pretty_program(p: &Program) -> String {
    let mut pr = Printer { out: String::new(), indent: 0 };
    let sugared = match (&p.main.within, &p.main.body.kind, p.modules.last()) {
        (Some(w), TermKind::AscribeType(body, ty), Some(last)) if *w == last.name && p.main.decls.is_empty() => {
            Some((body, ty))
        }
        _ => None,
    };
    for (i, m) in p.modules.iter().enumerate() {
        let _ = write!(pr.out, "module {} where", m.name);
        pr.indent = 1;
        for d in &m.decls {
            pr.nl();
            pr.decl(d, false);
        }
        if let (Some((body, ty)), true) = (&sugared, i + 1 == p.modules.len()) {
            pr.nl();
            let _ = write!(pr.out, "define main : {} =", pretty_type(ty));
            pr.indent += 1;
            pr.nl();
            pr.term(body, ASC);
            pr.indent -= 1;
            pr.out.push('\n');
            return pr.out;
        }
        pr.indent = 0;
        pr.out.push_str("\n\n");
    }
    pr.out.push_str("main {");
    pr.indent = 1;
    for d in &p.main.decls {
        pr.nl();
        pr.decl(d, true);
    }
    pr.nl();
    pr.term(&p.main.body, BINDER);
    pr.indent = 0;
    pr.out.push_str("\n}\n");
    pr.out
}
