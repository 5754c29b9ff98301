//! Recursive-descent parser.
//!
//! Term precedence, loosest first: binders (`lambda`, `let`, `if`, handlers,
//! `match`), `;`, `::`, `==`, `++`, application, atoms.

use std::collections::{BTreeSet, HashSet};

use super::ast::*;
use super::lexer::{lex, Tok};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "module", "where", "effect", "import", "as", "define", "main", "lambda", "let", "in", "if",
    "then", "else", "handle", "shallow-handle", "at", "with", "ret", "match", "empty", "dequeue",
    "raise", "enqueue", "true", "false", "bool", "str", "Queue",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let prog = p.program()?;
    Ok(prog)
}

pub fn parse_term(src: &str) -> Result<STerm, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let t = p.term()?;
    p.expect(&Tok::Eof)?;
    Ok(t)
}

pub fn parse_type(src: &str) -> Result<SType, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let t = p.ty()?;
    p.expect(&Tok::Eof)?;
    Ok(t)
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        Err(ParseError::syntax(self.span(), format!("expected {wanted}, found {}", self.peek())))
    }

    fn expect(&mut self, t: &Tok) -> PResult<()> {
        if self.peek() == t {
            self.bump();
            Ok(())
        } else {
            self.unexpected(&t.to_string())
        }
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.unexpected(&format!("`{kw}`"))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) if !is_keyword(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.unexpected("a name"),
        }
    }

    // ---- programs ----

    fn program(&mut self) -> PResult<Program> {
        let mut modules: Vec<Module> = Vec::new();
        let mut seen = HashSet::new();
        while self.at_kw("module") {
            let span = self.span();
            let m = self.module()?;
            if !seen.insert(m.name.clone()) {
                return Err(ParseError::duplicate_module(span, &m.name));
            }
            modules.push(m);
        }
        let main = if self.at_kw("main") {
            self.bump();
            self.expect(&Tok::LBrace)?;
            let mut decls = Vec::new();
            while self.at_decl_start() {
                decls.push(self.decl()?);
                self.eat(&Tok::Semi);
            }
            let body = self.term()?;
            self.expect(&Tok::RBrace)?;
            MainBlock { decls, body, within: None }
        } else {
            match desugar_main_module(&mut modules) {
                Some(main) => main,
                None => return self.unexpected("`module` or `main`"),
            }
        };
        self.expect(&Tok::Eof)?;
        let all = modules.iter().flat_map(|m| m.decls.iter()).chain(main.decls.iter());
        for d in all {
            if let DeclKind::Define { body, .. } = &d.kind {
                if !body.is_value() {
                    return Err(ParseError::syntax(body.span, "the body of a definition must be a value"));
                }
            }
        }
        Ok(Program { modules, main })
    }

    fn at_decl_start(&self) -> bool {
        self.at_kw("effect") || self.at_kw("import") || self.at_kw("define")
    }

    fn module(&mut self) -> PResult<Module> {
        let span = self.span();
        self.expect_kw("module")?;
        let name = self.ident()?;
        self.expect_kw("where")?;
        let mut decls = Vec::new();
        while self.at_decl_start() {
            decls.push(self.decl()?);
            self.eat(&Tok::Semi);
        }
        Ok(Module { name, decls, span })
    }

    fn decl(&mut self) -> PResult<Decl> {
        let span = self.span();
        let kind = if self.eat_kw("effect") {
            let name = self.ident()?;
            self.expect(&Tok::Colon)?;
            let req = self.ty()?;
            self.expect(&Tok::Squiggle)?;
            let resp = self.ty()?;
            DeclKind::NewEffect { name, req, resp }
        } else if self.eat_kw("import") {
            let module = self.ident()?;
            self.expect(&Tok::Dot)?;
            let source = self.ident()?;
            let alias = if self.eat_kw("as") { Some(self.ident()?) } else { None };
            self.expect(&Tok::Colon)?;
            let ty = self.ty()?;
            if self.peek() == &Tok::Squiggle {
                if alias.is_some() {
                    return Err(ParseError::syntax(span, "effects cannot be renamed on import"));
                }
                self.bump();
                let resp = self.ty()?;
                DeclKind::ImportEffect { module, name: source, req: ty, resp }
            } else {
                let local = alias.unwrap_or_else(|| source.clone());
                DeclKind::ImportValue { module, source, local, ty }
            }
        } else {
            self.expect_kw("define")?;
            let name = if self.eat_kw("main") { "main".to_string() } else { self.ident()? };
            self.expect(&Tok::Colon)?;
            let ty = self.ty()?;
            self.expect(&Tok::Equals)?;
            let body = self.define_body()?;
            DeclKind::Define { name, ty, body }
        };
        Ok(Decl { kind, span })
    }

    /// A definition body stops before a top-level `;` (the declaration
    /// separator) unless it starts with a binder that scopes over it.
    fn define_body(&mut self) -> PResult<STerm> {
        if self.at_binder() {
            self.term()
        } else {
            self.asc()
        }
    }

    // ---- types ----

    pub fn ty(&mut self) -> PResult<SType> {
        let dom = self.ty_atom()?;
        if self.eat(&Tok::EffOpen) {
            let eff = self.eff_body(&Tok::EffClose)?;
            let cod = self.ty()?;
            Ok(SType::arrow(dom, eff, cod))
        } else {
            Ok(dom)
        }
    }

    fn ty_atom(&mut self) -> PResult<SType> {
        match self.peek().clone() {
            Tok::One => {
                self.bump();
                Ok(SType::Unit)
            }
            Tok::LParen => {
                self.bump();
                let t = self.ty()?;
                self.expect(&Tok::RParen)?;
                Ok(t)
            }
            Tok::Ident(s) if s == "bool" => {
                self.bump();
                Ok(SType::Bool)
            }
            Tok::Ident(s) if s == "str" => {
                self.bump();
                Ok(SType::Str)
            }
            Tok::Ident(s) if s == "Queue" => {
                self.bump();
                Ok(SType::Queue(Box::new(self.ty_atom()?)))
            }
            _ => self.unexpected("a type"),
        }
    }

    /// Effect contents after the opening bracket: `?` or a comma-separated
    /// (possibly empty) list of names, then `close`.
    fn eff_body(&mut self, close: &Tok) -> PResult<SEffect> {
        if self.eat(&Tok::Question) {
            self.expect(close)?;
            return Ok(SEffect::Dyn);
        }
        let mut names = BTreeSet::new();
        if !self.eat(close) {
            loop {
                let span = self.span();
                let n = self.ident()?;
                if !names.insert(n.clone()) {
                    return Err(ParseError::syntax(span, format!("operation `{n}` listed twice")));
                }
                if self.eat(close) {
                    break;
                }
                self.expect(&Tok::Comma)?;
            }
        }
        Ok(SEffect::Set(names))
    }

    // ---- terms ----

    fn at_binder(&self) -> bool {
        ["lambda", "let", "if", "handle", "shallow-handle", "match"].iter().any(|k| self.at_kw(k))
    }

    pub fn term(&mut self) -> PResult<STerm> {
        let span = self.span();
        if self.eat_kw("lambda") {
            let x = self.binder()?;
            let ann = if self.eat(&Tok::Colon) { Some(self.ty()?) } else { None };
            self.expect(&Tok::Dot)?;
            let body = self.term()?;
            return Ok(STerm::new(TermKind::Lam(x, ann, Box::new(body)), span));
        }
        if self.eat_kw("let") {
            let x = self.binder()?;
            self.expect(&Tok::Equals)?;
            let m = self.term()?;
            self.expect_kw("in")?;
            let n = self.term()?;
            return Ok(STerm::new(TermKind::Let(x, Box::new(m), Box::new(n)), span));
        }
        if self.eat_kw("if") {
            let c = self.term()?;
            self.expect_kw("then")?;
            let t = self.term()?;
            self.expect_kw("else")?;
            let e = self.term()?;
            return Ok(STerm::new(TermKind::If(Box::new(c), Box::new(t), Box::new(e)), span));
        }
        if self.at_kw("handle") || self.at_kw("shallow-handle") {
            return self.handle();
        }
        if self.eat_kw("match") {
            let scrut = self.term()?;
            self.expect_kw("with")?;
            self.eat(&Tok::Pipe);
            self.expect_kw("empty")?;
            self.expect(&Tok::Arrow)?;
            let empty = self.term()?;
            self.expect(&Tok::Pipe)?;
            self.expect_kw("dequeue")?;
            self.expect(&Tok::LParen)?;
            let x = self.binder()?;
            self.expect(&Tok::Comma)?;
            let q = self.binder()?;
            self.expect(&Tok::RParen)?;
            self.expect(&Tok::Arrow)?;
            let cons = self.term()?;
            let kind = TermKind::Match {
                scrut: Box::new(scrut),
                empty: Box::new(empty),
                x,
                q,
                cons: Box::new(cons),
            };
            return Ok(STerm::new(kind, span));
        }
        let lhs = self.asc()?;
        if self.eat(&Tok::Semi) {
            let rhs = self.term()?;
            return Ok(STerm::new(TermKind::Seq(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn binder(&mut self) -> PResult<String> {
        self.ident()
    }

    fn handle(&mut self) -> PResult<STerm> {
        let span = self.span();
        let kind = if self.eat_kw("handle") {
            HandleKind::Deep
        } else {
            self.expect_kw("shallow-handle")?;
            HandleKind::Shallow
        };
        let scrut = self.term()?;
        self.expect_kw("at")?;
        self.expect(&Tok::LBracket)?;
        let eff = self.eff_body(&Tok::RBracket)?;
        let ty = self.ty()?;
        self.expect_kw("with")?;
        self.eat(&Tok::Pipe);
        let mut ret: Option<(String, STerm)> = None;
        let mut clauses: Vec<Clause> = Vec::new();
        loop {
            let cspan = self.span();
            if self.eat_kw("ret") {
                if ret.is_some() {
                    return Err(ParseError::duplicate_clause(cspan, "ret"));
                }
                let x = self.binder()?;
                self.expect(&Tok::Arrow)?;
                ret = Some((x, self.term()?));
            } else {
                let op = self.ident()?;
                if clauses.iter().any(|c| c.op == op) {
                    return Err(ParseError::duplicate_clause(cspan, &op));
                }
                self.expect(&Tok::LParen)?;
                let x = self.binder()?;
                self.expect(&Tok::Comma)?;
                let k = self.binder()?;
                self.expect(&Tok::RParen)?;
                self.expect(&Tok::Arrow)?;
                let body = self.term()?;
                clauses.push(Clause { op, x, k, body, span: cspan });
            }
            if !self.eat(&Tok::Pipe) {
                break;
            }
        }
        let Some((ret_var, ret_body)) = ret else {
            return Err(ParseError::syntax(span, "handler has no `ret` clause"));
        };
        let h = Handle { kind, eff, ty, scrut, ret_var, ret_body, clauses };
        Ok(STerm::new(TermKind::Handle(Box::new(h)), span))
    }

    fn asc(&mut self) -> PResult<STerm> {
        let span = self.span();
        let mut m = self.cmp()?;
        while self.eat(&Tok::ColonColon) {
            m = if self.eat(&Tok::LBracket) {
                let e = self.eff_body(&Tok::RBracket)?;
                STerm::new(TermKind::AscribeEff(Box::new(m), e), span)
            } else {
                let t = self.ty()?;
                STerm::new(TermKind::AscribeType(Box::new(m), t), span)
            };
        }
        Ok(m)
    }

    fn cmp(&mut self) -> PResult<STerm> {
        let span = self.span();
        let lhs = self.cat()?;
        if self.eat(&Tok::EqEq) {
            let rhs = self.cat()?;
            return Ok(STerm::new(TermKind::StrEq(Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn cat(&mut self) -> PResult<STerm> {
        let span = self.span();
        let mut m = self.app()?;
        while self.eat(&Tok::PlusPlus) {
            let rhs = self.app()?;
            m = STerm::new(TermKind::Concat(Box::new(m), Box::new(rhs)), span);
        }
        Ok(m)
    }

    fn at_atom_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(s) => !is_keyword(s) || matches!(s.as_str(), "true" | "false" | "empty"),
            Tok::Str(_) | Tok::LParen => true,
            _ => false,
        }
    }

    fn app(&mut self) -> PResult<STerm> {
        let span = self.span();
        let mut m = if self.eat_kw("raise") {
            let op = self.ident()?;
            let arg = self.atom()?;
            STerm::new(TermKind::Raise(op, Box::new(arg)), span)
        } else if self.eat_kw("enqueue") {
            let q = self.atom()?;
            let v = self.atom()?;
            STerm::new(TermKind::Enqueue(Box::new(q), Box::new(v)), span)
        } else {
            self.atom()?
        };
        while self.at_atom_start() {
            let arg = self.atom()?;
            m = STerm::new(TermKind::App(Box::new(m), Box::new(arg)), span);
        }
        Ok(m)
    }

    fn atom(&mut self) -> PResult<STerm> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                TermKind::Str(s)
            }
            Tok::LParen => {
                self.bump();
                if self.eat(&Tok::RParen) {
                    TermKind::Unit
                } else {
                    let t = self.term()?;
                    self.expect(&Tok::RParen)?;
                    return Ok(t);
                }
            }
            Tok::Ident(s) if s == "true" => {
                self.bump();
                TermKind::True
            }
            Tok::Ident(s) if s == "false" => {
                self.bump();
                TermKind::False
            }
            Tok::Ident(s) if s == "empty" => {
                self.bump();
                if self.peek() == &Tok::LBracket && self.peek_at(1) != &Tok::RBracket {
                    self.bump();
                    let t = self.ty()?;
                    self.expect(&Tok::RBracket)?;
                    TermKind::Empty(Some(t))
                } else {
                    TermKind::Empty(None)
                }
            }
            Tok::Ident(s) if !is_keyword(&s) => {
                self.bump();
                TermKind::Var(s)
            }
            _ => return self.unexpected("a term"),
        };
        Ok(STerm::new(kind, span))
    }
}

/// `module Main where ... define main : A = M` becomes the main block
/// `{ ...; M :: A }` when no explicit block is present.
fn desugar_main_module(modules: &mut [Module]) -> Option<MainBlock> {
    let last = modules.last()?;
    if last.name != "Main" {
        return None;
    }
    let is_main_def = |d: &Decl| matches!(&d.kind, DeclKind::Define { name, .. } if name == "main");
    if !last.decls.last().is_some_and(is_main_def) {
        return None;
    }
    let m = modules.last_mut()?;
    let Some(Decl { kind: DeclKind::Define { ty, body, .. }, span }) = m.decls.pop() else {
        unreachable!()
    };
    let body = STerm::new(TermKind::AscribeType(Box::new(body), ty), span);
    Some(MainBlock { decls: vec![], body, within: Some(m.name.clone()) })
}
