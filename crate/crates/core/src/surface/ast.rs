//! Surface syntax tree.

use std::collections::BTreeSet;

use crate::typesys::Name;

/// Source position. Spans never take part in structural equality, so a
/// re-parsed pretty-printed program compares equal to the original.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub offset: usize,
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl std::fmt::Display for Span {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SEffect {
    Dyn,
    Set(BTreeSet<Name>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SType {
    Bool,
    Unit,
    Str,
    Queue(Box<SType>),
    Arrow(Box<SType>, SEffect, Box<SType>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HandleKind {
    Deep,
    Shallow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Clause {
    pub op: Name,
    pub x: Name,
    pub k: Name,
    pub body: STerm,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Handle {
    pub kind: HandleKind,
    pub eff: SEffect,
    pub ty: SType,
    pub scrut: STerm,
    pub ret_var: Name,
    pub ret_body: STerm,
    pub clauses: Vec<Clause>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct STerm {
    pub kind: TermKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TermKind {
    Var(Name),
    True,
    False,
    Str(String),
    Unit,
    /// The annotation may be omitted where an expected arrow type is known.
    Lam(Name, Option<SType>, Box<STerm>),
    App(Box<STerm>, Box<STerm>),
    Let(Name, Box<STerm>, Box<STerm>),
    If(Box<STerm>, Box<STerm>, Box<STerm>),
    Raise(Name, Box<STerm>),
    Handle(Box<Handle>),
    AscribeType(Box<STerm>, SType),
    AscribeEff(Box<STerm>, SEffect),
    Seq(Box<STerm>, Box<STerm>),
    Concat(Box<STerm>, Box<STerm>),
    StrEq(Box<STerm>, Box<STerm>),
    /// `empty` or `empty[A]`.
    Empty(Option<SType>),
    Enqueue(Box<STerm>, Box<STerm>),
    Match { scrut: Box<STerm>, empty: Box<STerm>, x: Name, q: Name, cons: Box<STerm> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DeclKind {
    NewEffect { name: Name, req: SType, resp: SType },
    ImportEffect { module: Name, name: Name, req: SType, resp: SType },
    Define { name: Name, ty: SType, body: STerm },
    ImportValue { module: Name, source: Name, local: Name, ty: SType },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub kind: DeclKind,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Module {
    pub name: Name,
    pub decls: Vec<Decl>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MainBlock {
    pub decls: Vec<Decl>,
    pub body: STerm,
    /// Set when the program was written as a final `module Main` ending in
    /// `define main : A = M`: the body `M :: A` runs in that module's scope.
    pub within: Option<Name>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Program {
    pub modules: Vec<Module>,
    pub main: MainBlock,
}

impl STerm {
    pub fn new(kind: TermKind, span: Span) -> Self {
        STerm { kind, span }
    }

    /// Node built without a source position.
    pub fn synth(kind: TermKind) -> Self {
        STerm { kind, span: Span::default() }
    }

    /// Syntactic values, looking through ascriptions.
    pub fn is_value(&self) -> bool {
        match &self.kind {
            TermKind::Var(_)
            | TermKind::True
            | TermKind::False
            | TermKind::Str(_)
            | TermKind::Unit
            | TermKind::Lam(..)
            | TermKind::Empty(_) => true,
            TermKind::AscribeType(m, _) | TermKind::AscribeEff(m, _) => m.is_value(),
            _ => false,
        }
    }
}

impl SEffect {
    pub fn set<I: IntoIterator<Item = S>, S: Into<Name>>(names: I) -> Self {
        SEffect::Set(names.into_iter().map(Into::into).collect())
    }
}

impl SType {
    pub fn arrow(a: SType, e: SEffect, b: SType) -> Self {
        SType::Arrow(Box::new(a), e, Box::new(b))
    }

    /// The surface type with every effect annotation replaced by `?`.
    pub fn erase(&self) -> SType {
        match self {
            SType::Bool | SType::Unit | SType::Str => self.clone(),
            SType::Queue(a) => SType::Queue(Box::new(a.erase())),
            SType::Arrow(a, _, b) => SType::arrow(a.erase(), SEffect::Dyn, b.erase()),
        }
    }
}
