//! Surface language: tokens, tree, parser and printer.

pub mod ast;
mod lexer;
mod parser;
mod pretty;

pub use ast::*;
pub use parser::{is_keyword, parse_program, parse_term, parse_type};
pub use pretty::{pretty_effect, pretty_program, pretty_term, pretty_type, quote};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
    DuplicateModule,
    DuplicateClause,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind_str}: {msg}", kind_str = self.kind_str())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub msg: String,
    pub line: u32,
    pub col: u32,
}

impl ParseError {
    fn new(kind: ParseErrorKind, at: Span, msg: impl Into<String>) -> Self {
        ParseError { kind, msg: msg.into(), line: at.line, col: at.col }
    }

    pub(crate) fn lexical(at: Span, msg: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Lexical, at, msg)
    }

    pub(crate) fn syntax(at: Span, msg: impl Into<String>) -> Self {
        Self::new(ParseErrorKind::Syntax, at, msg)
    }

    pub(crate) fn duplicate_module(at: Span, name: &str) -> Self {
        Self::new(ParseErrorKind::DuplicateModule, at, format!("module `{name}` is defined twice"))
    }

    pub(crate) fn duplicate_clause(at: Span, name: &str) -> Self {
        Self::new(ParseErrorKind::DuplicateClause, at, format!("clause `{name}` appears twice"))
    }

    fn kind_str(&self) -> &'static str {
        match self.kind {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::DuplicateModule => "duplicate module",
            ParseErrorKind::DuplicateClause => "duplicate clause",
        }
    }
}
