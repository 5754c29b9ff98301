//! Tokenizer for `.greff` sources.

use super::ast::Span;
use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Str(String),
    One,
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Dot,
    Colon,
    ColonColon,
    Semi,
    Arrow,
    Squiggle,
    EffOpen,
    EffClose,
    Equals,
    EqEq,
    PlusPlus,
    Pipe,
    Question,
    Eof,
}

impl std::fmt::Display for Tok {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Tok::Ident(s) => return write!(f, "`{s}`"),
            Tok::Str(s) => return write!(f, "{s:?}"),
            Tok::One => "1",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::Comma => ",",
            Tok::Dot => ".",
            Tok::Colon => ":",
            Tok::ColonColon => "::",
            Tok::Semi => ";",
            Tok::Arrow => "->",
            Tok::Squiggle => "~>",
            Tok::EffOpen => "-[",
            Tok::EffClose => "]>",
            Tok::Equals => "=",
            Tok::EqEq => "==",
            Tok::PlusPlus => "++",
            Tok::Pipe => "|",
            Tok::Question => "?",
            Tok::Eof => return write!(f, "end of input"),
        };
        write!(f, "`{s}`")
    }
}

fn is_name_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

pub fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let chars: Vec<(usize, char)> = src.char_indices().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    while i < chars.len() {
        let (off, c) = chars[i];
        let span = Span { offset: off, line, col };
        let adv = |n: usize, i: &mut usize, col: &mut u32| {
            *i += n;
            *col += n as u32;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '-' && at(i + 1) == Some('-') {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let two = (c, at(i + 1));
        let tok2 = match two {
            ('-', Some('>')) => Some(Tok::Arrow),
            ('-', Some('[')) => Some(Tok::EffOpen),
            (']', Some('>')) => Some(Tok::EffClose),
            ('~', Some('>')) => Some(Tok::Squiggle),
            (':', Some(':')) => Some(Tok::ColonColon),
            ('=', Some('=')) => Some(Tok::EqEq),
            ('+', Some('+')) => Some(Tok::PlusPlus),
            _ => None,
        };
        if let Some(t) = tok2 {
            out.push((t, span));
            adv(2, &mut i, &mut col);
            continue;
        }
        let tok1 = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            ':' => Some(Tok::Colon),
            ';' => Some(Tok::Semi),
            '=' => Some(Tok::Equals),
            '|' => Some(Tok::Pipe),
            '?' => Some(Tok::Question),
            _ => None,
        };
        if let Some(t) = tok1 {
            out.push((t, span));
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '1' && !at(i + 1).is_some_and(|d| d.is_ascii_digit()) {
            out.push((Tok::One, span));
            adv(1, &mut i, &mut col);
            continue;
        }
        if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match at(j) {
                    None | Some('\n') => {
                        return Err(ParseError::lexical(span, "unterminated string literal"));
                    }
                    Some('"') => break,
                    Some('\\') => {
                        let esc = match at(j + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            _ => return Err(ParseError::lexical(span, "unknown escape in string literal")),
                        };
                        s.push(esc);
                        j += 2;
                    }
                    Some(ch) => {
                        s.push(ch);
                        j += 1;
                    }
                }
            }
            out.push((Tok::Str(s), span));
            adv(j + 1 - i, &mut i, &mut col);
            continue;
        }
        if is_name_start(c) {
            let mut j = i + 1;
            loop {
                match at(j) {
                    Some(d) if is_name_char(d) => j += 1,
                    // `-` continues a name only before a letter or digit, so
                    // `sch-loop` is one name while `a->b` and `a-[` are not.
                    Some('-') if at(j + 1).is_some_and(|d| d.is_alphanumeric()) => j += 1,
                    _ => break,
                }
            }
            let s: String = chars[i..j].iter().map(|&(_, c)| c).collect();
            out.push((Tok::Ident(s), span));
            adv(j - i, &mut i, &mut col);
            continue;
        }
        return Err(ParseError::lexical(span, format!("unexpected character {c:?}")));
    }
    let end = Span { offset: src.len(), line, col };
    out.push((Tok::Eof, end));
    Ok(out)
}
