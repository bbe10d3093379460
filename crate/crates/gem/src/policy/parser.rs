//! Hand-rolled parser for the clause syntax.
//!
//! ```text
//! clause  := atom (":-" literal ("," literal)*)? "."
//! literal := atom | "not(" atom ")"
//! atom    := symbol "(" term ("," term)* ")"
//! term    := variable | constant
//! ```
//!
//! Variables start with an upper-case letter or `_`; constants start with a
//! lower-case letter or digit, or are quoted with single quotes. `%` starts
//! a comment that runs to end of line. Errors carry line and column.

use std::fmt;

use super::{Atom, Clause, Literal, Policy, Term};

/// A parse or validation error with a 1-based source position.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.col, self.msg)
    }
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Symbol(String),
    Variable(String),
    Quoted(String),
    LParen,
    RParen,
    Comma,
    Dot,
    Implies, // ":-"
    Eof,
}

struct SpannedTok {
    tok: Tok,
    line: usize,
    col: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer { src: src.as_bytes(), pos: 0, line: 1, col: 1 }
    }

    fn err(&self, line: usize, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError { line, col, msg: msg.into() }
    }

    fn bump(&mut self) -> Option<u8> {
        let b = *self.src.get(self.pos)?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn skip_trivia(&mut self) {
        loop {
            match self.peek() {
                Some(b) if b.is_ascii_whitespace() => {
                    self.bump();
                }
                Some(b'%') => {
                    while let Some(b) = self.peek() {
                        if b == b'\n' {
                            break;
                        }
                        self.bump();
                    }
                }
                _ => break,
            }
        }
    }

    fn next_tok(&mut self) -> Result<SpannedTok, ParseError> {
        self.skip_trivia();
        let (line, col) = (self.line, self.col);
        let spanned = |tok| SpannedTok { tok, line, col };
        let Some(b) = self.peek() else {
            return Ok(spanned(Tok::Eof));
        };
        match b {
            b'(' => {
                self.bump();
                Ok(spanned(Tok::LParen))
            }
            b')' => {
                self.bump();
                Ok(spanned(Tok::RParen))
            }
            b',' => {
                self.bump();
                Ok(spanned(Tok::Comma))
            }
            b'.' => {
                self.bump();
                Ok(spanned(Tok::Dot))
            }
            b':' => {
                self.bump();
                if self.peek() == Some(b'-') {
                    self.bump();
                    Ok(spanned(Tok::Implies))
                } else {
                    Err(self.err(line, col, "expected `:-`"))
                }
            }
            b'\'' => {
                self.bump();
                let mut s = String::new();
                loop {
                    match self.bump() {
                        Some(b'\'') => break,
                        Some(b'\n') | None => {
                            return Err(self.err(line, col, "unterminated quoted constant"))
                        }
                        Some(c) => s.push(c as char),
                    }
                }
                Ok(spanned(Tok::Quoted(s)))
            }
            b if b.is_ascii_alphanumeric() || b == b'_' => {
                let mut s = String::new();
                while let Some(c) = self.peek() {
                    if c.is_ascii_alphanumeric() || c == b'_' {
                        s.push(c as char);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let first = s.as_bytes()[0];
                if first.is_ascii_uppercase() || first == b'_' {
                    Ok(spanned(Tok::Variable(s)))
                } else {
                    Ok(spanned(Tok::Symbol(s)))
                }
            }
            other => Err(self.err(line, col, format!("unexpected character `{}`", other as char))),
        }
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    cur: SpannedTok,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Result<Self, ParseError> {
        let mut lexer = Lexer::new(src);
        let cur = lexer.next_tok()?;
        Ok(Parser { lexer, cur })
    }

    fn advance(&mut self) -> Result<SpannedTok, ParseError> {
        let next = self.lexer.next_tok()?;
        Ok(std::mem::replace(&mut self.cur, next))
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError { line: self.cur.line, col: self.cur.col, msg: msg.into() }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if self.cur.tok == tok {
            self.advance()?;
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.cur.tok.clone() {
            Tok::Variable(v) => {
                self.advance()?;
                Ok(Term::Var(v))
            }
            Tok::Symbol(s) => {
                self.advance()?;
                Ok(Term::Const(s))
            }
            Tok::Quoted(s) => {
                self.advance()?;
                Ok(Term::Const(s))
            }
            _ => Err(self.err("expected a term")),
        }
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let pred = match self.cur.tok.clone() {
            Tok::Symbol(s) => s,
            _ => return Err(self.err("expected a predicate symbol")),
        };
        self.advance()?;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.term()?];
        while self.cur.tok == Tok::Comma {
            self.advance()?;
            args.push(self.term()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(Atom { pred, args })
    }

    fn literal(&mut self) -> Result<Literal, ParseError> {
        if let Tok::Symbol(s) = &self.cur.tok {
            if s == "not" {
                self.advance()?;
                self.expect(Tok::LParen, "`(` after `not`")?;
                let atom = self.atom()?;
                self.expect(Tok::RParen, "`)` closing `not(...)`")?;
                return Ok(Literal::neg(atom));
            }
        }
        Ok(Literal::pos(self.atom()?))
    }

    fn clause(&mut self) -> Result<Clause, ParseError> {
        let head = self.atom()?;
        let mut body = Vec::new();
        if self.cur.tok == Tok::Implies {
            self.advance()?;
            body.push(self.literal()?);
            while self.cur.tok == Tok::Comma {
                self.advance()?;
                body.push(self.literal()?);
            }
        }
        self.expect(Tok::Dot, "`.` terminating the clause")?;
        Ok(Clause { head, body })
    }
}

/// Parse a single atom, requiring the whole input to be consumed.
pub fn parse_atom(src: &str) -> Result<Atom, ParseError> {
    let mut p = Parser::new(src)?;
    let a = p.atom()?;
    if p.cur.tok != Tok::Eof {
        return Err(p.err("trailing input after atom"));
    }
    Ok(a)
}

/// Parse a single clause, requiring the whole input to be consumed.
pub fn parse_clause(src: &str) -> Result<Clause, ParseError> {
    let mut p = Parser::new(src)?;
    let c = p.clause()?;
    if p.cur.tok != Tok::Eof {
        return Err(p.err("trailing input after clause"));
    }
    Ok(c)
}

/// Parse a sequence of clauses.
pub fn parse_clauses(src: &str) -> Result<Vec<Clause>, ParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while p.cur.tok != Tok::Eof {
        out.push(p.clause()?);
    }
    Ok(out)
}

/// Parse the policy of `owner`, checking that every clause head is located
/// at `owner` and that head locations are constants.
pub fn parse_policy(src: &str, owner: &str) -> Result<Policy, ParseError> {
    let mut p = Parser::new(src)?;
    let mut policy = Policy::new(owner);
    while p.cur.tok != Tok::Eof {
        let (line, col) = (p.cur.line, p.cur.col);
        let clause = p.clause()?;
        match clause.head.location() {
            Term::Const(c) if c == owner => {}
            loc => {
                return Err(ParseError {
                    line,
                    col,
                    msg: format!(
                        "clause head {} is located at `{loc}` but the policy belongs to `{owner}`",
                        clause.head
                    ),
                })
            }
        }
        policy.clauses.push(clause);
    }
    Ok(policy)
}
