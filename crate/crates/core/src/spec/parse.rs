//! Hand-written lexer and recursive-descent parser.
//!
//! ```text
//! spec   := seq_or
//! seq_or := seq ("or" seq)*
//! seq    := ens (";" ens)*
//! ens    := atom ("ensuring" pred)*
//! atom   := "achieve" pred | "(" spec ")"
//! pred   := conj ("|" conj)*
//! conj   := lit ("&" lit)*
//! lit    := "!"? IDENT | "(" pred ")"
//! ```
//!
//! All binary operators associate to the left. `#` starts a line comment.

use std::fmt;

use super::{AtomLiteral, Predicate, SpecAst};

const KEYWORDS: [&str; 3] = ["achieve", "ensuring", "or"];

pub(super) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    /// Rendering of the offending token (`end of input` at EOF).
    pub found: String,
    pub expected: Vec<String>,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "syntax error at {}:{}: found {}, expected one of: {}",
            self.line,
            self.column,
            self.found,
            self.expected.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Achieve,
    Ensuring,
    Or,
    Semi,
    Amp,
    Pipe,
    Bang,
    LParen,
    RParen,
    Ident(String),
    Eof,
}

impl Tok {
    fn render(&self) -> String {
        match self {
            Tok::Achieve => "`achieve`".into(),
            Tok::Ensuring => "`ensuring`".into(),
            Tok::Or => "`or`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Amp => "`&`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, SyntaxError> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1usize, 1usize);
    while let Some(&c) = chars.peek() {
        let (l, col) = (line, column);
        let simple = match c {
            ';' => Some(Tok::Semi),
            '&' => Some(Tok::Amp),
            '|' => Some(Tok::Pipe),
            '!' => Some(Tok::Bang),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = simple {
            chars.next();
            column += 1;
            out.push(Spanned { tok, line: l, column: col });
            continue;
        }
        if c == '\n' {
            chars.next();
            line += 1;
            column = 1;
        } else if c.is_whitespace() {
            chars.next();
            column += 1;
        } else if c == '#' {
            while let Some(&c) = chars.peek() {
                if c == '\n' {
                    break;
                }
                chars.next();
                column += 1;
            }
        } else if c.is_ascii_alphabetic() || c == '_' {
            let mut word = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    word.push(c);
                    chars.next();
                    column += 1;
                } else {
                    break;
                }
            }
            let tok = match word.as_str() {
                "achieve" => Tok::Achieve,
                "ensuring" => Tok::Ensuring,
                "or" => Tok::Or,
                _ => Tok::Ident(word),
            };
            out.push(Spanned { tok, line: l, column: col });
        } else {
            return Err(SyntaxError {
                line: l,
                column: col,
                found: format!("character `{c}`"),
                expected: vec!["a token".into()],
            });
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, column });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        let at = &self.toks[self.pos];
        SyntaxError {
            line: at.line,
            column: at.column,
            found: at.tok.render(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> Result<(), SyntaxError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[name]))
        }
    }

    fn spec(&mut self) -> Result<SpecAst, SyntaxError> {
        let mut lhs = self.seq()?;
        while *self.peek() == Tok::Or {
            self.bump();
            let rhs = self.seq()?;
            lhs = SpecAst::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn seq(&mut self) -> Result<SpecAst, SyntaxError> {
        let mut lhs = self.ens()?;
        while *self.peek() == Tok::Semi {
            self.bump();
            let rhs = self.ens()?;
            lhs = SpecAst::Seq(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn ens(&mut self) -> Result<SpecAst, SyntaxError> {
        let mut lhs = self.atom()?;
        while *self.peek() == Tok::Ensuring {
            self.bump();
            let b = self.pred()?;
            lhs = SpecAst::Ensuring(Box::new(lhs), b);
        }
        Ok(lhs)
    }

    fn atom(&mut self) -> Result<SpecAst, SyntaxError> {
        match self.peek() {
            Tok::Achieve => {
                self.bump();
                Ok(SpecAst::Achieve(self.pred()?))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.spec()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.error(&["`achieve`", "`(`"])),
        }
    }

    fn pred(&mut self) -> Result<Predicate, SyntaxError> {
        let mut lhs = self.conj()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.conj()?;
            lhs = Predicate::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn conj(&mut self) -> Result<Predicate, SyntaxError> {
        let mut lhs = self.lit()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.lit()?;
            lhs = Predicate::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn lit(&mut self) -> Result<Predicate, SyntaxError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                match self.peek().clone() {
                    Tok::Ident(name) => {
                        self.bump();
                        Ok(Predicate::Literal(AtomLiteral { name, negated: true }))
                    }
                    _ => Err(self.error(&["identifier"])),
                }
            }
            Tok::Ident(name) => {
                self.bump();
                Ok(Predicate::Literal(AtomLiteral { name, negated: false }))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.pred()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            _ => Err(self.error(&["`!`", "`(`", "identifier"])),
        }
    }

    fn finish(&self) -> Result<(), SyntaxError> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.error(&["end of input"]))
        }
    }
}

pub fn parse_spec(text: &str) -> Result<SpecAst, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let spec = p.spec()?;
    p.finish()?;
    Ok(spec)
}

/// Parses a bare predicate such as `!l & (k1 | k2)`.
pub fn parse_predicate(text: &str) -> Result<Predicate, SyntaxError> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let pred = p.pred()?;
    p.finish()?;
    Ok(pred)
}
