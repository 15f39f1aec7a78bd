//! Recursive-descent parser for the formula syntax.
//!
//! Precedence, loosest to tightest: `<->`, `->`, `|`, `&`, `~`. The two
//! arrows are right-associative, `&` and `|` left-associative. Variables are
//! single uppercase letters.

use thiserror::Error;

use super::Formula;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty formula")]
    Empty,
    #[error("unexpected character `{found}` at byte {offset}")]
    UnexpectedChar { found: char, offset: usize },
    #[error("unexpected end of input, expected {expected}")]
    UnexpectedEnd { expected: &'static str },
    #[error("expected {expected} at byte {offset}, found `{found}`")]
    Unexpected {
        expected: &'static str,
        found: String,
        offset: usize,
    },
    #[error("trailing input at byte {offset}")]
    TrailingInput { offset: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Token {
    Var(char),
    Not,
    And,
    Or,
    Imp,
    Iff,
    LParen,
    RParen,
}

impl Token {
    fn describe(self) -> String {
        match self {
            Token::Var(v) => v.to_string(),
            Token::Not => "~".into(),
            Token::And => "&".into(),
            Token::Or => "|".into(),
            Token::Imp => "->".into(),
            Token::Iff => "<->".into(),
            Token::LParen => "(".into(),
            Token::RParen => ")".into(),
        }
    }
}

fn tokenize(input: &str) -> Result<Vec<(Token, usize)>, ParseError> {
    let mut tokens = Vec::new();
    let bytes = input.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => i += 1,
            b'A'..=b'Z' => {
                tokens.push((Token::Var(b as char), i));
                i += 1;
            }
            b'~' => {
                tokens.push((Token::Not, i));
                i += 1;
            }
            b'&' => {
                tokens.push((Token::And, i));
                i += 1;
            }
            b'|' => {
                tokens.push((Token::Or, i));
                i += 1;
            }
            b'(' => {
                tokens.push((Token::LParen, i));
                i += 1;
            }
            b')' => {
                tokens.push((Token::RParen, i));
                i += 1;
            }
            b'-' => {
                if bytes.get(i + 1) == Some(&b'>') {
                    tokens.push((Token::Imp, i));
                    i += 2;
                } else {
                    return Err(ParseError::UnexpectedChar {
                        found: '-',
                        offset: i,
                    });
                }
            }
            b'<' => {
                if bytes.get(i + 1) == Some(&b'-') && bytes.get(i + 2) == Some(&b'>') {
                    tokens.push((Token::Iff, i));
                    i += 3;
                } else {
                    return Err(ParseError::UnexpectedChar {
                        found: '<',
                        offset: i,
                    });
                }
            }
            _ => {
                // Report the full char, not the raw byte, for non-ASCII input.
                let found = input[i..].chars().next().unwrap_or('?');
                return Err(ParseError::UnexpectedChar { found, offset: i });
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(Token, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).map(|(t, _)| *t)
    }

    fn bump(&mut self) -> Option<(Token, usize)> {
        let t = self.tokens.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn expect(&mut self, want: Token, expected: &'static str) -> Result<(), ParseError> {
        match self.bump() {
            Some((t, _)) if t == want => Ok(()),
            Some((t, offset)) => Err(ParseError::Unexpected {
                expected,
                found: t.describe(),
                offset,
            }),
            None => Err(ParseError::UnexpectedEnd { expected }),
        }
    }

    // iff := imp ('<->' iff)?
    fn iff(&mut self) -> Result<Formula, ParseError> {
        let left = self.imp()?;
        if self.peek() == Some(Token::Iff) {
            self.bump();
            let right = self.iff()?;
            Ok(Formula::iff(left, right))
        } else {
            Ok(left)
        }
    }

    // imp := or ('->' imp)?
    fn imp(&mut self) -> Result<Formula, ParseError> {
        let left = self.or()?;
        if self.peek() == Some(Token::Imp) {
            self.bump();
            let right = self.imp()?;
            Ok(Formula::imp(left, right))
        } else {
            Ok(left)
        }
    }

    // or := and ('|' and)*
    fn or(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.and()?;
        while self.peek() == Some(Token::Or) {
            self.bump();
            let right = self.and()?;
            acc = Formula::or(acc, right);
        }
        Ok(acc)
    }

    // and := unary ('&' unary)*
    fn and(&mut self) -> Result<Formula, ParseError> {
        let mut acc = self.unary()?;
        while self.peek() == Some(Token::And) {
            self.bump();
            let right = self.unary()?;
            acc = Formula::and(acc, right);
        }
        Ok(acc)
    }

    // unary := '~' unary | atom
    fn unary(&mut self) -> Result<Formula, ParseError> {
        if self.peek() == Some(Token::Not) {
            self.bump();
            let inner = self.unary()?;
            Ok(Formula::not(inner))
        } else {
            self.atom()
        }
    }

    // atom := VAR | '(' iff ')'
    fn atom(&mut self) -> Result<Formula, ParseError> {
        match self.bump() {
            Some((Token::Var(v), _)) => Ok(Formula::var(v)),
            Some((Token::LParen, _)) => {
                let inner = self.iff()?;
                self.expect(Token::RParen, "`)`")?;
                Ok(inner)
            }
            Some((t, offset)) => Err(ParseError::Unexpected {
                expected: "a variable, `~`, or `(`",
                found: t.describe(),
                offset,
            }),
            None => Err(ParseError::UnexpectedEnd {
                expected: "a variable, `~`, or `(`",
            }),
        }
    }
}

/// Parses `input` into a [`Formula`].
pub fn parse_formula(input: &str) -> Result<Formula, ParseError> {
    let tokens = tokenize(input)?;
    if tokens.is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser { tokens, pos: 0 };
    let formula = parser.iff()?;
    if let Some((_, offset)) = parser.tokens.get(parser.pos) {
        return Err(ParseError::TrailingInput { offset: *offset });
    }
    Ok(formula)
}
