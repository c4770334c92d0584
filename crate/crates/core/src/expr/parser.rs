//! Recursive-descent parser for the expression language.
//!
//! Grammar (binary operators are left-associative, `^` binds tighter than
//! unary minus):
//!
//! ```text
//! expr    := term  (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := factor ('^' factor)*
//! factor  := '-' factor | atom
//! atom    := number | variable | name '(' expr (',' expr)? ')' | '(' expr ')'
//! ```

use crate::error::{Error, Result};

use super::{BinaryOp, Expression, UnaryOp, Var};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

struct Token {
    tok: Tok,
    pos: usize,
}

fn err_at(pos: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        position: pos,
        message: message.into(),
    }
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let pos = i;
        match b {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
            }
            b'+' => {
                toks.push(Token { tok: Tok::Plus, pos });
                i += 1;
            }
            b'-' => {
                toks.push(Token { tok: Tok::Minus, pos });
                i += 1;
            }
            b'*' => {
                toks.push(Token { tok: Tok::Star, pos });
                i += 1;
            }
            b'/' => {
                toks.push(Token { tok: Tok::Slash, pos });
                i += 1;
            }
            b'^' => {
                toks.push(Token { tok: Tok::Caret, pos });
                i += 1;
            }
            b'(' => {
                toks.push(Token { tok: Tok::LParen, pos });
                i += 1;
            }
            b')' => {
                toks.push(Token { tok: Tok::RParen, pos });
                i += 1;
            }
            b',' => {
                toks.push(Token { tok: Tok::Comma, pos });
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                if j < bytes.len() && bytes[j] == b'.' {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut e = j + 1;
                    if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                        e += 1;
                    }
                    if e < bytes.len() && bytes[e].is_ascii_digit() {
                        j = e;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let slice = &text[i..j];
                let value: f64 = slice
                    .parse()
                    .map_err(|_| err_at(pos, format!("invalid number '{slice}'")))?;
                toks.push(Token {
                    tok: Tok::Num(value),
                    pos,
                });
                i = j;
            }
            b if b.is_ascii_alphabetic() || b == b'_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                toks.push(Token {
                    tok: Tok::Ident(text[i..j].to_string()),
                    pos,
                });
                i = j;
            }
            other => {
                return Err(err_at(pos, format!("unexpected character '{}'", other as char)));
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [Token],
    i: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.i).map(|t| t.pos).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<&Tok> {
        let t = self.toks.get(self.i).map(|t| &t.tok);
        self.i += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.i += 1;
            Ok(())
        } else {
            Err(err_at(self.pos(), format!("expected {what}")))
        }
    }

    fn expr(&mut self) -> Result<Expression> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.i += 1;
                    acc = Expression::binary(BinaryOp::Add, acc, self.term()?);
                }
                Some(Tok::Minus) => {
                    self.i += 1;
                    acc = Expression::binary(BinaryOp::Sub, acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expression> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.i += 1;
                    acc = Expression::binary(BinaryOp::Mul, acc, self.unary()?);
                }
                Some(Tok::Slash) => {
                    self.i += 1;
                    acc = Expression::binary(BinaryOp::Div, acc, self.unary()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Expression> {
        if self.peek() == Some(&Tok::Minus) {
            self.i += 1;
            Ok(Expression::unary(UnaryOp::Neg, self.unary()?))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expression> {
        let mut acc = self.factor()?;
        while self.peek() == Some(&Tok::Caret) {
            self.i += 1;
            acc = Expression::binary(BinaryOp::Pow, acc, self.factor()?);
        }
        Ok(acc)
    }

    /// Exponent operand: an atom with optional leading minus, so `2^-3`
    /// works while `^` still binds tighter than unary minus elsewhere.
    fn factor(&mut self) -> Result<Expression> {
        if self.peek() == Some(&Tok::Minus) {
            self.i += 1;
            Ok(Expression::unary(UnaryOp::Neg, self.factor()?))
        } else {
            self.atom()
        }
    }

    fn atom(&mut self) -> Result<Expression> {
        let pos = self.pos();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Expression::Constant(*v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let name = name.clone();
                if self.peek() == Some(&Tok::LParen) {
                    self.i += 1;
                    let mut args = vec![self.expr()?];
                    while self.peek() == Some(&Tok::Comma) {
                        self.i += 1;
                        args.push(self.expr()?);
                    }
                    self.expect(Tok::RParen, "')'")?;
                    self.call(&name, args, pos)
                } else {
                    Var::from_name(&name)
                        .map(Expression::Variable)
                        .map_err(|e| err_at(pos, e.to_string()))
                }
            }
            Some(other) => Err(err_at(pos, format!("unexpected token {other:?}"))),
            None => Err(err_at(pos, "unexpected end of input")),
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expression>, pos: usize) -> Result<Expression> {
        let unary = |op, args: &mut Vec<Expression>| {
            Ok(Expression::unary(op, args.pop().unwrap()))
        };
        let binary = |op, args: &mut Vec<Expression>| {
            let b = args.pop().unwrap();
            let a = args.pop().unwrap();
            Ok(Expression::binary(op, a, b))
        };
        let arity = |want: usize, got: usize| {
            err_at(
                pos,
                format!("function '{name}' takes {want} argument(s), got {got}"),
            )
        };
        match name {
            "sin" | "cos" | "exp" | "abs" => {
                if args.len() != 1 {
                    return Err(arity(1, args.len()));
                }
                let op = match name {
                    "sin" => UnaryOp::Sin,
                    "cos" => UnaryOp::Cos,
                    "exp" => UnaryOp::Exp,
                    _ => UnaryOp::Abs,
                };
                unary(op, &mut args)
            }
            "min" | "max" => {
                if args.len() != 2 {
                    return Err(arity(2, args.len()));
                }
                let op = if name == "min" { BinaryOp::Min } else { BinaryOp::Max };
                binary(op, &mut args)
            }
            _ => Err(err_at(pos, format!("unknown function '{name}'"))),
        }
    }
}

pub fn parse(text: &str) -> Result<Expression> {
    let toks = lex(text)?;
    let mut parser = Parser {
        toks: &toks,
        i: 0,
        end: text.len(),
    };
    let expr = parser.expr()?;
    if parser.i != toks.len() {
        return Err(err_at(parser.pos(), "unexpected trailing input"));
    }
    Ok(expr)
}
