//! Recursive-descent parser for the field expression DSL.
//!
//! ```text
//! expr   := term (("+"|"-") term)*
//! term   := factor (("*"|"/") factor)*
//! factor := base ("^" factor)?
//! base   := number | var | func "(" expr ")" | "(" expr ")" | "-" base
//! var    := "x" | "y" | "z" | "w" | "v"   (first d names)
//! func   := "sin" | "cos" | "exp" | "ln" | "sqrt"
//! ```
//!
//! Errors carry the byte offset of the offending token.

use serde::Serialize;
use thiserror::Error;

use super::expr::{BinOp, Expr, Func};

pub(crate) const VAR_NAMES: [&str; 5] = ["x", "y", "z", "w", "v"];

#[derive(Debug, Clone, Error, Serialize)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at offset {offset} needs dimension > {dim}")]
    VariableDimension {
        name: String,
        offset: usize,
        dim: usize,
    },
}

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
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

fn lex(input: &str) -> Result<Vec<Spanned>, ParseError> {
    let bytes = input.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(Spanned { tok, offset: i });
                i += 1;
            }
            '0'..='9' | '.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Spanned {
                    tok: Tok::Num(value),
                    offset: start,
                });
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push(Spanned {
                    tok: Tok::Ident(input[start..i].to_string()),
                    offset: start,
                });
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Spanned],
    pos: usize,
    dim: usize,
    input_len: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Spanned> {
        self.toks.get(self.pos)
    }

    fn next_offset(&self) -> usize {
        self.peek().map_or(self.input_len, |s| s.offset)
    }

    fn eat(&mut self, expected: &Tok, what: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(s) if s.tok == *expected => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(ParseError::Syntax {
                offset: self.next_offset(),
                message: format!("expected {what}"),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        while let Some(s) = self.peek() {
            let op = match s.tok {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        while let Some(s) = self.peek() {
            let op = match s.tok {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.base()?;
        if let Some(s) = self.peek() {
            if s.tok == Tok::Caret {
                self.pos += 1;
                let exponent = self.factor()?;
                return Ok(Expr::Binary(
                    BinOp::Pow,
                    Box::new(base),
                    Box::new(exponent),
                ));
            }
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        let Some(s) = self.peek().cloned() else {
            return Err(ParseError::Syntax {
                offset: self.input_len,
                message: "unexpected end of expression".into(),
            });
        };
        match s.tok {
            Tok::Num(v) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Tok::Minus => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.base()?)))
            }
            Tok::LParen => {
                self.pos += 1;
                let inner = self.expr()?;
                self.eat(&Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.pos += 1;
                if let Some(func) = Func::from_name(&name) {
                    self.eat(&Tok::LParen, "`(` after function name")?;
                    let arg = self.expr()?;
                    self.eat(&Tok::RParen, "`)`")?;
                    return Ok(Expr::Func(func, Box::new(arg)));
                }
                if let Some(idx) = VAR_NAMES.iter().position(|v| *v == name) {
                    if idx >= self.dim {
                        return Err(ParseError::VariableDimension {
                            name,
                            offset: s.offset,
                            dim: self.dim,
                        });
                    }
                    return Ok(Expr::Var(idx));
                }
                Err(ParseError::UnknownIdentifier {
                    name,
                    offset: s.offset,
                })
            }
            _ => Err(ParseError::Syntax {
                offset: s.offset,
                message: "expected a number, variable, function or `(`".into(),
            }),
        }
    }
}

/// Parses `input` against the DSL grammar with `dim` coordinate variables.
pub(crate) fn parse_expression(input: &str, dim: usize) -> Result<Expr, ParseError> {
    let toks = lex(input)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        dim,
        input_len: input.len(),
    };
    let ast = p.expr()?;
    if let Some(s) = p.peek() {
        return Err(ParseError::Syntax {
            offset: s.offset,
            message: "trailing input after expression".into(),
        });
    }
    Ok(ast)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Point;

    fn eval(src: &str, at: [f64; 3]) -> f64 {
        parse_expression(src, 3)
            .unwrap()
            .eval_value(&Point::new(at.to_vec()).unwrap())
            .unwrap()
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval("1+2*3", [0.0; 3]), 7.0);
        assert_eq!(eval("2*3+1", [0.0; 3]), 7.0);
        assert_eq!(eval("8/4/2", [0.0; 3]), 1.0); // left-assoc division
        assert_eq!(eval("2^3^2", [0.0; 3]), 512.0); // right-assoc power
        assert_eq!(eval("2^2*3", [0.0; 3]), 12.0); // ^ binds tighter than *
    }

    #[test]
    fn unary_minus_binds_to_base() {
        // grammar: factor := base ("^" factor)?, base := "-" base,
        // so -2^2 parses as (-2)^2
        assert_eq!(eval("-2^2", [0.0; 3]), 4.0);
        assert_eq!(eval("0-2^2", [0.0; 3]), -4.0);
    }

    #[test]
    fn syntax_error_offset() {
        // "x +* y": the `*` at byte 3 cannot start a factor
        match parse_expression("x +* y", 3) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 3),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_dimension_errors() {
        assert!(matches!(
            parse_expression("foo(x)", 3),
            Err(ParseError::UnknownIdentifier { ref name, offset: 0 }) if name == "foo"
        ));
        assert!(matches!(
            parse_expression("x + w", 3),
            Err(ParseError::VariableDimension { ref name, offset: 4, dim: 3 }) if name == "w"
        ));
        assert!(parse_expression("x + w", 4).is_ok());
    }

    #[test]
    fn unbalanced_parens() {
        assert!(parse_expression("bad(((", 3).is_err());
        assert!(parse_expression("(x+y", 3).is_err());
        assert!(parse_expression("x)", 3).is_err());
    }

    #[test]
    fn scientific_notation() {
        assert_eq!(eval("1.5e2 + 2.5E-1", [0.0; 3]), 150.25);
    }

    #[test]
    fn functions_parse_and_evaluate() {
        let v = eval("sin(x)^2 + cos(x)^2", [0.37, 0.0, 0.0]);
        assert!((v - 1.0).abs() < 1e-15);
        assert!((eval("exp(ln(2))", [0.0; 3]) - 2.0).abs() < 1e-15);
        assert!((eval("sqrt(x^2+y^2)", [3.0, 4.0, 0.0]) - 5.0).abs() < 1e-15);
    }
}
