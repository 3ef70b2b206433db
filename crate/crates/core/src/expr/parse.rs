//! Recursive-descent parser for function definitions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := ('-' | '+') unary | power
//! power   := atom ('^' unary)?
//! atom    := number | number 'i' | 'i' | var | func '(' sum ')' | '(' sum ')'
//! func    := exp | log | sin | cos
//! ```
//!
//! so `^` binds tighter than unary minus, and is right-associative.

use num_complex::Complex64;
use thiserror::Error;

use super::ast::{BinaryOp, Expr, FuncExpr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier \"{name}\" at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("invalid variable name \"{name}\"")]
    InvalidVariable { name: String },
}

const RESERVED: [&str; 5] = ["exp", "log", "sin", "cos", "i"];

/// Parse `source` as a function of the single variable `variable`.
pub fn parse(source: &str, variable: &str) -> Result<FuncExpr, ParseError> {
    if !is_identifier(variable) || RESERVED.contains(&variable) {
        return Err(ParseError::InvalidVariable {
            name: variable.to_string(),
        });
    }
    let tokens = lex(source)?;
    let mut parser = Parser {
        tokens,
        pos: 0,
        var: variable,
    };
    let root = parser.sum()?;
    match parser.peek() {
        Token {
            kind: TokenKind::End,
            ..
        } => Ok(FuncExpr::new(root, variable)),
        tok => Err(ParseError::Syntax {
            offset: tok.offset,
            message: format!("unexpected {}", tok.kind.describe()),
        }),
    }
}

/// Parse a variable-free complex literal such as `0.5+0.3i` or `2*exp(i*0.1)`.
pub fn parse_complex(source: &str) -> Result<Complex64, ParseError> {
    let f = parse(source, "_")?;
    if !f.root().is_constant() {
        return Err(ParseError::UnknownIdentifier {
            name: "_".to_string(),
            offset: source.find('_').unwrap_or(0),
        });
    }
    super::eval(&f, Complex64::new(0.0, 0.0)).map_err(|e| ParseError::Syntax {
        offset: 0,
        message: e.to_string(),
    })
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Number(f64),
    Imaginary(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Number(x) => format!("number {x}"),
            TokenKind::Imaginary(x) => format!("number {x}i"),
            TokenKind::Ident(name) => format!("identifier \"{name}\""),
            TokenKind::Op(c) => format!("'{c}'"),
            TokenKind::LParen => "'('".to_string(),
            TokenKind::RParen => "')'".to_string(),
            TokenKind::End => "end of input".to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn lex(source: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = source.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == b'.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            // Exponent only if digits follow, so `2e` stays a syntax error below.
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let text = &source[start..i];
            let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number \"{text}\""),
            })?;
            let ident_follows =
                |k: usize| k < bytes.len() && (bytes[k].is_ascii_alphanumeric() || bytes[k] == b'_');
            if i < bytes.len() && bytes[i] == b'i' && !ident_follows(i + 1) {
                i += 1;
                tokens.push(Token {
                    kind: TokenKind::Imaginary(value),
                    offset: start,
                });
            } else if ident_follows(i) {
                return Err(ParseError::Syntax {
                    offset: i,
                    message: "identifier directly after number (use '*')".to_string(),
                });
            } else {
                tokens.push(Token {
                    kind: TokenKind::Number(value),
                    offset: start,
                });
            }
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(source[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => TokenKind::Op(c as char),
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            _ => {
                let ch = source[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character '{ch}'"),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    tokens.push(Token {
        kind: TokenKind::End,
        offset: source.len(),
    });
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    var: &'a str,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek().kind {
            TokenKind::Op(c) if ops.contains(&c) => {
                self.advance();
                Some(c)
            }
            _ => None,
        }
    }

    fn expect(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        let tok = self.advance();
        if tok.kind == kind {
            Ok(())
        } else {
            Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected {}, found {}", kind.describe(), tok.kind.describe()),
            })
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.product()?;
            let op = if op == '+' { BinaryOp::Add } else { BinaryOp::Sub };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinaryOp::Mul } else { BinaryOp::Div };
            lhs = Expr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.eat_op(&['-', '+']) {
            Some('-') => Ok(Expr::unary(UnaryOp::Neg, self.unary()?)),
            Some(_) => self.unary(),
            None => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            let exponent = self.unary()?;
            return Ok(Expr::binary(BinaryOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let tok = self.advance();
        match tok.kind {
            TokenKind::Number(x) => Ok(Expr::constant(Complex64::new(x, 0.0))),
            TokenKind::Imaginary(y) => Ok(Expr::constant(Complex64::new(0.0, y))),
            TokenKind::LParen => {
                let inner = self.sum()?;
                self.expect(TokenKind::RParen)?;
                Ok(inner)
            }
            TokenKind::Ident(name) => {
                if let Some(op) = UnaryOp::from_name(&name) {
                    self.expect(TokenKind::LParen)?;
                    let arg = self.sum()?;
                    self.expect(TokenKind::RParen)?;
                    Ok(Expr::unary(op, arg))
                } else if name == "i" {
                    Ok(Expr::constant(Complex64::new(0.0, 1.0)))
                } else if name == self.var {
                    Ok(Expr::Var)
                } else {
                    Err(ParseError::UnknownIdentifier {
                        name,
                        offset: tok.offset,
                    })
                }
            }
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("expected operand, found {}", other.describe()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Expr {
        Expr::constant(Complex64::new(re, 0.0))
    }

    #[test]
    fn single_application() {
        let f = parse("exp(z)", "z").unwrap();
        assert_eq!(f.root(), &Expr::unary(UnaryOp::Exp, Expr::Var));
    }

    #[test]
    fn rational_convergent_shape() {
        let f = parse("w/(1+w)", "w").unwrap();
        let expected = Expr::binary(
            BinaryOp::Div,
            Expr::Var,
            Expr::binary(BinaryOp::Add, c(1.0), Expr::Var),
        );
        assert_eq!(f.root(), &expected);
    }

    #[test]
    fn bare_e_is_unknown() {
        let err = parse("1/(e^(-0.5*s)+1)", "s").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "e".to_string(),
                offset: 3
            }
        );
    }

    #[test]
    fn foreign_variable_is_unknown() {
        assert!(matches!(
            parse("exp(z)", "w"),
            Err(ParseError::UnknownIdentifier { ref name, .. }) if name == "z"
        ));
    }

    #[test]
    fn reserved_variable_rejected() {
        assert!(matches!(parse("1", "exp"), Err(ParseError::InvalidVariable { .. })));
        assert!(matches!(parse("1", "i"), Err(ParseError::InvalidVariable { .. })));
        assert!(matches!(parse("1", "2x"), Err(ParseError::InvalidVariable { .. })));
    }

    #[test]
    fn precedence_power_over_negation() {
        let f = parse("-z^2", "z").unwrap();
        let expected = Expr::unary(
            UnaryOp::Neg,
            Expr::binary(BinaryOp::Pow, Expr::Var, c(2.0)),
        );
        assert_eq!(f.root(), &expected);
    }

    #[test]
    fn power_is_right_associative() {
        let f = parse("z^2^3", "z").unwrap();
        let expected = Expr::binary(
            BinaryOp::Pow,
            Expr::Var,
            Expr::binary(BinaryOp::Pow, c(2.0), c(3.0)),
        );
        assert_eq!(f.root(), &expected);
    }

    #[test]
    fn subtraction_is_left_associative() {
        let f = parse("z-1-2", "z").unwrap();
        let expected = Expr::binary(
            BinaryOp::Sub,
            Expr::binary(BinaryOp::Sub, Expr::Var, c(1.0)),
            c(2.0),
        );
        assert_eq!(f.root(), &expected);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match parse("exp(z", "z") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match parse("z + * 2", "z") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match parse("", "z") {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("2z", "z"), Err(ParseError::Syntax { offset: 1, .. })));
        assert!(matches!(parse("z $ 1", "z"), Err(ParseError::Syntax { offset: 2, .. })));
    }

    #[test]
    fn scientific_and_imaginary_literals() {
        assert_eq!(parse_complex("1.5e-3").unwrap(), Complex64::new(1.5e-3, 0.0));
        assert_eq!(parse_complex("0.5+0.3i").unwrap(), Complex64::new(0.5, 0.3));
        assert_eq!(parse_complex("-2.5E+1*i").unwrap(), Complex64::new(0.0, -25.0));
        assert_eq!(parse_complex(".25").unwrap(), Complex64::new(0.25, 0.0));
        assert!(parse_complex("z").is_err());
    }
}
