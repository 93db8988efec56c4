//! A small expression language for scalar fields on a chart.
//!
//! Grammar (standard precedence, `^` binds tightest and is right
//! associative, the other binary operators associate to the left):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' unary)?
//! atom    := number | coord | func '(' expr ')' | '(' expr ')'
//! func    := exp | log | sqrt | sin | cos | tan | sinh | cosh | atan
//! ```
//!
//! Exponents must be constant integers or half-integers. Half-integer powers
//! are evaluated as integer powers of a square root.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use thiserror::Error;

use super::taylor::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("function `{name}` at byte {offset} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        offset: usize,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Atan,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Atan => "atan",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply<S: Scalar>(self, x: &S) -> S {
        match self {
            Func::Exp => x.exp(),
            Func::Log => x.ln(),
            Func::Sqrt => x.sqrt(),
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Tan => x.tan(),
            Func::Sinh => x.sinh(),
            Func::Cosh => x.cosh(),
            Func::Atan => x.atan(),
        }
    }
}

/// Immutable expression tree. Variables are indices into the chart's
/// coordinate triple.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Base and a constant exponent subtree.
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Expr {
        assert!(i < 3);
        Expr::Var(i)
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(self, exponent: f64) -> Expr {
        assert!(
            is_half_integer(exponent),
            "exponent must be an integer or half-integer"
        );
        Expr::Pow(Box::new(self), Box::new(Expr::Num(exponent)))
    }

    pub fn parse(text: &str, coords: &[&str; 3]) -> Result<Expr, ParseError> {
        let tokens = tokenize(text)?;
        let mut parser = Parser {
            tokens,
            pos: 0,
            coords,
            len: text.len(),
        };
        let expr = parser.expr()?;
        if let Some(tok) = parser.peek() {
            return Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind.describe()),
            });
        }
        Ok(expr)
    }

    pub fn uses_var(&self, i: usize) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(j) => *j == i,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_var(i),
            Expr::Pow(a, _) => a.uses_var(i),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.uses_var(i) || b.uses_var(i)
            }
        }
    }

    fn constant_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Var(_) => None,
            Expr::Neg(a) => a.constant_value().map(|v| -v),
            Expr::Call(f, a) => a.constant_value().map(|v| f.apply(&v)),
            Expr::Pow(a, e) => Some(pow_value(a.constant_value()?, e.constant_value()?)),
            Expr::Add(a, b) => Some(a.constant_value()? + b.constant_value()?),
            Expr::Sub(a, b) => Some(a.constant_value()? - b.constant_value()?),
            Expr::Mul(a, b) => Some(a.constant_value()? * b.constant_value()?),
            Expr::Div(a, b) => Some(a.constant_value()? / b.constant_value()?),
        }
    }

    pub fn eval<S: Scalar>(&self, vars: &[S; 3]) -> S {
        match self {
            Expr::Num(v) => vars[0].lift(*v),
            Expr::Var(i) => vars[*i].clone(),
            Expr::Neg(a) => -a.eval(vars),
            Expr::Add(a, b) => a.eval(vars) + b.eval(vars),
            Expr::Sub(a, b) => a.eval(vars) - b.eval(vars),
            Expr::Mul(a, b) => a.eval(vars) * b.eval(vars),
            Expr::Div(a, b) => a.eval(vars) / b.eval(vars),
            Expr::Pow(a, e) => {
                let exponent = e
                    .constant_value()
                    .expect("exponent subtree is constant by construction");
                let base = a.eval(vars);
                let twice = (2.0 * exponent).round() as i32;
                if twice % 2 == 0 {
                    base.powi(twice / 2)
                } else {
                    base.sqrt().powi(twice)
                }
            }
            Expr::Call(f, a) => f.apply(&a.eval(vars)),
        }
    }

    /// Renders the tree with the given coordinate names. The output re-parses
    /// to an identical tree.
    pub fn display<'a>(&'a self, coords: &'a [&'a str; 3]) -> ExprDisplay<'a> {
        ExprDisplay { expr: self, coords }
    }

    /// Renders with owned coordinate names.
    pub fn to_text(&self, coords: &[String; 3]) -> String {
        let names = [coords[0].as_str(), coords[1].as_str(), coords[2].as_str()];
        self.display(&names).to_string()
    }
}

fn is_half_integer(v: f64) -> bool {
    v.is_finite() && (2.0 * v - (2.0 * v).round()).abs() < 1e-12
}

fn pow_value(base: f64, exponent: f64) -> f64 {
    let twice = (2.0 * exponent).round() as i32;
    if twice % 2 == 0 {
        base.powi(twice / 2)
    } else {
        base.sqrt().powi(twice)
    }
}

pub struct ExprDisplay<'a> {
    expr: &'a Expr,
    coords: &'a [&'a str; 3],
}

impl<'a> ExprDisplay<'a> {
    fn child(&self, expr: &'a Expr) -> ExprDisplay<'a> {
        ExprDisplay {
            expr,
            coords: self.coords,
        }
    }
}

impl fmt::Display for ExprDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sub = |e| self.child(e);
        match self.expr {
            Expr::Num(v) if *v < 0.0 || v.is_sign_negative() => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => f.write_str(self.coords[*i]),
            Expr::Neg(a) => write!(f, "(-{})", sub(a)),
            Expr::Add(a, b) => write!(f, "({} + {})", sub(a), sub(b)),
            Expr::Sub(a, b) => write!(f, "({} - {})", sub(a), sub(b)),
            Expr::Mul(a, b) => write!(f, "({} * {})", sub(a), sub(b)),
            Expr::Div(a, b) => write!(f, "({} / {})", sub(a), sub(b)),
            Expr::Pow(a, b) => write!(f, "({}^{})", sub(a), sub(b)),
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), sub(a)),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl $trait for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(self), Box::new(rhs))
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(Box::new(self), Box::new(Expr::Num(rhs)))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(Box::new(Expr::Num(self)), Box::new(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(Box::new(self))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

impl TokenKind {
    fn describe(&self) -> String {
        match self {
            TokenKind::Num(v) => format!("number {v}"),
            TokenKind::Ident(s) => format!("identifier `{s}`"),
            TokenKind::Op(c) => format!("operator `{c}`"),
            TokenKind::LParen => "`(`".into(),
            TokenKind::RParen => "`)`".into(),
            TokenKind::Comma => "`,`".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: TokenKind,
    offset: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
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
            let lit = &text[start..i];
            let value: f64 = lit.parse().map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{lit}`"),
            })?;
            tokens.push(Token {
                kind: TokenKind::Num(value),
                offset: start,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            tokens.push(Token {
                kind: TokenKind::Ident(text[start..i].to_string()),
                offset: start,
            });
            continue;
        }
        let kind = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => TokenKind::Op(c as char),
            b'(' => TokenKind::LParen,
            b')' => TokenKind::RParen,
            b',' => TokenKind::Comma,
            _ => {
                let ch = text[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
        i += 1;
    }
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    coords: &'a [&'a str; 3],
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, op: char) -> bool {
        if matches!(self.peek(), Some(Token { kind: TokenKind::Op(c), .. }) if *c == op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end_error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.len,
            message: message.to_string(),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat_op('+') {
                lhs = lhs + self.term()?;
            } else if self.eat_op('-') {
                lhs = lhs - self.term()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat_op('*') {
                lhs = lhs * self.unary()?;
            } else if self.eat_op('/') {
                lhs = lhs / self.unary()?;
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat_op('-') {
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        let Some(caret) = self.peek().map(|t| t.offset) else {
            return Ok(base);
        };
        if !self.eat_op('^') {
            return Ok(base);
        }
        let exponent = self.unary()?;
        match exponent.constant_value() {
            Some(v) if is_half_integer(v) => Ok(Expr::Pow(Box::new(base), Box::new(exponent))),
            Some(v) => Err(ParseError::Syntax {
                offset: caret,
                message: format!("exponent {v} is not an integer or half-integer"),
            }),
            None => Err(ParseError::Syntax {
                offset: caret,
                message: "exponent must be a constant".into(),
            }),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let Some(tok) = self.next() else {
            return Err(self.end_error("unexpected end of input"));
        };
        match tok.kind {
            TokenKind::Num(v) => Ok(Expr::Num(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                match self.next() {
                    Some(Token {
                        kind: TokenKind::RParen,
                        ..
                    }) => Ok(inner),
                    Some(t) => Err(ParseError::Syntax {
                        offset: t.offset,
                        message: format!("expected `)`, found {}", t.kind.describe()),
                    }),
                    None => Err(self.end_error("missing `)`")),
                }
            }
            TokenKind::Ident(name) => {
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::Var(i));
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::UnknownIdentifier {
                        name,
                        offset: tok.offset,
                    });
                };
                match self.next() {
                    Some(Token {
                        kind: TokenKind::LParen,
                        ..
                    }) => {}
                    _ => {
                        return Err(ParseError::Syntax {
                            offset: tok.offset,
                            message: format!("function `{name}` must be called with `(`"),
                        })
                    }
                }
                let mut args = Vec::new();
                if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
                    loop {
                        args.push(self.expr()?);
                        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                }
                match self.next() {
                    Some(Token {
                        kind: TokenKind::RParen,
                        ..
                    }) => {}
                    Some(t) => {
                        return Err(ParseError::Syntax {
                            offset: t.offset,
                            message: format!("expected `)`, found {}", t.kind.describe()),
                        })
                    }
                    None => return Err(self.end_error("missing `)`")),
                }
                if args.len() != 1 {
                    return Err(ParseError::Arity {
                        name,
                        offset: tok.offset,
                        expected: 1,
                        found: args.len(),
                    });
                }
                Ok(Expr::call(func, args.pop().expect("one argument")))
            }
            other => Err(ParseError::Syntax {
                offset: tok.offset,
                message: format!("unexpected {}", other.describe()),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const XYZ: [&str; 3] = ["x", "y", "z"];

    #[test]
    fn parses_log_of_sum() {
        let e = Expr::parse("log(1+z)", &XYZ).unwrap();
        assert_eq!(e, Expr::call(Func::Log, Expr::num(1.0) + Expr::var(2)));
    }

    #[test]
    fn evaluates_square() {
        let e = Expr::parse("x^2", &XYZ).unwrap();
        assert_eq!(e.eval(&[3.0, 0.0, 0.0]), 9.0);
    }

    #[test]
    fn unknown_identifier_reported() {
        let err = Expr::parse("a*log(rho)", &["rho", "eta", "psi"]).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "a".into(),
                offset: 0
            }
        );
    }

    #[test]
    fn precedence_and_associativity() {
        let v = |s: &str| Expr::parse(s, &XYZ).unwrap().eval(&[2.0, 3.0, 0.0]);
        assert_eq!(v("1-2-3"), -4.0);
        assert_eq!(v("8/2/2"), 2.0);
        assert_eq!(v("2^3^2"), 512.0);
        assert_eq!(v("-x^2"), -4.0);
        assert_eq!(v("x*y+1"), 7.0);
        assert_eq!(v("x^-1"), 0.5);
        assert!((v("y^(3/2)") - 3.0f64.powf(1.5)).abs() < 1e-14);
        assert!((v("x^0.5") - 2.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_offsets() {
        match Expr::parse("x + * y", &XYZ) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 4),
            other => panic!("{other:?}"),
        }
        match Expr::parse("(x + y", &XYZ) {
            Err(ParseError::Syntax { offset, .. }) => assert_eq!(offset, 6),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            Expr::parse("x^y", &XYZ),
            Err(ParseError::Syntax { offset: 1, .. })
        ));
        assert!(matches!(
            Expr::parse("x^0.3", &XYZ),
            Err(ParseError::Syntax { .. })
        ));
        assert!(matches!(
            Expr::parse("x $ y", &XYZ),
            Err(ParseError::Syntax { offset: 2, .. })
        ));
    }

    #[test]
    fn arity_mismatch() {
        assert!(matches!(
            Expr::parse("exp(x, y)", &XYZ),
            Err(ParseError::Arity {
                expected: 1,
                found: 2,
                ..
            })
        ));
        assert!(matches!(
            Expr::parse("sin()", &XYZ),
            Err(ParseError::Arity { found: 0, .. })
        ));
    }

    fn arb_expr() -> impl Strategy<Value = String> {
        let leaf = prop_oneof![
            Just("x".to_string()),
            Just("y".to_string()),
            Just("z".to_string()),
            (0u32..1000, 0u32..100).prop_map(|(a, b)| format!("{a}.{b}")),
            (1u32..9, -12i32..12).prop_map(|(a, e)| format!("{a}e{e}")),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "/"]))
                    .prop_map(|(a, b, op)| format!("{a} {op} {b}")),
                inner.clone().prop_map(|a| format!("-({a})")),
                (inner.clone(), -4i32..5).prop_map(|(a, n)| format!("({a})^({n}/2)")),
                (inner, prop::sample::select(Func::ALL.to_vec()))
                    .prop_map(|(a, f)| format!("{}({a})", f.name())),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(text in arb_expr()) {
            let tree = Expr::parse(&text, &XYZ).unwrap();
            let printed = tree.display(&XYZ).to_string();
            let reparsed = Expr::parse(&printed, &XYZ).unwrap();
            prop_assert_eq!(tree, reparsed);
        }
    }
}
