//! A small expression language for user-supplied dynamics and costs.
//!
//! Grammar (EBNF, whitespace insignificant):
//!
//! ```text
//! expr   = add ;
//! add    = mul , { ("+" | "-") , mul } ;
//! mul    = unary , { ("*" | "/") , unary } ;
//! unary  = "-" , unary | power ;
//! power  = atom , [ "^" , unary ] ;            (* right associative *)
//! atom   = number | variable | function , "(" , expr , ")" | "(" , expr , ")" ;
//! variable = "t" | "x" digits | "u" digits ;   (* x1..xn, u1..um, 1-indexed *)
//! function = "sin" | "cos" | "exp" | "tanh" | "sqrt" | "abs" ;
//! number = digits , [ "." , digits ] , [ ("e"|"E") , [ "+"|"-" ] , digits ] ;
//! ```
//!
//! `^` binds tightest and associates right; unary minus binds looser, so
//! `-x1^2` is `-(x1^2)`. Evaluation is eager about failure: division by
//! zero, square roots of negative numbers, and any non-finite intermediate
//! abort with an error instead of propagating NaN into quadrature.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("parse error at byte {offset}: expected {expected}, found {found}")]
    Unexpected {
        offset: usize,
        expected: &'static str,
        found: String,
    },
    #[error("parse error at byte {offset}: unknown identifier `{name}`")]
    UnknownIdentifier { offset: usize, name: String },
    #[error(
        "variable `{name}` at byte {offset} is outside the declared signature \
         (n={n} states, m={m} controls)"
    )]
    OutsideSignature {
        offset: usize,
        name: String,
        n: usize,
        m: usize,
    },
    #[error("parse error at byte {offset}: numeric literal does not fit in a finite f64")]
    NumberOverflow { offset: usize },
    #[error("parse error at byte {offset}: expression nests too deeply")]
    TooDeep { offset: usize },
    #[error("empty source")]
    Empty,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("square root of a negative number")]
    SqrtOfNegative,
    #[error("non-finite intermediate value in `{op}`")]
    NonFinite { op: &'static str },
    #[error("argument lengths (x: {got_n}, u: {got_m}) do not match the signature (n={n}, m={m})")]
    SignatureMismatch {
        n: usize,
        m: usize,
        got_n: usize,
        got_m: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Tanh,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Time,
    /// 0-based state index (prints as `x1`..`xn`).
    State(usize),
    /// 0-based control index (prints as `u1`..`um`).
    Control(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression over `(t, x1..xn, u1..um)`. Immutable after parse;
/// evaluation is reentrant.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    node: Node,
    n: usize,
    m: usize,
}

impl Expr {
    /// Parse `source` against the signature of `n` states and `m` controls.
    pub fn parse(source: &str, n: usize, m: usize) -> Result<Self, ParseError> {
        if source.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        let tokens = lex(source)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            n,
            m,
            depth: 0,
            source_len: source.len(),
        };
        let node = parser.expr()?;
        parser.expect_end()?;
        Ok(Expr { node, n, m })
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// Whether the expression mentions the time variable anywhere.
    pub fn references_t(&self) -> bool {
        fn walk(node: &Node) -> bool {
            match node {
                Node::Time => true,
                Node::Num(_) | Node::State(_) | Node::Control(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.node)
    }

    pub fn eval(&self, t: f64, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
        if x.len() != self.n || u.len() != self.m {
            return Err(EvalError::SignatureMismatch {
                n: self.n,
                m: self.m,
                got_n: x.len(),
                got_m: u.len(),
            });
        }
        eval_node(&self.node, t, x, u)
    }
}

impl fmt::Display for Expr {
    /// Canonical fully-parenthesized form; parsing it reproduces the AST.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.node, f)
    }
}

fn write_node(node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match node {
        Node::Num(v) => write!(f, "{v}"),
        Node::Time => write!(f, "t"),
        Node::State(i) => write!(f, "x{}", i + 1),
        Node::Control(i) => write!(f, "u{}", i + 1),
        Node::Neg(a) => {
            write!(f, "(-")?;
            write_node(a, f)?;
            write!(f, ")")
        }
        Node::Bin(op, a, b) => {
            write!(f, "(")?;
            write_node(a, f)?;
            write!(f, " {} ", op.symbol())?;
            write_node(b, f)?;
            write!(f, ")")
        }
        Node::Call(func, a) => {
            write!(f, "{}(", func.name())?;
            write_node(a, f)?;
            write!(f, ")")
        }
    }
}

fn eval_node(node: &Node, t: f64, x: &[f64], u: &[f64]) -> Result<f64, EvalError> {
    let checked = |v: f64, op: &'static str| {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { op })
        }
    };
    match node {
        Node::Num(v) => Ok(*v),
        Node::Time => Ok(t),
        Node::State(i) => Ok(x[*i]),
        Node::Control(i) => Ok(u[*i]),
        Node::Neg(a) => Ok(-eval_node(a, t, x, u)?),
        Node::Bin(op, a, b) => {
            let a = eval_node(a, t, x, u)?;
            let b = eval_node(b, t, x, u)?;
            match op {
                BinOp::Add => checked(a + b, "+"),
                BinOp::Sub => checked(a - b, "-"),
                BinOp::Mul => checked(a * b, "*"),
                BinOp::Div => {
                    if b == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        checked(a / b, "/")
                    }
                }
                BinOp::Pow => checked(a.powf(b), "^"),
            }
        }
        Node::Call(func, a) => {
            let a = eval_node(a, t, x, u)?;
            match func {
                Func::Sin => checked(a.sin(), "sin"),
                Func::Cos => checked(a.cos(), "cos"),
                Func::Exp => checked(a.exp(), "exp"),
                Func::Tanh => checked(a.tanh(), "tanh"),
                Func::Sqrt => {
                    if a < 0.0 {
                        Err(EvalError::SqrtOfNegative)
                    } else {
                        checked(a.sqrt(), "sqrt")
                    }
                }
                Func::Abs => checked(a.abs(), "abs"),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TokenKind {
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

#[derive(Debug, Clone, PartialEq)]
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
        let offset = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' => {
                tokens.push(Token { kind: TokenKind::Plus, offset });
                i += 1;
            }
            b'-' => {
                tokens.push(Token { kind: TokenKind::Minus, offset });
                i += 1;
            }
            b'*' => {
                tokens.push(Token { kind: TokenKind::Star, offset });
                i += 1;
            }
            b'/' => {
                tokens.push(Token { kind: TokenKind::Slash, offset });
                i += 1;
            }
            b'^' => {
                tokens.push(Token { kind: TokenKind::Caret, offset });
                i += 1;
            }
            b'(' => {
                tokens.push(Token { kind: TokenKind::LParen, offset });
                i += 1;
            }
            b')' => {
                tokens.push(Token { kind: TokenKind::RParen, offset });
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
                // exponent only if it is actually well formed; `2exp(t)`
                // must lex as `2` then `exp`
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let text = &source[i..j];
                if text == "." {
                    return Err(ParseError::Unexpected {
                        offset,
                        expected: "a number",
                        found: ".".into(),
                    });
                }
                let value: f64 = text.parse().map_err(|_| ParseError::Unexpected {
                    offset,
                    expected: "a number",
                    found: text.into(),
                })?;
                if !value.is_finite() {
                    return Err(ParseError::NumberOverflow { offset });
                }
                tokens.push(Token { kind: TokenKind::Num(value), offset });
                i = j;
            }
            b'a'..=b'z' | b'A'..=b'Z' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_alphanumeric()) {
                    j += 1;
                }
                tokens.push(Token {
                    kind: TokenKind::Ident(source[i..j].to_string()),
                    offset,
                });
                i = j;
            }
            _ => {
                return Err(ParseError::Unexpected {
                    offset,
                    expected: "a token",
                    found: (c as char).to_string(),
                });
            }
        }
    }
    Ok(tokens)
}

const MAX_DEPTH: usize = 256;

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    n: usize,
    m: usize,
    depth: usize,
    source_len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> usize {
        self.peek().map_or(self.source_len, |t| t.offset)
    }

    fn found(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(t) => match &t.kind {
                TokenKind::Num(v) => format!("number {v}"),
                TokenKind::Ident(s) => format!("`{s}`"),
                TokenKind::Plus => "`+`".into(),
                TokenKind::Minus => "`-`".into(),
                TokenKind::Star => "`*`".into(),
                TokenKind::Slash => "`/`".into(),
                TokenKind::Caret => "`^`".into(),
                TokenKind::LParen => "`(`".into(),
                TokenKind::RParen => "`)`".into(),
            },
        }
    }

    fn expect_end(&self) -> Result<(), ParseError> {
        if self.pos == self.tokens.len() {
            Ok(())
        } else {
            Err(ParseError::Unexpected {
                offset: self.here(),
                expected: "end of input or an operator",
                found: self.found(),
            })
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            Err(ParseError::TooDeep { offset: self.here() })
        } else {
            Ok(())
        }
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = self.add();
        self.depth -= 1;
        node
    }

    fn add(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.mul()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Plus) => BinOp::Add,
                Some(TokenKind::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek().map(|t| &t.kind) {
                Some(TokenKind::Star) => BinOp::Mul,
                Some(TokenKind::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        self.enter()?;
        let node = if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Minus)) {
            self.bump();
            Ok(Node::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        };
        self.depth -= 1;
        node
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Caret)) {
            self.bump();
            // right associative; the exponent may carry a unary minus
            let exponent = self.unary()?;
            Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        let offset = self.here();
        let found = self.found();
        let Some(token) = self.bump() else {
            return Err(ParseError::Unexpected {
                offset,
                expected: "a number, variable, function, or `(`",
                found,
            });
        };
        match token.kind.clone() {
            TokenKind::Num(v) => Ok(Node::Num(v)),
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokenKind::Ident(name) => self.ident(name, offset),
            _ => Err(ParseError::Unexpected {
                offset,
                expected: "a number, variable, function, or `(`",
                found,
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
            self.bump();
            Ok(())
        } else {
            Err(ParseError::Unexpected {
                offset: self.here(),
                expected: "`)`",
                found: self.found(),
            })
        }
    }

    fn ident(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        if name == "t" {
            return Ok(Node::Time);
        }
        if let Some(func) = Func::from_name(&name) {
            if !matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                return Err(ParseError::Unexpected {
                    offset: self.here(),
                    expected: "`(` after a function name",
                    found: self.found(),
                });
            }
            self.bump();
            let arg = self.expr()?;
            self.expect_rparen()?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        if let Some(rest) = name.strip_prefix('x') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 && k <= self.n {
                    return Ok(Node::State(k - 1));
                }
                return Err(ParseError::OutsideSignature {
                    offset,
                    name,
                    n: self.n,
                    m: self.m,
                });
            }
        }
        if let Some(rest) = name.strip_prefix('u') {
            if let Ok(k) = rest.parse::<usize>() {
                if k >= 1 && k <= self.m {
                    return Ok(Node::Control(k - 1));
                }
                return Err(ParseError::OutsideSignature {
                    offset,
                    name,
                    n: self.n,
                    m: self.m,
                });
            }
        }
        Err(ParseError::UnknownIdentifier { offset, name })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(src: &str, n: usize, m: usize, t: f64, x: &[f64], u: &[f64]) -> f64 {
        Expr::parse(src, n, m).unwrap().eval(t, x, u).unwrap()
    }

    #[test]
    fn direct_arithmetic() {
        assert_eq!(ev("t + x1*u1", 1, 1, 2.0, &[3.0], &[4.0]), 14.0);
    }

    #[test]
    fn dangling_operator_offset() {
        let err = Expr::parse("x1 +", 1, 0).unwrap_err();
        match err {
            ParseError::Unexpected { offset, .. } => assert_eq!(offset, 4),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn unary_minus_binds_looser_than_pow() {
        assert_eq!(ev("-x1^2", 1, 0, 0.0, &[3.0], &[]), -9.0);
    }

    #[test]
    fn out_of_signature_variable_named() {
        let err = Expr::parse("x3", 2, 0).unwrap_err();
        assert_eq!(
            err,
            ParseError::OutsideSignature {
                offset: 0,
                name: "x3".into(),
                n: 2,
                m: 0
            }
        );
        assert!(Expr::parse("u1", 1, 0).is_err());
        assert!(Expr::parse("x0", 2, 0).is_err());
    }

    #[test]
    fn unknown_identifier() {
        assert!(matches!(
            Expr::parse("foo(1)", 0, 0).unwrap_err(),
            ParseError::UnknownIdentifier { .. }
        ));
    }

    #[test]
    fn eval_errors() {
        let e = Expr::parse("1/x1", 1, 0).unwrap();
        assert_eq!(e.eval(0.0, &[0.0], &[]).unwrap_err(), EvalError::DivisionByZero);
        let e = Expr::parse("sqrt(x1)", 1, 0).unwrap();
        assert_eq!(e.eval(0.0, &[-1.0], &[]).unwrap_err(), EvalError::SqrtOfNegative);
        let e = Expr::parse("exp(x1^2)", 1, 0).unwrap();
        assert!(matches!(
            e.eval(0.0, &[1e6], &[]).unwrap_err(),
            EvalError::NonFinite { .. }
        ));
    }

    #[test]
    fn exp_of_one() {
        let v = ev("exp(x1)", 1, 0, 0.0, &[1.0], &[]);
        assert!((v - 2.718281828459045).abs() < 1e-15);
    }

    #[test]
    fn sin_at_zero() {
        assert_eq!(ev("sin(t)", 0, 0, 0.0, &[], &[]), 0.0);
    }

    #[test]
    fn precedence_corpus() {
        // hand-computed values for the documented precedence table
        let cases: &[(&str, f64)] = &[
            ("1+2*3", 7.0),
            ("(1+2)*3", 9.0),
            ("2*3+1", 7.0),
            ("1-2-3", -4.0),
            ("12/4/3", 1.0),
            ("1/2/2", 0.25),
            ("2^3^2", 512.0),
            ("-2^2", -4.0),
            ("(-2)^2", 4.0),
            ("2^-1", 0.5),
            ("1+2^2*3", 13.0),
            ("2*3^2", 18.0),
            ("-3*-2", 6.0),
            ("2--1", 3.0),
            ("1+2-3+4", 4.0),
            ("2*2^3", 16.0),
            ("-(1+2)", -3.0),
            ("4/2*3", 6.0),
            ("2^2^-1", std::f64::consts::SQRT_2),
            ("2^0.5", std::f64::consts::SQRT_2),
            ("1.5e2", 150.0),
            ("1.5e-1", 0.15),
            ("sin(0)", 0.0),
            ("cos(0)", 1.0),
            ("exp(0)", 1.0),
            ("sqrt(4)", 2.0),
            ("abs(-3)", 3.0),
            ("tanh(0)", 0.0),
            ("abs(1-2*3)", 5.0),
            ("10-2^3", 2.0),
        ];
        assert!(cases.len() >= 30);
        for (src, want) in cases {
            let got = ev(src, 0, 0, 0.0, &[], &[]);
            assert_eq!(got, *want, "{src}");
        }
    }

    #[test]
    fn variable_corpus() {
        let t = 0.5;
        let x = [2.0, -1.0];
        let u = [3.0];
        let cases: &[(&str, f64)] = &[
            ("x1^2+u1^2", 13.0),
            ("-t^2+1", 0.75),
            ("x2*u1", -3.0),
            ("t*x1*u1", 3.0),
            ("x1-x2", 3.0),
        ];
        for (src, want) in cases {
            assert_eq!(ev(src, 2, 1, t, &x, &u), *want, "{src}");
        }
    }

    #[test]
    fn number_then_function_lexes() {
        // `2exp(t)` is not valid syntax (no implicit multiplication) but the
        // lexer must split it as `2`, `exp`, not eat the `e` as an exponent
        let err = Expr::parse("2exp(0)", 0, 0).unwrap_err();
        assert!(matches!(err, ParseError::Unexpected { offset: 1, .. }));
        assert_eq!(ev("2e1", 0, 0, 0.0, &[], &[]), 20.0);
    }

    #[test]
    fn overflowing_literal_rejected() {
        assert_eq!(
            Expr::parse("1e999", 0, 0).unwrap_err(),
            ParseError::NumberOverflow { offset: 0 }
        );
    }

    #[test]
    fn signature_mismatch_at_eval() {
        let e = Expr::parse("x1", 2, 0).unwrap();
        assert!(matches!(
            e.eval(0.0, &[1.0], &[]).unwrap_err(),
            EvalError::SignatureMismatch { .. }
        ));
    }

    #[test]
    fn eval_is_bit_deterministic() {
        let e = Expr::parse("sin(t) + exp(x1) * tanh(u1) - x1^2 / 3", 1, 1).unwrap();
        let a = e.eval(0.37, &[1.21], &[-0.4]).unwrap();
        let b = e.eval(0.37, &[1.21], &[-0.4]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    fn arb_node(n: usize, m: usize) -> impl Strategy<Value = Node> {
        let leaf = prop_oneof![
            (0.0f64..10.0).prop_map(Node::Num),
            Just(Node::Time),
            (0..n).prop_map(Node::State),
            (0..m).prop_map(Node::Control),
        ];
        leaf.prop_recursive(5, 32, 2, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Node::Neg(Box::new(a))),
                (
                    prop_oneof![
                        Just(BinOp::Add),
                        Just(BinOp::Sub),
                        Just(BinOp::Mul),
                        Just(BinOp::Div),
                        Just(BinOp::Pow)
                    ],
                    inner.clone(),
                    inner.clone()
                )
                    .prop_map(|(op, a, b)| Node::Bin(op, Box::new(a), Box::new(b))),
                (
                    prop_oneof![
                        Just(Func::Sin),
                        Just(Func::Cos),
                        Just(Func::Exp),
                        Just(Func::Tanh),
                        Just(Func::Sqrt),
                        Just(Func::Abs)
                    ],
                    inner
                )
                    .prop_map(|(f, a)| Node::Call(f, Box::new(a))),
            ]
        })
    }

    proptest! {
        #[test]
        fn parse_print_parse_fixpoint(node in arb_node(2, 1)) {
            let expr = Expr { node, n: 2, m: 1 };
            let printed = expr.to_string();
            let reparsed = Expr::parse(&printed, 2, 1).unwrap();
            prop_assert_eq!(&expr, &reparsed);
            // and printing again is a fixpoint
            prop_assert_eq!(printed, reparsed.to_string());
        }
    }
}
