//! Scalar expressions over chart coordinates.
//!
//! Grammar, loosest to tightest:
//!
//! ```text
//! expr    := expr ('+' | '-') expr
//!          | expr ('*' | '/') expr
//!          | '-' expr
//!          | expr '^' expr          (right-associative)
//!          | number | coord | pi | e | func '(' expr ')' | '(' expr ')'
//! func    := sin | cos | exp | sqrt | tanh | abs
//! ```
//!
//! Unary minus binds looser than `^`, so `-t^2` is `-(t^2)`.
//! Coordinate names shadow the named constants `pi` and `e`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::dual::Dual;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes exactly one argument, got {found}")]
    Arity { name: String, found: usize },
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
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }

    /// (left, right) binding powers.
    fn binding_power(self) -> (u8, u8) {
        match self {
            BinOp::Add | BinOp::Sub => (1, 2),
            BinOp::Mul | BinOp::Div => (3, 4),
            BinOp::Pow => (8, 7),
        }
    }
}

const PREFIX_NEG_BP: u8 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Tanh,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "tanh" => Func::Tanh,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Tanh => "tanh",
            Func::Abs => "abs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConst {
    Pi,
    E,
}

impl NamedConst {
    pub fn value(self) -> f64 {
        match self {
            NamedConst::Pi => std::f64::consts::PI,
            NamedConst::E => std::f64::consts::E,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Named(NamedConst),
    /// Index into the owning expression's coordinate list.
    Var(usize),
    Neg(Box<Node>),
    Binary(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression bound to a coordinate list.
#[derive(Clone, PartialEq)]
pub struct Expression {
    root: Node,
    coords: Arc<[String]>,
}

impl fmt::Debug for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expression({self})")
    }
}

impl Expression {
    pub fn parse<S: AsRef<str>>(source: &str, coords: &[S]) -> Result<Expression, ParseError> {
        let coords: Arc<[String]> = coords.iter().map(|c| c.as_ref().to_owned()).collect();
        let root = Parser::new(source, &coords)?.parse_all()?;
        Ok(Expression { root, coords })
    }

    /// Builds an expression from an already-formed tree. Variable indices
    /// must be valid for `coords`.
    pub fn from_node<S: AsRef<str>>(root: Node, coords: &[S]) -> Result<Expression> {
        let coords: Arc<[String]> = coords.iter().map(|c| c.as_ref().to_owned()).collect();
        fn check(n: &Node, dim: usize) -> Result<()> {
            match n {
                Node::Var(i) if *i >= dim => Err(Error::InvalidArgument(format!(
                    "variable index {i} out of range for {dim} coordinates"
                ))),
                Node::Neg(a) | Node::Call(_, a) => check(a, dim),
                Node::Binary(_, a, b) => check(a, dim).and(check(b, dim)),
                _ => Ok(()),
            }
        }
        check(&root, coords.len())?;
        Ok(Expression { root, coords })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Value and exact gradient at `point`.
    pub fn eval_dual(&self, point: &[f64]) -> Result<Dual> {
        self.check_dim(point.len())?;
        let x = Dual::seed(point);
        let mut out = self.eval_at(&x)?;
        if out.gradient.is_empty() {
            out.gradient = vec![0.0; point.len()];
        }
        Ok(out)
    }

    pub fn eval(&self, point: &[f64]) -> Result<f64> {
        self.check_dim(point.len())?;
        Ok(self.eval_at(&Dual::lift(point))?.value)
    }

    /// Evaluates at a point whose coordinates are themselves dual numbers.
    pub fn eval_at(&self, point: &[Dual]) -> Result<Dual> {
        self.check_dim(point.len())?;
        eval_node(&self.root, point)
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.coords.len() {
            return Err(Error::DimensionMismatch {
                expected: self.coords.len(),
                found,
            });
        }
        Ok(())
    }

    fn write_node(&self, node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match node {
            Node::Const(v) => write!(f, "{v}"),
            Node::Named(NamedConst::Pi) => write!(f, "pi"),
            Node::Named(NamedConst::E) => write!(f, "e"),
            Node::Var(i) => write!(f, "{}", self.coords[*i]),
            Node::Neg(a) => {
                write!(f, "(-")?;
                self.write_node(a, f)?;
                write!(f, ")")
            }
            Node::Binary(op, a, b) => {
                write!(f, "(")?;
                self.write_node(a, f)?;
                write!(f, " {} ", op.symbol())?;
                self.write_node(b, f)?;
                write!(f, ")")
            }
            Node::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                self.write_node(a, f)?;
                write!(f, ")")
            }
        }
    }
}

/// Canonical, fully parenthesised form. Re-parsing it yields the same tree.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_node(&self.root, f)
    }
}

fn domain(node: &Node, reason: &'static str) -> Error {
    Error::Domain {
        node: format!("{node:?}"),
        reason,
    }
}

fn eval_node(node: &Node, x: &[Dual]) -> Result<Dual> {
    Ok(match node {
        Node::Const(v) => Dual::constant(*v),
        Node::Named(c) => Dual::constant(c.value()),
        Node::Var(i) => x[*i].clone(),
        Node::Neg(a) => -eval_node(a, x)?,
        Node::Binary(op, a, b) => {
            let a = eval_node(a, x)?;
            let b = eval_node(b, x)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b.value == 0.0 {
                        return Err(domain(node, "division by zero"));
                    }
                    a / b
                }
                BinOp::Pow => pow(node, &a, &b)?,
            }
        }
        Node::Call(func, a) => {
            let a = eval_node(a, x)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Tanh => a.tanh(),
                Func::Abs => a.abs(),
                Func::Sqrt => {
                    if a.value < 0.0 {
                        return Err(domain(node, "square root of a negative number"));
                    }
                    if a.value == 0.0 && !a.is_constant() {
                        return Err(domain(node, "square root is not differentiable at 0"));
                    }
                    a.sqrt()
                }
            }
        }
    })
}

fn pow(node: &Node, base: &Dual, exponent: &Dual) -> Result<Dual> {
    let b = exponent.value;
    if exponent.is_constant() && b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        if base.value == 0.0 && b < 0.0 {
            return Err(domain(node, "zero raised to a negative power"));
        }
        return Ok(base.powi(b as i32));
    }
    if base.value > 0.0 {
        // a^b = exp(b ln a)
        let value = base.value.powf(b);
        let ln = base.value.ln();
        return Ok(Dual::combine(
            value,
            base,
            b * value / base.value,
            exponent,
            value * ln,
        ));
    }
    if base.value == 0.0 && exponent.is_constant() && b > 1.0 {
        return Ok(base.chain(0.0, 0.0));
    }
    Err(domain(node, "non-integer power of a non-positive base"))
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((Tok::End, start));
        };
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b',' => {
                self.pos += 1;
                Tok::Comma
            }
            b'0'..=b'9' | b'.' => self.number(start)?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while self.pos < bytes.len()
                    && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(self.src[start..self.pos].to_owned())
            }
            _ => {
                let ch = self.src[start..].chars().next().unwrap_or('?');
                return Err(ParseError::Syntax {
                    offset: start,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        };
        Ok((tok, start))
    }

    fn number(&mut self, start: usize) -> Result<Tok, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if self.pos < bytes.len() && bytes[self.pos] == b'.' {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        // Exponent only when followed by digits, so `2e` stays `2` then `e`.
        if self.pos < bytes.len() && matches!(bytes[self.pos], b'e' | b'E') {
            let mut look = self.pos + 1;
            if look < bytes.len() && matches!(bytes[look], b'+' | b'-') {
                look += 1;
            }
            if look < bytes.len() && bytes[look].is_ascii_digit() {
                self.pos = look;
                digits(&mut self.pos);
            }
        }
        let text = &self.src[start..self.pos];
        let value: f64 = text.parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: format!("malformed number `{text}`"),
        })?;
        if !value.is_finite() {
            return Err(ParseError::Syntax {
                offset: start,
                message: format!("number `{text}` out of range"),
            });
        }
        Ok(Tok::Num(value))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    coords: &'a [String],
    peeked: (Tok, usize),
}

impl<'a> Parser<'a> {
    fn new(src: &'a str, coords: &'a [String]) -> Result<Self, ParseError> {
        if src.trim().is_empty() {
            return Err(ParseError::Empty);
        }
        let mut lexer = Lexer { src, pos: 0 };
        let peeked = lexer.next_token()?;
        Ok(Parser {
            lexer,
            coords,
            peeked,
        })
    }

    fn advance(&mut self) -> Result<(Tok, usize), ParseError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn parse_all(mut self) -> Result<Node, ParseError> {
        let node = self.expr(0)?;
        match &self.peeked {
            (Tok::End, _) => Ok(node),
            (tok, offset) => Err(ParseError::Syntax {
                offset: *offset,
                message: format!("unexpected {tok:?}"),
            }),
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Node, ParseError> {
        let mut lhs = self.prefix()?;
        loop {
            let op = match self.peeked.0 {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                Tok::Op('^') => BinOp::Pow,
                _ => break,
            };
            let (l_bp, r_bp) = op.binding_power();
            if l_bp < min_bp {
                break;
            }
            self.advance()?;
            let rhs = self.expr(r_bp)?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> Result<Node, ParseError> {
        let (tok, offset) = self.advance()?;
        match tok {
            Tok::Num(v) => Ok(Node::Const(v)),
            Tok::Op('-') => Ok(Node::Neg(Box::new(self.expr(PREFIX_NEG_BP)?))),
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                Ok(inner)
            }
            Tok::Ident(name) => self.identifier(name, offset),
            Tok::End => Err(ParseError::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(ParseError::Syntax {
                offset,
                message: format!("unexpected {other:?}"),
            }),
        }
    }

    fn identifier(&mut self, name: String, offset: usize) -> Result<Node, ParseError> {
        if let Some(i) = self.coords.iter().position(|c| *c == name) {
            return Ok(Node::Var(i));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Named(NamedConst::Pi)),
            "e" => return Ok(Node::Named(NamedConst::E)),
            _ => {}
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ParseError::UnknownIdentifier { name, offset });
        };
        if self.peeked.0 != Tok::LParen {
            return Err(ParseError::Syntax {
                offset: self.peeked.1,
                message: format!("expected `(` after `{name}`"),
            });
        }
        self.advance()?;
        if self.peeked.0 == Tok::RParen {
            return Err(ParseError::Arity { name, found: 0 });
        }
        let arg = self.expr(0)?;
        let mut found = 1;
        while self.peeked.0 == Tok::Comma {
            self.advance()?;
            self.expr(0)?;
            found += 1;
        }
        if found != 1 {
            return Err(ParseError::Arity { name, found });
        }
        self.expect_rparen()?;
        Ok(Node::Call(func, Box::new(arg)))
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.advance()? {
            (Tok::RParen, _) => Ok(()),
            (tok, offset) => Err(ParseError::Syntax {
                offset,
                message: format!("expected `)`, found {tok:?}"),
            }),
        }
    }
}
