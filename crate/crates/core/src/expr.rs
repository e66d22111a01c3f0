//! A small arithmetic expression language for scenario fields.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, the functions
//! `exp sin cos sqrt`, numeric literals, the coordinates `x1 .. x9` and the
//! radius `r`. Multiplication may also be written with a middle dot.
//! Expressions evaluate over any [`Scalar`], so the same tree yields values,
//! gradients or Hessians.

use crate::error::{Error, Result};
use crate::jet::Scalar;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Sin,
    Cos,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        match name {
            "exp" => Some(Func::Exp),
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Zero-based coordinate index.
    Var(usize),
    Radius,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr> {
        Self::parse_at(text, 1, 1)
    }

    /// Parses `text`, reporting error positions relative to the given line and
    /// starting column.
    pub fn parse_at(text: &str, line: usize, column: usize) -> Result<Expr> {
        let tokens = tokenize(text).map_err(|(c, m)| Error::parse(line, column + c, m))?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: text.chars().count(),
        };
        let e = p
            .expr()
            .and_then(|e| match p.peek() {
                None => Ok(e),
                Some(t) => Err((t.col, format!("unexpected {}", t.kind))),
            })
            .map_err(|(c, m)| Error::parse(line, column + c, m))?;
        Ok(e)
    }

    pub fn eval<S: Scalar>(&self, x: &[S]) -> S {
        match self {
            Expr::Num(v) => S::constant(*v),
            Expr::Var(i) => x[*i],
            Expr::Radius => S::radius(x),
            Expr::Neg(a) => -a.eval(x),
            Expr::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
            Expr::Bin(op, a, b) => match op {
                BinOp::Add => a.eval(x) + b.eval(x),
                BinOp::Sub => a.eval(x) - b.eval(x),
                BinOp::Mul => a.eval(x) * b.eval(x),
                BinOp::Div => a.eval(x) / b.eval(x),
                BinOp::Pow => {
                    let base = a.eval(x);
                    match b.constant_value() {
                        Some(p) if p.fract() == 0.0 && p.abs() < i32::MAX as f64 => {
                            base.powi(p as i32)
                        }
                        Some(p) => base.powf(p),
                        None => (b.eval(x) * base.ln()).exp(),
                    }
                }
            },
        }
    }

    /// Value when the expression has no variables.
    pub fn constant_value(&self) -> Option<f64> {
        if self.uses_variables() {
            None
        } else {
            Some(self.eval::<f64>(&[]))
        }
    }

    fn uses_variables(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) | Expr::Radius => true,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses_variables(),
            Expr::Bin(_, a, b) => a.uses_variables() || b.uses_variables(),
        }
    }

    /// Number of coordinates referenced (highest index + 1).
    pub fn coordinate_count(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Radius => 0,
            Expr::Var(i) => i + 1,
            Expr::Neg(a) | Expr::Call(_, a) => a.coordinate_count(),
            Expr::Bin(_, a, b) => a.coordinate_count().max(b.coordinate_count()),
        }
    }

    /// True when the expression depends on position only through `r`.
    pub fn is_radial(&self) -> bool {
        self.coordinate_count() == 0
    }

    /// Evaluates a radial expression at radius `r` with first and second
    /// derivatives in `r`.
    pub fn radial_derivatives(&self, r: f64) -> (f64, f64, f64) {
        let j = self.eval_radial(crate::jet::Jet2::<1>::variable(0, r));
        (j.value, j.grad[0], j.hess[(0, 0)])
    }

    fn eval_radial<S: Scalar>(&self, r: S) -> S {
        match self {
            Expr::Num(v) => S::constant(*v),
            Expr::Var(_) => panic!("radial evaluation of a coordinate expression"),
            Expr::Radius => r,
            Expr::Neg(a) => -a.eval_radial(r),
            Expr::Call(f, a) => {
                let v = a.eval_radial(r);
                match f {
                    Func::Exp => v.exp(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
            Expr::Bin(op, a, b) => match op {
                BinOp::Add => a.eval_radial(r) + b.eval_radial(r),
                BinOp::Sub => a.eval_radial(r) - b.eval_radial(r),
                BinOp::Mul => a.eval_radial(r) * b.eval_radial(r),
                BinOp::Div => a.eval_radial(r) / b.eval_radial(r),
                BinOp::Pow => {
                    let base = a.eval_radial(r);
                    match b.constant_value() {
                        Some(p) if p.fract() == 0.0 && p.abs() < i32::MAX as f64 => {
                            base.powi(p as i32)
                        }
                        Some(p) => base.powf(p),
                        None => (b.eval_radial(r) * base.ln()).exp(),
                    }
                }
            },
        }
    }
}

/// Canonical, fully parenthesized form that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Radius => write!(f, "r"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(v) => write!(f, "number {v}"),
            Tok::Ident(s) => write!(f, "identifier '{s}'"),
            Tok::Op(c) => write!(f, "'{c}'"),
            Tok::LParen => write!(f, "'('"),
            Tok::RParen => write!(f, "')'"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Tok,
    col: usize,
}

type PResult<T> = std::result::Result<T, (usize, String)>;

fn tokenize(text: &str) -> PResult<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let col = i;
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v: f64 = s
                .parse()
                .map_err(|_| (col, format!("malformed number '{s}'")))?;
            out.push(Token {
                kind: Tok::Num(v),
                col,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                kind: Tok::Ident(chars[start..i].iter().collect()),
                col,
            });
        } else {
            let kind = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '·' => Tok::Op('*'),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                _ => return Err((col, format!("unexpected character '{c}'"))),
            };
            out.push(Token { kind, col });
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn eat_op(&mut self, ops: &[char]) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: Tok::Op(c), ..
            }) if ops.contains(c) => {
                let c = *c;
                self.pos += 1;
                Some(c)
            }
            _ => None,
        }
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        while let Some(op) = self.eat_op(&['+', '-']) {
            let rhs = self.term()?;
            let op = if op == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.eat_op(&['*', '/']) {
            let rhs = self.unary()?;
            let op = if op == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_op(&['-']).is_some() {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat_op(&['+']).is_some() {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let base = self.atom()?;
        if self.eat_op(&['^']).is_some() {
            // right associative, binds tighter than unary minus on the left
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let end = self.end;
        let Some(tok) = self.next() else {
            return Err((end, "unexpected end of expression".into()));
        };
        match tok.kind {
            Tok::Num(v) => Ok(Expr::Num(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen(tok.col)?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "r" {
                    return Ok(Expr::Radius);
                }
                if let Some(idx) = name
                    .strip_prefix('x')
                    .and_then(|s| s.parse::<usize>().ok())
                    .filter(|&k| (1..=9).contains(&k))
                {
                    return Ok(Expr::Var(idx - 1));
                }
                if let Some(func) = Func::from_name(&name) {
                    match self.next() {
                        Some(Token {
                            kind: Tok::LParen,
                            col,
                        }) => {
                            let arg = self.expr()?;
                            self.expect_rparen(col)?;
                            return Ok(Expr::Call(func, Box::new(arg)));
                        }
                        _ => return Err((tok.col, format!("function '{name}' needs '('"))),
                    }
                }
                if self
                    .peek()
                    .is_some_and(|t| matches!(t.kind, Tok::LParen))
                {
                    Err((tok.col, format!("unknown function '{name}'")))
                } else {
                    Err((tok.col, format!("unknown variable '{name}'")))
                }
            }
            other => Err((tok.col, format!("unexpected {other}"))),
        }
    }

    fn expect_rparen(&mut self, open_col: usize) -> PResult<()> {
        match self.next() {
            Some(Token {
                kind: Tok::RParen, ..
            }) => Ok(()),
            Some(t) => Err((t.col, format!("expected ')' but found {}", t.kind))),
            None => Err((open_col, "unclosed '('".into())),
        }
    }
}
