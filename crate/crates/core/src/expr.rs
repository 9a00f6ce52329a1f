//! Arithmetic expressions over the spatial variables `x`, `y` and the state
//! variable `u`, with exact forward-mode differentiation with respect to `u`.
//!
//! The grammar, loosest to tightest binding: `+ -`, `* /`, unary minus, `^`
//! (right-associative), atoms. `pi` is a named constant; the single-argument
//! functions `sin cos tan tanh atan exp log sqrt abs` are available. `log` is
//! the natural logarithm.
//!
//! Expressions are immutable after parsing and evaluation is reentrant, so a
//! parsed expression can be shared freely between concurrent solves.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("{message} at offset {offset}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("unknown function `{name}` at offset {offset}")]
    UnknownFunction { name: String, offset: usize },
    #[error("domain error in `{context}`: {detail}")]
    Domain { context: String, detail: String },
    #[error("`{context}` is not differentiable in u")]
    NonDifferentiable { context: String },
}

/// Variables an expression may reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    U,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Tanh,
    Atan,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Tanh => "tanh",
            Func::Atan => "atan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "tanh" => Func::Tanh,
            "atan" => Func::Atan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression.
#[derive(Debug, Clone)]
pub struct Expr {
    source: String,
    root: Node,
}

/// Value together with its derivative in `u`.
#[derive(Clone, Copy, Debug)]
struct Dual {
    v: f64,
    d: f64,
}

impl Expr {
    /// Parses `text` into an expression tree.
    pub fn parse(text: &str) -> Result<Expr, ExprError> {
        let tokens = lex(text)?;
        let mut p = Parser {
            src: text,
            tokens,
            pos: 0,
        };
        let root = p.parse_sum()?;
        if p.pos < p.tokens.len() {
            let t = &p.tokens[p.pos];
            return Err(ExprError::Syntax {
                offset: t.start,
                message: format!("unexpected trailing `{}`", &text[t.start..t.end]),
            });
        }
        Ok(Expr {
            source: text.to_string(),
            root,
        })
    }

    /// The text the expression was parsed from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the expression references `var`.
    pub fn uses_var(&self, var: Var) -> bool {
        fn walk(n: &Node, var: Var) -> bool {
            match n {
                Node::Num(_) => false,
                Node::Var(v) => *v == var,
                Node::Neg(c) => walk(c, var),
                Node::Bin(_, l, r) => walk(l, var) || walk(r, var),
                Node::Call(_, c) => walk(c, var),
            }
        }
        walk(&self.root, var)
    }

    /// Evaluates the expression at the given bindings.
    pub fn eval(&self, x: f64, y: f64, u: f64) -> Result<f64, ExprError> {
        eval_node(&self.root, x, y, u)
    }

    /// Evaluates the expression and its `u`-derivative in one pass.
    ///
    /// Fails on `abs` of a `u`-dependent subexpression; run
    /// [`Expr::ensure_differentiable_u`] first to reject such expressions up
    /// front.
    pub fn eval_du(&self, x: f64, y: f64, u: f64) -> Result<(f64, f64), ExprError> {
        let d = eval_dual(&self.root, x, y, u)?;
        Ok((d.v, d.d))
    }

    /// Rejects expressions that apply `abs` to a `u`-dependent subexpression.
    pub fn ensure_differentiable_u(&self) -> Result<(), ExprError> {
        fn walk(n: &Node) -> Result<(), ExprError> {
            match n {
                Node::Num(_) | Node::Var(_) => Ok(()),
                Node::Neg(c) => walk(c),
                Node::Bin(_, l, r) => {
                    walk(l)?;
                    walk(r)
                }
                Node::Call(f, c) => {
                    if *f == Func::Abs && node_uses_u(c) {
                        return Err(ExprError::NonDifferentiable {
                            context: render(n),
                        });
                    }
                    walk(c)
                }
            }
        }
        walk(&self.root)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", render(&self.root))
    }
}

fn node_uses_u(n: &Node) -> bool {
    match n {
        Node::Num(_) => false,
        Node::Var(v) => *v == Var::U,
        Node::Neg(c) => node_uses_u(c),
        Node::Bin(_, l, r) => node_uses_u(l) || node_uses_u(r),
        Node::Call(_, c) => node_uses_u(c),
    }
}

// ---------------------------------------------------------------------------
// Lexer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
enum TokKind {
    Num(f64),
    Ident,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

#[derive(Debug, Clone, Copy)]
struct Token {
    kind: TokKind,
    start: usize,
    end: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let bytes = src.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')' => {
                let kind = match c {
                    b'+' => TokKind::Plus,
                    b'-' => TokKind::Minus,
                    b'*' => TokKind::Star,
                    b'/' => TokKind::Slash,
                    b'^' => TokKind::Caret,
                    b'(' => TokKind::LParen,
                    _ => TokKind::RParen,
                };
                i += 1;
                toks.push(Token {
                    kind,
                    start,
                    end: i,
                });
            }
            b'0'..=b'9' => {
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
                let text = &src[start..i];
                let value: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    offset: start,
                    message: format!("malformed number `{text}`"),
                })?;
                toks.push(Token {
                    kind: TokKind::Num(value),
                    start,
                    end: i,
                });
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push(Token {
                    kind: TokKind::Ident,
                    start,
                    end: i,
                });
            }
            _ => {
                return Err(ExprError::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &src[i..i + 1]),
                });
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eof_offset(&self) -> usize {
        self.src.len()
    }

    fn parse_sum(&mut self) -> Result<Node, ExprError> {
        let mut node = self.parse_term()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokKind::Plus => BinOp::Add,
                TokKind::Minus => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_term()?;
            node = Node::Bin(op, Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn parse_term(&mut self) -> Result<Node, ExprError> {
        let mut node = self.parse_unary()?;
        while let Some(t) = self.peek() {
            let op = match t.kind {
                TokKind::Star => BinOp::Mul,
                TokKind::Slash => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.parse_unary()?;
            node = Node::Bin(op, Box::new(node), Box::new(rhs));
        }
        Ok(node)
    }

    fn parse_unary(&mut self) -> Result<Node, ExprError> {
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Minus {
                self.pos += 1;
                let inner = self.parse_unary()?;
                return Ok(Node::Neg(Box::new(inner)));
            }
        }
        self.parse_power()
    }

    fn parse_power(&mut self) -> Result<Node, ExprError> {
        let base = self.parse_atom()?;
        if let Some(t) = self.peek() {
            if t.kind == TokKind::Caret {
                self.pos += 1;
                // The exponent re-enters at unary level, so `x^-2` and
                // `x^2^3` (right-associative) both parse.
                let exp = self.parse_unary()?;
                return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
            }
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<Node, ExprError> {
        let t = match self.peek() {
            Some(t) => *t,
            None => {
                return Err(ExprError::Syntax {
                    offset: self.eof_offset(),
                    message: "unexpected end of expression".into(),
                })
            }
        };
        match t.kind {
            TokKind::Num(v) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            TokKind::LParen => {
                self.pos += 1;
                let inner = self.parse_sum()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            TokKind::Ident => {
                self.pos += 1;
                let name = &self.src[t.start..t.end];
                let is_call = matches!(self.peek(), Some(n) if n.kind == TokKind::LParen);
                if is_call {
                    let func = Func::from_name(name).ok_or_else(|| ExprError::UnknownFunction {
                        name: name.to_string(),
                        offset: t.start,
                    })?;
                    self.pos += 1; // consume `(`
                    let arg = self.parse_sum()?;
                    self.expect_rparen()?;
                    Ok(Node::Call(func, Box::new(arg)))
                } else {
                    match name {
                        "x" => Ok(Node::Var(Var::X)),
                        "y" => Ok(Node::Var(Var::Y)),
                        "u" => Ok(Node::Var(Var::U)),
                        "pi" => Ok(Node::Num(std::f64::consts::PI)),
                        _ => Err(ExprError::UnknownIdentifier {
                            name: name.to_string(),
                            offset: t.start,
                        }),
                    }
                }
            }
            _ => Err(ExprError::Syntax {
                offset: t.start,
                message: format!("unexpected `{}`", &self.src[t.start..t.end]),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(t) if t.kind == TokKind::RParen => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(ExprError::Syntax {
                offset: t.start,
                message: "unbalanced parenthesis".into(),
            }),
            None => Err(ExprError::Syntax {
                offset: self.eof_offset(),
                message: "unbalanced parenthesis".into(),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

fn domain_err(n: &Node, detail: impl Into<String>) -> ExprError {
    ExprError::Domain {
        context: render(n),
        detail: detail.into(),
    }
}

fn finite_or(n: &Node, v: f64) -> Result<f64, ExprError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain_err(n, "non-finite result"))
    }
}

fn eval_node(n: &Node, x: f64, y: f64, u: f64) -> Result<f64, ExprError> {
    let v = match n {
        Node::Num(v) => *v,
        Node::Var(Var::X) => x,
        Node::Var(Var::Y) => y,
        Node::Var(Var::U) => u,
        Node::Neg(c) => -eval_node(c, x, y, u)?,
        Node::Bin(op, l, r) => {
            let a = eval_node(l, x, y, u)?;
            let b = eval_node(r, x, y, u)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(domain_err(n, "division by zero"));
                    }
                    a / b
                }
                BinOp::Pow => pow_value(n, a, b)?,
            }
        }
        Node::Call(f, c) => {
            let a = eval_node(c, x, y, u)?;
            call_value(n, *f, a)?
        }
    };
    finite_or(n, v)
}

fn pow_value(n: &Node, a: f64, b: f64) -> Result<f64, ExprError> {
    if a < 0.0 && b.fract() != 0.0 {
        return Err(domain_err(n, "negative base with non-integer exponent"));
    }
    if a == 0.0 && b < 0.0 {
        return Err(domain_err(n, "zero base with negative exponent"));
    }
    Ok(a.powf(b))
}

fn call_value(n: &Node, f: Func, a: f64) -> Result<f64, ExprError> {
    Ok(match f {
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Tan => a.tan(),
        Func::Tanh => a.tanh(),
        Func::Atan => a.atan(),
        Func::Exp => a.exp(),
        Func::Log => {
            if a <= 0.0 {
                return Err(domain_err(n, "logarithm of a non-positive value"));
            }
            a.ln()
        }
        Func::Sqrt => {
            if a < 0.0 {
                return Err(domain_err(n, "square root of a negative value"));
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
    })
}

fn eval_dual(n: &Node, x: f64, y: f64, u: f64) -> Result<Dual, ExprError> {
    let out = match n {
        Node::Num(v) => Dual { v: *v, d: 0.0 },
        Node::Var(Var::X) => Dual { v: x, d: 0.0 },
        Node::Var(Var::Y) => Dual { v: y, d: 0.0 },
        Node::Var(Var::U) => Dual { v: u, d: 1.0 },
        Node::Neg(c) => {
            let a = eval_dual(c, x, y, u)?;
            Dual { v: -a.v, d: -a.d }
        }
        Node::Bin(op, l, r) => {
            let a = eval_dual(l, x, y, u)?;
            let b = eval_dual(r, x, y, u)?;
            match op {
                BinOp::Add => Dual {
                    v: a.v + b.v,
                    d: a.d + b.d,
                },
                BinOp::Sub => Dual {
                    v: a.v - b.v,
                    d: a.d - b.d,
                },
                BinOp::Mul => Dual {
                    v: a.v * b.v,
                    d: a.d * b.v + a.v * b.d,
                },
                BinOp::Div => {
                    if b.v == 0.0 {
                        return Err(domain_err(n, "division by zero"));
                    }
                    Dual {
                        v: a.v / b.v,
                        d: (a.d * b.v - a.v * b.d) / (b.v * b.v),
                    }
                }
                BinOp::Pow => {
                    let v = pow_value(n, a.v, b.v)?;
                    let mut d = 0.0;
                    if a.d != 0.0 {
                        d += b.v * a.v.powf(b.v - 1.0) * a.d;
                    }
                    if b.d != 0.0 {
                        if a.v <= 0.0 {
                            return Err(domain_err(
                                n,
                                "u-dependent exponent over a non-positive base",
                            ));
                        }
                        d += v * a.v.ln() * b.d;
                    }
                    Dual { v, d }
                }
            }
        }
        Node::Call(f, c) => {
            let a = eval_dual(c, x, y, u)?;
            let v = call_value(n, *f, a.v)?;
            let d = match f {
                Func::Sin => a.v.cos() * a.d,
                Func::Cos => -a.v.sin() * a.d,
                Func::Tan => {
                    let co = a.v.cos();
                    a.d / (co * co)
                }
                Func::Tanh => (1.0 - v * v) * a.d,
                Func::Atan => a.d / (1.0 + a.v * a.v),
                Func::Exp => v * a.d,
                Func::Log => a.d / a.v,
                Func::Sqrt => {
                    if a.d == 0.0 {
                        0.0
                    } else {
                        a.d / (2.0 * v)
                    }
                }
                Func::Abs => {
                    if a.d != 0.0 {
                        return Err(ExprError::NonDifferentiable {
                            context: render(n),
                        });
                    }
                    0.0
                }
            };
            Dual { v, d }
        }
    };
    if !out.v.is_finite() || !out.d.is_finite() {
        return Err(domain_err(n, "non-finite result"));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Printer
// ---------------------------------------------------------------------------

/// Binding strength. Atoms are 5; parentheses are inserted exactly where
/// reparsing would otherwise regroup the tree (floating point evaluation is
/// order-sensitive, so regrouping is not harmless).
fn prec(n: &Node) -> u8 {
    match n {
        Node::Bin(BinOp::Add, ..) | Node::Bin(BinOp::Sub, ..) => 1,
        Node::Bin(BinOp::Mul, ..) | Node::Bin(BinOp::Div, ..) => 2,
        Node::Neg(_) => 3,
        Node::Bin(BinOp::Pow, ..) => 4,
        Node::Num(_) | Node::Var(_) | Node::Call(..) => 5,
    }
}

fn render(n: &Node) -> String {
    fn wrap(child: &Node, min: u8) -> String {
        if prec(child) < min {
            format!("({})", render(child))
        } else {
            render(child)
        }
    }
    match n {
        Node::Num(v) => format!("{v}"),
        Node::Var(Var::X) => "x".into(),
        Node::Var(Var::Y) => "y".into(),
        Node::Var(Var::U) => "u".into(),
        Node::Neg(c) => format!("-{}", wrap(c, 3)),
        Node::Bin(op, l, r) => match op {
            BinOp::Add => format!("{} + {}", wrap(l, 1), wrap(r, 2)),
            BinOp::Sub => format!("{} - {}", wrap(l, 1), wrap(r, 2)),
            BinOp::Mul => format!("{}*{}", wrap(l, 2), wrap(r, 3)),
            BinOp::Div => format!("{}/{}", wrap(l, 2), wrap(r, 3)),
            BinOp::Pow => format!("{}^{}", wrap(l, 5), wrap(r, 3)),
        },
        Node::Call(f, c) => format!("{}({})", f.name(), render(c)),
    }
}
