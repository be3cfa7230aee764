//! Arithmetic expressions for right-hand sides `f(tau, x, v)`.
//!
//! Variables are `tau`, `x1..xn`, `v1..vn` (plus `x`, `v` when `n = 1`);
//! parameters are named at parse time and supplied positionally at
//! evaluation. Functions: `sin cos tan sinh cosh exp log sqrt abs`.
//! `^` is IEEE `pow`, right-associative, and binds tighter than unary minus.

mod eval;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{EvalError, EvalErrorKind};

use crate::ode::{RhsError, SecondOrderOde};
use crate::scalar::Real;

/// Deepest syntax tree accepted; long operator chains count too.
pub const MAX_TREE_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {position}: {message}{}", expected_suffix(.expected))]
pub struct ParseError {
    pub position: usize,
    pub message: String,
    pub expected: Vec<String>,
}

fn expected_suffix(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(" (expected {})", expected.join(", "))
    }
}

impl ParseError {
    fn new(position: usize, message: impl Into<String>, expected: &[&str]) -> Self {
        Self {
            position,
            message: message.into(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
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

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Sinh,
    Cosh,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub const ALL: [Func; 9] = [
        Func::Sin,
        Func::Cos,
        Func::Tan,
        Func::Sinh,
        Func::Cosh,
        Func::Exp,
        Func::Log,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Zero-based component index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Tau,
    X(usize),
    V(usize),
}

impl Var {
    fn resolve(name: &str, dim: usize) -> Option<Self> {
        match name {
            "tau" => return Some(Var::Tau),
            "x" if dim == 1 => return Some(Var::X(0)),
            "v" if dim == 1 => return Some(Var::V(0)),
            _ => {}
        }
        let (head, digits) = name.split_at(1);
        if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let k: usize = digits.parse().ok()?;
        if k == 0 || k > dim {
            return None;
        }
        match head {
            "x" => Some(Var::X(k - 1)),
            "v" => Some(Var::V(k - 1)),
            _ => None,
        }
    }

    fn is_reserved(name: &str) -> bool {
        name == "tau"
            || name == "x"
            || name == "v"
            || Var::resolve(name, usize::MAX).is_some()
            || Func::from_name(name).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum NodeKind {
    Num(f64),
    Var(Var),
    Param(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A syntax tree node and the byte offset it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Node {
    pub(crate) kind: NodeKind,
    pub(crate) pos: usize,
}

impl Node {
    fn binary(op: BinOp, lhs: Node, rhs: Node, pos: usize) -> Self {
        Node {
            kind: NodeKind::Bin(op, Box::new(lhs), Box::new(rhs)),
            pos,
        }
    }

    fn precedence(&self) -> u8 {
        match &self.kind {
            NodeKind::Bin(op, ..) => op.precedence(),
            NodeKind::Neg(_) => 3,
            _ => 5,
        }
    }

    fn depth(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(self, 1)];
        while let Some((node, d)) = stack.pop() {
            max = max.max(d);
            match &node.kind {
                NodeKind::Neg(e) | NodeKind::Call(_, e) => stack.push((e, d + 1)),
                NodeKind::Bin(_, l, r) => {
                    stack.push((l, d + 1));
                    stack.push((r, d + 1));
                }
                _ => {}
            }
        }
        max
    }
}

/// A parsed expression bound to an ODE dimension and a parameter list.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    root: Node,
    dim: usize,
    params: Vec<String>,
}

impl Expr {
    /// Parses `text` for an `n = dim` system with the given parameter names.
    pub fn parse(text: &str, dim: usize, params: &[&str]) -> Result<Self, ParseError> {
        if dim == 0 {
            return Err(ParseError::new(0, "dimension must be at least 1", &[]));
        }
        let mut names: Vec<String> = Vec::with_capacity(params.len());
        for p in params {
            let valid = p.bytes().next().is_some_and(|b| b.is_ascii_alphabetic() || b == b'_')
                && p.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_');
            if !valid || Var::is_reserved(p) || names.iter().any(|n| n == p) {
                return Err(ParseError::new(
                    0,
                    format!("invalid, reserved or duplicate parameter name '{p}'"),
                    &["identifier"],
                ));
            }
            names.push(p.to_string());
        }
        let root = parser::Parser::new(text, dim, &names)?.parse()?;
        if root.depth() > MAX_TREE_DEPTH {
            return Err(ParseError::new(0, "expression nested too deeply", &[]));
        }
        Ok(Self {
            root,
            dim,
            params: names,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    /// Evaluates with `params` in the order given at parse time.
    pub fn eval<T: Real>(&self, tau: T, x: &[T], v: &[T], params: &[T]) -> Result<T, EvalError> {
        eval::eval_node(&self.root, tau, x, v, params, &self.params)
    }

    /// Evaluates with parameters looked up by name.
    pub fn eval_named<T: Real>(
        &self,
        tau: T,
        x: &[T],
        v: &[T],
        params: &std::collections::HashMap<String, T>,
    ) -> Result<T, EvalError> {
        let mut values = Vec::with_capacity(self.params.len());
        for name in &self.params {
            match params.get(name) {
                Some(p) => values.push(*p),
                None => {
                    return Err(EvalError {
                        kind: EvalErrorKind::UnboundReference(name.clone()),
                        position: 0,
                    })
                }
            }
        }
        self.eval(tau, x, v, &values)
    }

    fn fmt_node(&self, node: &Node, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrapped = |child: &Node, paren: bool, f: &mut fmt::Formatter<'_>| -> fmt::Result {
            if paren {
                write!(f, "(")?;
                self.fmt_node(child, f)?;
                write!(f, ")")
            } else {
                self.fmt_node(child, f)
            }
        };
        match &node.kind {
            NodeKind::Num(x) => write!(f, "{x}"),
            NodeKind::Var(Var::Tau) => write!(f, "tau"),
            NodeKind::Var(Var::X(i)) if self.dim == 1 && *i == 0 => write!(f, "x"),
            NodeKind::Var(Var::V(i)) if self.dim == 1 && *i == 0 => write!(f, "v"),
            NodeKind::Var(Var::X(i)) => write!(f, "x{}", i + 1),
            NodeKind::Var(Var::V(i)) => write!(f, "v{}", i + 1),
            NodeKind::Param(i) => write!(f, "{}", self.params[*i]),
            NodeKind::Neg(e) => {
                write!(f, "-")?;
                wrapped(e, e.precedence() < 3, f)
            }
            NodeKind::Call(func, e) => {
                write!(f, "{}(", func.name())?;
                self.fmt_node(e, f)?;
                write!(f, ")")
            }
            NodeKind::Bin(op, l, r) => {
                let p = op.precedence();
                let (left_paren, right_paren) = if *op == BinOp::Pow {
                    (l.precedence() < 5, r.precedence() < 3)
                } else {
                    (l.precedence() < p, r.precedence() <= p)
                };
                wrapped(l, left_paren, f)?;
                write!(f, "{}", op.symbol())?;
                wrapped(r, right_paren, f)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_node(&self.root, f)
    }
}

/// The system `x''_k = exprs[k](tau, x, v)` with fixed parameter values.
pub fn ode_from_exprs<T: Real>(label: impl Into<String>, exprs: Vec<Expr>, params: Vec<T>) -> SecondOrderOde<T> {
    let dim = exprs.len();
    SecondOrderOde::try_new(dim, label, move |tau, x, v, out| {
        for (slot, e) in out.iter_mut().zip(&exprs) {
            *slot = e.eval(tau, x, v, &params).map_err(|err| RhsError(err.to_string()))?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval1(text: &str) -> f64 {
        Expr::parse(text, 1, &[]).unwrap().eval(0.0, &[0.0], &[0.0], &[]).unwrap()
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(eval1("-9.8"), -9.8);
        assert_eq!(eval1("2^3^2"), 512.0);
        assert_eq!(eval1("-2^2"), -4.0);
        assert_eq!(eval1("(-2)^2"), 4.0);
        assert_eq!(eval1("2^-1"), 0.5);
        assert_eq!(eval1("1 - 2 - 3"), -4.0);
        assert_eq!(eval1("8 / 4 / 2"), 1.0);
        assert_eq!(eval1("1 + 2*3"), 7.0);
        assert_eq!(eval1("--3"), 3.0);
        assert_eq!(eval1("2*-3"), -6.0);
    }

    #[test]
    fn conic_rhs() {
        let e = Expr::parse("k^2*x + g", 1, &["k", "g"]).unwrap();
        assert_eq!(e.eval(0.0, &[2.0], &[0.0], &[1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn variables() {
        let e = Expr::parse("v", 1, &[]).unwrap();
        assert_eq!(e.eval(0.0, &[0.0], &[3.0], &[]).unwrap(), 3.0);
        let e = Expr::parse("sin(tau)*x", 1, &[]).unwrap();
        assert_eq!(e.eval(std::f64::consts::FRAC_PI_2, &[2.0], &[0.0], &[]).unwrap(), 2.0);
        let e = Expr::parse("x1 + 10*x2 + 100*v2", 2, &[]).unwrap();
        assert_eq!(e.eval(0.0, &[1.0, 2.0], &[0.0, 3.0], &[]).unwrap(), 321.0);
        assert!(Expr::parse("x", 2, &[]).is_err());
        assert!(Expr::parse("x3", 2, &[]).is_err());
        assert!(Expr::parse("x0", 2, &[]).is_err());
        assert!(Expr::parse("x01", 2, &[]).is_err());
    }

    #[test]
    fn parse_errors() {
        let cases = [
            ("", 0),
            ("y + 1", 0),
            ("1 + foo", 4),
            ("sin(1, 2)", 5),
            ("sin()", 4),
            ("sin", 0),
            ("bogus(1)", 0),
            ("(1 + 2", 6),
            ("1 + 2)", 5),
            ("1 2", 2),
            ("1 +", 3),
            ("*2", 0),
        ];
        for (text, pos) in cases {
            let err = Expr::parse(text, 1, &[]).unwrap_err();
            assert_eq!(err.position, pos, "{text}: {err}");
            assert!(err.position <= text.len());
        }
        let err = Expr::parse("q", 1, &[]).unwrap_err();
        assert!(err.message.contains("unknown identifier"));
        assert!(!err.expected.is_empty());
        assert!(Expr::parse("1", 1, &["x"]).is_err());
        assert!(Expr::parse("1", 1, &["sin"]).is_err());
        assert!(Expr::parse("1", 1, &["k", "k"]).is_err());
        assert!(Expr::parse("1", 1, &["2k"]).is_err());
    }

    #[test]
    fn deep_nesting_is_rejected() {
        let deep = format!("{}1{}", "(".repeat(5000), ")".repeat(5000));
        assert!(Expr::parse(&deep, 1, &[]).is_err());
        let negs = format!("{}1", "-".repeat(5000));
        assert!(Expr::parse(&negs, 1, &[]).is_err());
        let pows = vec!["2"; 5000].join("^");
        assert!(Expr::parse(&pows, 1, &[]).is_err());
        let chain = vec!["1"; 100_000].join("+");
        assert!(Expr::parse(&chain, 1, &[]).is_err());
        let ok = vec!["1"; 150].join("+");
        assert_eq!(Expr::parse(&ok, 1, &[]).unwrap().eval(0.0, &[0.0], &[0.0], &[]).unwrap(), 150.0);
        assert!(Expr::parse(&format!("{}1{}", "(".repeat(50), ")".repeat(50)), 1, &[]).is_ok());
    }

    #[test]
    fn pretty_printing() {
        let cases = [
            ("k^2*x+g", "k^2*x + g"),
            ("-2^2", "-2^2"),
            ("(-2)^2", "(-2)^2"),
            ("2^3^2", "2^3^2"),
            ("(2^3)^2", "(2^3)^2"),
            ("a-(b-c)", "a - (b - c)"),
            ("(a-b)-c", "a - b - c"),
            ("a/(b*c)", "a/(b*c)"),
            ("-(x+1)", "-(x + 1)"),
            ("2^-x", "2^-x"),
            ("sin( tau )*  x", "sin(tau)*x"),
        ];
        for (text, want) in cases {
            let e = Expr::parse(text, 1, &["k", "g", "a", "b", "c"]).unwrap();
            assert_eq!(e.to_string(), want);
        }
    }

    #[test]
    fn ode_from_expressions() {
        let ode = ode_from_exprs(
            "pair",
            vec![
                Expr::parse("-x2", 2, &["w"]).unwrap(),
                Expr::parse("w*x1", 2, &["w"]).unwrap(),
            ],
            vec![4.0],
        );
        assert_eq!(ode.eval_rhs(0.0, &[1.0, 2.0], &[0.0, 0.0]).unwrap(), vec![-2.0, 4.0]);
        let bad = ode_from_exprs("bad", vec![Expr::parse("1/x", 1, &[]).unwrap()], Vec::<f64>::new());
        assert!(bad.eval_rhs(0.0, &[0.0], &[0.0]).is_err());
    }
}
