use thiserror::Error;

use super::{BinOp, Func, Node, NodeKind, Var};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalErrorKind {
    DivisionByZero,
    /// `log` of a non-positive value.
    LogDomain,
    /// `sqrt` of a negative value.
    SqrtDomain,
    /// Any other NaN or infinite intermediate.
    NonFinite,
    UnboundReference(String),
}

impl EvalErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            EvalErrorKind::DivisionByZero => "division_by_zero",
            EvalErrorKind::LogDomain => "log_domain",
            EvalErrorKind::SqrtDomain => "sqrt_domain",
            EvalErrorKind::NonFinite => "non_finite",
            EvalErrorKind::UnboundReference(_) => "unbound_reference",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("evaluation error ({}) at byte {position}{}", kind.code(), match kind {
    EvalErrorKind::UnboundReference(name) => format!(": '{name}' is not bound"),
    _ => String::new(),
})]
pub struct EvalError {
    pub kind: EvalErrorKind,
    pub position: usize,
}

pub(super) fn eval_node<T: Real>(
    node: &Node,
    tau: T,
    x: &[T],
    v: &[T],
    params: &[T],
    names: &[String],
) -> Result<T, EvalError> {
    let fail = |kind| EvalError {
        kind,
        position: node.pos,
    };
    let rec = |n: &Node| eval_node(n, tau, x, v, params, names);
    let value = match &node.kind {
        NodeKind::Num(c) => T::lit(*c),
        NodeKind::Var(Var::Tau) => tau,
        NodeKind::Var(Var::X(i)) => *x
            .get(*i)
            .ok_or_else(|| fail(EvalErrorKind::UnboundReference(format!("x{}", i + 1))))?,
        NodeKind::Var(Var::V(i)) => *v
            .get(*i)
            .ok_or_else(|| fail(EvalErrorKind::UnboundReference(format!("v{}", i + 1))))?,
        NodeKind::Param(i) => *params
            .get(*i)
            .ok_or_else(|| fail(EvalErrorKind::UnboundReference(names[*i].clone())))?,
        NodeKind::Neg(e) => -rec(e)?,
        NodeKind::Bin(op, l, r) => {
            let (a, b) = (rec(l)?, rec(r)?);
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == T::zero() {
                        return Err(fail(EvalErrorKind::DivisionByZero));
                    }
                    a / b
                }
                BinOp::Pow => a.powf(b),
            }
        }
        NodeKind::Call(func, e) => {
            let a = rec(e)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Tan => a.tan(),
                Func::Sinh => a.sinh(),
                Func::Cosh => a.cosh(),
                Func::Exp => a.exp(),
                Func::Log => {
                    if !(a > T::zero()) {
                        return Err(fail(EvalErrorKind::LogDomain));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < T::zero() {
                        return Err(fail(EvalErrorKind::SqrtDomain));
                    }
                    a.sqrt()
                }
                Func::Abs => a.abs(),
            }
        }
    };
    if !value.is_finite() {
        return Err(fail(EvalErrorKind::NonFinite));
    }
    Ok(value)
}
