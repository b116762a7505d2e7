//! Operator semantics shared by every evaluation context.
//!
//! Slot access, function calls and the two search forms are delegated to an
//! [`Env`]; the engine supplies a demand-driven environment, constraint
//! checking supplies one that only reads working memory.

use thiserror::Error;

use crate::expr::{BinaryOp, Expression, UnaryOp};
use crate::value::{ListValue, ScalarKind, Value, ValueKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("`{op}` is not defined for {left} and {right}")]
    KindMismatch { op: &'static str, left: ValueKind, right: ValueKind },
    #[error("`{op}` is not defined for {operand}")]
    BadOperand { op: &'static str, operand: ValueKind },
    #[error("list elements must share one scalar kind")]
    MixedList,
    #[error("condition evaluated to {0}, expected boolean")]
    BadCondition(ValueKind),
    #[error("unknown extern function `{0}`")]
    UnknownExtern(String),
    #[error("extern `{name}` takes {expected} arguments, got {found}")]
    ExternArity { name: String, expected: usize, found: usize },
    #[error("extern `{name}` failed: {message}")]
    ExternFailed { name: String, message: String },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("frame `{frame}` has no slot `{slot}`")]
    UnknownSlot { frame: String, slot: String },
    #[error("slot {frame}.{slot} expects {expected}, got {found}")]
    SlotType { frame: String, slot: String, expected: ValueKind, found: ValueKind },
    #[error("slot {frame}.{slot} is read-only")]
    ReadOnly { frame: String, slot: String },
    #[error("{0}")]
    Data(String),
    #[error("remote: {0}")]
    Remote(String),
}

/// Evaluation context.
pub trait Env {
    /// Non-local exit: at least evaluation errors, possibly suspension.
    type Stop: From<EvalError>;

    fn slot(&mut self, qualifier: Option<&str>, name: &str) -> Result<Value, Self::Stop>;
    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Self::Stop>;
    fn exists(&mut self, var: &str, root: &str, condition: &Expression) -> Result<Value, Self::Stop>;
    fn specialize(&mut self, root: &str) -> Result<Value, Self::Stop>;
}

/// Evaluates `expr`. Operands are evaluated strictly left to right except
/// `and`/`or`, which stop as soon as the result is decided. `Unknown`
/// propagates through every operator (three-valued logic for booleans).
pub fn eval<E: Env>(env: &mut E, expr: &Expression) -> Result<Value, E::Stop> {
    match expr {
        Expression::Literal(v) => Ok(v.clone()),
        Expression::SlotRef { frame, slot } => env.slot(frame.as_deref(), slot),
        Expression::Unary(op, e) => {
            let v = eval(env, e)?;
            Ok(unary(*op, v)?)
        }
        Expression::Binary(BinaryOp::And, l, r) => {
            let lv = eval(env, l)?;
            let lb = truth(&lv, "and")?;
            if lb == Some(false) {
                return Ok(Value::Boolean(false));
            }
            let rb = truth(&eval(env, r)?, "and")?;
            Ok(match (lb, rb) {
                (_, Some(false)) => Value::Boolean(false),
                (Some(true), Some(true)) => Value::Boolean(true),
                _ => Value::Unknown,
            })
        }
        Expression::Binary(BinaryOp::Or, l, r) => {
            let lv = eval(env, l)?;
            let lb = truth(&lv, "or")?;
            if lb == Some(true) {
                return Ok(Value::Boolean(true));
            }
            let rb = truth(&eval(env, r)?, "or")?;
            Ok(match (lb, rb) {
                (_, Some(true)) => Value::Boolean(true),
                (Some(false), Some(false)) => Value::Boolean(false),
                _ => Value::Unknown,
            })
        }
        Expression::Binary(op, l, r) => {
            let lv = eval(env, l)?;
            let rv = eval(env, r)?;
            Ok(binary(*op, lv, rv)?)
        }
        Expression::Call { name, args } => {
            let mut values = Vec::with_capacity(args.len());
            for a in args {
                values.push(eval(env, a)?);
            }
            if values.iter().any(Value::is_unknown) {
                return Ok(Value::Unknown);
            }
            env.call(name, values)
        }
        Expression::Exists { var, root, condition } => env.exists(var, root, condition),
        Expression::Specialize { root } => env.specialize(root),
        Expression::List(items) => {
            let mut values = Vec::with_capacity(items.len());
            for a in items {
                values.push(eval(env, a)?);
            }
            Ok(list(values)?)
        }
    }
}

fn truth(v: &Value, op: &'static str) -> Result<Option<bool>, EvalError> {
    match v {
        Value::Boolean(b) => Ok(Some(*b)),
        Value::Unknown => Ok(None),
        other => Err(EvalError::BadOperand { op, operand: other.kind() }),
    }
}

/// Truth of a rule condition. A frame reference (the result of a successful
/// `exists`) counts as true; `Unknown` yields `None`.
pub fn condition_truth(v: &Value) -> Result<Option<bool>, EvalError> {
    match v {
        Value::Boolean(b) => Ok(Some(*b)),
        Value::Reference(_) => Ok(Some(true)),
        Value::Unknown => Ok(None),
        other => Err(EvalError::BadCondition(other.kind())),
    }
}

pub fn unary(op: UnaryOp, v: Value) -> Result<Value, EvalError> {
    match (op, v) {
        (_, Value::Unknown) => Ok(Value::Unknown),
        (UnaryOp::Not, Value::Boolean(b)) => Ok(Value::Boolean(!b)),
        (UnaryOp::Neg, Value::Integer(i)) => i.checked_neg().map(Value::Integer).ok_or(EvalError::Overflow),
        (UnaryOp::Not, v) => Err(EvalError::BadOperand { op: "not", operand: v.kind() }),
        (UnaryOp::Neg, v) => Err(EvalError::BadOperand { op: "-", operand: v.kind() }),
    }
}

pub fn binary(op: BinaryOp, l: Value, r: Value) -> Result<Value, EvalError> {
    if l.is_unknown() || r.is_unknown() {
        return Ok(Value::Unknown);
    }
    let mismatch = |l: &Value, r: &Value| EvalError::KindMismatch { op: op.symbol(), left: l.kind(), right: r.kind() };
    match op {
        BinaryOp::Eq | BinaryOp::Ne => {
            let same = match (&l, &r) {
                (Value::List(a), Value::List(b)) if a.is_empty() && b.is_empty() => true,
                _ if l.kind() == r.kind() => l == r,
                _ => return Err(mismatch(&l, &r)),
            };
            Ok(Value::Boolean(if op == BinaryOp::Eq { same } else { !same }))
        }
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            let ord = match (&l, &r) {
                (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
                (Value::String(a), Value::String(b)) => a.cmp(b),
                _ => return Err(mismatch(&l, &r)),
            };
            Ok(Value::Boolean(match op {
                BinaryOp::Lt => ord.is_lt(),
                BinaryOp::Le => ord.is_le(),
                BinaryOp::Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        BinaryOp::Add => match (&l, &r) {
            (Value::Integer(a), Value::Integer(b)) => a.checked_add(*b).map(Value::Integer).ok_or(EvalError::Overflow),
            (Value::String(a), Value::String(b)) => Ok(Value::String(format!("{a}{b}"))),
            _ => Err(mismatch(&l, &r)),
        },
        BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => {
            let (Value::Integer(a), Value::Integer(b)) = (&l, &r) else {
                return Err(mismatch(&l, &r));
            };
            let out = match op {
                BinaryOp::Sub => a.checked_sub(*b),
                BinaryOp::Mul => a.checked_mul(*b),
                _ => {
                    if *b == 0 {
                        return Err(EvalError::DivisionByZero);
                    }
                    // truncates toward zero
                    a.checked_div(*b)
                }
            };
            out.map(Value::Integer).ok_or(EvalError::Overflow)
        }
        BinaryOp::In => match &r {
            Value::List(items) if items.is_empty() => Ok(Value::Boolean(false)),
            Value::List(items) => items.contains(&l).map(Value::Boolean).ok_or_else(|| mismatch(&l, &r)),
            _ => Err(mismatch(&l, &r)),
        },
        BinaryOp::And | BinaryOp::Or => {
            let (Value::Boolean(a), Value::Boolean(b)) = (&l, &r) else {
                return Err(mismatch(&l, &r));
            };
            Ok(Value::Boolean(if op == BinaryOp::And { *a && *b } else { *a || *b }))
        }
    }
}

/// Builds a list value from evaluated elements.
pub fn list(values: Vec<Value>) -> Result<Value, EvalError> {
    if values.iter().any(Value::is_unknown) {
        return Ok(Value::Unknown);
    }
    let kind = match values.first().map(Value::kind) {
        None => ScalarKind::Integer,
        Some(ValueKind::Integer) => ScalarKind::Integer,
        Some(ValueKind::Boolean) => ScalarKind::Boolean,
        Some(ValueKind::String) => ScalarKind::String,
        Some(_) => return Err(EvalError::MixedList),
    };
    ListValue::from_values(kind, &values).map(Value::List).map_err(|_| EvalError::MixedList)
}
