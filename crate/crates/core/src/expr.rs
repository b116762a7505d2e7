//! Expression trees for rule conditions, rule values and constraints.

use std::fmt;

use crate::value::{write_string_literal, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    And,
    Or,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    In,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Eq => "=",
            BinaryOp::Ne => "<>",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::In => "in",
        }
    }

    /// XML element name.
    pub fn tag(self) -> &'static str {
        match self {
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Eq => "eq",
            BinaryOp::Ne => "ne",
            BinaryOp::Lt => "lt",
            BinaryOp::Le => "le",
            BinaryOp::Gt => "gt",
            BinaryOp::Ge => "ge",
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::In => "in",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "and" => BinaryOp::And,
            "or" => BinaryOp::Or,
            "eq" => BinaryOp::Eq,
            "ne" => BinaryOp::Ne,
            "lt" => BinaryOp::Lt,
            "le" => BinaryOp::Le,
            "gt" => BinaryOp::Gt,
            "ge" => BinaryOp::Ge,
            "add" => BinaryOp::Add,
            "sub" => BinaryOp::Sub,
            "mul" => BinaryOp::Mul,
            "div" => BinaryOp::Div,
            "in" => BinaryOp::In,
            _ => return None,
        })
    }

    pub fn from_symbol(sym: &str) -> Option<Self> {
        Some(match sym {
            "=" => BinaryOp::Eq,
            "<>" => BinaryOp::Ne,
            "<" => BinaryOp::Lt,
            "<=" => BinaryOp::Le,
            ">" => BinaryOp::Gt,
            ">=" => BinaryOp::Ge,
            _ => return None,
        })
    }

    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinaryOp::Eq | BinaryOp::Ne | BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::In
        )
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Or => 1,
            BinaryOp::And => 2,
            BinaryOp::Eq
            | BinaryOp::Ne
            | BinaryOp::Lt
            | BinaryOp::Le
            | BinaryOp::Gt
            | BinaryOp::Ge
            | BinaryOp::In => 4,
            BinaryOp::Add | BinaryOp::Sub => 5,
            BinaryOp::Mul | BinaryOp::Div => 6,
        }
    }
}

/// Expression node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expression {
    /// Scalar, reference or `unknown` literal.
    Literal(Value),
    /// `slot` or `Frame.slot`; the qualifier may also name an `exists`
    /// variable or a reference-valued slot of the origin.
    SlotRef { frame: Option<String>, slot: String },
    Unary(UnaryOp, Box<Expression>),
    Binary(BinaryOp, Box<Expression>, Box<Expression>),
    Call { name: String, args: Vec<Expression> },
    Exists { var: String, root: String, condition: Box<Expression> },
    Specialize { root: String },
    List(Vec<Expression>),
}

impl Expression {
    pub fn lit(v: impl Into<Value>) -> Self {
        Expression::Literal(v.into())
    }

    pub fn slot(name: &str) -> Self {
        Expression::SlotRef { frame: None, slot: name.to_string() }
    }

    pub fn qualified(frame: &str, name: &str) -> Self {
        Expression::SlotRef { frame: Some(frame.to_string()), slot: name.to_string() }
    }

    pub fn binary(op: BinaryOp, l: Expression, r: Expression) -> Self {
        Expression::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn unary(op: UnaryOp, e: Expression) -> Self {
        Expression::Unary(op, Box::new(e))
    }

    /// Number of nodes in the tree.
    pub fn node_count(&self) -> usize {
        match self {
            Expression::Literal(_) | Expression::SlotRef { .. } | Expression::Specialize { .. } => 1,
            Expression::Unary(_, e) => 1 + e.node_count(),
            Expression::Binary(_, l, r) => 1 + l.node_count() + r.node_count(),
            Expression::Call { args, .. } => 1 + args.iter().map(Expression::node_count).sum::<usize>(),
            Expression::Exists { condition, .. } => 1 + condition.node_count(),
            Expression::List(items) => 1 + items.iter().map(Expression::node_count).sum::<usize>(),
        }
    }

    /// Visits every node, parents before children.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expression)) {
        f(self);
        match self {
            Expression::Unary(_, e) => e.walk(f),
            Expression::Binary(_, l, r) => {
                l.walk(f);
                r.walk(f);
            }
            Expression::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            Expression::Exists { condition, .. } => condition.walk(f),
            Expression::List(items) => items.iter().for_each(|a| a.walk(f)),
            Expression::Literal(_) | Expression::SlotRef { .. } | Expression::Specialize { .. } => {}
        }
    }

    /// Unqualified slot names referenced by this expression, in first-use
    /// order. References inside an `exists` body qualified by its variable
    /// are not included.
    pub fn unqualified_slots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        self.walk(&mut |e| {
            if let Expression::SlotRef { frame: None, slot } = e {
                if !out.contains(&slot.as_str()) {
                    out.push(slot);
                }
            }
        });
        out
    }

    pub fn mentions_slot(&self, slot: &str) -> bool {
        self.unqualified_slots().contains(&slot)
    }

    fn precedence(&self) -> u8 {
        match self {
            Expression::Binary(op, ..) => op.precedence(),
            Expression::Unary(UnaryOp::Not, _) => 3,
            Expression::Unary(UnaryOp::Neg, _) => 7,
            Expression::Literal(Value::Integer(i)) if *i < 0 => 7,
            Expression::Exists { .. } => 0,
            _ => 8,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expression::Literal(v) => write!(f, "{v}")?,
            Expression::SlotRef { frame: Some(q), slot } => write!(f, "{q}.{slot}")?,
            Expression::SlotRef { frame: None, slot } => f.write_str(slot)?,
            Expression::Unary(UnaryOp::Not, e) => {
                f.write_str("not ")?;
                e.fmt_prec(f, 3)?;
            }
            Expression::Unary(UnaryOp::Neg, e) => {
                f.write_str("-")?;
                match e.as_ref() {
                    // `-3` would read back as a negative literal.
                    Expression::Literal(Value::Integer(_)) => {
                        f.write_str("(")?;
                        e.fmt_prec(f, 0)?;
                        f.write_str(")")?;
                    }
                    _ => e.fmt_prec(f, 7)?,
                }
            }
            Expression::Binary(op, l, r) => {
                let p = op.precedence();
                if op.is_comparison() {
                    l.fmt_prec(f, p + 1)?;
                    write!(f, " {} ", op.symbol())?;
                    r.fmt_prec(f, p + 1)?;
                } else {
                    l.fmt_prec(f, p)?;
                    write!(f, " {} ", op.symbol())?;
                    r.fmt_prec(f, p + 1)?;
                }
            }
            Expression::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 1)?;
                }
                f.write_str(")")?;
            }
            Expression::Exists { var, root, condition } => {
                write!(f, "exists {var} in {root} where ")?;
                condition.fmt_prec(f, 0)?;
            }
            Expression::Specialize { root } => write!(f, "specialize({root})")?,
            Expression::List(items) => {
                f.write_str("[")?;
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    a.fmt_prec(f, 1)?;
                }
                f.write_str("]")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

/// Renders a string literal with FMDL escapes.
pub fn quote(s: &str) -> String {
    let mut out = String::new();
    write_string_literal(&mut out, s).expect("writing to a String");
    out
}
