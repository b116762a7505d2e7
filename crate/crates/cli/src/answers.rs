//! Answer sources for consultations and parsing of answer text.

use std::collections::VecDeque;
use std::io::BufRead;

use framekit_core::fmdl::parse_expression;
use framekit_core::{make_value, Expression, RawValue, UnaryOp, Value, ValueKind};

pub enum Answers {
    /// `slot=value` lines, consumed in question order.
    Script(VecDeque<(usize, String, String)>),
    /// Bare values typed at the terminal.
    Stdin,
}

pub struct Reply {
    pub line: usize,
    pub slot: Option<String>,
    pub text: String,
}

impl Answers {
    pub fn parse_script(text: &str) -> Result<Self, String> {
        let mut lines = VecDeque::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (slot, value) =
                line.split_once('=').ok_or_else(|| format!("line {}: expected slot=value, got `{line}`", i + 1))?;
            lines.push_back((i + 1, slot.trim().to_string(), value.trim().to_string()));
        }
        Ok(Answers::Script(lines))
    }

    pub fn is_script(&self) -> bool {
        matches!(self, Answers::Script(_))
    }

    /// Next answer, or `None` when the source is exhausted.
    pub fn next(&mut self) -> Option<Reply> {
        match self {
            Answers::Script(lines) => lines.pop_front().map(|(line, slot, text)| Reply { line, slot: Some(slot), text }),
            Answers::Stdin => {
                let mut buf = String::new();
                match std::io::stdin().lock().read_line(&mut buf) {
                    Ok(0) | Err(_) => None,
                    Ok(_) => Some(Reply { line: 0, slot: None, text: buf.trim().to_string() }),
                }
            }
        }
    }
}

fn raw_of(e: &Expression) -> Option<RawValue> {
    match e {
        Expression::Literal(Value::Integer(i)) => Some(RawValue::Int(*i)),
        Expression::Literal(Value::Boolean(b)) => Some(RawValue::Bool(*b)),
        Expression::Literal(Value::String(s) | Value::Reference(s)) => Some(RawValue::Str(s.clone())),
        Expression::Unary(UnaryOp::Neg, inner) => match **inner {
            Expression::Literal(Value::Integer(i)) => Some(RawValue::Int(-i)),
            _ => None,
        },
        Expression::SlotRef { frame: None, slot } => Some(RawValue::Str(slot.clone())),
        Expression::List(items) => items.iter().map(raw_of).collect::<Option<Vec<_>>>().map(RawValue::List),
        _ => None,
    }
}

/// Reads answer text as a value of `kind`. Strings may be given bare or as
/// quoted literals; lists use `[a, b]` syntax.
pub fn parse_answer(kind: ValueKind, text: &str) -> Result<Value, String> {
    let raw = if kind == ValueKind::String && !text.starts_with('"') {
        RawValue::Str(text.to_string())
    } else {
        parse_expression(text).ok().as_ref().and_then(raw_of).ok_or_else(|| format!("`{text}` is not a value"))?
    };
    make_value(kind, raw).map_err(|e| e.to_string())
}
