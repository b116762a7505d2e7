//! Typed slot values.
//!
//! A [`Value`] is one of the scalar kinds (integer, boolean, string), a frame
//! reference, a homogeneous list of scalars, or the distinguished `Unknown`.
//! List homogeneity is enforced by the representation itself: a [`ListValue`]
//! stores one vector per element kind.

use std::fmt;

use thiserror::Error;

/// Element kind of a list value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScalarKind {
    Integer,
    Boolean,
    String,
}

impl ScalarKind {
    pub fn name(self) -> &'static str {
        match self {
            ScalarKind::Integer => "integer",
            ScalarKind::Boolean => "boolean",
            ScalarKind::String => "string",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "integer" => Some(ScalarKind::Integer),
            "boolean" => Some(ScalarKind::Boolean),
            "string" => Some(ScalarKind::String),
            _ => None,
        }
    }
}

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Declared type of a slot, or the runtime kind of a value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ValueKind {
    Integer,
    Boolean,
    String,
    Reference,
    List(ScalarKind),
    Unknown,
}

impl ValueKind {
    /// Type name as written in FMDL (`list of integer`).
    pub fn name(&self) -> String {
        match self {
            ValueKind::Integer => "integer".into(),
            ValueKind::Boolean => "boolean".into(),
            ValueKind::String => "string".into(),
            ValueKind::Reference => "reference".into(),
            ValueKind::List(e) => format!("list of {}", e.name()),
            ValueKind::Unknown => "unknown".into(),
        }
    }

    /// Short tag used in XML attributes and JSON payloads (`list` for lists).
    pub fn tag(&self) -> &'static str {
        match self {
            ValueKind::Integer => "integer",
            ValueKind::Boolean => "boolean",
            ValueKind::String => "string",
            ValueKind::Reference => "reference",
            ValueKind::List(_) => "list",
            ValueKind::Unknown => "unknown",
        }
    }

    /// Inverse of [`ValueKind::tag`]; `elem` is required for lists.
    pub fn from_tag(tag: &str, elem: Option<&str>) -> Option<Self> {
        match tag {
            "integer" => Some(ValueKind::Integer),
            "boolean" => Some(ValueKind::Boolean),
            "string" => Some(ValueKind::String),
            "reference" => Some(ValueKind::Reference),
            "unknown" => Some(ValueKind::Unknown),
            "list" => elem.and_then(ScalarKind::from_name).map(ValueKind::List),
            _ => None,
        }
    }

    pub fn elem(&self) -> Option<ScalarKind> {
        match self {
            ValueKind::List(e) => Some(*e),
            _ => None,
        }
    }
}

impl From<ScalarKind> for ValueKind {
    fn from(k: ScalarKind) -> Self {
        match k {
            ScalarKind::Integer => ValueKind::Integer,
            ScalarKind::Boolean => ValueKind::Boolean,
            ScalarKind::String => ValueKind::String,
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Homogeneous list payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ListValue {
    Integer(Vec<i64>),
    Boolean(Vec<bool>),
    String(Vec<String>),
}

impl ListValue {
    pub fn empty(kind: ScalarKind) -> Self {
        match kind {
            ScalarKind::Integer => ListValue::Integer(Vec::new()),
            ScalarKind::Boolean => ListValue::Boolean(Vec::new()),
            ScalarKind::String => ListValue::String(Vec::new()),
        }
    }

    pub fn elem_kind(&self) -> ScalarKind {
        match self {
            ListValue::Integer(_) => ScalarKind::Integer,
            ListValue::Boolean(_) => ScalarKind::Boolean,
            ListValue::String(_) => ScalarKind::String,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ListValue::Integer(v) => v.len(),
            ListValue::Boolean(v) => v.len(),
            ListValue::String(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Elements as scalar values, in order.
    pub fn items(&self) -> Vec<Value> {
        match self {
            ListValue::Integer(v) => v.iter().map(|i| Value::Integer(*i)).collect(),
            ListValue::Boolean(v) => v.iter().map(|b| Value::Boolean(*b)).collect(),
            ListValue::String(v) => v.iter().map(|s| Value::String(s.clone())).collect(),
        }
    }

    pub fn contains(&self, v: &Value) -> Option<bool> {
        match (self, v) {
            (ListValue::Integer(xs), Value::Integer(i)) => Some(xs.contains(i)),
            (ListValue::Boolean(xs), Value::Boolean(b)) => Some(xs.contains(b)),
            (ListValue::String(xs), Value::String(s)) => Some(xs.contains(s)),
            _ => None,
        }
    }

    /// Builds a list from scalar values; returns the index of the first
    /// element whose kind differs from `kind`.
    pub fn from_values(kind: ScalarKind, values: &[Value]) -> Result<Self, usize> {
        let mut list = ListValue::empty(kind);
        for (i, v) in values.iter().enumerate() {
            match (&mut list, v) {
                (ListValue::Integer(xs), Value::Integer(x)) => xs.push(*x),
                (ListValue::Boolean(xs), Value::Boolean(x)) => xs.push(*x),
                (ListValue::String(xs), Value::String(x)) => xs.push(x.clone()),
                _ => return Err(i),
            }
        }
        Ok(list)
    }
}

/// A slot value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub enum Value {
    Integer(i64),
    Boolean(bool),
    String(String),
    /// Names a frame. Resolution is deferred; dangling names are detectable
    /// through `FrameWorld::contains`.
    Reference(String),
    List(ListValue),
    #[default]
    Unknown,
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Integer(_) => ValueKind::Integer,
            Value::Boolean(_) => ValueKind::Boolean,
            Value::String(_) => ValueKind::String,
            Value::Reference(_) => ValueKind::Reference,
            Value::List(l) => ValueKind::List(l.elem_kind()),
            Value::Unknown => ValueKind::Unknown,
        }
    }

    pub fn is_unknown(&self) -> bool {
        matches!(self, Value::Unknown)
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Integer(i) => Some(*i),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_reference(&self) -> Option<&str> {
        match self {
            Value::Reference(r) => Some(r),
            _ => None,
        }
    }

    /// True when this value may be stored in a slot declared as `kind`.
    /// An empty list of any element kind is accepted by every list type.
    pub fn conforms_to(&self, kind: ValueKind) -> bool {
        match (self, kind) {
            (Value::List(l), ValueKind::List(e)) => l.is_empty() || l.elem_kind() == e,
            (v, k) => v.kind() == k,
        }
    }

    /// Re-tags an empty list to the declared element kind so that equal
    /// values compare equal after storage.
    pub fn coerce_empty_list(self, kind: ValueKind) -> Value {
        match (&self, kind) {
            (Value::List(l), ValueKind::List(e)) if l.is_empty() => Value::List(ListValue::empty(e)),
            _ => self,
        }
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Integer(i)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl fmt::Display for Value {
    /// FMDL literal syntax.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(i) => write!(f, "{i}"),
            Value::Boolean(b) => write!(f, "{b}"),
            Value::String(s) => write_string_literal(f, s),
            Value::Reference(r) => write!(f, "frame({r})"),
            Value::List(l) => {
                f.write_str("[")?;
                for (i, v) in l.items().iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Unknown => f.write_str("unknown"),
        }
    }
}

pub(crate) fn write_string_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Untyped input from outside the engine (CLI answers, JSON bodies, table
/// cells) before it is checked against a declared kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawValue {
    Int(i64),
    Bool(bool),
    Str(String),
    List(Vec<RawValue>),
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Int(i) => write!(f, "{i}"),
            RawValue::Bool(b) => write!(f, "{b}"),
            RawValue::Str(s) => write_string_literal(f, s),
            RawValue::List(xs) => {
                f.write_str("[")?;
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{x}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TypeMismatch {
    #[error("expected {expected}, got {raw}")]
    Scalar { expected: ValueKind, raw: RawValue },
    #[error("list element {index} is not {expected}: {raw}")]
    Element { expected: ScalarKind, index: usize, raw: RawValue },
    #[error("`{0}` is not a valid frame name")]
    BadReference(String),
}

/// Checks an identifier against `[A-Za-z_][A-Za-z0-9_]*`.
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Builds a value of `kind` from untyped input. There is no coercion between
/// scalar kinds: the string `"4"` is not an integer and `"true"` is not a
/// boolean.
pub fn make_value(kind: ValueKind, raw: RawValue) -> Result<Value, TypeMismatch> {
    match (kind, raw) {
        (ValueKind::Integer, RawValue::Int(i)) => Ok(Value::Integer(i)),
        (ValueKind::Boolean, RawValue::Bool(b)) => Ok(Value::Boolean(b)),
        (ValueKind::String, RawValue::Str(s)) => Ok(Value::String(s)),
        (ValueKind::Reference, RawValue::Str(s)) => {
            if is_identifier(&s) {
                Ok(Value::Reference(s))
            } else {
                Err(TypeMismatch::BadReference(s))
            }
        }
        (ValueKind::List(elem), RawValue::List(items)) => {
            let mut list = ListValue::empty(elem);
            for (index, item) in items.into_iter().enumerate() {
                match (&mut list, item) {
                    (ListValue::Integer(xs), RawValue::Int(i)) => xs.push(i),
                    (ListValue::Boolean(xs), RawValue::Bool(b)) => xs.push(b),
                    (ListValue::String(xs), RawValue::Str(s)) => xs.push(s),
                    (_, raw) => return Err(TypeMismatch::Element { expected: elem, index, raw }),
                }
            }
            Ok(Value::List(list))
        }
        (expected, raw) => Err(TypeMismatch::Scalar { expected, raw }),
    }
}
