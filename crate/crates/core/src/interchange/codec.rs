//! Element forms of values and expressions.

use super::xml::{Cursor, Element};
use super::InterchangeError;
use crate::expr::{BinaryOp, Expression, UnaryOp};
use crate::value::{is_identifier, ListValue, ScalarKind, Value};

pub fn encode_value(v: &Value) -> Element {
    match v {
        Value::Integer(i) => Element::new("int").with_text(i.to_string()),
        Value::Boolean(b) => Element::new("bool").with_text(b.to_string()),
        Value::String(s) => Element::new("str").with_text(s.clone()),
        Value::Reference(r) => Element::new("ref").with_text(r.clone()),
        Value::List(l) => {
            Element::new("list").attr("elem", l.elem_kind().name()).with_children(l.items().iter().map(encode_value))
        }
        Value::Unknown => Element::new("unknown"),
    }
}

pub fn decode_value(c: &Cursor<'_>) -> Result<Value, InterchangeError> {
    match c.name() {
        "list" => {
            c.only_attrs(&["elem"])?;
            let elem = c.required("elem")?;
            let kind = ScalarKind::from_name(elem).ok_or_else(|| c.error(format!("bad element kind `{elem}`")))?;
            let mut items = Vec::new();
            for child in c.children() {
                items.push(decode_scalar(&child)?);
            }
            ListValue::from_values(kind, &items)
                .map(Value::List)
                .map_err(|i| c.error(format!("list element {} is not {}", i + 1, kind.name())))
        }
        _ => decode_scalar(c),
    }
}

fn decode_scalar(c: &Cursor<'_>) -> Result<Value, InterchangeError> {
    c.only_attrs(&[])?;
    let t = c.text();
    match c.name() {
        "int" => t.trim().parse::<i64>().map(Value::Integer).map_err(|_| c.error(format!("bad integer `{t}`"))),
        "bool" => match t.trim() {
            "true" => Ok(Value::Boolean(true)),
            "false" => Ok(Value::Boolean(false)),
            other => Err(c.error(format!("bad boolean `{other}`"))),
        },
        "str" => Ok(Value::String(t.to_string())),
        "ref" => {
            let name = t.trim();
            if is_identifier(name) {
                Ok(Value::Reference(name.to_string()))
            } else {
                Err(c.error(format!("bad frame name `{name}`")))
            }
        }
        "unknown" => {
            c.no_children()?;
            Ok(Value::Unknown)
        }
        _ => Err(c.unexpected()),
    }
}

pub fn encode_expr(e: &Expression) -> Element {
    match e {
        Expression::Literal(v) => encode_value(v),
        Expression::SlotRef { frame, slot } => Element::new("slotref").attr("name", slot.clone()).attr_opt("frame", frame.clone()),
        Expression::Unary(UnaryOp::Not, x) => Element::new("not").child(encode_expr(x)),
        Expression::Unary(UnaryOp::Neg, x) => Element::new("neg").child(encode_expr(x)),
        Expression::Binary(op, l, r) => Element::new(op.tag()).child(encode_expr(l)).child(encode_expr(r)),
        Expression::Call { name, args } => Element::new("call").attr("name", name.clone()).with_children(args.iter().map(encode_expr)),
        Expression::Exists { var, root, condition } => {
            Element::new("exists").attr("var", var.clone()).attr("root", root.clone()).child(encode_expr(condition))
        }
        Expression::Specialize { root } => Element::new("specialize").attr("root", root.clone()),
        Expression::List(items) => Element::new("list").with_children(items.iter().map(encode_expr)),
    }
}

fn ident_attr<'a>(c: &Cursor<'a>, key: &str) -> Result<&'a str, InterchangeError> {
    let v = c.required(key)?;
    if is_identifier(v) {
        Ok(v)
    } else {
        Err(c.error(format!("attribute `{key}` is not an identifier: `{v}`")))
    }
}

fn exactly<'a>(c: &Cursor<'a>, n: usize) -> Result<Vec<Cursor<'a>>, InterchangeError> {
    let kids = c.children();
    if kids.len() != n {
        return Err(c.error(format!("expected {n} operand(s), found {}", kids.len())));
    }
    Ok(kids)
}

pub fn decode_expr(c: &Cursor<'_>) -> Result<Expression, InterchangeError> {
    let name = c.name();
    if let Some(op) = BinaryOp::from_tag(name) {
        c.only_attrs(&[])?;
        let kids = exactly(c, 2)?;
        return Ok(Expression::binary(op, decode_expr(&kids[0])?, decode_expr(&kids[1])?));
    }
    match name {
        "int" | "bool" | "str" | "ref" | "unknown" => Ok(Expression::Literal(decode_value(c)?)),
        "list" if c.attr("elem").is_some() => Ok(Expression::Literal(decode_value(c)?)),
        "list" => {
            c.only_attrs(&[])?;
            Ok(Expression::List(c.children().iter().map(decode_expr).collect::<Result<_, _>>()?))
        }
        "slotref" => {
            c.only_attrs(&["name", "frame"])?;
            c.no_children()?;
            let slot = ident_attr(c, "name")?.to_string();
            let frame = match c.attr("frame") {
                Some(_) => Some(ident_attr(c, "frame")?.to_string()),
                None => None,
            };
            Ok(Expression::SlotRef { frame, slot })
        }
        "not" | "neg" => {
            c.only_attrs(&[])?;
            let kids = exactly(c, 1)?;
            let op = if name == "not" { UnaryOp::Not } else { UnaryOp::Neg };
            Ok(Expression::unary(op, decode_expr(&kids[0])?))
        }
        "call" => {
            c.only_attrs(&["name"])?;
            let fname = ident_attr(c, "name")?.to_string();
            Ok(Expression::Call { name: fname, args: c.children().iter().map(decode_expr).collect::<Result<_, _>>()? })
        }
        "exists" => {
            c.only_attrs(&["var", "root"])?;
            let var = ident_attr(c, "var")?.to_string();
            let root = ident_attr(c, "root")?.to_string();
            let kids = exactly(c, 1)?;
            Ok(Expression::Exists { var, root, condition: Box::new(decode_expr(&kids[0])?) })
        }
        "specialize" => {
            c.only_attrs(&["root"])?;
            c.no_children()?;
            Ok(Expression::Specialize { root: ident_attr(c, "root")?.to_string() })
        }
        _ => Err(c.unexpected()),
    }
}
