//! World and rule documents.

use sha2::{Digest, Sha256};

use super::codec::{decode_expr, decode_value, encode_expr, encode_value};
use super::xml::{Cursor, Element};
use super::InterchangeError;
use crate::expr::{BinaryOp, Expression, UnaryOp};
use crate::model::{Action, Direction, FrameDef, FrameKind, FrameWorld, Rule, SlotAction, SlotDef, WorldBuilder};
use crate::value::{is_identifier, ScalarKind, Value, ValueKind};

pub const FORMAT_VERSION: &str = "1";

pub fn world_to_element(world: &FrameWorld) -> Element {
    builder_parts_to_element(world.externs(), world.frames())
}

fn builder_parts_to_element<'a>(
    externs: impl Iterator<Item = (&'a str, usize)>,
    frames: impl Iterator<Item = &'a FrameDef>,
) -> Element {
    let mut root = Element::new("frameworld").attr("version", FORMAT_VERSION);
    for (name, arity) in externs {
        root = root.child(Element::new("extern").attr("name", name).attr("arity", arity.to_string()));
    }
    root.with_children(frames.map(encode_frame))
}

/// Canonical XML text of a world.
pub fn world_to_xml(world: &FrameWorld) -> String {
    world_to_element(world).to_xml()
}

pub fn builder_to_xml(builder: &WorldBuilder) -> String {
    builder_parts_to_element(builder.externs(), builder.frames()).to_xml()
}

/// Content hash of the canonical XML, 16 hex digits.
pub fn world_version(world: &FrameWorld) -> String {
    let digest = Sha256::digest(world_to_xml(world).as_bytes());
    hex::encode(&digest[..8])
}

pub fn encode_frame(f: &FrameDef) -> Element {
    let (kind, url, table, key) = match &f.kind {
        FrameKind::Local => (None, None, None, None),
        FrameKind::RemoteStub { url } => (Some("remote"), Some(url.clone()), None, None),
        FrameKind::Frameset { table, key } => (Some("frameset"), None, Some(table.clone()), Some(key.clone())),
        FrameKind::ExternalObject => (Some("external"), None, None, None),
    };
    let mut el = Element::new("frame")
        .attr("name", f.name.clone())
        .attr_opt("parent", f.parent.clone())
        .attr_opt("kind", kind)
        .attr_opt("url", url)
        .attr_opt("table", table)
        .attr_opt("key", key)
        .attr_opt("rules-from", f.rules_from.clone());
    for s in f.slots.values() {
        let mut se = Element::new("slot").attr("name", s.name.clone()).attr("type", s.kind.tag());
        if let Some(e) = s.kind.elem() {
            se = se.attr("elem", e.name());
        }
        if let Some(d) = &s.default {
            se = se.child(Element::new("default").child(encode_value(d)));
        }
        el = el.child(se);
    }
    for c in &f.constraints {
        el = el.child(Element::new("constraint").child(encode_expr(c)));
    }
    el.with_children(f.actions.iter().map(encode_action))
}

pub fn encode_action(a: &SlotAction) -> Element {
    match &a.action {
        Action::AskUser { prompt } => Element::new("ask").attr("slot", a.slot.clone()).attr("prompt", prompt.clone()),
        other => {
            let rule = other.as_rule(&a.slot).expect("non-ask actions have a rule form");
            encode_rule(&rule)
        }
    }
}

pub fn encode_rule(rule: &Rule) -> Element {
    let kind = match rule.direction {
        Direction::Backward => "backward",
        Direction::Forward => "forward",
    };
    let mut el = Element::new("rule").attr("slot", rule.target_slot.clone()).attr("kind", kind);
    if let Some(c) = &rule.condition {
        el = el.child(Element::new("when").child(encode_expr(c)));
    }
    for (slot, e) in &rule.assignments {
        el = el.child(Element::new("set").attr("slot", slot.clone()).child(encode_expr(e)));
    }
    el
}

pub(super) fn ident<'a>(c: &Cursor<'a>, key: &str) -> Result<&'a str, InterchangeError> {
    let v = c.required(key)?;
    if is_identifier(v) {
        Ok(v)
    } else {
        Err(c.error(format!("attribute `{key}` is not an identifier: `{v}`")))
    }
}

pub(super) fn single_child<'a>(c: &Cursor<'a>) -> Result<Cursor<'a>, InterchangeError> {
    let mut kids = c.children();
    if kids.len() != 1 {
        return Err(c.error(format!("expected one child element, found {}", kids.len())));
    }
    Ok(kids.remove(0))
}

pub fn decode_rule(c: &Cursor<'_>) -> Result<SlotAction, InterchangeError> {
    c.only_attrs(&["slot", "kind"])?;
    let slot = ident(c, "slot")?.to_string();
    let direction = match c.required("kind")? {
        "backward" => Direction::Backward,
        "forward" => Direction::Forward,
        other => return Err(c.error(format!("bad rule kind `{other}`"))),
    };
    let mut condition = None;
    let mut assignments = Vec::new();
    for k in c.children() {
        match k.name() {
            "when" if condition.is_none() && assignments.is_empty() => {
                k.only_attrs(&[])?;
                condition = Some(decode_expr(&single_child(&k)?)?);
            }
            "set" => {
                k.only_attrs(&["slot"])?;
                let target = ident(&k, "slot")?.to_string();
                assignments.push((target, decode_expr(&single_child(&k)?)?));
            }
            _ => return Err(k.unexpected()),
        }
    }
    if assignments.is_empty() {
        return Err(c.error("rule without <set>"));
    }
    if direction == Direction::Backward && (assignments.len() != 1 || assignments[0].0 != slot) {
        return Err(c.error("a backward rule has exactly one <set> for its slot"));
    }
    let rule = Rule { target_slot: slot.clone(), condition, assignments, direction };
    let action = match direction {
        Direction::Backward => Action::BackwardRule(rule),
        Direction::Forward => Action::ForwardRule(rule),
    };
    Ok(SlotAction { slot, action })
}

fn decode_ask(c: &Cursor<'_>) -> Result<SlotAction, InterchangeError> {
    c.only_attrs(&["slot", "prompt"])?;
    c.no_children()?;
    Ok(SlotAction {
        slot: ident(c, "slot")?.to_string(),
        action: Action::AskUser { prompt: c.required("prompt")?.to_string() },
    })
}

fn decode_constraint(c: &Cursor<'_>) -> Result<Expression, InterchangeError> {
    c.only_attrs(&[])?;
    decode_expr(&single_child(c)?)
}

pub fn decode_frame(c: &Cursor<'_>) -> Result<FrameDef, InterchangeError> {
    c.only_attrs(&["name", "parent", "kind", "url", "table", "key", "rules-from"])?;
    let mut f = FrameDef::new(ident(c, "name")?);
    if c.attr("parent").is_some() {
        f.parent = Some(ident(c, "parent")?.to_string());
    }
    f.kind = match c.attr("kind") {
        None | Some("local") => FrameKind::Local,
        Some("remote") => FrameKind::RemoteStub { url: c.required("url")?.to_string() },
        Some("frameset") => {
            FrameKind::Frameset { table: c.required("table")?.to_string(), key: ident(c, "key")?.to_string() }
        }
        Some("external") => FrameKind::ExternalObject,
        Some(other) => return Err(c.error(format!("bad frame kind `{other}`"))),
    };
    f.rules_from = c.attr("rules-from").map(str::to_string);
    for k in c.children() {
        match k.name() {
            "slot" => {
                k.only_attrs(&["name", "type", "elem"])?;
                let name = ident(&k, "name")?;
                let ty = k.required("type")?;
                let kind = ValueKind::from_tag(ty, k.attr("elem"))
                    .filter(|v| *v != ValueKind::Unknown)
                    .ok_or_else(|| k.error(format!("bad slot type `{ty}`")))?;
                let mut def = SlotDef::new(name, kind);
                for d in k.children() {
                    if d.name() != "default" || def.default.is_some() {
                        return Err(d.unexpected());
                    }
                    d.only_attrs(&[])?;
                    def.default = Some(decode_value(&single_child(&d)?)?);
                }
                f.add_slot(def).map_err(|e| k.error(e.to_string()))?;
            }
            "constraint" => f.constraints.push(decode_constraint(&k)?),
            "rule" => f.actions.push(decode_rule(&k)?),
            "ask" => f.actions.push(decode_ask(&k)?),
            _ => return Err(k.unexpected()),
        }
    }
    Ok(f)
}

/// Parses a world document into an unfrozen builder.
pub fn builder_from_xml(text: &str) -> Result<WorldBuilder, InterchangeError> {
    let root = Element::parse(text)?;
    builder_from_element(&root)
}

pub fn builder_from_element(root: &Element) -> Result<WorldBuilder, InterchangeError> {
    let c = Cursor::root(root);
    if c.name() != "frameworld" {
        return Err(c.error(format!("expected <frameworld>, found <{}>", c.name())));
    }
    c.only_attrs(&["version"])?;
    let version = c.required("version")?;
    if version != FORMAT_VERSION {
        return Err(InterchangeError::VersionUnsupported(version.to_string()));
    }
    let mut b = WorldBuilder::new();
    for k in c.children() {
        match k.name() {
            "extern" => {
                k.only_attrs(&["name", "arity"])?;
                k.no_children()?;
                let name = ident(&k, "name")?;
                let arity: usize = k.required("arity")?.parse().map_err(|_| k.error("bad arity"))?;
                b.declare_extern(name, arity).map_err(|e| k.error(e.to_string()))?;
            }
            "frame" => {
                let f = decode_frame(&k)?;
                b.add_frame(f).map_err(|e| k.error(e.to_string()))?;
            }
            _ => return Err(k.unexpected()),
        }
    }
    Ok(b)
}

/// Parses and freezes a world document. Framesets are left unbound.
pub fn world_from_xml(text: &str) -> Result<FrameWorld, InterchangeError> {
    Ok(builder_from_xml(text)?.freeze()?)
}

/// The rules, asks and constraints of one frame, in declaration order.
pub fn rules_to_element(frame: &FrameDef) -> Element {
    let mut el = Element::new("rules").attr("frame", frame.name.clone());
    el = el.with_children(frame.actions.iter().map(encode_action));
    el.with_children(frame.constraints.iter().map(|c| Element::new("constraint").child(encode_expr(c))))
}

/// Decoded content of a `<rules>` document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RuleSet {
    pub actions: Vec<SlotAction>,
    pub constraints: Vec<Expression>,
}

pub fn rules_from_element(root: &Element) -> Result<RuleSet, InterchangeError> {
    let c = Cursor::root(root);
    if c.name() != "rules" {
        return Err(c.error(format!("expected <rules>, found <{}>", c.name())));
    }
    c.only_attrs(&["frame"])?;
    let mut out = RuleSet::default();
    for k in c.children() {
        match k.name() {
            "rule" => out.actions.push(decode_rule(&k)?),
            "ask" => out.actions.push(decode_ask(&k)?),
            "constraint" => out.constraints.push(decode_constraint(&k)?),
            _ => return Err(k.unexpected()),
        }
    }
    Ok(out)
}

/// Kind of the value an expression produces, when it follows from the
/// root node alone.
pub fn inferred_kind(e: &Expression) -> Option<ValueKind> {
    match e {
        Expression::Literal(Value::Unknown) => None,
        Expression::Literal(v) => Some(v.kind()),
        Expression::Unary(UnaryOp::Neg, _) => Some(ValueKind::Integer),
        Expression::Unary(UnaryOp::Not, _) => Some(ValueKind::Boolean),
        Expression::Binary(op, ..) => match op {
            BinaryOp::Add | BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div => Some(ValueKind::Integer),
            _ => Some(ValueKind::Boolean),
        },
        Expression::Specialize { .. } | Expression::Exists { .. } => Some(ValueKind::Reference),
        Expression::List(items) => match items.first().and_then(inferred_kind)? {
            ValueKind::Integer => Some(ValueKind::List(ScalarKind::Integer)),
            ValueKind::Boolean => Some(ValueKind::List(ScalarKind::Boolean)),
            ValueKind::String => Some(ValueKind::List(ScalarKind::String)),
            _ => None,
        },
        Expression::SlotRef { .. } | Expression::Call { .. } => None,
    }
}

/// Appends a rule set to `target`, after its local actions. Slots assigned
/// by the merged rules that are not visible from `target` are declared on
/// it with the kind inferred from the assigned expression.
pub fn merge_rule_set(world: &FrameWorld, rules: RuleSet, target: &str) -> Result<FrameWorld, InterchangeError> {
    if world.frame(target).is_none() {
        return Err(InterchangeError::UnknownFrame(target.to_string()));
    }
    if rules.actions.is_empty() && rules.constraints.is_empty() {
        return Ok(world.clone());
    }
    let mut b = world.to_builder();
    let frame = b.frame_mut(target).expect("checked above");
    for a in rules.actions {
        let assigned: Vec<(String, Option<&Expression>)> = match &a.action {
            Action::BackwardRule(r) | Action::ForwardRule(r) => {
                r.assignments.iter().map(|(s, e)| (s.clone(), Some(e))).collect()
            }
            _ => vec![(a.slot.clone(), None)],
        };
        for (slot, expr) in assigned {
            let visible = frame.slots.contains_key(&slot) || world.slot_lookup(target, &slot, None).is_ok();
            if visible {
                continue;
            }
            let kind = expr
                .and_then(inferred_kind)
                .ok_or_else(|| InterchangeError::UntypedRemoteSlot { frame: target.to_string(), slot: slot.clone() })?;
            frame.add_slot(SlotDef::new(&slot, kind))?;
        }
        frame.actions.push(a);
    }
    frame.constraints.extend(rules.constraints);
    Ok(b.freeze()?)
}

/// Parses a `<rules>` document and merges it into `target`.
pub fn merge_rules(world: &FrameWorld, document: &str, target: &str) -> Result<FrameWorld, InterchangeError> {
    let root = Element::parse(document)?;
    merge_rule_set(world, rules_from_element(&root)?, target)
}
