//! Session snapshots and traces.

use super::codec::{decode_value, encode_value};
use super::world::{decode_frame, encode_frame, ident, single_child};
use super::xml::{Cursor, Element};
use super::InterchangeError;
use crate::inference::{Counters, Question, TraceEvent, TraceKind};
use crate::model::FrameDef;
use crate::value::{Value, ValueKind};

const SNAPSHOT_VERSION: &str = "1";

/// Observable state of a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snapshot {
    pub world_version: String,
    pub goal: Option<(String, String)>,
    pub next_question: u64,
    pub next_seq: u64,
    pub counters: Counters,
    pub default_resolver: String,
    pub resolvers: Vec<(String, String)>,
    pub memory: Vec<(String, String, Value)>,
    pub pending: Option<Question>,
    /// Level each open question was raised at: (frame, slot, level).
    pub asked_at: Vec<(String, String, String)>,
    /// (origin, stub, slot, value).
    pub stub_cache: Vec<(String, String, String, Value)>,
    pub fetched: Vec<String>,
    /// Frames generated or extended during the session.
    pub overlay: Vec<FrameDef>,
    pub fire_counts: Vec<(String, u64)>,
    pub trace: Vec<TraceEvent>,
}

fn kind_attrs(el: Element, kind: ValueKind) -> Element {
    let el = el.attr("type", kind.tag());
    match kind.elem() {
        Some(e) => el.attr("elem", e.name()),
        None => el,
    }
}

fn decode_kind(c: &Cursor<'_>) -> Result<ValueKind, InterchangeError> {
    let ty = c.required("type")?;
    ValueKind::from_tag(ty, c.attr("elem")).ok_or_else(|| c.error(format!("bad type `{ty}`")))
}

fn number(c: &Cursor<'_>, key: &str) -> Result<u64, InterchangeError> {
    let v = c.required(key)?;
    v.parse().map_err(|_| c.error(format!("attribute `{key}` is not a count: `{v}`")))
}

/// Question as an element named `name`.
pub fn encode_question(name: &str, q: &Question) -> Element {
    let mut el = kind_attrs(
        Element::new(name)
            .attr("id", q.id.clone())
            .attr("frame", q.frame.clone())
            .attr("slot", q.slot.clone())
            .attr("prompt", q.prompt.clone()),
        q.kind,
    )
    .attr_opt("source", q.source.clone());
    if let Some(choices) = &q.choices {
        el = el.child(Element::new("choices").with_children(choices.iter().map(encode_value)));
    }
    el.with_children(q.violations.iter().map(|v| Element::new("violation").with_text(v.clone())))
}

pub fn decode_question(c: &Cursor<'_>) -> Result<Question, InterchangeError> {
    c.only_attrs(&["id", "frame", "slot", "prompt", "type", "elem", "source"])?;
    let mut q = Question {
        id: c.required("id")?.to_string(),
        frame: ident(c, "frame")?.to_string(),
        slot: ident(c, "slot")?.to_string(),
        prompt: c.required("prompt")?.to_string(),
        kind: decode_kind(c)?,
        choices: None,
        violations: Vec::new(),
        source: c.attr("source").map(str::to_string),
    };
    for k in c.children() {
        match k.name() {
            "choices" if q.choices.is_none() => {
                k.only_attrs(&[])?;
                q.choices = Some(k.children().iter().map(decode_value).collect::<Result<_, _>>()?);
            }
            "violation" => {
                k.only_attrs(&[])?;
                q.violations.push(k.text().to_string());
            }
            _ => return Err(k.unexpected()),
        }
    }
    Ok(q)
}

fn encode_event(e: &TraceEvent) -> Element {
    let mut el = Element::new("event")
        .attr("seq", e.seq.to_string())
        .attr("kind", e.kind.name())
        .attr("frame", e.frame.clone())
        .attr("origin", e.origin.clone())
        .attr("slot", e.slot.clone())
        .attr_opt("rule", e.rule.map(|r| r.to_string()));
    if !e.detail.is_empty() {
        el = el.attr("detail", e.detail.clone());
    }
    match &e.value {
        Some(v) => el.child(encode_value(v)),
        None => el,
    }
}

fn decode_event(c: &Cursor<'_>) -> Result<TraceEvent, InterchangeError> {
    c.only_attrs(&["seq", "kind", "frame", "origin", "slot", "rule", "detail"])?;
    let kind = c.required("kind")?;
    let value = match c.children().as_slice() {
        [] => None,
        [v] => Some(decode_value(v)?),
        _ => return Err(c.error("expected at most one value")),
    };
    Ok(TraceEvent {
        seq: number(c, "seq")?,
        kind: TraceKind::from_name(kind).ok_or_else(|| c.error(format!("bad event kind `{kind}`")))?,
        frame: c.required("frame")?.to_string(),
        origin: c.required("origin")?.to_string(),
        slot: c.required("slot")?.to_string(),
        rule: match c.attr("rule") {
            Some(_) => Some(number(c, "rule")? as usize),
            None => None,
        },
        value,
        detail: c.attr("detail").unwrap_or("").to_string(),
    })
}

pub fn trace_to_element(trace: &[TraceEvent]) -> Element {
    Element::new("trace").with_children(trace.iter().map(encode_event))
}

pub fn trace_to_xml(trace: &[TraceEvent]) -> String {
    trace_to_element(trace).to_xml()
}

pub fn trace_from_element(root: &Element) -> Result<Vec<TraceEvent>, InterchangeError> {
    let c = Cursor::root(root);
    if c.name() != "trace" {
        return Err(c.error(format!("expected <trace>, found <{}>", c.name())));
    }
    c.only_attrs(&[])?;
    c.children().iter().map(|k| if k.name() == "event" { decode_event(k) } else { Err(k.unexpected()) }).collect()
}

pub fn snapshot_to_xml(s: &Snapshot) -> String {
    let mut root = Element::new("session")
        .attr("version", SNAPSHOT_VERSION)
        .attr("world", s.world_version.clone())
        .attr("next-question", s.next_question.to_string())
        .attr("next-seq", s.next_seq.to_string())
        .attr("resolver", s.default_resolver.clone());
    if let Some((f, slot)) = &s.goal {
        root = root.attr("goal-frame", f.clone()).attr("goal-slot", slot.clone());
    }
    let mut counters = Element::new("counters");
    for name in Counters::NAMES {
        counters = counters.attr(name, s.counters.get(name).unwrap_or(0).to_string());
    }
    root = root.child(counters);
    for (f, r) in &s.resolvers {
        root = root.child(Element::new("resolver").attr("frame", f.clone()).attr("id", r.clone()));
    }
    for (f, slot, v) in &s.memory {
        root = root.child(Element::new("value").attr("frame", f.clone()).attr("slot", slot.clone()).child(encode_value(v)));
    }
    if let Some(q) = &s.pending {
        root = root.child(encode_question("pending", q));
    }
    for (f, slot, level) in &s.asked_at {
        root = root.child(Element::new("asked").attr("frame", f.clone()).attr("slot", slot.clone()).attr("level", level.clone()));
    }
    for (o, f, slot, v) in &s.stub_cache {
        root = root.child(
            Element::new("cached")
                .attr("origin", o.clone())
                .attr("frame", f.clone())
                .attr("slot", slot.clone())
                .child(encode_value(v)),
        );
    }
    for f in &s.fetched {
        root = root.child(Element::new("fetched").attr("frame", f.clone()));
    }
    if !s.overlay.is_empty() {
        root = root.child(Element::new("overlay").with_children(s.overlay.iter().map(encode_frame)));
    }
    for (f, n) in &s.fire_counts {
        root = root.child(Element::new("fired").attr("frame", f.clone()).attr("count", n.to_string()));
    }
    root.child(trace_to_element(&s.trace)).to_xml()
}

pub fn snapshot_from_xml(text: &str) -> Result<Snapshot, InterchangeError> {
    let root = Element::parse(text)?;
    let c = Cursor::root(&root);
    if c.name() != "session" {
        return Err(c.error(format!("expected <session>, found <{}>", c.name())));
    }
    c.only_attrs(&["version", "world", "next-question", "next-seq", "resolver", "goal-frame", "goal-slot"])?;
    let version = c.required("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(InterchangeError::VersionUnsupported(version.to_string()));
    }
    let goal = match (c.attr("goal-frame"), c.attr("goal-slot")) {
        (None, None) => None,
        _ => Some((ident(&c, "goal-frame")?.to_string(), ident(&c, "goal-slot")?.to_string())),
    };
    let mut s = Snapshot {
        world_version: c.required("world")?.to_string(),
        goal,
        next_question: number(&c, "next-question")?,
        next_seq: number(&c, "next-seq")?,
        counters: Counters::default(),
        default_resolver: c.required("resolver")?.to_string(),
        resolvers: Vec::new(),
        memory: Vec::new(),
        pending: None,
        asked_at: Vec::new(),
        stub_cache: Vec::new(),
        fetched: Vec::new(),
        overlay: Vec::new(),
        fire_counts: Vec::new(),
        trace: Vec::new(),
    };
    for k in c.children() {
        match k.name() {
            "counters" => {
                k.only_attrs(&Counters::NAMES)?;
                for name in Counters::NAMES {
                    if k.attr(name).is_some() {
                        s.counters.set(name, number(&k, name)?);
                    }
                }
            }
            "resolver" => {
                k.only_attrs(&["frame", "id"])?;
                s.resolvers.push((ident(&k, "frame")?.to_string(), k.required("id")?.to_string()));
            }
            "value" => {
                k.only_attrs(&["frame", "slot"])?;
                let v = decode_value(&single_child(&k)?)?;
                s.memory.push((ident(&k, "frame")?.to_string(), ident(&k, "slot")?.to_string(), v));
            }
            "pending" if s.pending.is_none() => s.pending = Some(decode_question(&k)?),
            "asked" => {
                k.only_attrs(&["frame", "slot", "level"])?;
                s.asked_at.push((
                    ident(&k, "frame")?.to_string(),
                    ident(&k, "slot")?.to_string(),
                    ident(&k, "level")?.to_string(),
                ));
            }
            "cached" => {
                k.only_attrs(&["origin", "frame", "slot"])?;
                let v = decode_value(&single_child(&k)?)?;
                s.stub_cache.push((
                    ident(&k, "origin")?.to_string(),
                    ident(&k, "frame")?.to_string(),
                    ident(&k, "slot")?.to_string(),
                    v,
                ));
            }
            "fetched" => {
                k.only_attrs(&["frame"])?;
                s.fetched.push(ident(&k, "frame")?.to_string());
            }
            "overlay" => {
                k.only_attrs(&[])?;
                for f in k.children() {
                    if f.name() != "frame" {
                        return Err(f.unexpected());
                    }
                    s.overlay.push(decode_frame(&f)?);
                }
            }
            "fired" => {
                k.only_attrs(&["frame", "count"])?;
                s.fire_counts.push((ident(&k, "frame")?.to_string(), number(&k, "count")?));
            }
            "trace" => s.trace = trace_from_element(k.el())?,
            _ => return Err(k.unexpected()),
        }
    }
    Ok(s)
}
