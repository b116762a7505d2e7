//! Frames, slots, actions and the frame world.
//!
//! A [`WorldBuilder`] collects frame definitions; [`WorldBuilder::freeze`]
//! validates them and produces an immutable, shareable [`FrameWorld`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::Arc;

use indexmap::IndexMap;
use thiserror::Error;

use crate::datasources::table::{CmpOp, TableSource};
use crate::eval::{self, Env, EvalError};
use crate::expr::Expression;
use crate::value::{is_identifier, ScalarKind, Value, ValueKind};

/// Reserved reference slot present on every frame; assigning it changes the
/// frame's parent at run time.
pub const PARENT_SLOT: &str = "parent";

/// Function names evaluated by the engine itself.
pub const BUILTIN_FUNCTIONS: &[&str] = &["query", "generate"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotDef {
    pub name: String,
    pub kind: ValueKind,
    pub default: Option<Value>,
}

impl SlotDef {
    pub fn new(name: &str, kind: ValueKind) -> Self {
        SlotDef { name: name.to_string(), kind, default: None }
    }

    pub fn with_default(mut self, v: impl Into<Value>) -> Self {
        self.default = Some(v.into());
        self
    }

    pub fn parent() -> Self {
        SlotDef::new(PARENT_SLOT, ValueKind::Reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Backward,
    Forward,
}

/// A production rule. Backward rules conclude `target_slot` through their
/// single assignment; forward rules are triggered by a change of
/// `target_slot` and may assign several slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub target_slot: String,
    pub condition: Option<Expression>,
    pub assignments: Vec<(String, Expression)>,
    pub direction: Direction,
}

impl Rule {
    pub fn backward(slot: &str, value: Expression, condition: Option<Expression>) -> Self {
        Rule {
            target_slot: slot.to_string(),
            condition,
            assignments: vec![(slot.to_string(), value)],
            direction: Direction::Backward,
        }
    }

    pub fn forward(trigger: &str, condition: Option<Expression>, assignments: Vec<(String, Expression)>) -> Self {
        Rule { target_slot: trigger.to_string(), condition, assignments, direction: Direction::Forward }
    }

    /// Total node count of the condition and every value expression.
    pub fn complexity(&self) -> usize {
        self.condition.as_ref().map_or(0, Expression::node_count)
            + self.assignments.iter().map(|(_, e)| e.node_count()).sum::<usize>()
    }

    pub fn value(&self) -> Option<&Expression> {
        self.assignments.first().map(|(_, e)| e)
    }
}

/// Table lookup performed by a query action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySpec {
    pub table: String,
    pub column: String,
    pub predicate: Option<(String, CmpOp, Expression)>,
}

impl QuerySpec {
    /// `query("T", "col")` or `query("T", "col", "keycol", "op", value)`.
    pub fn from_call(args: &[Expression]) -> Option<Self> {
        let s = |e: &Expression| match e {
            Expression::Literal(Value::String(s)) => Some(s.clone()),
            _ => None,
        };
        match args {
            [t, c] => Some(QuerySpec { table: s(t)?, column: s(c)?, predicate: None }),
            [t, c, k, op, v] => Some(QuerySpec {
                table: s(t)?,
                column: s(c)?,
                predicate: Some((s(k)?, CmpOp::from_symbol(&s(op)?)?, v.clone())),
            }),
            _ => None,
        }
    }

    pub fn to_call(&self) -> Expression {
        let mut args = vec![Expression::lit(self.table.as_str()), Expression::lit(self.column.as_str())];
        if let Some((k, op, v)) = &self.predicate {
            args.push(Expression::lit(k.as_str()));
            args.push(Expression::lit(op.symbol()));
            args.push(v.clone());
        }
        Expression::Call { name: "query".into(), args }
    }
}

/// Behaviour attached to a slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    BackwardRule(Rule),
    ForwardRule(Rule),
    AskUser { prompt: String },
    ExternalCall { name: String, args: Vec<Expression> },
    QueryValue(QuerySpec),
    Specialize { root: String },
}

impl Action {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Action::BackwardRule(_) => "backward_rule",
            Action::ForwardRule(_) => "forward_rule",
            Action::AskUser { .. } => "ask_user",
            Action::ExternalCall { .. } => "external_call",
            Action::QueryValue(_) => "query_value",
            Action::Specialize { .. } => "specialize",
        }
    }

    /// Fired when the slot value is needed.
    pub fn is_on_need(&self) -> bool {
        !matches!(self, Action::ForwardRule(_))
    }

    pub fn rule(&self) -> Option<&Rule> {
        match self {
            Action::BackwardRule(r) | Action::ForwardRule(r) => Some(r),
            _ => None,
        }
    }

    /// Textual form: every action except asks is written as a rule.
    pub fn as_rule(&self, slot: &str) -> Option<Rule> {
        match self {
            Action::BackwardRule(r) | Action::ForwardRule(r) => Some(r.clone()),
            Action::AskUser { .. } => None,
            Action::ExternalCall { name, args } => {
                Some(Rule::backward(slot, Expression::Call { name: name.clone(), args: args.clone() }, None))
            }
            Action::QueryValue(q) => Some(Rule::backward(slot, q.to_call(), None)),
            Action::Specialize { root } => Some(Rule::backward(slot, Expression::Specialize { root: root.clone() }, None)),
        }
    }
}

/// An action together with the slot it belongs to (the concluded slot for
/// on-need actions, the trigger slot for forward rules).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotAction {
    pub slot: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FrameKind {
    Local,
    /// Proxy for a frame hosted by another instance (`kb://host:port/Frame`).
    RemoteStub { url: String },
    /// Declares a family of read-only member frames `<name>_<key>`, one per
    /// table row; the members' parent is the frameset's parent.
    Frameset { table: String, key: String },
    /// Slot reads dispatch to an adapter registered with the engine.
    ExternalObject,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameDef {
    pub name: String,
    pub parent: Option<String>,
    pub kind: FrameKind,
    pub slots: IndexMap<String, SlotDef>,
    pub constraints: Vec<Expression>,
    pub actions: Vec<SlotAction>,
    pub rules_from: Option<String>,
}

impl FrameDef {
    pub fn new(name: &str) -> Self {
        FrameDef {
            name: name.to_string(),
            parent: None,
            kind: FrameKind::Local,
            slots: IndexMap::new(),
            constraints: Vec::new(),
            actions: Vec::new(),
            rules_from: None,
        }
    }

    pub fn child_of(name: &str, parent: &str) -> Self {
        let mut f = FrameDef::new(name);
        f.parent = Some(parent.to_string());
        f
    }

    pub fn add_slot(&mut self, slot: SlotDef) -> Result<(), ModelError> {
        if slot.name == PARENT_SLOT {
            return Err(ModelError::ReservedSlot { frame: self.name.clone(), slot: slot.name });
        }
        if self.slots.contains_key(&slot.name) {
            return Err(ModelError::DuplicateSlot { frame: self.name.clone(), slot: slot.name });
        }
        self.slots.insert(slot.name.clone(), slot);
        Ok(())
    }

    pub fn slot(mut self, slot: SlotDef) -> Self {
        self.add_slot(slot).expect("duplicate slot");
        self
    }

    pub fn action(mut self, slot: &str, action: Action) -> Self {
        self.actions.push(SlotAction { slot: slot.to_string(), action });
        self
    }

    pub fn constraint(mut self, e: Expression) -> Self {
        self.constraints.push(e);
        self
    }

    /// On-need actions for `slot`, in declaration order.
    pub fn on_need_actions<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a Action> + 'a {
        self.actions.iter().filter(move |a| a.slot == slot && a.action.is_on_need()).map(|a| &a.action)
    }

    /// Forward rules triggered by `slot`, in declaration order.
    pub fn on_change_rules<'a>(&'a self, slot: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.actions.iter().filter(move |a| a.slot == slot).filter_map(|a| match &a.action {
            Action::ForwardRule(r) => Some(r),
            _ => None,
        })
    }

    pub fn is_stub(&self) -> bool {
        matches!(self.kind, FrameKind::RemoteStub { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("frame `{0}` is declared twice")]
    DuplicateFrame(String),
    #[error("slot `{slot}` is declared twice in frame `{frame}`")]
    DuplicateSlot { frame: String, slot: String },
    #[error("slot name `{slot}` is reserved (frame `{frame}`)")]
    ReservedSlot { frame: String, slot: String },
    #[error("extern function `{0}` is declared twice")]
    DuplicateExtern(String),
    #[error("`{0}` is not a valid identifier")]
    InvalidIdentifier(String),
    #[error("`{0}` is a reserved function name")]
    ReservedName(String),
    #[error("inheritance cycle: {}", .0.join(" -> "))]
    InheritanceCycle(Vec<String>),
    #[error("inheritance cycle through parent assignments: {}", .0.join(" -> "))]
    DynamicInheritanceCycle(Vec<String>),
    #[error("frame `{frame}` has unknown parent `{parent}`")]
    UnknownParent { frame: String, parent: String },
    #[error("default of {frame}.{slot} is not {expected}")]
    DefaultTypeMismatch { frame: String, slot: String, expected: ValueKind },
    #[error("constraint in frame `{frame}` references undeclared slot `{name}`")]
    UnknownSlotInConstraint { frame: String, name: String },
    #[error("invalid action on {frame}.{slot}: {reason}")]
    InvalidAction { frame: String, slot: String, reason: String },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("frame `{frame}` has no slot `{slot}`")]
    UnknownSlot { frame: String, slot: String },
}

/// Per-session store of slot values keyed by (frame, slot), in assignment
/// order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorkingMemory {
    entries: IndexMap<(String, String), Value>,
}

impl WorkingMemory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, frame: &str, slot: &str) -> Option<&Value> {
        self.entries.get(&(frame.to_string(), slot.to_string()))
    }

    pub fn set(&mut self, frame: &str, slot: &str, value: Value) {
        self.entries.insert((frame.to_string(), slot.to_string()), value);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &Value)> {
        self.entries.iter().map(|((f, s), v)| (f.as_str(), s.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Mutable collection of frame definitions before validation.
#[derive(Debug, Clone, Default)]
pub struct WorldBuilder {
    frames: IndexMap<String, FrameDef>,
    externs: IndexMap<String, usize>,
    tables: BTreeMap<String, Arc<TableSource>>,
}

impl WorldBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a frame; the declaration order is kept.
    pub fn add_frame(&mut self, frame: FrameDef) -> Result<(), ModelError> {
        if !is_identifier(&frame.name) {
            return Err(ModelError::InvalidIdentifier(frame.name));
        }
        if self.frames.contains_key(&frame.name) {
            return Err(ModelError::DuplicateFrame(frame.name));
        }
        if frame.slots.contains_key(PARENT_SLOT) {
            return Err(ModelError::ReservedSlot { frame: frame.name, slot: PARENT_SLOT.into() });
        }
        self.frames.insert(frame.name.clone(), frame);
        Ok(())
    }

    pub fn declare_extern(&mut self, name: &str, arity: usize) -> Result<(), ModelError> {
        if !is_identifier(name) {
            return Err(ModelError::InvalidIdentifier(name.to_string()));
        }
        if BUILTIN_FUNCTIONS.contains(&name) {
            return Err(ModelError::ReservedName(name.to_string()));
        }
        if self.externs.insert(name.to_string(), arity).is_some() {
            return Err(ModelError::DuplicateExtern(name.to_string()));
        }
        Ok(())
    }

    pub fn frame(&self, name: &str) -> Option<&FrameDef> {
        self.frames.get(name)
    }

    pub fn frame_mut(&mut self, name: &str) -> Option<&mut FrameDef> {
        self.frames.get_mut(name)
    }

    pub fn frames(&self) -> impl Iterator<Item = &FrameDef> {
        self.frames.values()
    }

    pub fn externs(&self) -> impl Iterator<Item = (&str, usize)> {
        self.externs.iter().map(|(n, a)| (n.as_str(), *a))
    }

    /// Attaches an opened table to the frameset named `frameset`.
    pub fn attach_table(&mut self, frameset: &str, table: Arc<TableSource>) {
        self.tables.insert(frameset.to_string(), table);
    }

    /// Validates and freezes the world.
    pub fn freeze(mut self) -> Result<FrameWorld, ModelError> {
        // parents resolve
        for f in self.frames.values() {
            if let Some(p) = &f.parent {
                if !self.frames.contains_key(p) {
                    return Err(ModelError::UnknownParent { frame: f.name.clone(), parent: p.clone() });
                }
            }
        }
        // forest
        for start in self.frames.keys() {
            let mut path = vec![start.clone()];
            let mut cur = start;
            while let Some(p) = self.frames[cur].parent.as_ref() {
                if let Some(i) = path.iter().position(|x| x == p) {
                    return Err(ModelError::InheritanceCycle(path[i..].to_vec()));
                }
                path.push(p.clone());
                cur = p;
            }
        }
        for f in self.frames.values() {
            for s in f.slots.values() {
                if let Some(d) = &s.default {
                    if !d.conforms_to(s.kind) {
                        return Err(ModelError::DefaultTypeMismatch {
                            frame: f.name.clone(),
                            slot: s.name.clone(),
                            expected: s.kind,
                        });
                    }
                }
            }
            for a in &f.actions {
                check_action_shape(f, a)?;
            }
        }
        for f in self.frames.values() {
            let Some(declared) = static_slot_names(&self.frames, &f.name) else {
                continue;
            };
            for c in &f.constraints {
                for name in c.unqualified_slots() {
                    if !declared.contains(name) {
                        return Err(ModelError::UnknownSlotInConstraint { frame: f.name.clone(), name: name.to_string() });
                    }
                }
            }
        }

        let externs = self.externs.clone();
        for f in self.frames.values_mut() {
            for a in &mut f.actions {
                normalize_action(&mut a.action, &externs);
            }
        }
        for (name, d) in &mut self.frames {
            for s in d.slots.values_mut() {
                if let Some(v) = s.default.take() {
                    s.default = Some(v.coerce_empty_list(s.kind));
                }
            }
            debug_assert_eq!(name, &d.name);
        }

        let mut children: HashMap<String, Vec<String>> = HashMap::new();
        for f in self.frames.values() {
            if let (Some(p), false) = (&f.parent, matches!(f.kind, FrameKind::Frameset { .. })) {
                children.entry(p.clone()).or_default().push(f.name.clone());
            }
        }
        let mut world = FrameWorld {
            frames: self.frames,
            externs: self.externs,
            tables: self.tables,
            children,
            version: String::new(),
        };
        world.version = crate::interchange::world_version(&world);
        Ok(world)
    }
}

fn check_action_shape(f: &FrameDef, a: &SlotAction) -> Result<(), ModelError> {
    let bad = |reason: &str| ModelError::InvalidAction { frame: f.name.clone(), slot: a.slot.clone(), reason: reason.into() };
    if matches!(f.kind, FrameKind::Frameset { .. }) {
        return Err(bad("frameset members cannot carry actions"));
    }
    match &a.action {
        Action::BackwardRule(r) => {
            if r.direction != Direction::Backward || r.assignments.len() != 1 || r.assignments[0].0 != a.slot || r.target_slot != a.slot {
                return Err(bad("a backward rule assigns exactly its target slot"));
            }
        }
        Action::ForwardRule(r) => {
            if r.direction != Direction::Forward || r.assignments.is_empty() || r.target_slot != a.slot {
                return Err(bad("a forward rule needs at least one assignment"));
            }
        }
        _ => {}
    }
    Ok(())
}

/// Turns unconditional backward rules whose value is a bare extern call,
/// table query or specialization into the corresponding action kind.
fn normalize_action(action: &mut Action, externs: &IndexMap<String, usize>) {
    let Action::BackwardRule(rule) = action else {
        return;
    };
    if rule.condition.is_some() {
        return;
    }
    let replacement = match rule.value() {
        Some(Expression::Specialize { root }) => Action::Specialize { root: root.clone() },
        Some(Expression::Call { name, args }) if name == "query" => match QuerySpec::from_call(args) {
            Some(q) => Action::QueryValue(q),
            None => return,
        },
        Some(Expression::Call { name, args }) if externs.contains_key(name) => {
            Action::ExternalCall { name: name.clone(), args: args.clone() }
        }
        _ => return,
    };
    *action = replacement;
}

/// Slot names visible from `frame` along its static chain, or `None` when
/// the chain leaves the local world (stubs, external objects, framesets).
fn static_slot_names<'a>(frames: &'a IndexMap<String, FrameDef>, frame: &str) -> Option<HashSet<&'a str>> {
    let mut names: HashSet<&str> = HashSet::new();
    names.insert(PARENT_SLOT);
    let mut cur = frames.get(frame);
    while let Some(f) = cur {
        if !matches!(f.kind, FrameKind::Local) {
            return None;
        }
        names.extend(f.slots.keys().map(String::as_str));
        cur = f.parent.as_ref().and_then(|p| frames.get(p));
    }
    Some(names)
}

/// Where a frame name resolves.
#[derive(Debug, Clone, Copy)]
pub enum FrameHandle<'a> {
    Declared(&'a FrameDef),
    /// Row `key` of a frameset.
    Member { frameset: &'a FrameDef, key: &'a str, table: &'a TableSource },
}

/// Immutable, validated frame world.
#[derive(Debug, Clone)]
pub struct FrameWorld {
    frames: IndexMap<String, FrameDef>,
    externs: IndexMap<String, usize>,
    tables: BTreeMap<String, Arc<TableSource>>,
    children: HashMap<String, Vec<String>>,
    version: String,
}

impl PartialEq for FrameWorld {
    /// Structural equality (frames in order, externs).
    fn eq(&self, other: &Self) -> bool {
        self.frames.len() == other.frames.len()
            && self.frames.iter().zip(other.frames.iter()).all(|(a, b)| a == b)
            && self.externs.iter().eq(other.externs.iter())
    }
}

impl FrameWorld {
    pub fn empty() -> Self {
        WorldBuilder::new().freeze().expect("empty world is valid")
    }

    /// Content hash of the canonical XML form.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// Back to a builder (frames, externs and tables are kept).
    pub fn to_builder(&self) -> WorldBuilder {
        WorldBuilder { frames: self.frames.clone(), externs: self.externs.clone(), tables: self.tables.clone() }
    }

    pub fn frame(&self, name: &str) -> Option<&FrameDef> {
        self.frames.get(name)
    }

    /// Declared frames in declaration order.
    pub fn frames(&self) -> impl Iterator<Item = &FrameDef> {
        self.frames.values()
    }

    pub fn externs(&self) -> impl Iterator<Item = (&str, usize)> {
        self.externs.iter().map(|(n, a)| (n.as_str(), *a))
    }

    pub fn extern_arity(&self, name: &str) -> Option<usize> {
        self.externs.get(name).copied()
    }

    pub fn table(&self, frameset: &str) -> Option<&Arc<TableSource>> {
        self.tables.get(frameset)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Arc<TableSource>)> {
        self.tables.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Resolves declared frames and frameset members.
    pub fn resolve(&self, name: &str) -> Option<FrameHandle<'_>> {
        if let Some(f) = self.frames.get(name) {
            return Some(FrameHandle::Declared(f));
        }
        for f in self.frames.values() {
            if !matches!(f.kind, FrameKind::Frameset { .. }) {
                continue;
            }
            let Some(key) = name.strip_prefix(f.name.as_str()).and_then(|k| k.strip_prefix('_')) else {
                continue;
            };
            if let Some(table) = self.tables.get(&f.name) {
                if let Some(k) = table.key_ref(key) {
                    return Some(FrameHandle::Member { frameset: f, key: k, table });
                }
            }
        }
        None
    }

    pub fn contains(&self, name: &str) -> bool {
        self.resolve(name).is_some()
    }

    pub fn static_parent(&self, name: &str) -> Option<&str> {
        match self.resolve(name)? {
            FrameHandle::Declared(f) if matches!(f.kind, FrameKind::Frameset { .. }) => None,
            FrameHandle::Declared(f) => f.parent.as_deref(),
            FrameHandle::Member { frameset, .. } => frameset.parent.as_deref(),
        }
    }

    /// Direct children in declaration order; members of framesets whose
    /// parent is `name` follow, in table order.
    pub fn children(&self, name: &str) -> Vec<String> {
        let mut out = self.children.get(name).cloned().unwrap_or_default();
        for f in self.frames.values() {
            if matches!(f.kind, FrameKind::Frameset { .. }) && f.parent.as_deref() == Some(name) {
                if let Some(t) = self.tables.get(&f.name) {
                    out.extend(t.keys().map(|k| format!("{}_{}", f.name, k)));
                }
            }
        }
        out
    }

    /// Proper descendants of `root`, depth-first pre-order.
    pub fn descendants(&self, root: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut stack: Vec<String> = self.children(root).into_iter().rev().collect();
        while let Some(f) = stack.pop() {
            stack.extend(self.children(&f).into_iter().rev());
            out.push(f);
        }
        out
    }

    /// Depth below the root of its static tree.
    pub fn depth(&self, name: &str) -> usize {
        let mut d = 0;
        let mut cur = self.static_parent(name);
        while let Some(p) = cur {
            d += 1;
            cur = self.static_parent(p);
        }
        d
    }

    /// Frames from `frame` up to its root. A reference stored in working
    /// memory under `(frame, parent)` overrides the static parent.
    pub fn ancestry(&self, frame: &str, wm: Option<&WorkingMemory>) -> Result<Vec<String>, ModelError> {
        if !self.contains(frame) {
            return Err(ModelError::UnknownFrame(frame.to_string()));
        }
        let mut path = vec![frame.to_string()];
        let mut cur = frame.to_string();
        loop {
            let dynamic = wm.and_then(|wm| wm.get(&cur, PARENT_SLOT)).and_then(Value::as_reference);
            let next = match dynamic {
                Some(p) => p.to_string(),
                None => match self.static_parent(&cur) {
                    Some(p) => p.to_string(),
                    None => return Ok(path),
                },
            };
            if path.contains(&next) {
                path.push(next);
                return Err(ModelError::DynamicInheritanceCycle(path));
            }
            if !self.contains(&next) {
                return Err(ModelError::UnknownFrame(next));
            }
            path.push(next.clone());
            cur = next;
        }
    }

    /// Slot definition visible at `frame` itself (no inheritance).
    pub fn own_slot(&self, frame: &str, slot: &str) -> Option<SlotDef> {
        if slot == PARENT_SLOT {
            return Some(SlotDef::parent());
        }
        match self.resolve(frame)? {
            FrameHandle::Declared(f) => f.slots.get(slot).cloned(),
            FrameHandle::Member { table, .. } => {
                let i = table.column_index(slot)?;
                Some(SlotDef::new(slot, ValueKind::from(table.column_kind(i))))
            }
        }
    }

    /// Nearest definition of `slot` along the ancestry of `frame`, together
    /// with the frame that declares it.
    pub fn slot_lookup(&self, frame: &str, slot: &str, wm: Option<&WorkingMemory>) -> Result<(SlotDef, String), ModelError> {
        for level in self.ancestry(frame, wm)? {
            if let Some(def) = self.own_slot(&level, slot) {
                return Ok((def, level));
            }
        }
        Err(ModelError::UnknownSlot { frame: frame.to_string(), slot: slot.to_string() })
    }

    /// Constraints that reject `candidate` for `frame.slot`. Constraints of
    /// every frame on the ancestry that mention the slot are evaluated with
    /// the candidate substituted and other slots read from working memory;
    /// constraints that evaluate to unknown pass.
    pub fn check_constraints(&self, frame: &str, slot: &str, candidate: &Value, wm: &WorkingMemory) -> Vec<Expression> {
        constraint_violations(self, frame, slot, candidate, wm, &mut |_, _| Ok(Value::Unknown))
    }

    /// Choices for a question: the literal list of the first `slot in [..]`
    /// constraint along the ancestry.
    pub fn choices(&self, frame: &str, slot: &str, wm: Option<&WorkingMemory>) -> Option<Vec<Value>> {
        let levels = self.ancestry(frame, wm).unwrap_or_else(|_| vec![frame.to_string()]);
        for level in levels {
            let Some(f) = self.frames.get(&level) else { continue };
            for c in &f.constraints {
                if let Expression::Binary(crate::expr::BinaryOp::In, l, r) = c {
                    if let (Expression::SlotRef { frame: None, slot: s }, Expression::List(items)) = (l.as_ref(), r.as_ref()) {
                        if s == slot {
                            let lits: Option<Vec<Value>> = items
                                .iter()
                                .map(|e| match e {
                                    Expression::Literal(v) => Some(v.clone()),
                                    _ => None,
                                })
                                .collect();
                            if let Some(l) = lits {
                                return Some(l);
                            }
                        }
                    }
                }
            }
        }
        None
    }

    /// Member frame names of every frameset, for listings.
    pub fn member_count(&self, frameset: &str) -> usize {
        self.tables.get(frameset).map_or(0, |t| t.len())
    }

    pub fn scalar_kind_of(&self, table: &str, column: &str) -> Option<ScalarKind> {
        let t = self.tables.get(table)?;
        t.column_index(column).map(|i| t.column_kind(i))
    }
}

/// Shared implementation of constraint checking; `calls` evaluates extern
/// functions.
pub fn constraint_violations(
    world: &FrameWorld,
    frame: &str,
    slot: &str,
    candidate: &Value,
    wm: &WorkingMemory,
    calls: &mut dyn FnMut(&str, Vec<Value>) -> Result<Value, EvalError>,
) -> Vec<Expression> {
    let levels = world.ancestry(frame, Some(wm)).unwrap_or_else(|_| vec![frame.to_string()]);
    constraint_violations_at(world, &levels, frame, slot, candidate, wm, calls)
}

/// Like [`constraint_violations`], with the frames whose constraints apply
/// given explicitly.
pub fn constraint_violations_at(
    world: &FrameWorld,
    levels: &[String],
    frame: &str,
    slot: &str,
    candidate: &Value,
    wm: &WorkingMemory,
    calls: &mut dyn FnMut(&str, Vec<Value>) -> Result<Value, EvalError>,
) -> Vec<Expression> {
    let mut out = Vec::new();
    for level in levels {
        let Some(f) = world.frame(level) else { continue };
        for c in &f.constraints {
            if !c.mentions_slot(slot) {
                continue;
            }
            let mut env = MemoryEnv { origin: frame, slot, candidate, wm, calls };
            match eval::eval(&mut env, c) {
                Ok(Value::Boolean(false)) => out.push(c.clone()),
                Ok(_) => {}
                Err(_) => out.push(c.clone()),
            }
        }
    }
    out
}

/// Reads working memory only; the candidate value shadows `origin.slot`.
struct MemoryEnv<'a> {
    origin: &'a str,
    slot: &'a str,
    candidate: &'a Value,
    wm: &'a WorkingMemory,
    calls: &'a mut dyn FnMut(&str, Vec<Value>) -> Result<Value, EvalError>,
}

impl Env for MemoryEnv<'_> {
    type Stop = EvalError;

    fn slot(&mut self, qualifier: Option<&str>, name: &str) -> Result<Value, EvalError> {
        let frame = qualifier.unwrap_or(self.origin);
        if frame == self.origin && name == self.slot {
            return Ok(self.candidate.clone());
        }
        Ok(self.wm.get(frame, name).cloned().unwrap_or(Value::Unknown))
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
        (self.calls)(name, args)
    }

    fn exists(&mut self, _: &str, _: &str, _: &Expression) -> Result<Value, EvalError> {
        Ok(Value::Unknown)
    }

    fn specialize(&mut self, _: &str) -> Result<Value, EvalError> {
        Ok(Value::Unknown)
    }
}
