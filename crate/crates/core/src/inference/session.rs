//! One consultation: working memory, goal stack, trace and pending question.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use indexmap::IndexMap;

use super::remote::{remote_frame_name, CallerLink, InboundHandler, RemoteReply};
use super::resolver::{select_actions, ConflictResolver, FirstApplicable};
use super::trace::{TraceEvent, TraceKind};
use super::{Engine, InferenceError, Outcome, Question};
use crate::datasources::{query_rows, DataError, Predicate, TableSource};
use crate::eval::{self, condition_truth, Env, EvalError};
use crate::expr::Expression;
use crate::interchange::{merge_rule_set, rules_from_element, Element, InterchangeError, Snapshot};
use crate::model::{
    constraint_violations_at, Action, FrameDef, FrameHandle, FrameKind, FrameWorld, SlotDef, WorkingMemory,
    PARENT_SLOT,
};
use crate::value::{Value, ValueKind};

/// Metering counters of one session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub rules_fired: u64,
    pub questions_asked: u64,
    pub remote_calls: u64,
    pub cache_hits: u64,
    pub cache_misses: u64,
    pub rule_fetches: u64,
}

impl Counters {
    pub const NAMES: [&'static str; 6] =
        ["rules_fired", "questions_asked", "remote_calls", "cache_hits", "cache_misses", "rule_fetches"];

    pub fn get(&self, name: &str) -> Option<u64> {
        Some(match name {
            "rules_fired" => self.rules_fired,
            "questions_asked" => self.questions_asked,
            "remote_calls" => self.remote_calls,
            "cache_hits" => self.cache_hits,
            "cache_misses" => self.cache_misses,
            "rule_fetches" => self.rule_fetches,
            _ => return None,
        })
    }

    pub fn set(&mut self, name: &str, v: u64) -> bool {
        let slot = match name {
            "rules_fired" => &mut self.rules_fired,
            "questions_asked" => &mut self.questions_asked,
            "remote_calls" => &mut self.remote_calls,
            "cache_hits" => &mut self.cache_hits,
            "cache_misses" => &mut self.cache_misses,
            "rule_fetches" => &mut self.rule_fetches,
            _ => return false,
        };
        *slot = v;
        true
    }
}

/// Non-local exit of an inference step.
enum Stop {
    Suspend(Question),
    Fatal(InferenceError),
    Eval(EvalError),
}

impl From<EvalError> for Stop {
    fn from(e: EvalError) -> Self {
        Stop::Eval(e)
    }
}

fn stop_to_error(s: Stop) -> InferenceError {
    match s {
        Stop::Fatal(e) => e,
        Stop::Eval(e) => InferenceError::Remote(e.to_string()),
        Stop::Suspend(q) => InferenceError::QuestionPending(q.id),
    }
}

type StubKey = (String, String, String);

pub struct InferenceSession {
    engine: Arc<Engine>,
    world: Arc<FrameWorld>,
    token: String,
    wm: WorkingMemory,
    goals: Vec<(String, String)>,
    goal: Option<(String, String)>,
    pending: Option<Question>,
    /// Level each open question was raised at, keyed by (frame, slot).
    asked_at: BTreeMap<(String, String), String>,
    relayed: Option<Question>,
    relayed_fatal: Option<InferenceError>,
    trace: Vec<TraceEvent>,
    next_seq: u64,
    next_question: u64,
    resolvers: BTreeMap<String, String>,
    default_resolver: String,
    counters: Counters,
    fire_counts: BTreeMap<String, u64>,
    cascade_depth: usize,
    stub_cache: IndexMap<StubKey, Value>,
    fetched: BTreeSet<String>,
    overlay: BTreeSet<String>,
    rows: HashMap<String, Vec<Value>>,
    remote_constraints: HashMap<String, Vec<Expression>>,
    remote_origins: HashMap<String, Arc<dyn CallerLink>>,
}

impl Drop for InferenceSession {
    fn drop(&mut self) {
        if let Some(c) = self.engine.connector() {
            c.close(&self.token);
        }
    }
}

impl InferenceSession {
    pub(super) fn new(engine: Arc<Engine>, token: String) -> Self {
        InferenceSession {
            world: engine.world().clone(),
            resolvers: engine.frame_resolvers().clone(),
            default_resolver: engine.default_resolver().to_string(),
            engine,
            token,
            wm: WorkingMemory::new(),
            goals: Vec::new(),
            goal: None,
            pending: None,
            asked_at: BTreeMap::new(),
            relayed: None,
            relayed_fatal: None,
            trace: Vec::new(),
            next_seq: 1,
            next_question: 1,
            counters: Counters::default(),
            fire_counts: BTreeMap::new(),
            cascade_depth: 0,
            stub_cache: IndexMap::new(),
            fetched: BTreeSet::new(),
            overlay: BTreeSet::new(),
            rows: HashMap::new(),
            remote_constraints: HashMap::new(),
            remote_origins: HashMap::new(),
        }
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    /// The engine's world plus frames generated or extended in this session.
    pub fn world(&self) -> &FrameWorld {
        &self.world
    }

    pub fn token(&self) -> &str {
        &self.token
    }

    pub fn memory(&self) -> &WorkingMemory {
        &self.wm
    }

    pub fn value(&self, frame: &str, slot: &str) -> Option<&Value> {
        self.wm.get(frame, slot)
    }

    pub fn goal(&self) -> Option<(&str, &str)> {
        self.goal.as_ref().map(|(f, s)| (f.as_str(), s.as_str()))
    }

    pub fn pending(&self) -> Option<&Question> {
        self.pending.as_ref()
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    /// Rules fired per defining frame.
    pub fn fire_counts(&self) -> &BTreeMap<String, u64> {
        &self.fire_counts
    }

    /// Cached remote values keyed by (origin, stub frame, slot).
    pub fn stub_cache(&self) -> impl Iterator<Item = (&StubKey, &Value)> {
        self.stub_cache.iter()
    }

    pub fn set_resolver(&mut self, frame: &str, id: &str) -> Result<(), InferenceError> {
        if self.engine.resolver(id).is_none() {
            return Err(InferenceError::UnknownResolver(id.to_string()));
        }
        if !self.world.contains(frame) {
            return Err(InferenceError::UnknownFrame(frame.to_string()));
        }
        self.resolvers.insert(frame.to_string(), id.to_string());
        Ok(())
    }

    pub fn set_default_resolver(&mut self, id: &str) -> Result<(), InferenceError> {
        if self.engine.resolver(id).is_none() {
            return Err(InferenceError::UnknownResolver(id.to_string()));
        }
        self.default_resolver = id.to_string();
        Ok(())
    }

    /// Opens connections to every stub and rule repository of the world.
    pub fn preconnect(&self) -> Result<(), InferenceError> {
        let Some(c) = self.engine.connector() else { return Ok(()) };
        for f in self.world.frames() {
            let url = match (&f.kind, &f.rules_from) {
                (FrameKind::RemoteStub { url }, _) => url,
                (_, Some(url)) => url,
                _ => continue,
            };
            c.connect(&self.token, url).map_err(|e| InferenceError::Remote(e.to_string()))?;
        }
        Ok(())
    }

    /// Starts inference of `frame.slot`.
    pub fn infer(&mut self, frame: &str, slot: &str) -> Result<Outcome, InferenceError> {
        if let Some(q) = &self.pending {
            return Err(InferenceError::QuestionPending(q.id.clone()));
        }
        self.check_goal(frame, slot)?;
        self.goal = Some((frame.to_string(), slot.to_string()));
        self.run_goal()
    }

    /// Answers the pending question and resumes the goal.
    pub fn answer(&mut self, question_id: &str, value: Value) -> Result<Outcome, InferenceError> {
        let q = self.pending.clone().ok_or(InferenceError::NoPendingQuestion)?;
        if q.id != question_id {
            return Err(InferenceError::WrongQuestion { expected: q.id, found: question_id.to_string() });
        }
        let value = value.coerce_empty_list(q.kind);
        if value.is_unknown() || !value.conforms_to(q.kind) {
            return Err(InferenceError::AnswerTypeMismatch { expected: q.kind, found: value.kind() });
        }
        if let Some(url) = q.source.clone() {
            let violations = self.violations(&q.frame, &q.frame, &q.slot, &value);
            if !violations.is_empty() {
                return Err(self.reask(q, violations));
            }
            let connector =
                self.engine.connector().cloned().ok_or_else(|| InferenceError::Remote("no remote connector".into()))?;
            let token = self.token.clone();
            self.counters.remote_calls += 1;
            match connector.answer(&token, &url, &q.frame, &q.slot, &value, self) {
                Ok(()) => {}
                Err(f) if f.code == "ConstraintViolation" => return Err(self.reask(q, vec![f.message])),
                Err(f) => return Err(InferenceError::Remote(f.to_string())),
            }
            self.push(TraceKind::AnswerReceived, &q.frame, &q.frame, &q.slot, None, Some(value.clone()), &url);
        } else {
            let level = self.asked_at.get(&(q.frame.clone(), q.slot.clone())).cloned().unwrap_or(q.frame.clone());
            let violations = self.violations(&q.frame, &level, &q.slot, &value);
            if !violations.is_empty() {
                return Err(self.reask(q, violations));
            }
            self.push(TraceKind::AnswerReceived, &level, &q.frame, &q.slot, None, Some(value.clone()), "");
            self.pending = None;
            self.cascade_depth = 0;
            self.store(&q.frame, &q.slot, value.clone(), "answer").map_err(stop_to_error)?;
        }
        self.pending = None;
        self.asked_at.remove(&(q.frame.clone(), q.slot.clone()));
        if self.goal.is_some() {
            self.run_goal()
        } else {
            Ok(Outcome::Resolved(value))
        }
    }

    fn reask(&mut self, mut q: Question, violations: Vec<String>) -> InferenceError {
        q.violations = violations.clone();
        self.pending = Some(q.clone());
        self.push(TraceKind::QuestionEmitted, &q.frame, &q.frame, &q.slot, None, None, "re-ask");
        InferenceError::ConstraintViolation { violations, question: Some(Box::new(q)) }
    }

    /// Assigns a value directly and runs the on-change rules.
    pub fn assign(&mut self, frame: &str, slot: &str, value: Value) -> Result<(), InferenceError> {
        if !self.world.contains(frame) {
            return Err(InferenceError::UnknownFrame(frame.to_string()));
        }
        if self.is_member(frame) {
            return Err(InferenceError::ReadOnly { frame: frame.to_string(), slot: slot.to_string() });
        }
        let kind = if slot == PARENT_SLOT {
            ValueKind::Reference
        } else {
            self.world.slot_lookup(frame, slot, Some(&self.wm))?.0.kind
        };
        let value = value.coerce_empty_list(kind);
        if value.is_unknown() || !value.conforms_to(kind) {
            return Err(InferenceError::TypeMismatch {
                frame: frame.to_string(),
                slot: slot.to_string(),
                expected: kind,
                found: value.kind(),
            });
        }
        let violations = self.violations(frame, frame, slot, &value);
        if !violations.is_empty() {
            return Err(InferenceError::ConstraintViolation { violations, question: None });
        }
        self.cascade_depth = 0;
        self.store(frame, slot, value, "assign").map_err(stop_to_error)
    }

    /// Evaluates an expression with `origin` as the origin frame.
    pub fn eval(&mut self, origin: &str, expr: &Expression) -> Result<Outcome, InferenceError> {
        if let Some(q) = &self.pending {
            return Err(InferenceError::QuestionPending(q.id.clone()));
        }
        if !self.is_frame(origin) {
            return Err(InferenceError::UnknownFrame(origin.to_string()));
        }
        self.goals.clear();
        self.cascade_depth = 0;
        match self.eval_in(origin, expr) {
            Ok(Value::Unknown) => Ok(Outcome::Unknown),
            Ok(v) => Ok(Outcome::Resolved(v)),
            Err(Stop::Suspend(q)) => {
                self.pending = Some(q.clone());
                Ok(Outcome::Suspended(q))
            }
            Err(Stop::Fatal(e)) => Err(e),
            Err(Stop::Eval(e)) => Err(InferenceError::Interchange(InterchangeError::Schema {
                path: "expression".into(),
                reason: e.to_string(),
            })),
        }
    }

    /// Deepest constrained descendant of `root` whose constraints `origin`
    /// satisfies.
    pub fn specify(&mut self, origin: &str, root: &str) -> Result<Outcome, InferenceError> {
        self.eval(origin, &Expression::Specialize { root: root.to_string() })
    }

    /// Creates a frame from the first row of `table` where `column` equals
    /// `value`.
    pub fn generate(&mut self, table: &str, column: &str, value: Value, name: &str) -> Result<Value, InferenceError> {
        let args = vec![Value::from(table), Value::from(column), value, Value::from(name)];
        self.builtin_generate(&args).map_err(|e| match e {
            GenerateError::Data(d) => InferenceError::Data(d),
            GenerateError::Eval(e) => InferenceError::Remote(e.to_string()),
        })
    }

    /// Single table lookup, as the `query` builtin.
    pub fn query(&self, table: &str, column: &str, predicate: Option<&Predicate>) -> Result<Value, InferenceError> {
        let t = self.world.table(table).ok_or_else(|| DataError::UnknownTable(table.to_string()))?;
        Ok(query_rows(t, column, predicate)?)
    }

    fn check_goal(&self, frame: &str, slot: &str) -> Result<(), InferenceError> {
        if !self.world.contains(frame) {
            return Err(InferenceError::UnknownFrame(frame.to_string()));
        }
        if slot == PARENT_SLOT {
            return Ok(());
        }
        for level in self.world.ancestry(frame, Some(&self.wm))? {
            if self.world.own_slot(&level, slot).is_some() {
                return Ok(());
            }
            if let Some(f) = self.world.frame(&level) {
                let open = matches!(f.kind, FrameKind::RemoteStub { .. } | FrameKind::ExternalObject)
                    || f.rules_from.is_some()
                    || f.on_need_actions(slot).next().is_some()
                    || f.on_need_actions(PARENT_SLOT).next().is_some();
                if open {
                    return Ok(());
                }
            }
        }
        Err(InferenceError::UnknownSlot { frame: frame.to_string(), slot: slot.to_string() })
    }

    fn run_goal(&mut self) -> Result<Outcome, InferenceError> {
        let Some((frame, slot)) = self.goal.clone() else { return Ok(Outcome::Unknown) };
        self.goals.clear();
        self.cascade_depth = 0;
        self.relayed = None;
        self.relayed_fatal = None;
        let r = self.demand(&frame, &slot);
        self.goals.clear();
        match r {
            Ok(Value::Unknown) => Ok(Outcome::Unknown),
            Ok(v) => Ok(Outcome::Resolved(v)),
            Err(Stop::Suspend(q)) => {
                self.pending = Some(q.clone());
                Ok(Outcome::Suspended(q))
            }
            Err(Stop::Fatal(e)) => Err(e),
            Err(Stop::Eval(e)) => {
                self.note(&frame, &slot, e.to_string());
                Ok(Outcome::Unknown)
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(
        &mut self,
        kind: TraceKind,
        frame: &str,
        origin: &str,
        slot: &str,
        rule: Option<usize>,
        value: Option<Value>,
        detail: &str,
    ) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.trace.push(TraceEvent {
            seq,
            kind,
            frame: frame.to_string(),
            origin: origin.to_string(),
            slot: slot.to_string(),
            rule,
            value,
            detail: detail.to_string(),
        });
    }

    fn note(&mut self, origin: &str, slot: &str, detail: impl AsRef<str>) {
        self.push(TraceKind::Note, origin, origin, slot, None, None, detail.as_ref());
    }

    fn skip(&mut self, level: &str, origin: &str, slot: &str, idx: usize, reason: impl AsRef<str>) -> Result<Option<Value>, Stop> {
        self.push(TraceKind::RuleSkipped, level, origin, slot, Some(idx), None, reason.as_ref());
        Ok(None)
    }

    fn is_frame(&self, name: &str) -> bool {
        self.world.contains(name) || self.remote_origins.contains_key(name)
    }

    fn is_member(&self, frame: &str) -> bool {
        matches!(self.world.resolve(frame), Some(FrameHandle::Member { .. }))
    }

    fn on_stack(&self, origin: &str, slot: &str) -> bool {
        self.goals.iter().any(|(o, s)| o == origin && s == slot)
    }

    fn resolver_for(&self, frame: &str) -> Arc<dyn ConflictResolver> {
        let id = self.resolvers.get(frame).unwrap_or(&self.default_resolver);
        self.engine.resolver(id).cloned().unwrap_or_else(|| Arc::new(FirstApplicable))
    }

    /// Value of `frame.slot`, inferring it when working memory has none.
    fn demand(&mut self, frame: &str, slot: &str) -> Result<Value, Stop> {
        if let Some(v) = self.wm.get(frame, slot) {
            return Ok(v.clone());
        }
        if let Some(link) = self.remote_origins.get(frame).cloned() {
            return self.call_back(link, frame, slot);
        }
        if slot == PARENT_SLOT {
            return Ok(self.parent_of(frame)?.map_or(Value::Unknown, Value::Reference));
        }
        self.resolve(frame, frame, slot)
    }

    /// Asks the instance owning a remote origin for one of its slots.
    fn call_back(&mut self, link: Arc<dyn CallerLink>, frame: &str, slot: &str) -> Result<Value, Stop> {
        self.counters.remote_calls += 1;
        self.push(TraceKind::RemoteCall, frame, frame, slot, None, None, "callback");
        let token = self.token.clone();
        match link.get_slot(&token, frame, slot, self) {
            Ok(RemoteReply::Value(v)) => {
                if !v.is_unknown() {
                    self.wm.set(frame, slot, v.clone());
                }
                Ok(v)
            }
            Ok(RemoteReply::Question(q)) => Err(Stop::Suspend(q)),
            Ok(RemoteReply::Error { code, message }) => {
                self.note(frame, slot, format!("callback failed: {code}: {message}"));
                Ok(Value::Unknown)
            }
            Err(f) => {
                self.note(frame, slot, format!("callback failed: {f}"));
                Ok(Value::Unknown)
            }
        }
    }

    /// Resolves `origin.slot` from level `start` upwards.
    fn resolve(&mut self, origin: &str, start: &str, slot: &str) -> Result<Value, Stop> {
        if let Some(v) = self.wm.get(origin, slot) {
            return Ok(v.clone());
        }
        if self.on_stack(origin, slot) {
            self.note(origin, slot, "cycle");
            return Ok(Value::Unknown);
        }
        if !self.world.contains(start) {
            return Err(Stop::Eval(EvalError::UnknownFrame(start.to_string())));
        }
        self.goals.push((origin.to_string(), slot.to_string()));
        self.push(TraceKind::GoalPushed, start, origin, slot, None, None, "");
        let r = self.resolve_levels(origin, start, slot);
        self.goals.pop();
        r
    }

    fn resolve_levels(&mut self, origin: &str, start: &str, slot: &str) -> Result<Value, Stop> {
        let mut visited = vec![start.to_string()];
        let mut level = start.to_string();
        loop {
            if let Some(v) = self.resolve_at(origin, &level, slot)? {
                return Ok(v);
            }
            let Some(next) = self.parent_of(&level)? else { return Ok(Value::Unknown) };
            if visited.contains(&next) {
                visited.push(next);
                return Err(Stop::Fatal(InferenceError::DynamicInheritanceCycle(visited)));
            }
            if !self.world.contains(&next) {
                return Err(Stop::Fatal(InferenceError::UnknownFrame(next)));
            }
            visited.push(next.clone());
            level = next;
        }
    }

    /// One ancestry level. `None` continues with the parent.
    fn resolve_at(&mut self, origin: &str, level: &str, slot: &str) -> Result<Option<Value>, Stop> {
        let world = self.world.clone();
        match world.resolve(level) {
            None => return Err(Stop::Fatal(InferenceError::UnknownFrame(level.to_string()))),
            Some(FrameHandle::Member { key, table, .. }) => {
                let Some(col) = table.column_index(slot) else { return Ok(None) };
                let row = self.member_row(level, key, table)?;
                let v = row.get(col).cloned().unwrap_or(Value::Unknown);
                return Ok(if v.is_unknown() { None } else { Some(v) });
            }
            Some(FrameHandle::Declared(f)) => match &f.kind {
                FrameKind::RemoteStub { url } => return self.remote_level(origin, level, url, slot).map(Some),
                FrameKind::ExternalObject => return self.adapter_read(level, slot).map(Some),
                FrameKind::Local | FrameKind::Frameset { .. } => {}
            },
        }
        self.ensure_remote_rules(level);
        let world = self.world.clone();
        let f = world.frame(level).expect("declared frame");
        let candidates: Vec<(usize, &Action)> = f
            .actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.slot == slot && a.action.is_on_need())
            .map(|(i, a)| (i, &a.action))
            .collect();
        if !candidates.is_empty() {
            let resolver = self.resolver_for(level);
            let refs: Vec<&Action> = candidates.iter().map(|(_, a)| *a).collect();
            for k in select_actions(resolver.as_ref(), &refs) {
                let (idx, action) = candidates[k];
                if let Some(v) = self.try_action(origin, level, idx, slot, action)? {
                    return Ok(Some(v));
                }
            }
        }
        if let Some(d) = f.slots.get(slot).and_then(|s| s.default.clone()) {
            self.wm.set(origin, slot, d.clone());
            self.push(TraceKind::ValueAssigned, level, origin, slot, None, Some(d.clone()), "default");
            return Ok(Some(d));
        }
        Ok(None)
    }

    /// Current parent of `frame`: a working-memory assignment, else the
    /// result of the frame's own `parent` actions, else the static parent.
    fn parent_of(&mut self, frame: &str) -> Result<Option<String>, Stop> {
        if let Some(v) = self.wm.get(frame, PARENT_SLOT) {
            return Ok(v.as_reference().map(str::to_string));
        }
        let world = self.world.clone();
        let fallback = world.static_parent(frame).map(str::to_string);
        let Some(f) = world.frame(frame) else { return Ok(fallback) };
        if let FrameKind::RemoteStub { url } = &f.kind {
            let v = self.remote_level(frame, frame, url, PARENT_SLOT)?;
            return Ok(v.as_reference().map(str::to_string).or(fallback));
        }
        if f.kind != FrameKind::Local || self.on_stack(frame, PARENT_SLOT) {
            return Ok(fallback);
        }
        let candidates: Vec<(usize, &Action)> = f
            .actions
            .iter()
            .enumerate()
            .filter(|(_, a)| a.slot == PARENT_SLOT && a.action.is_on_need())
            .map(|(i, a)| (i, &a.action))
            .collect();
        if candidates.is_empty() {
            return Ok(fallback);
        }
        self.goals.push((frame.to_string(), PARENT_SLOT.to_string()));
        self.push(TraceKind::GoalPushed, frame, frame, PARENT_SLOT, None, None, "");
        let resolver = self.resolver_for(frame);
        let refs: Vec<&Action> = candidates.iter().map(|(_, a)| *a).collect();
        let mut found = Ok(None);
        for k in select_actions(resolver.as_ref(), &refs) {
            let (idx, action) = candidates[k];
            match self.try_action(frame, frame, idx, PARENT_SLOT, action) {
                Ok(Some(v)) => {
                    found = Ok(v.as_reference().map(str::to_string));
                    break;
                }
                Ok(None) => {}
                Err(e) => {
                    found = Err(e);
                    break;
                }
            }
        }
        self.goals.pop();
        Ok(found?.or(fallback))
    }

    fn try_action(&mut self, origin: &str, level: &str, idx: usize, slot: &str, action: &Action) -> Result<Option<Value>, Stop> {
        self.push(TraceKind::RuleTried, level, origin, slot, Some(idx), None, action.kind_name());
        if let Action::AskUser { prompt } = action {
            let q = self.emit_question(origin, level, slot, prompt);
            return Err(Stop::Suspend(q));
        }
        let Some(rule) = action.as_rule(slot) else { return Ok(None) };
        if let Some(c) = &rule.condition {
            match self.eval_in(origin, c) {
                Ok(v) => match condition_truth(&v) {
                    Ok(Some(true)) => {}
                    Ok(Some(false)) => return self.skip(level, origin, slot, idx, "condition false"),
                    Ok(None) => return self.skip(level, origin, slot, idx, "condition unknown"),
                    Err(e) => return self.skip(level, origin, slot, idx, e.to_string()),
                },
                Err(Stop::Eval(e)) => return self.skip(level, origin, slot, idx, e.to_string()),
                Err(s) => return Err(s),
            }
        }
        let Some(expr) = rule.value() else { return self.skip(level, origin, slot, idx, "no value") };
        let v = match self.eval_in(origin, expr) {
            Ok(v) => v,
            Err(Stop::Eval(e)) => return self.skip(level, origin, slot, idx, e.to_string()),
            Err(s) => return Err(s),
        };
        if let Some(reason) = self.reject(origin, level, slot, &v) {
            return self.skip(level, origin, slot, idx, reason);
        }
        let v = self.coerce(origin, level, slot, v);
        self.counters.rules_fired += 1;
        *self.fire_counts.entry(level.to_string()).or_default() += 1;
        self.push(TraceKind::RuleFired, level, origin, slot, Some(idx), Some(v.clone()), "");
        self.store(origin, slot, v.clone(), "rule")?;
        Ok(Some(v))
    }

    fn slot_kind(&self, origin: &str, level: &str, slot: &str) -> Option<ValueKind> {
        if slot == PARENT_SLOT {
            return Some(ValueKind::Reference);
        }
        self.world
            .slot_lookup(origin, slot, Some(&self.wm))
            .or_else(|_| self.world.slot_lookup(level, slot, Some(&self.wm)))
            .ok()
            .map(|(d, _)| d.kind)
    }

    fn coerce(&self, origin: &str, level: &str, slot: &str, v: Value) -> Value {
        match self.slot_kind(origin, level, slot) {
            Some(k) => v.coerce_empty_list(k),
            None => v,
        }
    }

    /// Why a concluded value cannot be stored, if it cannot.
    fn reject(&mut self, origin: &str, level: &str, slot: &str, v: &Value) -> Option<String> {
        if v.is_unknown() {
            return Some("value unknown".into());
        }
        if let Some(k) = self.slot_kind(origin, level, slot) {
            let c = v.clone().coerce_empty_list(k);
            if !c.conforms_to(k) {
                return Some(format!("expected {k}, got {}", c.kind()));
            }
        }
        if self.is_member(origin) {
            return Some(format!("{origin}.{slot} is read-only"));
        }
        let violations = self.violations(origin, level, slot, v);
        if !violations.is_empty() {
            return Some(format!("constraint violated: {}", violations.join("; ")));
        }
        None
    }

    /// Constraints rejecting `v` for `origin.slot`.
    fn violations(&self, origin: &str, level: &str, slot: &str, v: &Value) -> Vec<String> {
        let levels = self
            .world
            .ancestry(origin, Some(&self.wm))
            .or_else(|_| self.world.ancestry(level, Some(&self.wm)))
            .unwrap_or_default();
        let engine = self.engine.clone();
        let world = self.world.clone();
        let mut calls = |name: &str, args: Vec<Value>| call_extern(&engine, &world, name, args);
        constraint_violations_at(&world, &levels, origin, slot, v, &self.wm, &mut calls)
            .iter()
            .map(Expression::to_string)
            .collect()
    }

    fn store(&mut self, origin: &str, slot: &str, v: Value, source: &str) -> Result<(), Stop> {
        let changed = self.wm.get(origin, slot) != Some(&v);
        self.wm.set(origin, slot, v.clone());
        self.push(TraceKind::ValueAssigned, origin, origin, slot, None, Some(v), source);
        if changed {
            self.cascade_depth += 1;
            let r = self.fire_on_change(origin, slot);
            self.cascade_depth -= 1;
            r?;
        }
        Ok(())
    }

    fn fire_on_change(&mut self, origin: &str, slot: &str) -> Result<(), Stop> {
        let limit = self.engine.cascade_limit();
        if self.cascade_depth > limit {
            return Err(Stop::Fatal(InferenceError::CascadeLimitExceeded { limit }));
        }
        let levels = self.world.ancestry(origin, Some(&self.wm)).unwrap_or_default();
        for level in levels {
            let world = self.world.clone();
            let Some(f) = world.frame(&level) else { continue };
            let candidates: Vec<(usize, &Action)> = f
                .actions
                .iter()
                .enumerate()
                .filter(|(_, a)| a.slot == slot && matches!(a.action, Action::ForwardRule(_)))
                .map(|(i, a)| (i, &a.action))
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let resolver = self.resolver_for(&level);
            let refs: Vec<&Action> = candidates.iter().map(|(_, a)| *a).collect();
            for k in select_actions(resolver.as_ref(), &refs) {
                let (idx, action) = candidates[k];
                let Action::ForwardRule(rule) = action else { continue };
                self.push(TraceKind::RuleTried, &level, origin, slot, Some(idx), None, action.kind_name());
                if let Some(c) = &rule.condition {
                    let truth = self.eval_memory(origin, c).and_then(|v| condition_truth(&v));
                    let reason = match truth {
                        Ok(Some(true)) => None,
                        Ok(Some(false)) => Some("condition false".to_string()),
                        Ok(None) => Some("condition unknown".to_string()),
                        Err(e) => Some(e.to_string()),
                    };
                    if let Some(r) = reason {
                        self.skip(&level, origin, slot, idx, r)?;
                        continue;
                    }
                }
                let mut fired = false;
                for (target, e) in &rule.assignments {
                    let v = match self.eval_memory(origin, e) {
                        Ok(v) => v,
                        Err(e) => {
                            self.skip(&level, origin, target, idx, e.to_string())?;
                            continue;
                        }
                    };
                    if let Some(reason) = self.reject(origin, &level, target, &v) {
                        self.skip(&level, origin, target, idx, reason)?;
                        continue;
                    }
                    let v = self.coerce(origin, &level, target, v);
                    if !fired {
                        fired = true;
                        self.counters.rules_fired += 1;
                        *self.fire_counts.entry(level.clone()).or_default() += 1;
                    }
                    self.push(TraceKind::RuleFired, &level, origin, target, Some(idx), Some(v.clone()), "on-change");
                    self.store(origin, target, v, "on-change")?;
                }
                if fired && resolver.fire_first() {
                    break;
                }
            }
        }
        Ok(())
    }

    fn emit_question(&mut self, origin: &str, level: &str, slot: &str, prompt: &str) -> Question {
        let anchor = if self.world.contains(origin) { origin } else { level };
        let q = Question {
            id: format!("q{}", self.next_question),
            frame: origin.to_string(),
            slot: slot.to_string(),
            prompt: prompt.to_string(),
            kind: self.slot_kind(origin, level, slot).unwrap_or(ValueKind::String),
            choices: self.world.choices(anchor, slot, Some(&self.wm)),
            violations: Vec::new(),
            source: None,
        };
        self.next_question += 1;
        self.counters.questions_asked += 1;
        self.asked_at.insert((origin.to_string(), slot.to_string()), level.to_string());
        self.push(TraceKind::QuestionEmitted, level, origin, slot, None, None, prompt);
        q
    }

    fn eval_in(&mut self, origin: &str, e: &Expression) -> Result<Value, Stop> {
        let mut env = DemandEnv { s: self, origin: origin.to_string(), bindings: Vec::new() };
        eval::eval(&mut env, e)
    }

    fn eval_memory(&mut self, origin: &str, e: &Expression) -> Result<Value, EvalError> {
        let mut env = MemoryEnv { s: self, origin: origin.to_string() };
        eval::eval(&mut env, e)
    }

    /// Working memory, else a cached remote value, else the nearest default.
    fn memory_value(&self, frame: &str, slot: &str) -> Value {
        if let Some(v) = self.wm.get(frame, slot) {
            return v.clone();
        }
        if let Some(v) = self.stub_cache.iter().find(|((o, _, s), _)| o == frame && s == slot).map(|(_, v)| v) {
            return v.clone();
        }
        if slot == PARENT_SLOT {
            return self.world.static_parent(frame).map_or(Value::Unknown, |p| Value::Reference(p.to_string()));
        }
        for level in self.world.ancestry(frame, Some(&self.wm)).unwrap_or_default() {
            if let Some(d) = self.world.frame(&level).and_then(|f| f.slots.get(slot)).and_then(|s| s.default.clone()) {
                return d;
            }
        }
        Value::Unknown
    }

    fn member_row(&mut self, member: &str, key: &str, table: &TableSource) -> Result<Vec<Value>, Stop> {
        if let Some(r) = self.rows.get(member) {
            return Ok(r.clone());
        }
        match table.row(key) {
            Ok(r) => {
                let r = r.unwrap_or_default();
                self.rows.insert(member.to_string(), r.clone());
                Ok(r)
            }
            Err(e) => Err(Stop::Eval(EvalError::Data(e.to_string()))),
        }
    }

    fn adapter_read(&mut self, frame: &str, slot: &str) -> Result<Value, Stop> {
        if let Some(v) = self.wm.get(frame, slot).cloned() {
            self.push(TraceKind::CacheHit, frame, frame, slot, None, Some(v.clone()), "adapter");
            return Ok(v);
        }
        let Some(adapter) = self.engine.adapter(frame).cloned() else {
            self.note(frame, slot, format!("no adapter registered for {frame}"));
            return Ok(Value::Unknown);
        };
        match adapter.read(slot) {
            Some(v) if !v.is_unknown() => {
                self.wm.set(frame, slot, v.clone());
                self.push(TraceKind::ValueAssigned, frame, frame, slot, None, Some(v.clone()), "adapter");
                Ok(v)
            }
            _ => {
                self.note(frame, slot, format!("adapter of {frame} has no slot {slot}"));
                Ok(Value::Unknown)
            }
        }
    }

    fn remote_level(&mut self, origin: &str, level: &str, url: &str, slot: &str) -> Result<Value, Stop> {
        let key = (origin.to_string(), level.to_string(), slot.to_string());
        let connector = self.engine.connector().cloned();
        if let Some(v) = self.stub_cache.get(&key).cloned() {
            self.counters.cache_hits += 1;
            if let Some(c) = &connector {
                c.note_cache(true);
            }
            self.push(TraceKind::CacheHit, level, origin, slot, None, Some(v.clone()), url);
            return Ok(v);
        }
        self.counters.cache_misses += 1;
        let Some(connector) = connector else {
            self.note(origin, slot, format!("no remote connector for {url}"));
            return Ok(Value::Unknown);
        };
        connector.note_cache(false);
        self.counters.remote_calls += 1;
        self.push(TraceKind::RemoteCall, level, origin, slot, None, None, url);
        let origin_arg = if origin == level { None } else { Some(origin.to_string()) };
        let token = self.token.clone();
        self.relayed = None;
        self.relayed_fatal = None;
        let reply = connector.get_slot(&token, url, remote_frame_name(url), slot, origin_arg.as_deref(), self);
        match reply {
            Ok(RemoteReply::Value(v)) => {
                if !v.is_unknown() {
                    self.stub_cache.insert(key, v.clone());
                    self.push(TraceKind::ValueAssigned, level, origin, slot, None, Some(v.clone()), "remote");
                }
                Ok(v)
            }
            Ok(RemoteReply::Question(q)) => {
                if let Some(mine) = self.relayed.take() {
                    if mine.id == q.id && mine.frame == q.frame && mine.slot == q.slot {
                        return Err(Stop::Suspend(mine));
                    }
                }
                let mut local = q;
                local.id = format!("q{}", self.next_question);
                local.source = Some(url.to_string());
                self.next_question += 1;
                self.counters.questions_asked += 1;
                let prompt = local.prompt.clone();
                self.push(TraceKind::QuestionEmitted, level, &local.frame, &local.slot, None, None, &prompt);
                Err(Stop::Suspend(local))
            }
            Ok(RemoteReply::Error { code, message }) => {
                if let Some(e) = self.relayed_fatal.take() {
                    return Err(Stop::Fatal(e));
                }
                if code == "CascadeLimitExceeded" {
                    let limit = self.engine.cascade_limit();
                    return Err(Stop::Fatal(InferenceError::CascadeLimitExceeded { limit }));
                }
                self.note(origin, slot, format!("remote error from {url}: {code}: {message}"));
                Ok(Value::Unknown)
            }
            Err(f) => {
                self.note(origin, slot, format!("remote call to {url} failed: {f}"));
                Ok(Value::Unknown)
            }
        }
    }

    /// Fetches and merges `rules from` on the first visit of a level.
    fn ensure_remote_rules(&mut self, level: &str) {
        let Some(url) = self.world.frame(level).and_then(|f| f.rules_from.clone()) else { return };
        if !self.fetched.insert(level.to_string()) {
            return;
        }
        self.counters.rule_fetches += 1;
        let merged = match self.fetch_rules(level, &url) {
            Ok(root) => rules_from_element(&root)
                .and_then(|set| merge_rule_set(&self.world, set, level))
                .map_err(|e| e.to_string()),
            Err(e) => Err(e),
        };
        match merged {
            Ok(w) => {
                self.world = Arc::new(w);
                self.overlay.insert(level.to_string());
            }
            Err(e) => self.note(level, "", format!("remote rules from {url} unavailable: {e}")),
        }
    }

    fn fetch_rules(&mut self, level: &str, url: &str) -> Result<Element, String> {
        let connector = self.engine.connector().cloned().ok_or("no remote connector")?;
        self.counters.remote_calls += 1;
        self.push(TraceKind::RemoteCall, level, level, "", None, None, &format!("rules {url}"));
        let doc = connector.get_rules(&self.token, url).map_err(|e| e.to_string())?;
        Element::parse(&doc).map_err(|e| e.to_string())
    }

    fn candidate_constraints(&mut self, frame: &str) -> Vec<Expression> {
        let world = self.world.clone();
        match world.frame(frame) {
            Some(FrameDef { kind: FrameKind::RemoteStub { url }, .. }) => {
                if let Some(c) = self.remote_constraints.get(frame) {
                    return c.clone();
                }
                let got = match self.fetch_rules(frame, url) {
                    Ok(root) => rules_from_element(&root).map(|s| s.constraints).map_err(|e| e.to_string()),
                    Err(e) => Err(e),
                };
                let c = got.unwrap_or_else(|e| {
                    self.note(frame, "", format!("constraints of {frame} unavailable: {e}"));
                    Vec::new()
                });
                self.remote_constraints.insert(frame.to_string(), c.clone());
                c
            }
            Some(f) => f.constraints.clone(),
            None => Vec::new(),
        }
    }

    fn specify_frame(&mut self, origin: &str, root: &str) -> Result<Value, Stop> {
        if !self.world.contains(root) {
            return Ok(Value::Unknown);
        }
        let mut best: Option<(usize, String)> = None;
        for cand in self.world.descendants(root) {
            if cand == origin {
                continue;
            }
            let constraints = self.candidate_constraints(&cand);
            if constraints.is_empty() {
                continue;
            }
            let mut all = true;
            let mut known = false;
            for c in &constraints {
                match self.eval_in(origin, c) {
                    Ok(Value::Boolean(true)) => known = true,
                    Ok(Value::Unknown) => {}
                    Ok(_) | Err(Stop::Eval(_)) => {
                        all = false;
                        break;
                    }
                    Err(s) => return Err(s),
                }
            }
            if all && known {
                let depth = self.world.depth(&cand);
                if best.as_ref().is_none_or(|(d, _)| depth > *d) {
                    best = Some((depth, cand));
                }
            }
        }
        Ok(best.map_or(Value::Unknown, |(_, f)| Value::Reference(f)))
    }

    fn call_function(&mut self, name: &str, args: Vec<Value>, demand: bool) -> Result<Value, EvalError> {
        match name {
            "query" => self.builtin_query(&args),
            "generate" if demand => self.builtin_generate(&args).map_err(|e| match e {
                GenerateError::Data(d) => EvalError::Data(d.to_string()),
                GenerateError::Eval(e) => e,
            }),
            "generate" => Err(EvalError::Data("generate is not available in on-change rules".into())),
            _ => call_extern(&self.engine, &self.world, name, args),
        }
    }

    fn builtin_query(&self, args: &[Value]) -> Result<Value, EvalError> {
        let s = |i: usize| match args.get(i) {
            Some(Value::String(s)) => Ok(s.clone()),
            _ => Err(EvalError::Data(format!("query: argument {} must be a string", i + 1))),
        };
        let predicate = match args.len() {
            2 => None,
            5 => {
                let op = s(3)?;
                let op = crate::datasources::CmpOp::from_symbol(&op)
                    .ok_or_else(|| EvalError::Data(format!("query: unknown operator `{op}`")))?;
                Some(Predicate { column: s(2)?, op, value: args[4].clone() })
            }
            n => return Err(EvalError::ExternArity { name: "query".into(), expected: 5, found: n }),
        };
        let table = s(0)?;
        let t = self.world.table(&table).ok_or_else(|| EvalError::Data(DataError::UnknownTable(table.clone()).to_string()))?;
        query_rows(t, &s(1)?, predicate.as_ref()).map_err(|e| EvalError::Data(e.to_string()))
    }

    fn builtin_generate(&mut self, args: &[Value]) -> Result<Value, GenerateError> {
        let s = |i: usize| match args.get(i) {
            Some(Value::String(s)) => Ok(s.clone()),
            _ => Err(GenerateError::Eval(EvalError::Data(format!("generate: argument {} must be a string", i + 1)))),
        };
        if args.len() != 4 {
            return Err(GenerateError::Eval(EvalError::ExternArity {
                name: "generate".into(),
                expected: 4,
                found: args.len(),
            }));
        }
        let (table_name, column, value, name) = (s(0)?, s(1)?, args[2].clone(), s(3)?);
        if self.world.contains(&name) {
            if self.overlay.contains(&name) && !self.engine.world().contains(&name) {
                return Ok(Value::Reference(name));
            }
            return Err(GenerateError::Data(DataError::AmbiguousFrameName(name)));
        }
        let table = self.world.table(&table_name).cloned().ok_or_else(|| DataError::UnknownTable(table_name.clone()))?;
        let row = table.first_match(&Predicate::eq(&column, value.clone()))?.ok_or_else(|| DataError::NoMatchingRow {
            table: table_name.clone(),
            column: column.clone(),
            value: value.to_string(),
        })?;
        let mut frame = FrameDef::new(&name);
        frame.parent = self.world.frame(&table_name).and_then(|f| f.parent.clone());
        let mut cells = Vec::new();
        for (i, col) in table.columns().iter().enumerate() {
            if !crate::value::is_identifier(col) || col == PARENT_SLOT || crate::fmdl::is_keyword(col) {
                continue;
            }
            frame.add_slot(SlotDef::new(col, ValueKind::from(table.column_kind(i)))).map_err(DataError::from)?;
            if let Some(v) = row.get(i).filter(|v| !v.is_unknown()) {
                cells.push((col.clone(), v.clone()));
            }
        }
        let mut b = self.world.to_builder();
        b.add_frame(frame).map_err(DataError::from)?;
        self.world = Arc::new(b.freeze().map_err(DataError::from)?);
        self.overlay.insert(name.clone());
        self.push(TraceKind::Note, &name, &name, "", None, None, &format!("generated from {table_name}"));
        for (col, v) in cells {
            self.wm.set(&name, &col, v.clone());
            self.push(TraceKind::ValueAssigned, &name, &name, &col, None, Some(v), "table");
        }
        Ok(Value::Reference(name))
    }

    /// Captures the observable state.
    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            world_version: self.engine.world().version().to_string(),
            goal: self.goal.clone(),
            next_question: self.next_question,
            next_seq: self.next_seq,
            counters: self.counters,
            default_resolver: self.default_resolver.clone(),
            resolvers: self.resolvers.iter().map(|(f, r)| (f.clone(), r.clone())).collect(),
            memory: self.wm.iter().map(|(f, s, v)| (f.to_string(), s.to_string(), v.clone())).collect(),
            pending: self.pending.clone(),
            asked_at: self.asked_at.iter().map(|((f, s), l)| (f.clone(), s.clone(), l.clone())).collect(),
            stub_cache: self.stub_cache.iter().map(|((o, f, s), v)| (o.clone(), f.clone(), s.clone(), v.clone())).collect(),
            fetched: self.fetched.iter().cloned().collect(),
            overlay: self.overlay.iter().filter_map(|n| self.world.frame(n).cloned()).collect(),
            fire_counts: self.fire_counts.iter().map(|(f, n)| (f.clone(), *n)).collect(),
            trace: self.trace.clone(),
        }
    }

    /// Rebuilds a session from a snapshot taken against the same world. The
    /// restored session gets a fresh token.
    pub fn restore(engine: &Arc<Engine>, snap: &Snapshot) -> Result<Self, InferenceError> {
        let expected = engine.world().version();
        if snap.world_version != expected {
            return Err(InterchangeError::WorldVersionMismatch {
                expected: expected.to_string(),
                found: snap.world_version.clone(),
            }
            .into());
        }
        let mut s = engine.session();
        if !snap.overlay.is_empty() {
            let mut b = engine.world().to_builder();
            for f in &snap.overlay {
                match b.frame_mut(&f.name) {
                    Some(existing) => *existing = f.clone(),
                    None => b.add_frame(f.clone())?,
                }
            }
            s.world = Arc::new(b.freeze()?);
            s.overlay = snap.overlay.iter().map(|f| f.name.clone()).collect();
        }
        for (f, r) in &snap.resolvers {
            if engine.resolver(r).is_none() {
                return Err(InferenceError::UnknownResolver(r.clone()));
            }
            s.resolvers.insert(f.clone(), r.clone());
        }
        if engine.resolver(&snap.default_resolver).is_none() {
            return Err(InferenceError::UnknownResolver(snap.default_resolver.clone()));
        }
        s.default_resolver = snap.default_resolver.clone();
        s.goal = snap.goal.clone();
        s.next_question = snap.next_question;
        s.next_seq = snap.next_seq;
        s.counters = snap.counters;
        for (f, slot, v) in &snap.memory {
            s.wm.set(f, slot, v.clone());
        }
        s.pending = snap.pending.clone();
        s.asked_at = snap.asked_at.iter().map(|(f, sl, l)| ((f.clone(), sl.clone()), l.clone())).collect();
        s.stub_cache = snap.stub_cache.iter().map(|(o, f, sl, v)| ((o.clone(), f.clone(), sl.clone()), v.clone())).collect();
        s.fetched = snap.fetched.iter().cloned().collect();
        s.fire_counts = snap.fire_counts.iter().cloned().collect();
        s.trace = snap.trace.clone();
        Ok(s)
    }
}

enum GenerateError {
    Data(DataError),
    Eval(EvalError),
}

impl From<DataError> for GenerateError {
    fn from(e: DataError) -> Self {
        GenerateError::Data(e)
    }
}

fn call_extern(engine: &Engine, world: &FrameWorld, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
    let Some(arity) = world.extern_arity(name) else { return Err(EvalError::UnknownExtern(name.to_string())) };
    if args.len() != arity {
        return Err(EvalError::ExternArity { name: name.to_string(), expected: arity, found: args.len() });
    }
    let f = engine.extern_fn(name).ok_or_else(|| EvalError::UnknownExtern(name.to_string()))?;
    f(&args).map_err(|message| EvalError::ExternFailed { name: name.to_string(), message })
}

/// Demand-driven evaluation: slot reads run inference.
struct DemandEnv<'s> {
    s: &'s mut InferenceSession,
    origin: String,
    bindings: Vec<(String, String)>,
}

impl DemandEnv<'_> {
    fn qualifier_frame(&mut self, q: &str) -> Result<Option<String>, Stop> {
        if let Some((_, f)) = self.bindings.iter().rev().find(|(v, _)| v == q) {
            return Ok(Some(f.clone()));
        }
        if self.s.is_frame(q) {
            return Ok(Some(q.to_string()));
        }
        let origin = self.origin.clone();
        match self.s.demand(&origin, q)? {
            Value::Reference(f) => Ok(Some(f)),
            Value::Unknown => Ok(None),
            other => Err(Stop::Eval(EvalError::BadOperand { op: ".", operand: other.kind() })),
        }
    }
}

impl Env for DemandEnv<'_> {
    type Stop = Stop;

    fn slot(&mut self, qualifier: Option<&str>, name: &str) -> Result<Value, Stop> {
        let frame = match qualifier {
            None => self.origin.clone(),
            Some(q) => match self.qualifier_frame(q)? {
                Some(f) => f,
                None => return Ok(Value::Unknown),
            },
        };
        self.s.demand(&frame, name)
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, Stop> {
        Ok(self.s.call_function(name, args, true)?)
    }

    fn exists(&mut self, var: &str, root: &str, condition: &Expression) -> Result<Value, Stop> {
        if !self.s.world.contains(root) {
            return Ok(Value::Unknown);
        }
        for cand in self.s.world.descendants(root) {
            self.bindings.push((var.to_string(), cand.clone()));
            let r = eval::eval(self, condition);
            self.bindings.pop();
            match r {
                Ok(v) => {
                    if condition_truth(&v) == Ok(Some(true)) {
                        return Ok(Value::Reference(cand));
                    }
                }
                Err(Stop::Eval(e)) => {
                    let origin = self.origin.clone();
                    self.s.note(&origin, "", format!("exists: candidate {cand} skipped: {e}"));
                }
                Err(s) => return Err(s),
            }
        }
        Ok(Value::Unknown)
    }

    fn specialize(&mut self, root: &str) -> Result<Value, Stop> {
        let origin = self.origin.clone();
        self.s.specify_frame(&origin, root)
    }
}

/// On-change evaluation: working memory and defaults only.
struct MemoryEnv<'s> {
    s: &'s mut InferenceSession,
    origin: String,
}

impl Env for MemoryEnv<'_> {
    type Stop = EvalError;

    fn slot(&mut self, qualifier: Option<&str>, name: &str) -> Result<Value, EvalError> {
        let frame = match qualifier {
            None => self.origin.clone(),
            Some(q) if self.s.is_frame(q) => q.to_string(),
            Some(q) => match self.s.memory_value(&self.origin, q) {
                Value::Reference(f) => f,
                _ => return Ok(Value::Unknown),
            },
        };
        Ok(self.s.memory_value(&frame, name))
    }

    fn call(&mut self, name: &str, args: Vec<Value>) -> Result<Value, EvalError> {
        self.s.call_function(name, args, false)
    }

    fn exists(&mut self, _: &str, _: &str, _: &Expression) -> Result<Value, EvalError> {
        Ok(Value::Unknown)
    }

    fn specialize(&mut self, _: &str) -> Result<Value, EvalError> {
        Ok(Value::Unknown)
    }
}

impl InboundHandler for InferenceSession {
    fn get_slot(&mut self, frame: &str, slot: &str, origin: Option<&str>, caller: Arc<dyn CallerLink>) -> RemoteReply {
        let top = self.goals.is_empty();
        if top {
            self.cascade_depth = 0;
        }
        let r = match origin {
            Some(o) => {
                if !self.world.contains(frame) {
                    return RemoteReply::Error { code: "UnknownFrame".into(), message: format!("unknown frame `{frame}`") };
                }
                self.remote_origins.insert(o.to_string(), caller);
                self.resolve(o, frame, slot)
            }
            None => {
                if !self.is_frame(frame) {
                    return RemoteReply::Error { code: "UnknownFrame".into(), message: format!("unknown frame `{frame}`") };
                }
                self.demand(frame, slot)
            }
        };
        match r {
            Ok(v) => RemoteReply::Value(v),
            Err(Stop::Suspend(q)) => {
                self.relayed = Some(q.clone());
                if top {
                    self.pending = Some(q.clone());
                }
                RemoteReply::Question(q)
            }
            Err(Stop::Fatal(e)) => {
                let reply = RemoteReply::Error { code: e.code().to_string(), message: e.to_string() };
                self.relayed_fatal = Some(e);
                reply
            }
            Err(Stop::Eval(e)) => {
                self.note(frame, slot, e.to_string());
                RemoteReply::Value(Value::Unknown)
            }
        }
    }

    fn answer(&mut self, frame: &str, slot: &str, value: Value) -> Result<(), String> {
        let level = self.asked_at.get(&(frame.to_string(), slot.to_string())).cloned().unwrap_or(frame.to_string());
        if let Some(k) = self.slot_kind(frame, &level, slot) {
            let v = value.clone().coerce_empty_list(k);
            if !v.conforms_to(k) {
                return Err(format!("expected {k}, got {}", v.kind()));
            }
        }
        let violations = self.violations(frame, &level, slot, &value);
        if !violations.is_empty() {
            return Err(violations.join("; "));
        }
        self.push(TraceKind::AnswerReceived, &level, frame, slot, None, Some(value.clone()), "remote");
        self.pending = None;
        self.asked_at.remove(&(frame.to_string(), slot.to_string()));
        self.cascade_depth = 0;
        self.store(frame, slot, value, "answer").map_err(|s| stop_to_error(s).to_string())
    }

    fn rules_fired(&self) -> u64 {
        self.counters.rules_fired
    }
}
