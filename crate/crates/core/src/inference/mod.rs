//! Backward/forward chaining over slot actions.
//!
//! An [`Engine`] holds a frozen world plus everything registered by the
//! embedding program (extern functions, object adapters, resolvers, a
//! remote connector). Consultations run in [`InferenceSession`]s created
//! from it; sessions are independent and may run on different threads.

mod remote;
mod resolver;
mod session;
mod trace;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::datasources::{DataError, ObjectAdapter};
use crate::interchange::InterchangeError;
use crate::model::{FrameKind, FrameWorld, ModelError};
use crate::value::{Value, ValueKind};

pub use remote::{remote_frame_name, CallerLink, InboundHandler, RemoteConnector, RemoteFailure, RemoteReply};
pub use resolver::{select_actions, ConflictResolver, FireFirst, FirstApplicable, MostComplexFirst};
pub use session::{Counters, InferenceSession};
pub use trace::{TraceEvent, TraceKind};

/// Default bound on nested on-change cascades.
pub const DEFAULT_CASCADE_LIMIT: usize = 100;

pub type ExternFn = Arc<dyn Fn(&[Value]) -> Result<Value, String> + Send + Sync>;

/// A question for the user, raised by an ask action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub id: String,
    /// Frame whose slot is asked for (the origin of the inference).
    pub frame: String,
    pub slot: String,
    pub prompt: String,
    pub kind: ValueKind,
    pub choices: Option<Vec<Value>>,
    /// Constraints the previous answer violated, when re-asked.
    pub violations: Vec<String>,
    /// Instance that raised the question, for questions relayed from a
    /// remote frame.
    pub source: Option<String>,
}

/// Result of an inference step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Resolved(Value),
    Unknown,
    Suspended(Question),
}

impl Outcome {
    pub fn value(&self) -> Option<&Value> {
        match self {
            Outcome::Resolved(v) => Some(v),
            _ => None,
        }
    }

    pub fn question(&self) -> Option<&Question> {
        match self {
            Outcome::Suspended(q) => Some(q),
            _ => None,
        }
    }

    pub fn is_done(&self) -> bool {
        !matches!(self, Outcome::Suspended(_))
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Resolved(v) => write!(f, "{v}"),
            Outcome::Unknown => f.write_str("unknown"),
            Outcome::Suspended(q) => write!(f, "question {}: {}", q.id, q.prompt),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InferenceError {
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("frame `{frame}` has no slot `{slot}`")]
    UnknownSlot { frame: String, slot: String },
    #[error("unknown resolver `{0}`")]
    UnknownResolver(String),
    #[error("no question is pending")]
    NoPendingQuestion,
    #[error("question `{found}` is not pending (pending: `{expected}`)")]
    WrongQuestion { expected: String, found: String },
    #[error("question `{0}` is still pending")]
    QuestionPending(String),
    #[error("expected {expected}, got {found}")]
    AnswerTypeMismatch { expected: ValueKind, found: ValueKind },
    #[error("slot {frame}.{slot} expects {expected}, got {found}")]
    TypeMismatch { frame: String, slot: String, expected: ValueKind, found: ValueKind },
    #[error("constraint violated: {}", .violations.join("; "))]
    ConstraintViolation { violations: Vec<String>, question: Option<Box<Question>> },
    #[error("on-change cascade exceeded depth {limit}")]
    CascadeLimitExceeded { limit: usize },
    #[error("inheritance cycle through parent assignments: {}", .0.join(" -> "))]
    DynamicInheritanceCycle(Vec<String>),
    #[error("extern `{name}` is declared with arity {declared}, registered with {given}")]
    ExternArityMismatch { name: String, declared: usize, given: usize },
    #[error("extern function `{0}` is not declared")]
    UnknownExtern(String),
    #[error("frame `{0}` is not an external-object frame")]
    NotExternalObject(String),
    #[error("slot {frame}.{slot} is read-only")]
    ReadOnly { frame: String, slot: String },
    #[error("remote: {0}")]
    Remote(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
}

impl From<ModelError> for InferenceError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::UnknownFrame(f) => InferenceError::UnknownFrame(f),
            ModelError::UnknownSlot { frame, slot } => InferenceError::UnknownSlot { frame, slot },
            ModelError::DynamicInheritanceCycle(p) => InferenceError::DynamicInheritanceCycle(p),
            other => InferenceError::Interchange(InterchangeError::Model(other)),
        }
    }
}

impl InferenceError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            InferenceError::UnknownFrame(_) => "UnknownFrame",
            InferenceError::UnknownSlot { .. } => "UnknownSlot",
            InferenceError::UnknownResolver(_) => "UnknownResolver",
            InferenceError::NoPendingQuestion => "NoPendingQuestion",
            InferenceError::WrongQuestion { .. } => "WrongQuestion",
            InferenceError::QuestionPending(_) => "QuestionPending",
            InferenceError::AnswerTypeMismatch { .. } => "AnswerTypeMismatch",
            InferenceError::TypeMismatch { .. } => "TypeMismatch",
            InferenceError::ConstraintViolation { .. } => "ConstraintViolation",
            InferenceError::CascadeLimitExceeded { .. } => "CascadeLimitExceeded",
            InferenceError::DynamicInheritanceCycle(_) => "DynamicInheritanceCycle",
            InferenceError::ExternArityMismatch { .. } => "ExternArityMismatch",
            InferenceError::UnknownExtern(_) => "UnknownExtern",
            InferenceError::NotExternalObject(_) => "NotExternalObject",
            InferenceError::ReadOnly { .. } => "ReadOnly",
            InferenceError::Remote(_) => "RemoteError",
            InferenceError::Data(_) => "DataError",
            InferenceError::Interchange(InterchangeError::WorldVersionMismatch { .. }) => "WorldVersionMismatch",
            InferenceError::Interchange(_) => "InterchangeError",
        }
    }
}

/// Session factory: a frozen world plus registered extensions.
pub struct Engine {
    world: Arc<FrameWorld>,
    externs: HashMap<String, ExternFn>,
    adapters: HashMap<String, Arc<dyn ObjectAdapter>>,
    resolvers: BTreeMap<String, Arc<dyn ConflictResolver>>,
    frame_resolvers: BTreeMap<String, String>,
    default_resolver: String,
    cascade_limit: usize,
    connector: Option<Arc<dyn RemoteConnector>>,
}

impl Engine {
    pub fn new(world: impl Into<Arc<FrameWorld>>) -> Self {
        let mut resolvers: BTreeMap<String, Arc<dyn ConflictResolver>> = BTreeMap::new();
        for r in [
            Arc::new(FirstApplicable) as Arc<dyn ConflictResolver>,
            Arc::new(MostComplexFirst),
            Arc::new(FireFirst),
        ] {
            resolvers.insert(r.id().to_string(), r);
        }
        Engine {
            world: world.into(),
            externs: HashMap::new(),
            adapters: HashMap::new(),
            resolvers,
            frame_resolvers: BTreeMap::new(),
            default_resolver: FirstApplicable.id().to_string(),
            cascade_limit: DEFAULT_CASCADE_LIMIT,
            connector: None,
        }
    }

    pub fn world(&self) -> &Arc<FrameWorld> {
        &self.world
    }

    /// Binds a declared extern function.
    pub fn register_extern<F>(&mut self, name: &str, arity: usize, f: F) -> Result<(), InferenceError>
    where
        F: Fn(&[Value]) -> Result<Value, String> + Send + Sync + 'static,
    {
        let declared = self.world.extern_arity(name).ok_or_else(|| InferenceError::UnknownExtern(name.to_string()))?;
        if declared != arity {
            return Err(InferenceError::ExternArityMismatch { name: name.to_string(), declared, given: arity });
        }
        self.externs.insert(name.to_string(), Arc::new(f));
        Ok(())
    }

    pub fn register_adapter(&mut self, frame: &str, adapter: impl ObjectAdapter + 'static) -> Result<(), InferenceError> {
        match self.world.frame(frame) {
            None => Err(InferenceError::UnknownFrame(frame.to_string())),
            Some(f) if f.kind != FrameKind::ExternalObject => Err(InferenceError::NotExternalObject(frame.to_string())),
            Some(_) => {
                self.adapters.insert(frame.to_string(), Arc::new(adapter));
                Ok(())
            }
        }
    }

    pub fn register_resolver(&mut self, resolver: impl ConflictResolver + 'static) {
        self.resolvers.insert(resolver.id().to_string(), Arc::new(resolver));
    }

    pub fn resolver(&self, id: &str) -> Option<&Arc<dyn ConflictResolver>> {
        self.resolvers.get(id)
    }

    pub fn resolver_ids(&self) -> impl Iterator<Item = &str> {
        self.resolvers.keys().map(String::as_str)
    }

    /// Resolver used for one frame's actions in new sessions.
    pub fn set_frame_resolver(&mut self, frame: &str, id: &str) -> Result<(), InferenceError> {
        if !self.resolvers.contains_key(id) {
            return Err(InferenceError::UnknownResolver(id.to_string()));
        }
        if !self.world.contains(frame) {
            return Err(InferenceError::UnknownFrame(frame.to_string()));
        }
        self.frame_resolvers.insert(frame.to_string(), id.to_string());
        Ok(())
    }

    pub fn set_default_resolver(&mut self, id: &str) -> Result<(), InferenceError> {
        if !self.resolvers.contains_key(id) {
            return Err(InferenceError::UnknownResolver(id.to_string()));
        }
        self.default_resolver = id.to_string();
        Ok(())
    }

    pub fn set_cascade_limit(&mut self, limit: usize) {
        self.cascade_limit = limit;
    }

    pub fn cascade_limit(&self) -> usize {
        self.cascade_limit
    }

    pub fn set_connector(&mut self, connector: Arc<dyn RemoteConnector>) {
        self.connector = Some(connector);
    }

    pub fn connector(&self) -> Option<&Arc<dyn RemoteConnector>> {
        self.connector.as_ref()
    }

    /// New session with a fresh random token.
    pub fn session(self: &Arc<Self>) -> InferenceSession {
        InferenceSession::new(self.clone(), new_token())
    }

    /// New session bound to an existing token (server side of a remote
    /// consultation).
    pub fn session_with_token(self: &Arc<Self>, token: &str) -> InferenceSession {
        InferenceSession::new(self.clone(), token.to_string())
    }

    pub(crate) fn extern_fn(&self, name: &str) -> Option<&ExternFn> {
        self.externs.get(name)
    }

    pub(crate) fn adapter(&self, frame: &str) -> Option<&Arc<dyn ObjectAdapter>> {
        self.adapters.get(frame)
    }

    pub(crate) fn frame_resolvers(&self) -> &BTreeMap<String, String> {
        &self.frame_resolvers
    }

    pub(crate) fn default_resolver(&self) -> &str {
        &self.default_resolver
    }
}

/// 128 random bits as lowercase hex.
pub fn new_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}
