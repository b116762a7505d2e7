//! Hooks through which a transport connects sessions on different
//! instances.

use std::fmt;
use std::sync::Arc;

use super::Question;
use crate::value::Value;

/// Answer to a remote slot query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RemoteReply {
    Value(Value),
    Question(Question),
    Error { code: String, message: String },
}

/// Transport-level failure (connection, timeout, protocol).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemoteFailure {
    pub code: String,
    pub message: String,
}

impl RemoteFailure {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        RemoteFailure { code: code.to_string(), message: message.into() }
    }
}

impl fmt::Display for RemoteFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for RemoteFailure {}

/// Receiver of requests arriving while a session waits on the wire.
pub trait InboundHandler {
    /// Resolves `slot`. With `origin`, `frame` is a local ancestor level and
    /// unqualified reads go back to `origin` through `caller`; without it,
    /// `frame` is its own origin.
    fn get_slot(&mut self, frame: &str, slot: &str, origin: Option<&str>, caller: Arc<dyn CallerLink>) -> RemoteReply;

    /// Answer to a question this side raised.
    fn answer(&mut self, frame: &str, slot: &str, value: Value) -> Result<(), String>;

    /// Rules fired so far by this handler.
    fn rules_fired(&self) -> u64 {
        0
    }
}

/// Route back to the instance that sent a request.
pub trait CallerLink: Send + Sync {
    fn get_slot(
        &self,
        token: &str,
        frame: &str,
        slot: &str,
        handler: &mut dyn InboundHandler,
    ) -> Result<RemoteReply, RemoteFailure>;
}

/// Outgoing side of the transport.
pub trait RemoteConnector: Send + Sync {
    /// Opens (or reuses) the connection for `token` to the instance of `url`.
    fn connect(&self, token: &str, url: &str) -> Result<(), RemoteFailure>;

    #[allow(clippy::too_many_arguments)]
    fn get_slot(
        &self,
        token: &str,
        url: &str,
        frame: &str,
        slot: &str,
        origin: Option<&str>,
        handler: &mut dyn InboundHandler,
    ) -> Result<RemoteReply, RemoteFailure>;

    /// Rules document of the frame named by `url`.
    fn get_rules(&self, token: &str, url: &str) -> Result<String, RemoteFailure>;

    #[allow(clippy::too_many_arguments)]
    fn answer(
        &self,
        token: &str,
        url: &str,
        frame: &str,
        slot: &str,
        value: &Value,
        handler: &mut dyn InboundHandler,
    ) -> Result<(), RemoteFailure>;

    /// Releases the connections of a finished session.
    fn close(&self, token: &str);

    /// Records a stub-cache lookup for metering.
    fn note_cache(&self, _hit: bool) {}
}

/// Frame name part of `kb://host:port/Frame`.
pub fn remote_frame_name(url: &str) -> &str {
    url.rsplit('/').next().unwrap_or(url)
}
