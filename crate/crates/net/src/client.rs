//! Outgoing side: one connection per (session token, remote instance).

use std::collections::HashMap;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use framekit_core::inference::{CallerLink, InboundHandler, RemoteConnector, RemoteFailure, RemoteReply};
use framekit_core::{FrameWorld, Value};

use crate::channel::{io_failure, reply_of, Channel, Incoming};
use crate::message::{Message, PROTOCOL_VERSION};
use crate::stats::Stats;

/// Default per-request timeout.
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Parsed `kb://host:port/Frame`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KbUrl {
    /// `host:port`.
    pub authority: String,
    pub frame: String,
}

impl KbUrl {
    pub fn parse(s: &str) -> Result<Self, RemoteFailure> {
        let bad = |why: &str| RemoteFailure::new("BadUrl", format!("`{s}`: {why}"));
        let u = url::Url::parse(s).map_err(|e| bad(&e.to_string()))?;
        if u.scheme() != "kb" {
            return Err(bad("scheme must be kb"));
        }
        let host = u.host_str().filter(|h| !h.is_empty()).ok_or_else(|| bad("missing host"))?;
        let port = u.port().ok_or_else(|| bad("missing port"))?;
        let frame = u.path().trim_start_matches('/');
        if frame.is_empty() || frame.contains('/') {
            return Err(bad("path must name one frame"));
        }
        Ok(KbUrl { authority: format!("{host}:{port}"), frame: frame.to_string() })
    }
}

/// [`RemoteConnector`] over TCP. Requests for one (session token, remote
/// instance) share a connection; a thread finding it busy opens another.
pub struct Connector {
    conns: Mutex<HashMap<(String, String), Vec<Arc<Channel>>>>,
    stats: Arc<Stats>,
    timeout: Duration,
    world: OnceLock<Arc<FrameWorld>>,
}

impl Connector {
    pub fn new(stats: Arc<Stats>) -> Self {
        Connector { conns: Mutex::new(HashMap::new()), stats, timeout: DEFAULT_TIMEOUT, world: OnceLock::new() }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    /// World whose rules are served when a peer asks over one of our
    /// outgoing connections.
    pub fn set_world(&self, world: Arc<FrameWorld>) {
        let _ = self.world.set(world);
    }

    pub fn stats(&self) -> &Arc<Stats> {
        &self.stats
    }

    /// Open connections.
    pub fn connections(&self) -> usize {
        self.conns.lock().unwrap().values().map(Vec::len).sum()
    }

    /// Claims an idle connection to the instance behind `url`, opening one
    /// when all are busy.
    fn channel(&self, token: &str, url: &str) -> Result<Claim, RemoteFailure> {
        let target = KbUrl::parse(url)?;
        let key = (token.to_string(), target.authority.clone());
        if let Some(idle) = self.conns.lock().unwrap().get(&key).and_then(|cs| cs.iter().find(|c| c.claim())) {
            return Ok(Claim(idle.clone()));
        }
        let addr = target
            .authority
            .to_socket_addrs()
            .map_err(io_failure)?
            .next()
            .ok_or_else(|| RemoteFailure::new("ConnectionError", format!("cannot resolve {}", target.authority)))?;
        let stream = TcpStream::connect_timeout(&addr, self.timeout).map_err(io_failure)?;
        let chan = Channel::new(stream, self.stats.clone(), self.world.get().cloned(), Some(self.timeout)).map_err(io_failure)?;
        let _ = chan.token.set(token.to_string());
        let hello = Message::Hello { version: PROTOCOL_VERSION.into(), token: token.to_string(), frame: target.frame.clone() };
        let id = chan.send_request(&hello)?;
        match chan.recv()? {
            Incoming::Message(env) if env.id == id => match env.message {
                Message::Hello { version, .. } if version == PROTOCOL_VERSION => {}
                Message::Hello { version, .. } => {
                    return Err(RemoteFailure::new("VersionMismatch", format!("server speaks version {version}")))
                }
                Message::Error { code, message } => return Err(RemoteFailure::new(&code, message)),
                other => return Err(RemoteFailure::new("ProtocolViolation", format!("{} in reply to hello", other.kind()))),
            },
            Incoming::Message(_) | Incoming::Malformed(_) => {
                return Err(RemoteFailure::new("ProtocolViolation", "bad hello reply"))
            }
            Incoming::Closed => return Err(RemoteFailure::new("ConnectionClosed", "closed during hello")),
        }
        chan.claim();
        self.conns.lock().unwrap().entry(key).or_default().push(chan.clone());
        Ok(Claim(chan))
    }
}

/// Exclusive use of a connection, released on drop.
struct Claim(Arc<Channel>);

impl std::ops::Deref for Claim {
    type Target = Arc<Channel>;

    fn deref(&self) -> &Arc<Channel> {
        &self.0
    }
}

impl Drop for Claim {
    fn drop(&mut self) {
        self.0.release();
    }
}

impl RemoteConnector for Connector {
    fn connect(&self, token: &str, url: &str) -> Result<(), RemoteFailure> {
        self.channel(token, url).map(|_| ())
    }

    fn get_slot(
        &self,
        token: &str,
        url: &str,
        frame: &str,
        slot: &str,
        origin: Option<&str>,
        handler: &mut dyn InboundHandler,
    ) -> Result<RemoteReply, RemoteFailure> {
        let chan = self.channel(token, url)?;
        let msg = Message::GetSlot {
            token: token.to_string(),
            frame: frame.to_string(),
            slot: slot.to_string(),
            origin: origin.map(str::to_string),
        };
        reply_of(chan.request(msg, handler)?)
    }

    fn get_rules(&self, token: &str, url: &str) -> Result<String, RemoteFailure> {
        let chan = self.channel(token, url)?;
        let frame = KbUrl::parse(url)?.frame;
        match chan.request(Message::GetRules { token: token.to_string(), frame }, &mut NoInbound)? {
            Message::Rules(doc) => Ok(doc.to_xml()),
            Message::Error { code, message } => Err(RemoteFailure::new(&code, message)),
            other => Err(RemoteFailure::new("ProtocolViolation", format!("{} in reply to get_rules", other.kind()))),
        }
    }

    fn answer(
        &self,
        token: &str,
        url: &str,
        frame: &str,
        slot: &str,
        value: &Value,
        handler: &mut dyn InboundHandler,
    ) -> Result<(), RemoteFailure> {
        let chan = self.channel(token, url)?;
        let msg =
            Message::Answer { token: token.to_string(), frame: frame.to_string(), slot: slot.to_string(), value: value.clone() };
        match chan.request(msg, handler)? {
            Message::SlotValue(_) => Ok(()),
            Message::Error { code, message } => Err(RemoteFailure::new(&code, message)),
            other => Err(RemoteFailure::new("ProtocolViolation", format!("{} in reply to answer", other.kind()))),
        }
    }

    fn close(&self, token: &str) {
        let mut conns = self.conns.lock().unwrap();
        let keys: Vec<_> = conns.keys().filter(|(t, _)| t == token).cloned().collect();
        for c in keys.iter().filter_map(|k| conns.remove(k)).flatten() {
            let _ = c.send_request(&Message::Bye);
            c.shutdown();
        }
    }

    fn note_cache(&self, hit: bool) {
        self.stats.cache(hit);
    }
}

/// Handler for requests that cannot carry callbacks.
struct NoInbound;

impl InboundHandler for NoInbound {
    fn get_slot(&mut self, frame: &str, _: &str, _: Option<&str>, _: Arc<dyn CallerLink>) -> RemoteReply {
        RemoteReply::Error { code: "UnknownFrame".into(), message: format!("no session serves `{frame}` here") }
    }

    fn answer(&mut self, _: &str, _: &str, _: Value) -> Result<(), String> {
        Err("no pending question".into())
    }
}
