//! One full-duplex connection. Either side may send requests; while a
//! request is outstanding, requests arriving from the peer are served inline.

use std::cell::Cell;
use std::io::{self, BufReader, BufWriter};
use std::net::{Shutdown, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Duration;

use framekit_core::inference::{CallerLink, InboundHandler, RemoteFailure, RemoteReply};
use framekit_core::interchange::rules_to_element;
use framekit_core::{FrameKind, FrameWorld};

use crate::framing::{read_frame, write_frame};
use crate::message::{Envelope, Message};
use crate::stats::Stats;

thread_local! {
    /// Nesting of inline dispatches on this thread; only the outermost one
    /// counts served rules.
    static DISPATCH_DEPTH: Cell<usize> = const { Cell::new(0) };
}

pub(crate) enum Incoming {
    Message(Envelope),
    Malformed(String),
    Closed,
}

pub(crate) struct Channel {
    reader: Mutex<BufReader<TcpStream>>,
    writer: Mutex<BufWriter<TcpStream>>,
    next_id: AtomicU64,
    /// Held by the outgoing request currently using the connection.
    busy: AtomicBool,
    /// Session token the connection is bound to, set by the hello exchange.
    pub(crate) token: OnceLock<String>,
    stats: Arc<Stats>,
    /// World whose rules are served to `get_rules`.
    world: Option<Arc<FrameWorld>>,
}

impl Channel {
    pub(crate) fn new(
        stream: TcpStream,
        stats: Arc<Stats>,
        world: Option<Arc<FrameWorld>>,
        timeout: Option<Duration>,
    ) -> io::Result<Arc<Self>> {
        stream.set_nodelay(true)?;
        stream.set_read_timeout(timeout)?;
        let writer = BufWriter::new(stream.try_clone()?);
        Ok(Arc::new(Channel {
            reader: Mutex::new(BufReader::new(stream)),
            writer: Mutex::new(writer),
            next_id: AtomicU64::new(1),
            busy: AtomicBool::new(false),
            token: OnceLock::new(),
            stats,
            world,
        }))
    }

    /// Marks the connection busy; false if it already was.
    pub(crate) fn claim(&self) -> bool {
        !self.busy.swap(true, Ordering::SeqCst)
    }

    pub(crate) fn release(&self) {
        self.busy.store(false, Ordering::SeqCst);
    }

    pub(crate) fn send(&self, id: u64, message: &Message) -> Result<(), RemoteFailure> {
        let env = Envelope { id, message: message.clone() };
        let mut w = self.writer.lock().unwrap();
        self.stats.sent(message.kind());
        write_frame(&mut *w, &env.to_bytes()).map_err(io_failure)
    }

    /// Sends a new request and returns its correlation id.
    pub(crate) fn send_request(&self, message: &Message) -> Result<u64, RemoteFailure> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        self.send(id, message)?;
        Ok(id)
    }

    pub(crate) fn recv(&self) -> Result<Incoming, RemoteFailure> {
        let bytes = {
            let mut r = self.reader.lock().unwrap();
            match read_frame(&mut *r).map_err(io_failure)? {
                Some(b) => b,
                None => return Ok(Incoming::Closed),
            }
        };
        match Envelope::from_bytes(&bytes) {
            Ok(env) => {
                self.stats.received(env.message.kind());
                Ok(Incoming::Message(env))
            }
            Err(e) => {
                self.stats.error();
                Ok(Incoming::Malformed(e.to_string()))
            }
        }
    }

    /// Sends `message` and waits for its reply, serving peer requests with
    /// `handler` meanwhile.
    pub(crate) fn request(self: &Arc<Self>, message: Message, handler: &mut dyn InboundHandler) -> Result<Message, RemoteFailure> {
        let id = self.send_request(&message)?;
        loop {
            match self.recv()? {
                Incoming::Closed => return Err(RemoteFailure::new("ConnectionClosed", "peer closed the connection")),
                Incoming::Malformed(e) => self.send(0, &Message::error("SchemaError", e))?,
                Incoming::Message(env) if env.message.is_request() => self.dispatch(env, handler)?,
                Incoming::Message(env) if env.id == id => return Ok(env.message),
                Incoming::Message(env) => {
                    return Err(RemoteFailure::new(
                        "ProtocolViolation",
                        format!("reply {} to request {id}", env.id),
                    ))
                }
            }
        }
    }

    /// Serves one request from the peer.
    pub(crate) fn dispatch(self: &Arc<Self>, env: Envelope, handler: &mut dyn InboundHandler) -> Result<(), RemoteFailure> {
        let fired = handler.rules_fired();
        let outer = DISPATCH_DEPTH.with(|d| d.replace(d.get() + 1)) == 0;
        let reply = match env.message {
            Message::GetSlot { token, frame, slot, origin } => match self.check_token(&token) {
                Some(e) => e,
                None => {
                    let link: Arc<dyn CallerLink> = Arc::new(Link(self.clone()));
                    match handler.get_slot(&frame, &slot, origin.as_deref(), link) {
                        RemoteReply::Value(v) => Message::SlotValue(v),
                        RemoteReply::Question(q) => Message::Question(q),
                        RemoteReply::Error { code, message } => Message::Error { code, message },
                    }
                }
            },
            Message::Answer { token, frame, slot, value } => match self.check_token(&token) {
                Some(e) => e,
                None => match handler.answer(&frame, &slot, value.clone()) {
                    Ok(()) => Message::SlotValue(value),
                    Err(reason) => Message::error("ConstraintViolation", reason),
                },
            },
            Message::GetRules { frame, .. } => self.rules(&frame),
            other => Message::error("ProtocolViolation", format!("unexpected {} request", other.kind())),
        };
        DISPATCH_DEPTH.with(|d| d.set(d.get() - 1));
        if outer {
            self.stats.rules_served(handler.rules_fired() - fired);
        }
        self.send(env.id, &reply)
    }

    pub(crate) fn rules(&self, frame: &str) -> Message {
        match self.world.as_ref().and_then(|w| w.frame(frame)) {
            Some(f) if f.kind == FrameKind::Local => {
                self.stats.rules_served(f.actions.len() as u64);
                Message::Rules(rules_to_element(f))
            }
            _ => Message::error("UnknownFrame", format!("no local frame `{frame}`")),
        }
    }

    fn check_token(&self, token: &str) -> Option<Message> {
        match self.token.get() {
            Some(t) if t == token => None,
            _ => Some(Message::error("UnknownToken", "callback for an unknown session")),
        }
    }

    pub(crate) fn shutdown(&self) {
        if let Ok(w) = self.writer.lock() {
            let _ = w.get_ref().shutdown(Shutdown::Both);
        }
    }
}

/// Callback route over a channel.
struct Link(Arc<Channel>);

impl CallerLink for Link {
    fn get_slot(&self, token: &str, frame: &str, slot: &str, handler: &mut dyn InboundHandler) -> Result<RemoteReply, RemoteFailure> {
        let msg = Message::GetSlot { token: token.to_string(), frame: frame.to_string(), slot: slot.to_string(), origin: None };
        reply_of(self.0.request(msg, handler)?)
    }
}

pub(crate) fn reply_of(m: Message) -> Result<RemoteReply, RemoteFailure> {
    match m {
        Message::SlotValue(v) => Ok(RemoteReply::Value(v)),
        Message::Question(q) => Ok(RemoteReply::Question(q)),
        Message::Error { code, message } => Ok(RemoteReply::Error { code, message }),
        other => Err(RemoteFailure::new("ProtocolViolation", format!("unexpected {} reply", other.kind()))),
    }
}

pub(crate) fn io_failure(e: io::Error) -> RemoteFailure {
    match e.kind() {
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut => RemoteFailure::new("Timeout", e.to_string()),
        _ => RemoteFailure::new("ConnectionError", e.to_string()),
    }
}
