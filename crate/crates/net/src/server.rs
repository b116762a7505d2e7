//! Knowledge server: accepts connections and answers slot queries, rule
//! requests and forwarded answers, one session per connection.

use std::io;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};

use framekit_core::inference::Engine;
use framekit_core::{FrameWorld, InferenceSession};

use crate::channel::{Channel, Incoming};
use crate::client::Connector;
use crate::message::{Message, PROTOCOL_VERSION};
use crate::stats::{Stats, StatsSnapshot};

/// A bound but not yet serving listener. Binding first lets callers learn
/// the port before building the world that names it.
pub struct Server {
    listener: TcpListener,
}

impl Server {
    pub fn bind(addr: impl std::net::ToSocketAddrs) -> io::Result<Self> {
        Ok(Server { listener: TcpListener::bind(addr)? })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.listener.local_addr().expect("bound listener has an address")
    }

    pub fn url(&self, frame: &str) -> String {
        format!("kb://{}/{frame}", self.local_addr())
    }

    /// Starts serving `engine`, installing a connector for its outgoing
    /// calls.
    pub fn start(self, engine: Engine) -> io::Result<Node> {
        self.start_with(engine, Connector::new(Arc::new(Stats::new())))
    }

    pub fn start_with(self, mut engine: Engine, connector: Connector) -> io::Result<Node> {
        let addr = self.local_addr();
        let stats = connector.stats().clone();
        let connector = Arc::new(connector);
        engine.set_connector(connector.clone());
        let engine = Arc::new(engine);
        connector.set_world(engine.world().clone());
        let stop = Arc::new(AtomicBool::new(false));
        let handle = {
            let (engine, stats, stop) = (engine.clone(), stats.clone(), stop.clone());
            let listener = self.listener;
            thread::Builder::new().name(format!("framekit-accept-{addr}")).spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let (engine, stats) = (engine.clone(), stats.clone());
                    let _ = thread::Builder::new().name("framekit-conn".into()).spawn(move || serve_connection(stream, engine, stats));
                }
            })?
        };
        Ok(Node { engine, addr, stats, connector, stop, handle: Some(handle) })
    }
}

/// A running instance.
pub struct Node {
    engine: Arc<Engine>,
    addr: SocketAddr,
    stats: Arc<Stats>,
    connector: Arc<Connector>,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl Node {
    /// Binds `addr` and serves `world` with a default engine.
    pub fn serve(world: FrameWorld, addr: impl std::net::ToSocketAddrs) -> io::Result<Self> {
        Server::bind(addr)?.start(Engine::new(world))
    }

    pub fn engine(&self) -> &Arc<Engine> {
        &self.engine
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, frame: &str) -> String {
        format!("kb://{}/{frame}", self.addr)
    }

    pub fn stats(&self) -> StatsSnapshot {
        self.stats.snapshot()
    }

    pub fn connector(&self) -> &Arc<Connector> {
        &self.connector
    }

    /// Local consultation whose remote calls go through this node.
    pub fn session(&self) -> InferenceSession {
        self.engine.session()
    }

    pub fn shutdown(&mut self) {
        if self.stop.swap(true, Ordering::SeqCst) {
            return;
        }
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for Node {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn serve_connection(stream: TcpStream, engine: Arc<Engine>, stats: Arc<Stats>) {
    let Ok(chan) = Channel::new(stream, stats.clone(), Some(engine.world().clone()), None) else { return };
    let mut session: Option<InferenceSession> = None;
    loop {
        let env = match chan.recv() {
            Ok(Incoming::Message(env)) => env,
            Ok(Incoming::Malformed(e)) => {
                if chan.send(0, &Message::error("SchemaError", e)).is_err() {
                    break;
                }
                continue;
            }
            Ok(Incoming::Closed) | Err(_) => break,
        };
        let id = env.id;
        let sent = match (&env.message, session.as_mut()) {
            (Message::Hello { version, token, frame }, None) => {
                let reply = if version != PROTOCOL_VERSION {
                    Message::error("VersionMismatch", format!("server speaks version {PROTOCOL_VERSION}, client {version}"))
                } else if engine.world().resolve(frame).is_none() {
                    Message::error("UnknownRemoteFrame", format!("no frame `{frame}` here"))
                } else {
                    let _ = chan.token.set(token.clone());
                    session = Some(engine.session_with_token(token));
                    Message::Hello { version: PROTOCOL_VERSION.into(), token: token.clone(), frame: frame.clone() }
                };
                chan.send(id, &reply)
            }
            (Message::Bye, _) => break,
            (Message::GetRules { frame, .. }, _) => chan.send(id, &chan.rules(frame)),
            (Message::GetSlot { .. } | Message::Answer { .. }, Some(s)) => chan.dispatch(env, s),
            (m, _) => chan.send(id, &Message::error("ProtocolViolation", format!("unexpected {}", m.kind()))),
        };
        if sent.is_err() {
            break;
        }
    }
    chan.shutdown();
}
