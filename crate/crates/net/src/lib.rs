//! Distribution of frame worlds across instances: a length-prefixed XML
//! wire protocol, a knowledge server, and the connector through which
//! sessions reach remote frames and rule repositories.

mod channel;
pub mod client;
pub mod framing;
pub mod message;
pub mod partition;
pub mod server;
pub mod stats;

pub use client::{Connector, KbUrl, DEFAULT_TIMEOUT};
pub use message::{Envelope, Message, PROTOCOL_VERSION};
pub use partition::{partition, Cluster};
pub use server::{Node, Server};
pub use stats::{KindCount, Stats, StatsSnapshot};
