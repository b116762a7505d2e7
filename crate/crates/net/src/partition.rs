//! Splitting one world across several instances.

use std::io;

use framekit_core::inference::Engine;
use framekit_core::{FrameDef, FrameKind, FrameWorld, ModelError, WorldBuilder};

use crate::server::{Node, Server};

/// Splits `world` across instances. `hosts[i]` is the instance of the i-th
/// frame in declaration order and `authorities[j]` the `host:port` of
/// instance `j`. Each instance keeps the local frames it hosts and gets a
/// stub with the same parent for every other local frame; other frame kinds
/// are copied everywhere.
pub fn partition(world: &FrameWorld, hosts: &[usize], authorities: &[String]) -> Result<Vec<FrameWorld>, ModelError> {
    let frames: Vec<&FrameDef> = world.frames().collect();
    assert_eq!(frames.len(), hosts.len(), "one host per frame");
    (0..authorities.len())
        .map(|node| {
            let mut b = WorldBuilder::new();
            for (name, arity) in world.externs() {
                b.declare_extern(name, arity)?;
            }
            for (f, &host) in frames.iter().zip(hosts) {
                if f.kind != FrameKind::Local || host == node {
                    b.add_frame((*f).clone())?;
                } else {
                    let mut stub = FrameDef::new(&f.name);
                    stub.parent = f.parent.clone();
                    stub.kind = FrameKind::RemoteStub { url: format!("kb://{}/{}", authorities[host], f.name) };
                    b.add_frame(stub)?;
                }
            }
            for (name, table) in world.tables() {
                b.attach_table(name, table.clone());
            }
            b.freeze()
        })
        .collect()
}

/// Instances on loopback serving one partition each.
pub struct Cluster {
    pub nodes: Vec<Node>,
    hosts: Vec<(String, usize)>,
}

impl Cluster {
    pub fn start(world: &FrameWorld, hosts: &[usize], instances: usize) -> io::Result<Self> {
        let servers: Vec<Server> = (0..instances).map(|_| Server::bind("127.0.0.1:0")).collect::<Result<_, _>>()?;
        let authorities: Vec<String> = servers.iter().map(|s| s.local_addr().to_string()).collect();
        let worlds = partition(world, hosts, &authorities).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let nodes = servers.into_iter().zip(worlds).map(|(s, w)| s.start(Engine::new(w))).collect::<Result<_, _>>()?;
        let hosts = world.frames().map(|f| f.name.clone()).zip(hosts.iter().copied()).collect();
        Ok(Cluster { nodes, hosts })
    }

    /// Instance hosting `frame`.
    pub fn node_of(&self, frame: &str) -> &Node {
        let i = self.hosts.iter().find(|(f, _)| f == frame).map_or(0, |(_, h)| *h);
        &self.nodes[i]
    }

    pub fn total_sent(&self) -> u64 {
        self.nodes.iter().map(|n| n.stats().total_sent()).sum()
    }
}
