//! Directed network graph and per-path metrics.
//!
//! A path from a client to a server is scored by four quantities: total
//! delay (sum over links), bottleneck bandwidth (min over links), total
//! energy (sum over links) and the load of the server it terminates at.
//! The first three are computed here from the graph; server load is
//! attached by the caller (see [`crate::optimizer`] and [`crate::sim`]).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a node in its [`NetworkGraph`]. Stable for the lifetime of the
/// graph; ordering follows the order nodes were declared in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeRole {
    Client,
    Router,
    Server,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRole::Client => write!(f, "client"),
            NodeRole::Router => write!(f, "router"),
            NodeRole::Server => write!(f, "server"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub role: NodeRole,
}

/// Directed link. `bandwidth` in Mb/s, `delay` in milliseconds, `energy` in
/// abstract units per traversal (defaults to one unit per hop).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub bandwidth: f64,
    pub delay: f64,
    pub energy: f64,
}

impl Link {
    pub fn new(bandwidth: f64, delay: f64, energy: f64) -> Self {
        Link {
            bandwidth,
            delay,
            energy,
        }
    }

    /// Unit-energy link; the default model where energy is proportional to
    /// hop count with constant 1.
    pub fn unit_energy(bandwidth: f64, delay: f64) -> Self {
        Link::new(bandwidth, delay, 1.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("duplicate node name `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("link {src}->{dst} references a missing node")]
    DanglingLink { src: String, dst: String },
    #[error("link {src}->{dst} has non-positive bandwidth {value}")]
    NonPositiveBandwidth { src: String, dst: String, value: f64 },
    #[error("link {src}->{dst} has negative delay {value}")]
    NegativeDelay { src: String, dst: String, value: f64 },
    #[error("link {src}->{dst} has non-positive energy {value}")]
    NonPositiveEnergy { src: String, dst: String, value: f64 },
    #[error("duplicate link {src}->{dst}")]
    DuplicateLink { src: String, dst: String },
    #[error("graph has no client node")]
    NoClient,
    #[error("graph has no server node")]
    NoServer,
    #[error("path has fewer than two nodes")]
    EmptyPath,
    #[error("no link between consecutive path nodes {src} and {dst}")]
    UnknownLink { src: String, dst: String },
    #[error("path revisits node `{0}`")]
    RepeatedNode(String),
    #[error("path must start at a client, `{0}` is not one")]
    NotAClient(String),
    #[error("path must end at a server, `{0}` is not one")]
    NotAServer(String),
    #[error("no server reachable from client `{0}`")]
    NoServerReachable(String),
}

/// A simple client-to-server path, stored as the visited node sequence.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    nodes: Vec<NodeId>,
}

impl Path {
    pub fn new(nodes: Vec<NodeId>) -> Self {
        Path { nodes }
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn first(&self) -> Option<NodeId> {
        self.nodes.first().copied()
    }

    pub fn last(&self) -> Option<NodeId> {
        self.nodes.last().copied()
    }

    /// Number of links the path traverses.
    pub fn hops(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    /// Consecutive (src, dst) node pairs.
    pub fn hops_iter(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Per-path quantities used by the objective. Delay in ms, bandwidth in
/// Mb/s, energy in units, server load as a utilization fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathMetrics {
    pub delay: f64,
    pub bandwidth: f64,
    pub energy: f64,
    pub server_load: f64,
}

/// Directed graph over client, router and server nodes.
///
/// Immutable after construction; all operations are pure functions.
#[derive(Debug, Clone)]
pub struct NetworkGraph {
    nodes: Vec<Node>,
    links: BTreeMap<(NodeId, NodeId), Link>,
    /// Outbound adjacency, sorted by destination id for deterministic
    /// traversal order.
    adjacency: Vec<Vec<NodeId>>,
    max_hops: usize,
}

impl NetworkGraph {
    /// Validates and builds a graph. Node names must be unique, link
    /// endpoints must resolve, link values must satisfy bandwidth > 0,
    /// delay >= 0, energy > 0, and at least one client and one server
    /// must be present.
    pub fn build(
        nodes: Vec<(String, NodeRole)>,
        links: Vec<(String, String, Link)>,
    ) -> Result<Self, NetError> {
        let mut index: BTreeMap<String, NodeId> = BTreeMap::new();
        let mut node_list = Vec::with_capacity(nodes.len());
        for (i, (name, role)) in nodes.into_iter().enumerate() {
            if index.contains_key(&name) {
                return Err(NetError::DuplicateNode(name));
            }
            index.insert(name.clone(), NodeId(i as u32));
            node_list.push(Node { name, role });
        }
        if !node_list.iter().any(|n| n.role == NodeRole::Client) {
            return Err(NetError::NoClient);
        }
        if !node_list.iter().any(|n| n.role == NodeRole::Server) {
            return Err(NetError::NoServer);
        }

        let mut link_map = BTreeMap::new();
        let mut adjacency = vec![Vec::new(); node_list.len()];
        for (src, dst, link) in links {
            let (Some(&s), Some(&d)) = (index.get(&src), index.get(&dst)) else {
                return Err(NetError::DanglingLink { src, dst });
            };
            if link.bandwidth <= 0.0 || !link.bandwidth.is_finite() {
                return Err(NetError::NonPositiveBandwidth {
                    src,
                    dst,
                    value: link.bandwidth,
                });
            }
            if link.delay < 0.0 || !link.delay.is_finite() {
                return Err(NetError::NegativeDelay {
                    src,
                    dst,
                    value: link.delay,
                });
            }
            if link.energy <= 0.0 || !link.energy.is_finite() {
                return Err(NetError::NonPositiveEnergy {
                    src,
                    dst,
                    value: link.energy,
                });
            }
            if link_map.insert((s, d), link).is_some() {
                return Err(NetError::DuplicateLink { src, dst });
            }
            adjacency[s.index()].push(d);
        }
        for neighbors in &mut adjacency {
            neighbors.sort();
        }
        let max_hops = node_list.len();
        Ok(NetworkGraph {
            nodes: node_list,
            links: link_map,
            adjacency,
            max_hops,
        })
    }

    /// Caps the number of links a candidate path may traverse during
    /// enumeration. Simple paths are already bounded by the node count,
    /// which is the default.
    pub fn with_max_hops(mut self, max_hops: usize) -> Self {
        self.max_hops = max_hops;
        self
    }

    pub fn max_hops(&self) -> usize {
        self.max_hops
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn node_name(&self, id: NodeId) -> &str {
        &self.nodes[id.index()].name
    }

    pub fn role(&self, id: NodeId) -> NodeRole {
        self.nodes[id.index()].role
    }

    pub fn lookup(&self, name: &str) -> Result<NodeId, NetError> {
        self.nodes
            .iter()
            .position(|n| n.name == name)
            .map(|i| NodeId(i as u32))
            .ok_or_else(|| NetError::UnknownNode(name.to_string()))
    }

    pub fn link(&self, src: NodeId, dst: NodeId) -> Option<&Link> {
        self.links.get(&(src, dst))
    }

    pub fn links(&self) -> impl Iterator<Item = (NodeId, NodeId, &Link)> {
        self.links.iter().map(|(&(s, d), l)| (s, d, l))
    }

    pub fn clients(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_with_role(NodeRole::Client)
    }

    pub fn servers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_with_role(NodeRole::Server)
    }

    pub fn routers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.ids_with_role(NodeRole::Router)
    }

    fn ids_with_role(&self, role: NodeRole) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.role == role)
            .map(|(i, _)| NodeId(i as u32))
    }

    fn hop_link(&self, src: NodeId, dst: NodeId) -> Result<&Link, NetError> {
        self.links.get(&(src, dst)).ok_or_else(|| NetError::UnknownLink {
            src: self.node_name(src).to_string(),
            dst: self.node_name(dst).to_string(),
        })
    }

    /// Sum of link delays along the path, in ms.
    pub fn path_delay(&self, path: &Path) -> Result<f64, NetError> {
        self.fold_links(path, 0.0, |acc, l| acc + l.delay)
    }

    /// Bottleneck bandwidth: the minimum link bandwidth along the path.
    pub fn path_bandwidth(&self, path: &Path) -> Result<f64, NetError> {
        self.fold_links(path, f64::INFINITY, |acc, l| acc.min(l.bandwidth))
    }

    /// Sum of link energies along the path. With unit-energy links this is
    /// the hop count.
    pub fn path_energy(&self, path: &Path) -> Result<f64, NetError> {
        self.fold_links(path, 0.0, |acc, l| acc + l.energy)
    }

    fn fold_links(
        &self,
        path: &Path,
        init: f64,
        f: impl Fn(f64, &Link) -> f64,
    ) -> Result<f64, NetError> {
        if path.nodes().len() < 2 {
            return Err(NetError::EmptyPath);
        }
        let mut acc = init;
        for (src, dst) in path.hops_iter() {
            acc = f(acc, self.hop_link(src, dst)?);
        }
        Ok(acc)
    }

    /// Delay, bandwidth and energy of a path in one pass; the caller
    /// supplies the server load observed at the path's endpoint.
    pub fn path_metrics(&self, path: &Path, server_load: f64) -> Result<PathMetrics, NetError> {
        Ok(PathMetrics {
            delay: self.path_delay(path)?,
            bandwidth: self.path_bandwidth(path)?,
            energy: self.path_energy(path)?,
            server_load,
        })
    }

    /// Checks the path invariants against this graph: at least one link,
    /// no repeated node, client start, server end, and every hop backed by
    /// a link.
    pub fn validate_path(&self, path: &Path) -> Result<(), NetError> {
        let nodes = path.nodes();
        if nodes.len() < 2 {
            return Err(NetError::EmptyPath);
        }
        let mut seen = vec![false; self.nodes.len()];
        for &id in nodes {
            if seen[id.index()] {
                return Err(NetError::RepeatedNode(self.node_name(id).to_string()));
            }
            seen[id.index()] = true;
        }
        let first = nodes[0];
        if self.role(first) != NodeRole::Client {
            return Err(NetError::NotAClient(self.node_name(first).to_string()));
        }
        let last = nodes[nodes.len() - 1];
        if self.role(last) != NodeRole::Server {
            return Err(NetError::NotAServer(self.node_name(last).to_string()));
        }
        for (src, dst) in path.hops_iter() {
            self.hop_link(src, dst)?;
        }
        Ok(())
    }

    /// Derives a graph with updated per-link delay and bandwidth values,
    /// keeping topology, roles and energies. Used by the simulator, where
    /// link conditions vary over time while the graph stays immutable.
    pub fn with_link_state(
        &self,
        state: &BTreeMap<(NodeId, NodeId), (f64, f64)>,
    ) -> NetworkGraph {
        let mut next = self.clone();
        for (key, &(delay, bandwidth)) in state {
            if let Some(link) = next.links.get_mut(key) {
                debug_assert!(delay >= 0.0 && bandwidth > 0.0);
                link.delay = delay;
                link.bandwidth = bandwidth;
            }
        }
        next
    }

    /// Renders a path as `A -> B -> C`.
    pub fn format_path(&self, path: &Path) -> String {
        path.nodes()
            .iter()
            .map(|&id| self.node_name(id))
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

/// Whether a hop may be traversed by an anycast request. Traffic enters
/// through routers and leaves through a server: client->router,
/// router->router and router->server hops are admissible; anything else
/// (in particular a direct client->server link) is not.
fn admissible(from: NodeRole, to: NodeRole) -> bool {
    matches!(
        (from, to),
        (NodeRole::Client, NodeRole::Router)
            | (NodeRole::Router, NodeRole::Router)
            | (NodeRole::Router, NodeRole::Server)
    )
}

/// All simple paths from `client` to every server, in lexicographic order
/// of the node-id sequence, each at most `graph.max_hops()` links long.
pub fn enumerate_paths(graph: &NetworkGraph, client: NodeId) -> Result<Vec<Path>, NetError> {
    if client.index() >= graph.node_count() {
        return Err(NetError::UnknownNode(format!("#{}", client.0)));
    }
    if graph.role(client) != NodeRole::Client {
        return Err(NetError::NotAClient(graph.node_name(client).to_string()));
    }
    let mut paths = Vec::new();
    let mut visited = vec![false; graph.node_count()];
    let mut stack = vec![client];
    visited[client.index()] = true;
    dfs(graph, &mut stack, &mut visited, &mut paths);
    if paths.is_empty() {
        return Err(NetError::NoServerReachable(
            graph.node_name(client).to_string(),
        ));
    }
    Ok(paths)
}

fn dfs(graph: &NetworkGraph, stack: &mut Vec<NodeId>, visited: &mut [bool], out: &mut Vec<Path>) {
    let here = *stack.last().expect("stack never empty");
    if stack.len() > graph.max_hops() {
        return;
    }
    // Adjacency lists are sorted by node id, so paths come out in
    // lexicographic order of their node sequences.
    for &next in &graph.adjacency[here.index()] {
        if visited[next.index()] || !admissible(graph.role(here), graph.role(next)) {
            continue;
        }
        stack.push(next);
        if graph.role(next) == NodeRole::Server {
            out.push(Path::new(stack.clone()));
        } else {
            visited[next.index()] = true;
            dfs(graph, stack, visited, out);
            visited[next.index()] = false;
        }
        stack.pop();
    }
}

/// The six-node layout used throughout the tests and shipped configs: one
/// client, four routers, two servers, with a four-link route to server A
/// through routers 1-2-3 and a three-link route to server B through
/// routers 1 and 4. All links carry 10 Mb/s, 1 ms and unit energy.
pub fn canonical_graph() -> NetworkGraph {
    let nodes = vec![
        ("C".to_string(), NodeRole::Client),
        ("R1".to_string(), NodeRole::Router),
        ("R2".to_string(), NodeRole::Router),
        ("R3".to_string(), NodeRole::Router),
        ("R4".to_string(), NodeRole::Router),
        ("S_A".to_string(), NodeRole::Server),
        ("S_B".to_string(), NodeRole::Server),
    ];
    let l = Link::unit_energy(10.0, 1.0);
    let links = vec![
        ("C".to_string(), "R1".to_string(), l),
        ("R1".to_string(), "R2".to_string(), l),
        ("R2".to_string(), "R3".to_string(), l),
        ("R3".to_string(), "S_A".to_string(), l),
        ("R1".to_string(), "R4".to_string(), l),
        ("R4".to_string(), "S_B".to_string(), l),
    ];
    NetworkGraph::build(nodes, links).expect("canonical graph is valid")
}
