//! Overlay graph model: node roles, lossy capacity-limited edges, random
//! topology generation, pruning, neighborhood extraction for local
//! estimation, max-flow bounds, and the text file format.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use thiserror::Error;

mod flow;
mod generate;
mod io;

pub use flow::{max_flow_bound, FlowMode};
pub use generate::{generate, GenerateConfig, LinkModel, TraceMatrix};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("graph contains a cycle")]
    Cycle,
    #[error("{path}:{line}: {msg}")]
    File {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("no source-to-client path remains")]
    NoSourceClientPath,
    #[error("topology generation gave up after {rejects} rejected nodes")]
    GenerationExhausted { rejects: usize },
    #[error("bad generation config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Overlay node identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Source,
    Client,
    Sf,
    Nc,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Source => "SOURCE",
            Role::Client => "CLIENT",
            Role::Sf => "SF",
            Role::Nc => "NC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "SOURCE" => Some(Role::Source),
            "CLIENT" => Some(Role::Client),
            "SF" => Some(Role::Sf),
            "NC" => Some(Role::Nc),
            _ => None,
        }
    }

    pub fn is_relay(self) -> bool {
        matches!(self, Role::Sf | Role::Nc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeRecord {
    pub id: NodeId,
    pub role: Role,
    /// SF buffer capacity h, in packets.
    pub buffer_capacity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeRecord {
    pub from: NodeId,
    pub to: NodeId,
    /// Packets per second.
    pub bandwidth_pps: f64,
    /// Per-packet loss probability, in [0, 1).
    pub loss: f64,
}

/// Directed acyclic overlay graph. Immutable once built; all mutating
/// operations return a new graph.
#[derive(Debug, Clone)]
pub struct OverlayGraph {
    nodes: BTreeMap<NodeId, NodeRecord>,
    edges: Vec<EdgeRecord>,
    out: BTreeMap<NodeId, Vec<usize>>,
    inc: BTreeMap<NodeId, Vec<usize>>,
}

impl OverlayGraph {
    /// Validates and indexes a node/edge list.
    pub fn build(nodes: Vec<NodeRecord>, edges: Vec<EdgeRecord>) -> Result<Self, TopologyError> {
        let mut node_map = BTreeMap::new();
        for n in nodes {
            if n.buffer_capacity == 0 {
                return Err(TopologyError::Invalid(format!(
                    "node {} has zero buffer capacity",
                    n.id
                )));
            }
            if node_map.insert(n.id, n).is_some() {
                return Err(TopologyError::Invalid(format!("duplicate node id {}", n.id)));
            }
        }
        let mut seen_pairs = BTreeSet::new();
        for e in &edges {
            if e.from == e.to {
                return Err(TopologyError::Invalid(format!("self loop at {}", e.from)));
            }
            for end in [e.from, e.to] {
                if !node_map.contains_key(&end) {
                    return Err(TopologyError::Invalid(format!(
                        "edge {} -> {} references unknown node {}",
                        e.from, e.to, end
                    )));
                }
            }
            if !seen_pairs.insert((e.from, e.to)) {
                return Err(TopologyError::Invalid(format!(
                    "duplicate edge {} -> {}",
                    e.from, e.to
                )));
            }
            if !(e.bandwidth_pps.is_finite() && e.bandwidth_pps > 0.0) {
                return Err(TopologyError::Invalid(format!(
                    "edge {} -> {} has non-positive bandwidth",
                    e.from, e.to
                )));
            }
            if !(0.0..1.0).contains(&e.loss) {
                return Err(TopologyError::Invalid(format!(
                    "edge {} -> {} has loss {} outside [0, 1)",
                    e.from, e.to, e.loss
                )));
            }
            if node_map[&e.to].role == Role::Source {
                return Err(TopologyError::Invalid(format!(
                    "source {} has an incoming edge",
                    e.to
                )));
            }
            if node_map[&e.from].role == Role::Client {
                return Err(TopologyError::Invalid(format!(
                    "client {} has an outgoing edge",
                    e.from
                )));
            }
        }
        let mut out: BTreeMap<NodeId, Vec<usize>> =
            node_map.keys().map(|&id| (id, Vec::new())).collect();
        let mut inc = out.clone();
        for (i, e) in edges.iter().enumerate() {
            out.get_mut(&e.from).unwrap().push(i);
            inc.get_mut(&e.to).unwrap().push(i);
        }
        for list in out.values_mut().chain(inc.values_mut()) {
            list.sort_by_key(|&i| (edges[i].from, edges[i].to));
        }
        let g = Self {
            nodes: node_map,
            edges,
            out,
            inc,
        };
        if g.topo_order().len() != g.nodes.len() {
            return Err(TopologyError::Cycle);
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> Option<&NodeRecord> {
        self.nodes.get(&id)
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.contains_key(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeRecord> {
        self.nodes.values()
    }

    pub fn edges(&self) -> &[EdgeRecord] {
        &self.edges
    }

    pub fn out_edges(&self, id: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        self.out.get(&id).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn in_edges(&self, id: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        self.inc.get(&id).into_iter().flatten().map(|&i| &self.edges[i])
    }

    pub fn role(&self, id: NodeId) -> Role {
        self.nodes[&id].role
    }

    pub fn sources(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(Role::Source)
    }

    pub fn clients(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(Role::Client)
    }

    pub fn sf_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(Role::Sf)
    }

    pub fn nc_nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.by_role(Role::Nc)
    }

    fn by_role(&self, role: Role) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes
            .values()
            .filter(move |n| n.role == role)
            .map(|n| n.id)
    }

    /// Cumulative outgoing bandwidth b_o(u).
    pub fn out_bandwidth(&self, id: NodeId) -> f64 {
        self.out_edges(id).map(|e| e.bandwidth_pps).sum()
    }

    /// Cumulative incoming bandwidth b_i(u).
    pub fn in_bandwidth(&self, id: NodeId) -> f64 {
        self.in_edges(id).map(|e| e.bandwidth_pps).sum()
    }

    /// Topological order, smallest id first among ready nodes.
    pub fn topo_order(&self) -> Vec<NodeId> {
        let mut indegree: BTreeMap<NodeId, usize> =
            self.nodes.keys().map(|&id| (id, 0)).collect();
        for e in &self.edges {
            *indegree.get_mut(&e.to).unwrap() += 1;
        }
        let mut ready: BTreeSet<NodeId> = indegree
            .iter()
            .filter(|(_, &d)| d == 0)
            .map(|(&id, _)| id)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&id) = ready.iter().next() {
            ready.remove(&id);
            order.push(id);
            for e in self.out_edges(id) {
                let d = indegree.get_mut(&e.to).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(e.to);
                }
            }
        }
        order
    }

    /// NC nodes in an order where every NC ancestor precedes its NC
    /// descendants, i.e. by proximity to the sources.
    pub fn nc_processing_order(&self) -> Vec<NodeId> {
        self.topo_order()
            .into_iter()
            .filter(|&id| self.role(id) == Role::Nc)
            .collect()
    }

    fn forward_reach(&self, from: impl IntoIterator<Item = NodeId>) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = from.into_iter().collect();
        let mut queue: VecDeque<NodeId> = seen.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            for e in self.out_edges(u) {
                if seen.insert(e.to) {
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }

    fn backward_reach(&self, from: impl IntoIterator<Item = NodeId>) -> BTreeSet<NodeId> {
        let mut seen: BTreeSet<NodeId> = from.into_iter().collect();
        let mut queue: VecDeque<NodeId> = seen.iter().copied().collect();
        while let Some(u) = queue.pop_front() {
            for e in self.in_edges(u) {
                if seen.insert(e.from) {
                    queue.push_back(e.from);
                }
            }
        }
        seen
    }

    /// Keeps exactly the nodes that lie on some source-to-client path.
    pub fn prune(&self) -> Result<OverlayGraph, TopologyError> {
        let fwd = self.forward_reach(self.sources());
        let bwd = self.backward_reach(self.clients());
        let keep: BTreeSet<NodeId> = fwd.intersection(&bwd).copied().collect();
        let nodes: Vec<NodeRecord> = self
            .nodes
            .values()
            .filter(|n| keep.contains(&n.id))
            .copied()
            .collect();
        let edges: Vec<EdgeRecord> = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.from) && keep.contains(&e.to))
            .copied()
            .collect();
        let pruned = OverlayGraph::build(nodes, edges)?;
        if pruned.sources().next().is_none() || pruned.clients().next().is_none() {
            return Err(TopologyError::NoSourceClientPath);
        }
        Ok(pruned)
    }

    /// Undirected hop distances from `u` (edges traversed both ways).
    pub fn undirected_distances(&self, u: NodeId) -> BTreeMap<NodeId, usize> {
        let mut dist = BTreeMap::from([(u, 0usize)]);
        let mut queue = VecDeque::from([u]);
        while let Some(w) = queue.pop_front() {
            let d = dist[&w];
            let neighbors: Vec<NodeId> = self
                .out_edges(w)
                .map(|e| e.to)
                .chain(self.in_edges(w).map(|e| e.from))
                .collect();
            for v in neighbors {
                if !dist.contains_key(&v) {
                    dist.insert(v, d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Induced subgraph of all nodes within `radius` undirected hops of `u`,
    /// with boundary nodes converted to proxy sources or proxy clients so
    /// that delay estimation runs unmodified on the result.
    ///
    /// A boundary relay that only receives from outside becomes a source
    /// whose outgoing bandwidth is capped at its true (full-graph) incoming
    /// bandwidth; one that only sends outside becomes a client. A relay cut
    /// on both sides becomes a client when it still has parents inside the
    /// subgraph, otherwise a source.
    pub fn neighborhood(&self, u: NodeId, radius: usize) -> Result<OverlayGraph, TopologyError> {
        if !self.contains(u) {
            return Err(TopologyError::Invalid(format!("unknown node {u}")));
        }
        if radius == 0 {
            return Err(TopologyError::Invalid("neighborhood radius must be >= 1".into()));
        }
        let dist = self.undirected_distances(u);
        let keep: BTreeSet<NodeId> = dist
            .iter()
            .filter(|(_, &d)| d <= radius)
            .map(|(&id, _)| id)
            .collect();

        let mut nodes: BTreeMap<NodeId, NodeRecord> = keep
            .iter()
            .map(|id| (*id, self.nodes[id]))
            .collect();
        let mut drop_in: BTreeSet<NodeId> = BTreeSet::new();
        let mut drop_out: BTreeSet<NodeId> = BTreeSet::new();
        let mut out_scale: BTreeMap<NodeId, f64> = BTreeMap::new();

        for &w in &keep {
            let rec = self.nodes[&w];
            if !rec.role.is_relay() {
                continue;
            }
            let ext_parents = self.in_edges(w).any(|e| !keep.contains(&e.from));
            let ext_children = self.out_edges(w).any(|e| !keep.contains(&e.to));
            if !ext_parents && !ext_children {
                continue;
            }
            let int_parents = self.in_edges(w).any(|e| keep.contains(&e.from));
            let as_client = if ext_parents && ext_children {
                int_parents
            } else {
                !ext_parents
            };
            if as_client {
                nodes.get_mut(&w).unwrap().role = Role::Client;
                drop_out.insert(w);
            } else {
                nodes.get_mut(&w).unwrap().role = Role::Source;
                drop_in.insert(w);
                let true_in = self.in_bandwidth(w);
                let internal_out: f64 = self
                    .out_edges(w)
                    .filter(|e| keep.contains(&e.to))
                    .map(|e| e.bandwidth_pps)
                    .sum();
                if internal_out > true_in && internal_out > 0.0 {
                    out_scale.insert(w, true_in / internal_out);
                }
            }
        }

        let edges: Vec<EdgeRecord> = self
            .edges
            .iter()
            .filter(|e| {
                keep.contains(&e.from)
                    && keep.contains(&e.to)
                    && !drop_in.contains(&e.to)
                    && !drop_out.contains(&e.from)
            })
            .map(|e| {
                let mut e = *e;
                if let Some(&f) = out_scale.get(&e.from) {
                    e.bandwidth_pps *= f;
                }
                e
            })
            .collect();
        OverlayGraph::build(nodes.into_values().collect(), edges)
    }

    /// New graph with the given role changes applied.
    pub fn with_roles(
        &self,
        changes: impl IntoIterator<Item = (NodeId, Role)>,
    ) -> Result<OverlayGraph, TopologyError> {
        let mut nodes = self.nodes.clone();
        for (id, role) in changes {
            let rec = nodes
                .get_mut(&id)
                .ok_or_else(|| TopologyError::Invalid(format!("unknown node {id}")))?;
            rec.role = role;
        }
        OverlayGraph::build(nodes.into_values().collect(), self.edges.clone())
    }

    /// All relays set to the given role; the all-NC / all-SF reference
    /// configurations.
    pub fn with_all_relays(&self, role: Role) -> OverlayGraph {
        let changes: Vec<(NodeId, Role)> = self
            .nodes
            .values()
            .filter(|n| n.role.is_relay())
            .map(|n| (n.id, role))
            .collect();
        self.with_roles(changes).expect("relay role change keeps the graph valid")
    }

    /// Structural equality: same nodes, roles, capacities and edges.
    pub fn structurally_equal(&self, other: &OverlayGraph) -> bool {
        if self.nodes != other.nodes {
            return false;
        }
        let key = |e: &EdgeRecord| (e.from, e.to);
        let mut a: Vec<&EdgeRecord> = self.edges.iter().collect();
        let mut b: Vec<&EdgeRecord> = other.edges.iter().collect();
        a.sort_by_key(|e| key(e));
        b.sort_by_key(|e| key(e));
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x == y)
    }
}
