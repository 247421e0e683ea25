//! Random overlay construction: sources are placed first, intermediate
//! nodes attach one by one to randomly chosen parents, clients attach
//! last, and unusable nodes are pruned away. Parents always precede their
//! children, so the result is acyclic by construction.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EdgeRecord, NodeId, NodeRecord, OverlayGraph, Role, TopologyError};

/// Pairwise bandwidth matrix imported from measurement traces.
/// A non-positive entry means the pair cannot be connected.
#[derive(Debug, Clone)]
pub struct TraceMatrix {
    pub bandwidth: Vec<Vec<f64>>,
    /// Multiplier applied to matrix entries (measured capacities are
    /// usually scaled down to plausible overlay rates).
    pub scale: f64,
}

impl TraceMatrix {
    pub fn parse(text: &str, scale: f64) -> Result<Self, TopologyError> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let row = row.map_err(|e| TopologyError::File {
                path: "<trace>".into(),
                line: i + 1,
                msg: format!("bad bandwidth value: {e}"),
            })?;
            rows.push(row);
        }
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(TopologyError::Config(
                "trace matrix must be square and non-empty".into(),
            ));
        }
        Ok(Self {
            bandwidth: rows,
            scale,
        })
    }

    pub fn load(path: &std::path::Path, scale: f64) -> Result<Self, TopologyError> {
        Self::parse(&std::fs::read_to_string(path)?, scale)
    }

    pub fn hosts(&self) -> usize {
        self.bandwidth.len()
    }
}

/// Where link adjacency and bandwidth come from.
#[derive(Debug, Clone)]
pub enum LinkModel {
    /// Every pair may connect at a fixed rate.
    Fixed { pps: f64 },
    /// Every pair may connect; rate drawn uniformly per edge.
    Uniform { min_pps: f64, max_pps: f64 },
    /// Pairs connect only where the trace says so, at the traced rate.
    Trace(TraceMatrix),
}

impl LinkModel {
    fn allowed(&self, parent_profile: usize, child_profile: usize) -> bool {
        match self {
            LinkModel::Fixed { .. } | LinkModel::Uniform { .. } => true,
            LinkModel::Trace(t) => t.bandwidth[parent_profile][child_profile] * t.scale > 0.0,
        }
    }

    fn bandwidth(&self, parent_profile: usize, child_profile: usize, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            LinkModel::Fixed { pps } => *pps,
            LinkModel::Uniform { min_pps, max_pps } => rng.gen_range(*min_pps..=*max_pps),
            LinkModel::Trace(t) => t.bandwidth[parent_profile][child_profile] * t.scale,
        }
    }

    fn draw_profile(&self, rng: &mut ChaCha8Rng, fallback: usize) -> usize {
        match self {
            LinkModel::Trace(t) => rng.gen_range(0..t.hosts()),
            _ => fallback,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    /// Total node budget including sources and clients.
    pub n_nodes: usize,
    pub n_sources: usize,
    pub n_clients: usize,
    pub parents_per_node: usize,
    pub loss_rate: f64,
    pub link_model: LinkModel,
    pub buffer_capacity: usize,
    /// Abort after this many rejected node placements.
    pub max_rejects: usize,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            n_nodes: 40,
            n_sources: 1,
            n_clients: 3,
            parents_per_node: 4,
            loss_rate: 0.05,
            link_model: LinkModel::Uniform {
                min_pps: 8.0,
                max_pps: 40.0,
            },
            buffer_capacity: 16,
            max_rejects: 10_000,
        }
    }
}

/// Generates a pruned random overlay; deterministic for a fixed seed.
pub fn generate(cfg: &GenerateConfig, seed: u64) -> Result<OverlayGraph, TopologyError> {
    if cfg.n_sources == 0 || cfg.n_clients == 0 {
        return Err(TopologyError::Config(
            "need at least one source and one client".into(),
        ));
    }
    if cfg.n_nodes < cfg.n_sources + cfg.n_clients {
        return Err(TopologyError::Config(format!(
            "{} nodes cannot hold {} sources and {} clients",
            cfg.n_nodes, cfg.n_sources, cfg.n_clients
        )));
    }
    if cfg.parents_per_node == 0 {
        return Err(TopologyError::Config("parents_per_node must be >= 1".into()));
    }
    if !(0.0..1.0).contains(&cfg.loss_rate) {
        return Err(TopologyError::Config("loss rate must be in [0, 1)".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    let mut profiles: Vec<usize> = Vec::new();
    // Parent candidates: sources and relays, in placement order.
    let mut parent_pool: Vec<NodeId> = Vec::new();
    let mut rejects = 0usize;

    for i in 0..cfg.n_sources {
        let id = NodeId(i as u32);
        nodes.push(NodeRecord {
            id,
            role: Role::Source,
            buffer_capacity: cfg.buffer_capacity,
        });
        profiles.push(cfg.link_model.draw_profile(&mut rng, i));
        parent_pool.push(id);
    }

    let n_relays = cfg.n_nodes - cfg.n_sources - cfg.n_clients;
    for i in 0..n_relays + cfg.n_clients {
        let id = NodeId((cfg.n_sources + i) as u32);
        let role = if i < n_relays { Role::Sf } else { Role::Client };
        loop {
            let profile = cfg.link_model.draw_profile(&mut rng, id.0 as usize);
            let k = cfg.parents_per_node.min(parent_pool.len());
            let picked = sample(&mut rng, parent_pool.len(), k);
            let connectable: Vec<NodeId> = picked
                .iter()
                .map(|j| parent_pool[j])
                .filter(|p| cfg.link_model.allowed(profiles[p.0 as usize], profile))
                .collect();
            if connectable.is_empty() {
                rejects += 1;
                if rejects > cfg.max_rejects {
                    return Err(TopologyError::GenerationExhausted { rejects });
                }
                continue;
            }
            nodes.push(NodeRecord {
                id,
                role,
                buffer_capacity: cfg.buffer_capacity,
            });
            profiles.push(profile);
            for p in connectable {
                edges.push(EdgeRecord {
                    from: p,
                    to: id,
                    bandwidth_pps: cfg
                        .link_model
                        .bandwidth(profiles[p.0 as usize], profile, &mut rng),
                    loss: cfg.loss_rate,
                });
            }
            if role != Role::Client {
                parent_pool.push(id);
            }
            break;
        }
    }

    OverlayGraph::build(nodes, edges)?.prune()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_seed_reproduces_the_graph() {
        let cfg = GenerateConfig::default();
        let a = generate(&cfg, 42).unwrap();
        let b = generate(&cfg, 42).unwrap();
        assert!(a.structurally_equal(&b));
    }

    #[test]
    fn three_node_chain_comes_out_of_a_chain_seed() {
        let cfg = GenerateConfig {
            n_nodes: 3,
            n_sources: 1,
            n_clients: 1,
            parents_per_node: 1,
            link_model: LinkModel::Fixed { pps: 16.0 },
            ..Default::default()
        };
        // With one parent per node, every output is either S -> R -> C or
        // S -> C after pruning; seed 3 yields the full chain.
        let g = generate(&cfg, 3).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.role(NodeId(0)), Role::Source);
        assert_eq!(g.role(NodeId(1)), Role::Sf);
        assert_eq!(g.role(NodeId(2)), Role::Client);
        assert!(g.out_edges(NodeId(0)).any(|e| e.to == NodeId(1)));
        assert!(g.out_edges(NodeId(1)).any(|e| e.to == NodeId(2)));
    }

    #[test]
    fn invariants_hold_across_seeds() {
        let cfg = GenerateConfig::default();
        for seed in 0..100 {
            let g = generate(&cfg, seed).unwrap();
            for n in g.nodes() {
                let indeg = g.in_edges(n.id).count();
                let outdeg = g.out_edges(n.id).count();
                match n.role {
                    Role::Source => assert_eq!(indeg, 0),
                    Role::Client => assert_eq!(outdeg, 0),
                    _ => {
                        assert!(indeg >= 1 && outdeg >= 1, "seed {seed} node {}", n.id);
                    }
                }
                if n.role != Role::Source {
                    assert!(indeg <= cfg.parents_per_node, "seed {seed}");
                }
            }
            for e in g.edges() {
                assert!((0.0..1.0).contains(&e.loss));
                assert!(e.bandwidth_pps >= 8.0 && e.bandwidth_pps <= 40.0);
            }
            // generate() prunes, so pruning again changes nothing.
            assert!(g.prune().unwrap().structurally_equal(&g), "seed {seed}");
        }
    }

    #[test]
    fn unsatisfiable_trace_adjacency_exhausts() {
        // Only host 0 can talk, and only to itself -- which is forbidden.
        let trace = TraceMatrix::parse("0 0\n0 0\n", 1.0).unwrap();
        let cfg = GenerateConfig {
            n_nodes: 4,
            n_sources: 1,
            n_clients: 1,
            link_model: LinkModel::Trace(trace),
            max_rejects: 50,
            ..Default::default()
        };
        assert!(matches!(
            generate(&cfg, 1),
            Err(TopologyError::GenerationExhausted { .. })
        ));
    }

    #[test]
    fn trace_adjacency_constrains_edges() {
        // Hosts 0 and 1 interconnect at 200 pps; host 2 is isolated.
        let trace = TraceMatrix::parse("0 200 0\n200 0 0\n0 0 0\n", 0.1).unwrap();
        let cfg = GenerateConfig {
            n_nodes: 6,
            n_sources: 1,
            n_clients: 2,
            parents_per_node: 2,
            link_model: LinkModel::Trace(trace),
            ..Default::default()
        };
        let g = generate(&cfg, 9).unwrap();
        for e in g.edges() {
            assert!((e.bandwidth_pps - 20.0).abs() < 1e-12);
        }
    }
}
