//! Max-flow throughput bounds over the overlay graph.
//!
//! A hyper-source feeds every source over lossless infinite-capacity links.
//! Network-coding capacity is the sum of per-client max flows from the
//! hyper-source; routing capacity adds a hyper-sink behind all clients and
//! takes a single max flow.

use super::{NodeId, OverlayGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    Routing,
    NetworkCoding,
}

const EPS: f64 = 1e-9;

struct FlowNet {
    // residual[i] pairs with residual[i ^ 1] as the reverse edge
    head: Vec<usize>,
    residual: Vec<f64>,
    adj: Vec<Vec<usize>>,
}

impl FlowNet {
    fn new(n: usize) -> Self {
        Self {
            head: Vec::new(),
            residual: Vec::new(),
            adj: vec![Vec::new(); n],
        }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: f64) {
        self.adj[from].push(self.head.len());
        self.head.push(to);
        self.residual.push(cap);
        self.adj[to].push(self.head.len());
        self.head.push(from);
        self.residual.push(0.0);
    }

    /// Edmonds-Karp: repeated shortest augmenting paths.
    fn max_flow(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let mut parent_edge = vec![usize::MAX; self.adj.len()];
            let mut queue = std::collections::VecDeque::from([s]);
            let mut found = false;
            'bfs: while let Some(u) = queue.pop_front() {
                for &e in &self.adj[u] {
                    let v = self.head[e];
                    if v != s && parent_edge[v] == usize::MAX && self.residual[e] > EPS {
                        parent_edge[v] = e;
                        if v == t {
                            found = true;
                            break 'bfs;
                        }
                        queue.push_back(v);
                    }
                }
            }
            if !found {
                return total;
            }
            let mut bottleneck = f64::INFINITY;
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                bottleneck = bottleneck.min(self.residual[e]);
                v = self.head[e ^ 1];
            }
            let mut v = t;
            while v != s {
                let e = parent_edge[v];
                self.residual[e] -= bottleneck;
                self.residual[e ^ 1] += bottleneck;
                v = self.head[e ^ 1];
            }
            total += bottleneck;
        }
    }
}

/// Throughput ceiling of the overlay in packets per second.
pub fn max_flow_bound(g: &OverlayGraph, mode: FlowMode) -> f64 {
    let ids: Vec<NodeId> = g.nodes().map(|n| n.id).collect();
    let index: std::collections::BTreeMap<NodeId, usize> =
        ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let hyper_source = ids.len();
    let hyper_sink = ids.len() + 1;
    let infinite = g.edges().iter().map(|e| e.bandwidth_pps).sum::<f64>() + 1.0;

    let build = |with_sink: bool| {
        let mut net = FlowNet::new(ids.len() + 2);
        for e in g.edges() {
            net.add_edge(index[&e.from], index[&e.to], e.bandwidth_pps);
        }
        for s in g.sources() {
            net.add_edge(hyper_source, index[&s], infinite);
        }
        if with_sink {
            for c in g.clients() {
                net.add_edge(index[&c], hyper_sink, infinite);
            }
        }
        net
    };

    match mode {
        FlowMode::Routing => build(true).max_flow(hyper_source, hyper_sink),
        FlowMode::NetworkCoding => g
            .clients()
            .map(|c| build(false).max_flow(hyper_source, index[&c]))
            .sum(),
    }
}
