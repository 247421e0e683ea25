//! Shared fixtures and independent oracles for the integration tests.

use std::collections::BTreeMap;

use ncplace::topology::{
    generate, EdgeRecord, GenerateConfig, LinkModel, NodeRecord, NodeId, OverlayGraph, Role,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn node(id: u32, role: Role) -> NodeRecord {
    NodeRecord {
        id: NodeId(id),
        role,
        buffer_capacity: 16,
    }
}

pub fn edge(from: u32, to: u32, bw: f64, loss: f64) -> EdgeRecord {
    EdgeRecord {
        from: NodeId(from),
        to: NodeId(to),
        bandwidth_pps: bw,
        loss,
    }
}

/// Fixed corpus of 20 small DAGs (at most 20 nodes, 5% loss) used for the
/// estimator-versus-simulator comparison.
pub fn small_corpus() -> Vec<OverlayGraph> {
    (0..20u64)
        .map(|i| {
            generate(
                &GenerateConfig {
                    n_nodes: 13 + (i as usize % 8),
                    n_sources: 1,
                    n_clients: 2,
                    parents_per_node: 3,
                    loss_rate: 0.05,
                    link_model: LinkModel::Uniform {
                        min_pps: 8.0,
                        max_pps: 40.0,
                    },
                    buffer_capacity: 16,
                    max_rejects: 10_000,
                },
                1000 + i,
            )
            .expect("corpus seed generates")
        })
        .collect()
}

/// Fixed corpus of 10 larger overlays (around 32-56 nodes) used for the
/// placement-quality checks.
pub fn placement_corpus() -> Vec<OverlayGraph> {
    (0..10u64)
        .map(|i| {
            generate(
                &GenerateConfig {
                    n_nodes: 36 + 8 * (i as usize % 4),
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
                },
                2000 + i,
            )
            .expect("corpus seed generates")
        })
        .collect()
}

/// Two-source butterfly with hand-computable min-cuts: 2 per client for
/// network coding, 3 end to end for routing.
pub fn butterfly(bw: f64, relay_role: Role) -> OverlayGraph {
    OverlayGraph::build(
        vec![
            node(0, Role::Source),
            node(1, Role::Source),
            node(2, relay_role),
            node(3, relay_role),
            node(4, Role::Client),
            node(5, Role::Client),
        ],
        vec![
            edge(0, 4, bw, 0.0),
            edge(1, 5, bw, 0.0),
            edge(0, 2, bw, 0.0),
            edge(1, 2, bw, 0.0),
            edge(2, 3, bw, 0.0),
            edge(3, 4, bw, 0.0),
            edge(3, 5, bw, 0.0),
        ],
    )
    .unwrap()
}

/// Spearman rank correlation with midranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = midranks(xs);
    let ry = midranks(ys);
    pearson(&rx, &ry)
}

fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    if vx <= 0.0 || vy <= 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// Copies-buffer process: packets arrive one per slot, each slot grants
/// `rate` transmission credits, the arriving packet is sent once and
/// copied into the FIFO copies buffer, spare credits replicate uniform
/// picks, and the deadline flushes after the last slot. Returns mean
/// transmissions per arrival position.
pub fn simulate_copies_buffer(
    h: usize,
    rate: f64,
    n: usize,
    generations: usize,
    seed: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut copies = vec![0.0f64; n];
    for _ in 0..generations {
        let mut cb: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
        let mut credit = 0.0;
        for k in 0..n {
            credit += rate;
            if credit >= 1.0 {
                credit -= 1.0;
                copies[k] += 1.0;
                cb.push_back(k);
                if cb.len() > h {
                    cb.pop_front();
                }
            }
            while credit >= 1.0 && !cb.is_empty() {
                credit -= 1.0;
                let pick = rng.gen_range(0..cb.len());
                copies[cb[pick]] += 1.0;
            }
        }
    }
    copies.iter().map(|c| c / generations as f64).collect()
}

/// Transport oracle for the loss model: packets injected at `from` are
/// forwarded hop by hop, picking children proportionally to bandwidth,
/// losing copies to link loss and buffer overflow, and replicating at each
/// relay according to the given per-node rates. Returns the fraction of
/// injected packets that never reach the client.
pub fn transport_loss(
    g: &OverlayGraph,
    from: NodeId,
    client: NodeId,
    rhat: &BTreeMap<NodeId, f64>,
    packets: usize,
    seed: u64,
) -> f64 {
    let beta: BTreeMap<NodeId, f64> = g
        .nodes()
        .map(|n| {
            let b = if n.role == Role::Client {
                0.0
            } else {
                let b_in = g.in_bandwidth(n.id);
                let b_out = g.out_bandwidth(n.id);
                if b_in > 0.0 && b_out < b_in {
                    1.0 - b_out / b_in
                } else {
                    0.0
                }
            };
            (n.id, b)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    fn copy_reaches(
        g: &OverlayGraph,
        at: NodeId,
        client: NodeId,
        rhat: &BTreeMap<NodeId, f64>,
        beta: &BTreeMap<NodeId, f64>,
        rng: &mut ChaCha8Rng,
    ) -> bool {
        let edges: Vec<&EdgeRecord> = g.out_edges(at).collect();
        if edges.is_empty() {
            return false;
        }
        let total: f64 = edges.iter().map(|e| e.bandwidth_pps).sum();
        let mut draw = rng.gen_range(0.0..total);
        let mut chosen = edges[edges.len() - 1];
        for e in &edges {
            if draw < e.bandwidth_pps {
                chosen = e;
                break;
            }
            draw -= e.bandwidth_pps;
        }
        if rng.gen_bool(chosen.loss) {
            return false;
        }
        let v = chosen.to;
        if v == client {
            return true;
        }
        if rng.gen_bool(beta[&v]) {
            return false;
        }
        // The relay forwards the packet `rhat` times; fractional rates
        // round stochastically to preserve the mean.
        let r = rhat.get(&v).copied().unwrap_or(1.0);
        let mut sends = r.floor() as usize;
        if rng.gen_bool(r.fract()) {
            sends += 1;
        }
        for _ in 0..sends.max(1) {
            if copy_reaches(g, v, client, rhat, beta, rng) {
                return true;
            }
        }
        false
    }

    let mut lost = 0usize;
    for _ in 0..packets {
        if !copy_reaches(g, from, client, rhat, &beta, &mut rng) {
            lost += 1;
        }
    }
    lost as f64 / packets as f64
}

/// Exact first-passage expectation for the batched-arrival rank process,
/// written as a direct forward walk over arrival slots: rank moves to
/// min(rank + arrivals, slot, G), arrivals per slot are Binomial(nu, 1-eps)
/// with exact coefficients. Independent of the library's recursion.
pub fn enumerate_expected_arrivals(nu: usize, eps: f64, g: usize) -> f64 {
    let mut pmf = vec![0.0f64; nu + 1];
    for (k, p) in pmf.iter_mut().enumerate() {
        let mut choose = 1.0f64;
        for i in 0..k {
            choose = choose * (nu - i) as f64 / (i + 1) as f64;
        }
        *p = choose * (1.0 - eps).powi(k as i32) * eps.powi((nu - k) as i32);
    }
    let mut state = vec![0.0f64; g + 1];
    state[0] = 1.0;
    let mut expect = 0.0;
    let mut mass = 0.0;
    for slot in 1..=200_000 {
        let mut next = vec![0.0f64; g + 1];
        let mut absorbed = 0.0;
        for (r, &p) in state.iter().enumerate().take(g) {
            if p == 0.0 {
                continue;
            }
            for (k, &a) in pmf.iter().enumerate() {
                let to = (r + k).min(slot).min(g);
                if to == g {
                    absorbed += p * a;
                } else {
                    next[to] += p * a;
                }
            }
        }
        expect += slot as f64 * absorbed;
        mass += absorbed;
        state = next;
        if mass >= 1.0 - 1e-12 {
            break;
        }
    }
    expect
}
