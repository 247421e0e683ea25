//! Packet-level discrete-event simulation of the overlay.
//!
//! Every edge fires transmission opportunities at its bandwidth with
//! deterministic pacing; transmissions are lost independently per link.
//! SF nodes run the main-buffer/copies-buffer discipline and replicate
//! when outgoing bandwidth is spare; NC nodes discard non-innovative
//! arrivals and send fresh recombinations; clients track decoder state.
//! A run is fully determined by (graph, config, seed).

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet, VecDeque};
use std::io::Write;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::gf256::Echelon;
use crate::rnc::{encode_source, recombine, CodedPacket, DecoderState, Generation};
use crate::topology::{NodeId, OverlayGraph, Role};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("graph needs at least one source and one client")]
    MissingEndpoints,
    #[error("generation size must be at least 1")]
    BadGenerationSize,
    #[error("deadline must be positive and finite")]
    BadDeadline,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub generation_size: usize,
    /// Payload bytes per packet; 0 skips payload arithmetic entirely.
    pub packet_size: usize,
    /// Buffers flush and the run ends at this simulation time.
    pub deadline: f64,
    /// Constant per-edge propagation latency, seconds.
    pub latency: f64,
    /// Dump one wire record per client delivery to this file.
    pub trace: Option<std::path::PathBuf>,
}

impl SimConfig {
    pub fn new(generation_size: usize, packet_size: usize, deadline: f64) -> Self {
        Self {
            generation_size,
            packet_size,
            deadline,
            latency: 0.0,
            trace: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClientStats {
    pub arrivals: u64,
    pub innovative: u64,
    /// Time of the G-th innovative reception, if reached before the deadline.
    pub decode_time: Option<f64>,
    /// Innovative packets per second past the warm-up quarter.
    pub useful_rate: f64,
    pub final_rank: usize,
    /// Decoded payloads matched the originals (None when payloads are off).
    pub payload_verified: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeCounters {
    pub from: NodeId,
    pub to: NodeId,
    pub sent: u64,
    pub lost: u64,
    pub delivered: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Totals {
    pub sent: u64,
    pub lost: u64,
    pub delivered: u64,
    pub overflow_dropped: u64,
    pub duplicate_dropped: u64,
    pub non_innovative_dropped: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub generation_size: usize,
    pub clients: BTreeMap<NodeId, ClientStats>,
    pub edges: Vec<EdgeCounters>,
    pub totals: Totals,
    /// Simulation time when the run stopped.
    pub elapsed: f64,
}

impl SimResult {
    pub fn all_decoded(&self) -> bool {
        self.clients.values().all(|c| c.decode_time.is_some())
    }

    /// Mean client decoding delay; None unless every client decoded.
    pub fn mean_decode_delay(&self) -> Option<f64> {
        let mut total = 0.0;
        for c in self.clients.values() {
            total += c.decode_time?;
        }
        Some(total / self.clients.len() as f64)
    }

    pub fn total_useful_rate(&self) -> f64 {
        self.clients.values().map(|c| c.useful_rate).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "client_id,arrivals,innovative,decode_time_s,useful_rate_pps,final_rank,payload_verified"
        )?;
        for (id, c) in &self.clients {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                id,
                c.arrivals,
                c.innovative,
                c.decode_time.map_or(String::from(""), |t| t.to_string()),
                c.useful_rate,
                c.final_rank,
                c.payload_verified.map_or(String::from(""), |v| v.to_string()),
            )?;
        }
        Ok(())
    }
}

/// Fraction of client arrivals that carried no new information.
pub fn measure_duplicates(result: &SimResult) -> f64 {
    let arrivals: u64 = result.clients.values().map(|c| c.arrivals).sum();
    let innovative: u64 = result.clients.values().map(|c| c.innovative).sum();
    if arrivals == 0 {
        0.0
    } else {
        (arrivals - innovative) as f64 / arrivals as f64
    }
}

// ---------------------------------------------------------------------------
// Event machinery
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct SimPacket {
    uid: u64,
    data: Rc<CodedPacket>,
}

enum EventBody {
    /// k-th opportunity of an edge.
    Transmit { k: u64 },
    Arrival { packet: SimPacket },
    Deadline,
}

struct Event {
    time: f64,
    /// Arrivals before transmits before the deadline at equal times.
    class: u8,
    edge: usize,
    seq: u64,
    body: EventBody,
}

impl Event {
    fn key(&self) -> (f64, u8, usize, u64) {
        (self.time, self.class, self.edge, self.seq)
    }
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        let (t1, c1, e1, s1) = self.key();
        let (t2, c2, e2, s2) = other.key();
        // Reversed: BinaryHeap is a max-heap, we want the earliest first.
        t2.total_cmp(&t1)
            .then(c2.cmp(&c1))
            .then(e2.cmp(&e1))
            .then(s2.cmp(&s1))
    }
}

struct SfState {
    main: VecDeque<SimPacket>,
    copies: VecDeque<SimPacket>,
    sent: HashSet<u64>,
    capacity: usize,
}

struct NcState {
    echelon: Echelon,
    rows: Vec<CodedPacket>,
}

struct ClientState {
    decoder: DecoderState,
    stats: ClientStats,
    innovative_times: Vec<f64>,
}

enum NodeState {
    Source,
    Sf(SfState),
    Nc(NcState),
    Client(ClientState),
}

struct Sim<'a> {
    g: &'a OverlayGraph,
    cfg: &'a SimConfig,
    rng: ChaCha8Rng,
    generation: Generation,
    states: BTreeMap<NodeId, NodeState>,
    heap: std::collections::BinaryHeap<Event>,
    edge_counters: Vec<EdgeCounters>,
    totals: Totals,
    next_uid: u64,
    next_seq: u64,
    pending_clients: usize,
    now: f64,
    trace: Option<std::io::BufWriter<std::fs::File>>,
}

impl<'a> Sim<'a> {
    fn new(g: &'a OverlayGraph, cfg: &'a SimConfig, seed: u64) -> Result<Self, SimError> {
        if cfg.generation_size == 0 {
            return Err(SimError::BadGenerationSize);
        }
        if !(cfg.deadline.is_finite() && cfg.deadline > 0.0) {
            return Err(SimError::BadDeadline);
        }
        if g.sources().next().is_none() || g.clients().next().is_none() {
            return Err(SimError::MissingEndpoints);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let payload_seed = rng.gen();
        let mut generation =
            Generation::from_seed(0, cfg.generation_size, cfg.packet_size, payload_seed);
        generation.deadline = cfg.deadline;
        let states: BTreeMap<NodeId, NodeState> = g
            .nodes()
            .map(|n| {
                let state = match n.role {
                    Role::Source => NodeState::Source,
                    Role::Sf => NodeState::Sf(SfState {
                        main: VecDeque::new(),
                        copies: VecDeque::new(),
                        sent: HashSet::new(),
                        capacity: n.buffer_capacity,
                    }),
                    Role::Nc => NodeState::Nc(NcState {
                        echelon: Echelon::new(cfg.generation_size),
                        rows: Vec::new(),
                    }),
                    Role::Client => NodeState::Client(ClientState {
                        decoder: DecoderState::new(0, cfg.generation_size),
                        stats: ClientStats::default(),
                        innovative_times: Vec::new(),
                    }),
                };
                (n.id, state)
            })
            .collect();
        let edge_counters = g
            .edges()
            .iter()
            .map(|e| EdgeCounters {
                from: e.from,
                to: e.to,
                sent: 0,
                lost: 0,
                delivered: 0,
            })
            .collect();
        let pending_clients = g.clients().count();
        let trace = match &cfg.trace {
            Some(path) => Some(std::io::BufWriter::new(std::fs::File::create(path)?)),
            None => None,
        };
        Ok(Self {
            g,
            cfg,
            rng,
            generation,
            states,
            heap: std::collections::BinaryHeap::new(),
            edge_counters,
            totals: Totals::default(),
            next_uid: 0,
            next_seq: 0,
            pending_clients,
            now: 0.0,
            trace,
        })
    }

    fn push(&mut self, time: f64, class: u8, edge: usize, body: EventBody) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Event {
            time,
            class,
            edge,
            seq,
            body,
        });
    }

    fn fresh_packet(&mut self, data: CodedPacket) -> SimPacket {
        let uid = self.next_uid;
        self.next_uid += 1;
        SimPacket {
            uid,
            data: Rc::new(data),
        }
    }

    /// What the tail node of the edge puts on the wire, if anything.
    fn next_outgoing(&mut self, node: NodeId) -> Option<SimPacket> {
        match self.states.get_mut(&node).expect("node exists") {
            NodeState::Source => {
                let pkt = encode_source(&self.generation, &mut self.rng);
                Some(self.fresh_packet(pkt))
            }
            NodeState::Sf(sf) => {
                // First packet in the buffer that has not been sent
                // previously; stale duplicates are discarded on the way.
                let mut fresh = None;
                while let Some(pkt) = sf.main.pop_front() {
                    if sf.sent.contains(&pkt.uid) {
                        self.totals.duplicate_dropped += 1;
                    } else {
                        fresh = Some(pkt);
                        break;
                    }
                }
                if let Some(pkt) = fresh {
                    sf.sent.insert(pkt.uid);
                    sf.copies.push_back(pkt.clone());
                    if sf.copies.len() > sf.capacity {
                        sf.copies.pop_front();
                    }
                    Some(pkt)
                } else if !sf.copies.is_empty() {
                    let pick = self.rng.gen_range(0..sf.copies.len());
                    Some(sf.copies[pick].clone())
                } else {
                    None
                }
            }
            NodeState::Nc(nc) => {
                if nc.rows.is_empty() {
                    None
                } else {
                    let pkt = recombine(nc.rows.iter(), &mut self.rng)
                        .expect("buffered rows share the generation");
                    Some(self.fresh_packet(pkt))
                }
            }
            NodeState::Client(_) => None,
        }
    }

    fn deliver(&mut self, node: NodeId, pkt: SimPacket, time: f64) -> std::io::Result<()> {
        match self.states.get_mut(&node).expect("node exists") {
            NodeState::Source => {}
            NodeState::Sf(sf) => {
                // Arrivals are stored unconditionally; a duplicate burns
                // buffer space until the send scan or an eviction clears it.
                sf.main.push_back(pkt);
                if sf.main.len() > sf.capacity {
                    let evicted = sf.main.pop_front().expect("non-empty");
                    if sf.sent.contains(&evicted.uid) {
                        self.totals.duplicate_dropped += 1;
                    } else {
                        self.totals.overflow_dropped += 1;
                    }
                }
            }
            NodeState::Nc(nc) => {
                if nc.echelon.insert(&pkt.data.coeffs) {
                    nc.rows.push((*pkt.data).clone());
                } else {
                    self.totals.non_innovative_dropped += 1;
                }
            }
            NodeState::Client(client) => {
                client.stats.arrivals += 1;
                if let Some(w) = &mut self.trace {
                    w.write_all(&pkt.data.to_wire())?;
                }
                let innovative = client
                    .decoder
                    .is_innovative(&pkt.data)
                    .expect("generation matches");
                if innovative {
                    client
                        .decoder
                        .ingest(&pkt.data)
                        .expect("generation matches");
                    client.stats.innovative += 1;
                    client.innovative_times.push(time);
                    if client.decoder.is_decodable() {
                        client.stats.decode_time = Some(time);
                        if self.cfg.packet_size > 0 {
                            let decoded = client.decoder.decode().expect("full rank");
                            client.stats.payload_verified = Some(decoded == self.generation.native);
                        }
                        self.pending_clients -= 1;
                    }
                }
            }
        }
        Ok(())
    }

    fn run(mut self) -> Result<SimResult, SimError> {
        for (i, e) in self.g.edges().iter().enumerate() {
            let first = 1.0 / e.bandwidth_pps;
            if first <= self.cfg.deadline {
                self.push(first, 1, i, EventBody::Transmit { k: 1 });
            }
        }
        self.push(self.cfg.deadline, 2, usize::MAX, EventBody::Deadline);

        while let Some(ev) = self.heap.pop() {
            self.now = ev.time;
            match ev.body {
                EventBody::Deadline => break,
                EventBody::Arrival { packet } => {
                    let to = self.edge_counters[ev.edge].to;
                    self.deliver(to, packet, ev.time)?;
                    if self.pending_clients == 0 {
                        break;
                    }
                }
                EventBody::Transmit { k } => {
                    let edge = self.g.edges()[ev.edge];
                    if let Some(pkt) = self.next_outgoing(edge.from) {
                        self.edge_counters[ev.edge].sent += 1;
                        self.totals.sent += 1;
                        let lost = self.rng.gen_bool(edge.loss);
                        if lost {
                            self.edge_counters[ev.edge].lost += 1;
                            self.totals.lost += 1;
                        } else {
                            self.edge_counters[ev.edge].delivered += 1;
                            self.totals.delivered += 1;
                            if self.cfg.latency > 0.0 {
                                self.push(
                                    ev.time + self.cfg.latency,
                                    0,
                                    ev.edge,
                                    EventBody::Arrival { packet: pkt },
                                );
                            } else {
                                self.deliver(edge.to, pkt, ev.time)?;
                                if self.pending_clients == 0 {
                                    break;
                                }
                            }
                        }
                    }
                    let next = (k + 1) as f64 / edge.bandwidth_pps;
                    if next <= self.cfg.deadline {
                        self.push(next, 1, ev.edge, EventBody::Transmit { k: k + 1 });
                    }
                }
            }
        }

        if let Some(w) = &mut self.trace {
            w.flush()?;
        }
        let g_size = self.cfg.generation_size;
        let deadline = self.cfg.deadline;
        let elapsed = self.now;
        let clients = self
            .states
            .into_iter()
            .filter_map(|(id, state)| match state {
                NodeState::Client(mut c) => {
                    c.stats.final_rank = c.decoder.rank();
                    c.stats.useful_rate =
                        useful_rate_from(&c.innovative_times, g_size, c.stats.decode_time, deadline);
                    Some((id, c.stats))
                }
                _ => None,
            })
            .collect();
        Ok(SimResult {
            generation_size: g_size,
            clients,
            edges: self.edge_counters,
            totals: self.totals,
            elapsed,
        })
    }
}

/// Innovative packets per second measured past the warm-up quarter of the
/// generation, so pipeline fill does not skew the slope.
fn useful_rate_from(
    times: &[f64],
    g_size: usize,
    decode_time: Option<f64>,
    deadline: f64,
) -> f64 {
    match decode_time {
        Some(t_full) => {
            let warm = (g_size / 4).max(1).min(g_size - 1);
            let t_warm = times[warm - 1];
            if t_full > t_warm {
                (g_size - warm) as f64 / (t_full - t_warm)
            } else {
                g_size as f64 / t_full.max(f64::MIN_POSITIVE)
            }
        }
        None => times.len() as f64 / deadline,
    }
}

/// One seeded run.
pub fn simulate(
    g: &OverlayGraph,
    generation_size: usize,
    packet_size: usize,
    deadline: f64,
    seed: u64,
) -> Result<SimResult, SimError> {
    simulate_with(g, &SimConfig::new(generation_size, packet_size, deadline), seed)
}

pub fn simulate_with(g: &OverlayGraph, cfg: &SimConfig, seed: u64) -> Result<SimResult, SimError> {
    Sim::new(g, cfg, seed)?.run()
}

// ---------------------------------------------------------------------------
// Monte-Carlo aggregation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClientAggregate {
    pub completed: usize,
    pub mean_delay: f64,
    pub stddev_delay: f64,
    pub ci95_delay: f64,
    pub mean_useful_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub runs: usize,
    pub clients: BTreeMap<NodeId, ClientAggregate>,
    /// Runs where at least one client missed the deadline.
    pub incomplete_runs: usize,
}

impl MonteCarloSummary {
    pub fn mean_client_delay(&self) -> f64 {
        let n = self.clients.len().max(1) as f64;
        self.clients.values().map(|c| c.mean_delay).sum::<f64>() / n
    }

    pub fn total_useful_rate(&self) -> f64 {
        self.clients.values().map(|c| c.mean_useful_rate).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "client_id,runs,completed,mean_delay_s,stddev_delay_s,ci95_delay_s,mean_useful_rate_pps"
        )?;
        for (id, c) in &self.clients {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                id, self.runs, c.completed, c.mean_delay, c.stddev_delay, c.ci95_delay, c.mean_useful_rate
            )?;
        }
        Ok(())
    }
}

fn mix_seed(base: u64, run: u64) -> u64 {
    // splitmix64 step; independent per-run streams from one base seed.
    let mut z = base.wrapping_add(run.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seeded runs, aggregated per client.
pub fn monte_carlo(
    g: &OverlayGraph,
    cfg: &SimConfig,
    runs: usize,
    seed: u64,
) -> Result<MonteCarloSummary, SimError> {
    let results: Result<Vec<SimResult>, SimError> = (0..runs.max(1) as u64)
        .into_par_iter()
        .map(|i| simulate_with(g, cfg, mix_seed(seed, i)))
        .collect();
    let results = results?;
    let mut clients: BTreeMap<NodeId, ClientAggregate> = BTreeMap::new();
    for id in g.clients() {
        let delays: Vec<f64> = results
            .iter()
            .filter_map(|r| r.clients[&id].decode_time)
            .collect();
        let rates: Vec<f64> = results.iter().map(|r| r.clients[&id].useful_rate).collect();
        let n = delays.len();
        let mean = if n > 0 {
            delays.iter().sum::<f64>() / n as f64
        } else {
            f64::INFINITY
        };
        let var = if n > 1 {
            delays.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let stddev = var.sqrt();
        clients.insert(
            id,
            ClientAggregate {
                completed: n,
                mean_delay: mean,
                stddev_delay: stddev,
                ci95_delay: if n > 0 {
                    1.96 * stddev / (n as f64).sqrt()
                } else {
                    f64::INFINITY
                },
                mean_useful_rate: rates.iter().sum::<f64>() / rates.len().max(1) as f64,
            },
        );
    }
    let incomplete_runs = results.iter().filter(|r| !r.all_decoded()).count();
    Ok(MonteCarloSummary {
        runs: results.len(),
        clients,
        incomplete_runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{EdgeRecord, NodeRecord};

    fn node(id: u32, role: Role) -> NodeRecord {
        NodeRecord {
            id: NodeId(id),
            role,
            buffer_capacity: 16,
        }
    }

    fn edge(from: u32, to: u32, bw: f64, loss: f64) -> EdgeRecord {
        EdgeRecord {
            from: NodeId(from),
            to: NodeId(to),
            bandwidth_pps: bw,
            loss,
        }
    }

    fn direct_chain(loss: f64) -> OverlayGraph {
        OverlayGraph::build(
            vec![node(0, Role::Source), node(1, Role::Client)],
            vec![edge(0, 1, 32.0, loss)],
        )
        .unwrap()
    }

    #[test]
    fn lossless_chain_decodes_at_the_rate_limit() {
        let g = direct_chain(0.0);
        let r = simulate(&g, 32, 64, 10.0, 7).unwrap();
        let c = &r.clients[&NodeId(1)];
        // 32 packets at 32 pps; randomized coding may waste a packet or two.
        let t = c.decode_time.unwrap();
        assert!((0.97..=1.2).contains(&t), "t = {t}");
        assert_eq!(c.payload_verified, Some(true));
    }

    #[test]
    fn half_loss_doubles_the_mean_delay() {
        let g = direct_chain(0.5);
        let runs = 400;
        let mc = monte_carlo(&g, &SimConfig::new(32, 0, 40.0), runs, 3).unwrap();
        let c = &mc.clients[&NodeId(1)];
        assert_eq!(c.completed, runs);
        // Negative-binomial expectation: 64 slots at 32 pps = 2 s.
        assert!((c.mean_delay - 2.0).abs() / 2.0 < 0.05, "{}", c.mean_delay);
    }

    #[test]
    fn identical_seeds_reproduce_identical_results() {
        let g = crate::topology::generate(&Default::default(), 8).unwrap();
        let cfg = SimConfig::new(16, 32, 20.0);
        let a = simulate_with(&g, &cfg, 99).unwrap();
        let b = simulate_with(&g, &cfg, 99).unwrap();
        assert_eq!(a, b);
        let c = simulate_with(&g, &cfg, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn packet_conservation_holds_per_edge_and_globally() {
        let g = crate::topology::generate(&Default::default(), 21).unwrap();
        let r = simulate(&g, 32, 0, 15.0, 5).unwrap();
        for e in &r.edges {
            assert_eq!(e.sent, e.lost + e.delivered, "{} -> {}", e.from, e.to);
        }
        assert_eq!(r.totals.sent, r.totals.lost + r.totals.delivered);
        assert!(r.totals.sent > 0);
    }

    #[test]
    fn single_path_without_replication_has_no_duplicates() {
        let g = OverlayGraph::build(
            vec![node(0, Role::Source), node(1, Role::Sf), node(2, Role::Client)],
            vec![edge(0, 1, 16.0, 0.0), edge(1, 2, 16.0, 0.0)],
        )
        .unwrap();
        let r = simulate(&g, 16, 0, 20.0, 11).unwrap();
        assert_eq!(measure_duplicates(&r), 0.0);
        assert!(r.clients[&NodeId(2)].decode_time.is_some());
    }

    #[test]
    fn replicating_relay_produces_client_duplicates_and_nc_removes_them() {
        // Bottleneck relay with spare outgoing bandwidth on a heavily lossy
        // egress: the SF relay spends half its sends on copies, many of
        // which survive alongside their originals; the NC relay sends fresh
        // combinations instead, so almost every surviving packet counts.
        let build = |relay: Role| {
            OverlayGraph::build(
                vec![
                    node(0, Role::Source),
                    node(1, relay),
                    node(2, Role::Client),
                ],
                vec![edge(0, 1, 8.0, 0.0), edge(1, 2, 16.0, 0.5)],
            )
            .unwrap()
        };
        let sf = simulate(&build(Role::Sf), 32, 0, 120.0, 17).unwrap();
        let nc = simulate(&build(Role::Nc), 32, 0, 120.0, 17).unwrap();
        assert!(
            measure_duplicates(&sf) > measure_duplicates(&nc) + 0.1,
            "sf {} vs nc {}",
            measure_duplicates(&sf),
            measure_duplicates(&nc)
        );
        assert!(measure_duplicates(&nc) < 0.15, "{}", measure_duplicates(&nc));
    }

    #[test]
    fn deadline_marks_incomplete_runs() {
        let g = direct_chain(0.0);
        let r = simulate(&g, 32, 0, 0.5, 1).unwrap();
        let c = &r.clients[&NodeId(1)];
        assert!(c.decode_time.is_none());
        assert!(c.final_rank < 32);
        assert!(c.useful_rate > 0.0);
    }

    #[test]
    fn monte_carlo_single_run_has_zero_spread() {
        let g = direct_chain(0.0);
        let mc = monte_carlo(&g, &SimConfig::new(8, 0, 10.0), 1, 5).unwrap();
        let c = &mc.clients[&NodeId(1)];
        assert_eq!(c.completed, 1);
        assert_eq!(c.stddev_delay, 0.0);
        let single = simulate(&g, 8, 0, 10.0, mix_seed(5, 0)).unwrap();
        assert_eq!(c.mean_delay, single.clients[&NodeId(1)].decode_time.unwrap());
    }

    #[test]
    fn trace_dump_contains_one_record_per_delivery() {
        let dir = std::env::temp_dir().join("ncplace-trace-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trace.bin");
        let g = direct_chain(0.0);
        let mut cfg = SimConfig::new(8, 16, 10.0);
        cfg.trace = Some(path.clone());
        let r = simulate_with(&g, &cfg, 2).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let record = 4 + 8 + 16;
        assert_eq!(bytes.len() as u64, r.clients[&NodeId(1)].arrivals * record);
        let first = crate::rnc::CodedPacket::from_wire(&bytes[..record as usize], 8).unwrap();
        assert_eq!(first.generation_id, 0);
        std::fs::remove_file(&path).ok();
    }
}
