//! Analytic per-client decoding-delay estimation.
//!
//! The estimator decomposes the overlay into independent flows, one per
//! source and per NC node, each confined to the paths that avoid other NC
//! nodes. Per flow it computes the loss probability toward the client
//! (link loss, buffer overflow, loss of every replicate), the useful packet
//! rate, and the time to deliver a full-rank generation; the client delay
//! is the harmonic composite of the per-flow delays. Replication rates of
//! relay buffers feed back into the loss model, so the whole computation
//! iterates until the client delays settle.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;

use thiserror::Error;

use crate::buffer::{drop_probability, ReplicationProfile};
use crate::topology::{NodeId, OverlayGraph, Role};

#[derive(Debug, Error)]
pub enum DelayError {
    #[error("graph needs at least one source and one client")]
    MissingEndpoints,
    #[error("generation size must be at least 1")]
    BadGenerationSize,
    #[error("unknown or unsuitable node {0}")]
    UnknownNode(NodeId),
    #[error("first-passage mass reached only {mass:.6} within {cap} arrivals; loss too close to 1")]
    Divergent { mass: f64, cap: usize },
}

/// Iteration control for the estimator loop.
#[derive(Debug, Clone, Copy)]
pub struct EstimatorOptions {
    /// Maximum relative change of any client delay that counts as settled.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-4,
            max_iterations: 20,
        }
    }
}

/// Stop extending the first-passage sum once this much mass accumulated.
const MASS_TARGET: f64 = 1.0 - 1e-9;
/// Below this mass at the cap the expectation is reported divergent.
const MASS_FLOOR: f64 = 0.999;
/// Arrival cap for the recursion, in multiples of the generation size.
const CAP_FACTOR: usize = 50;

// ---------------------------------------------------------------------------
// Arrival distribution and rank recursion
// ---------------------------------------------------------------------------

/// Binomial pmf over k = 0..=kmax for n sends each lost with probability
/// `eps`, computed in log space so large n degrades to zeros instead of NaN.
fn binom_pmf_upto(n: usize, eps: f64, kmax: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; kmax + 1];
    if eps <= 0.0 {
        if n <= kmax {
            pmf[n] = 1.0;
        }
        return pmf;
    }
    if eps >= 1.0 {
        pmf[0] = 1.0;
        return pmf;
    }
    let lp = (1.0 - eps).ln();
    let le = eps.ln();
    let mut ln_choose = 0.0f64;
    for (k, slot) in pmf.iter_mut().enumerate().take(kmax.min(n) + 1) {
        if k > 0 {
            ln_choose += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        *slot = (ln_choose + k as f64 * lp + (n - k) as f64 * le).exp();
    }
    pmf
}

/// Probability that `k` of the `nu` packets sent per useful arrival reach
/// the client, each lost independently with probability `eps`. Non-integer
/// `nu` interpolates linearly between the two nearest integer batch sizes.
pub fn arrival_pmf(nu: f64, eps: f64, k: usize) -> f64 {
    let nu = nu.max(1.0).min(1e12);
    let lo = nu.floor() as usize;
    let hi = nu.ceil() as usize;
    let frac = nu - lo as f64;
    let at = |n: usize| binom_pmf_upto(n, eps, k)[k];
    if lo == hi {
        at(lo)
    } else {
        (1.0 - frac) * at(lo) + frac * at(hi)
    }
}

struct ArrivalDist {
    /// pmf[k] for k = 0..=g; arrivals beyond g only matter through the tail.
    pmf: Vec<f64>,
    /// tail[k] = P(at least k arrivals), k = 0..=g.
    tail: Vec<f64>,
}

impl ArrivalDist {
    fn new(nu: f64, eps: f64, g: usize) -> Self {
        let nu = nu.max(1.0).min(1e12);
        let lo = nu.floor() as usize;
        let hi = nu.ceil() as usize;
        let frac = nu - lo as f64;
        let mut pmf = binom_pmf_upto(lo, eps, g);
        if frac > 0.0 {
            let hi_pmf = binom_pmf_upto(hi, eps, g);
            for (p, q) in pmf.iter_mut().zip(hi_pmf) {
                *p = (1.0 - frac) * *p + frac * q;
            }
        }
        let mut tail = vec![0.0; g + 1];
        let mut cum = 0.0f64;
        for (k, t) in tail.iter_mut().enumerate() {
            *t = (1.0 - cum).max(0.0);
            cum += pmf[k];
        }
        Self { pmf, tail }
    }
}

/// One row at a time of the rank recursion. State r is the client rank
/// from this flow after the burst tied to the n-th useful arrival at the
/// sender; r saturates at min(n, G) and G is absorbing.
struct RankStepper {
    g: usize,
    dist: ArrivalDist,
    row: Vec<f64>,
    n: usize,
}

impl RankStepper {
    fn new(nu: f64, eps: f64, g: usize) -> Self {
        let mut row = vec![0.0; g + 1];
        row[0] = 1.0;
        Self {
            g,
            dist: ArrivalDist::new(nu, eps, g),
            row,
            n: 0,
        }
    }

    /// Advances one useful arrival; returns the first-passage probability
    /// of reaching rank G exactly now.
    fn step(&mut self) -> f64 {
        self.n += 1;
        let cap = self.n.min(self.g);
        let mut next = vec![0.0; self.g + 1];
        for (r, slot) in next.iter_mut().enumerate().take(cap) {
            let mut acc = 0.0;
            for k in 0..=r {
                acc += self.row[r - k] * self.dist.pmf[k];
            }
            *slot = acc;
        }
        let mut crossed = 0.0;
        for k in 1..=cap {
            crossed += self.row[cap - k] * self.dist.tail[k];
        }
        let first_passage = if cap == self.g { crossed } else { 0.0 };
        next[cap] = crossed + if cap == self.g { self.row[self.g] } else { 0.0 };
        self.row = next;
        first_passage
    }
}

/// Rank recursion tables: `p[n][r]` and the first-passage distribution of
/// reaching full rank at the n-th useful arrival.
#[derive(Debug, Clone)]
pub struct RankTables {
    pub g: usize,
    pub p: Vec<Vec<f64>>,
    pub first_passage: Vec<f64>,
}

pub fn rank_recursion(nu: f64, eps: f64, g: usize, n_max: usize) -> RankTables {
    let mut stepper = RankStepper::new(nu, eps, g);
    let mut p = Vec::with_capacity(n_max + 1);
    let mut first_passage = vec![0.0];
    p.push(stepper.row.clone());
    for _ in 1..=n_max {
        first_passage.push(stepper.step());
        p.push(stepper.row.clone());
    }
    RankTables {
        g,
        p,
        first_passage,
    }
}

/// Expected number of useful packets the sender must gather for the client
/// to reach full rank, truncated once the first-passage mass is complete.
pub fn expected_sources(tables: &RankTables) -> Result<f64, DelayError> {
    let mut mass = 0.0;
    let mut expect = 0.0;
    for (n, &fp) in tables.first_passage.iter().enumerate() {
        mass += fp;
        expect += n as f64 * fp;
        if mass >= MASS_TARGET {
            return Ok(expect);
        }
    }
    if mass >= MASS_FLOOR {
        Ok(expect)
    } else {
        Err(DelayError::Divergent {
            mass,
            cap: tables.first_passage.len().saturating_sub(1),
        })
    }
}

/// Same expectation without materializing the tables.
fn expected_first_passage(nu: f64, eps: f64, g: usize, n_max: usize) -> Result<f64, DelayError> {
    let mut stepper = RankStepper::new(nu, eps, g);
    let mut mass = 0.0;
    let mut expect = 0.0;
    for n in 1..=n_max {
        let fp = stepper.step();
        mass += fp;
        expect += n as f64 * fp;
        if mass >= MASS_TARGET {
            return Ok(expect);
        }
    }
    if mass >= MASS_FLOOR {
        Ok(expect)
    } else {
        Err(DelayError::Divergent { mass, cap: n_max })
    }
}

// ---------------------------------------------------------------------------
// Per-flow delays
// ---------------------------------------------------------------------------

/// Delay of a sender whose every transmission is potentially useful: the
/// generation size over the delivered rate.
pub fn over_provisioned_delay(b_out: f64, eps: f64, generation_size: usize) -> f64 {
    let rate = b_out * (1.0 - eps);
    if rate > 0.0 {
        generation_size as f64 / rate
    } else {
        f64::INFINITY
    }
}

/// Delay of a sender that refreshes its buffer at `useful_rate` packets per
/// second and sends `b_out / useful_rate` packets per refresh.
pub fn rate_limited_delay(
    b_out: f64,
    useful_rate: f64,
    eps: f64,
    generation_size: usize,
) -> Result<f64, DelayError> {
    if useful_rate <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let nu = (b_out / useful_rate).max(1.0);
    let expect = expected_first_passage(nu, eps, generation_size, CAP_FACTOR * generation_size)?;
    Ok(expect / useful_rate)
}

fn flow_rate(delay: f64) -> f64 {
    if delay.is_finite() && delay > 0.0 {
        1.0 / delay
    } else {
        0.0
    }
}

fn nc_sender_delay(b_send: f64, useful_rate: f64, eps: f64, generation_size: usize) -> f64 {
    if useful_rate <= 1e-12 {
        return f64::INFINITY;
    }
    if useful_rate < b_send {
        rate_limited_delay(b_send, useful_rate, eps, generation_size).unwrap_or(f64::INFINITY)
    } else {
        over_provisioned_delay(b_send, eps, generation_size)
    }
}

// ---------------------------------------------------------------------------
// Loss probabilities
// ---------------------------------------------------------------------------

/// Node-state overrides used while probing a candidate: `as_sf` relays in
/// store-and-forward mode, `silent` neither receives nor sends and is
/// dropped from the forwarding split of its parents.
#[derive(Debug, Clone, Copy, Default)]
struct Overrides {
    as_sf: Option<NodeId>,
    silent: Option<NodeId>,
}

struct Ctx<'a> {
    g: &'a OverlayGraph,
    rev_topo: Vec<NodeId>,
    beta: BTreeMap<NodeId, f64>,
}

impl<'a> Ctx<'a> {
    fn new(g: &'a OverlayGraph) -> Self {
        let mut rev_topo = g.topo_order();
        rev_topo.reverse();
        let beta = g
            .nodes()
            .map(|n| {
                let b = if n.role == Role::Client {
                    // Clients consume everything they receive.
                    0.0
                } else {
                    drop_probability(g.out_bandwidth(n.id), g.in_bandwidth(n.id))
                };
                (n.id, b)
            })
            .collect();
        Self { g, rev_topo, beta }
    }

    fn effective_role(&self, id: NodeId, ov: Overrides) -> Role {
        if ov.as_sf == Some(id) {
            Role::Sf
        } else {
            self.g.role(id)
        }
    }

    /// A node packets may travel through (or end at) on the way to `c`.
    fn traversable(&self, v: NodeId, c: NodeId, ov: Overrides) -> bool {
        v == c || (self.effective_role(v, ov) == Role::Sf && ov.silent != Some(v))
    }

    /// Nodes with a path to `c` that crosses no NC or silent node.
    fn reach_set(&self, c: NodeId, ov: Overrides) -> BTreeSet<NodeId> {
        let mut reach = BTreeSet::from([c]);
        let mut queue = VecDeque::from([c]);
        while let Some(w) = queue.pop_front() {
            if !self.traversable(w, c, ov) {
                continue;
            }
            for e in self.g.in_edges(w) {
                if reach.insert(e.from) {
                    queue.push_back(e.from);
                }
            }
        }
        reach
    }

    /// A child that absorbs its parents' packets into a flow of its own
    /// instead of relaying this one: NC nodes recode, silent nodes are
    /// probed out. Both leave the forwarding split entirely.
    fn absorbing(&self, v: NodeId, ov: Overrides) -> bool {
        self.effective_role(v, ov) == Role::Nc || ov.silent == Some(v)
    }

    /// Probability that a packet sent by each node fails to reach `c`,
    /// with all of its replicates. The forwarding split weighs the
    /// non-absorbing children; branches that cannot serve `c` count as
    /// losses, while bandwidth into NC or silent children is accounted to
    /// those nodes' own flows.
    fn loss_pass(
        &self,
        c: NodeId,
        rhat: &BTreeMap<NodeId, f64>,
        ov: Overrides,
    ) -> BTreeMap<NodeId, f64> {
        let reach = self.reach_set(c, ov);
        let mut eps: BTreeMap<NodeId, f64> = BTreeMap::new();
        for &u in &self.rev_topo {
            if u == c {
                eps.insert(u, 0.0);
                continue;
            }
            let mut denom = 0.0;
            let mut delivered = 0.0;
            for e in self.g.out_edges(u) {
                let v = e.to;
                if self.absorbing(v, ov) {
                    continue;
                }
                denom += e.bandwidth_pps;
                if !(self.traversable(v, c, ov) && reach.contains(&v)) {
                    continue;
                }
                let downstream = eps.get(&v).copied().unwrap_or(1.0);
                let rh = rhat.get(&v).copied().unwrap_or(1.0);
                let all_copies_lost = downstream.powf(rh).min(1.0);
                delivered += e.bandwidth_pps
                    * (1.0 - e.loss)
                    * (1.0 - self.beta[&v])
                    * (1.0 - all_copies_lost);
            }
            let value = if denom > 0.0 {
                (1.0 - delivered / denom).clamp(0.0, 1.0)
            } else {
                1.0
            };
            eps.insert(u, value);
        }
        eps
    }

    /// Bandwidth a sender pushes into its own flow, i.e. toward children
    /// that do not absorb it.
    fn send_bandwidth(&self, u: NodeId, ov: Overrides) -> f64 {
        self.g
            .out_edges(u)
            .filter(|e| !self.absorbing(e.to, ov))
            .map(|e| e.bandwidth_pps)
            .sum()
    }

    /// Composite delay at `c` over the sources plus the already-visited NC
    /// senders, under the given overrides. Visited senders keep their
    /// stored useful rates; losses are recomputed for the modified state.
    fn composite(
        &self,
        c: NodeId,
        rhat: &BTreeMap<NodeId, f64>,
        ov: Overrides,
        sources: &[NodeId],
        visited: &[(NodeId, f64)],
        generation_size: usize,
    ) -> f64 {
        let eps = self.loss_pass(c, rhat, ov);
        let mut rate = 0.0;
        for &s in sources {
            let b = self.send_bandwidth(s, ov);
            rate += flow_rate(over_provisioned_delay(b, eps[&s], generation_size));
        }
        for &(v, useful) in visited {
            let b = self.send_bandwidth(v, ov);
            rate += flow_rate(nc_sender_delay(b, useful, eps[&v], generation_size));
        }
        if rate > 0.0 {
            1.0 / rate
        } else {
            f64::INFINITY
        }
    }
}

/// Loss probability from `u` to client `c` under the given per-node
/// replication rates, on the subgraph that avoids NC nodes.
pub fn loss_probability(
    g: &OverlayGraph,
    u: NodeId,
    c: NodeId,
    rhat: &BTreeMap<NodeId, f64>,
) -> Result<f64, DelayError> {
    if !g.contains(u) {
        return Err(DelayError::UnknownNode(u));
    }
    if g.node(c).map(|n| n.role) != Some(Role::Client) {
        return Err(DelayError::UnknownNode(c));
    }
    let ctx = Ctx::new(g);
    Ok(ctx.loss_pass(c, rhat, Overrides::default())[&u])
}

// ---------------------------------------------------------------------------
// The estimator
// ---------------------------------------------------------------------------

/// Per-sender view of one client's delay estimate.
#[derive(Debug, Clone, Copy)]
pub struct SenderEstimate {
    /// Loss probability from the sender to the client.
    pub loss: f64,
    /// Potentially useful packet rate of the sender for this client.
    pub useful_rate: f64,
    /// Delay if this sender were the only source of information.
    pub delay: f64,
}

#[derive(Debug, Clone)]
pub struct ClientEstimate {
    /// Composite decoding delay in seconds; infinite when unreachable.
    pub delay: f64,
    pub senders: BTreeMap<NodeId, SenderEstimate>,
    /// Loss probabilities toward this client for every node.
    pub loss: BTreeMap<NodeId, f64>,
}

impl ClientEstimate {
    pub fn reachable(&self) -> bool {
        self.delay.is_finite()
    }
}

#[derive(Debug, Clone)]
pub struct DelayReport {
    pub clients: BTreeMap<NodeId, ClientEstimate>,
    pub iterations: usize,
    pub converged: bool,
    /// The overflow probability in the loss recursion is evaluated at the
    /// receiving child, following the paper's prose over its formula.
    pub beta_on_child: bool,
}

impl DelayReport {
    pub fn mean_client_delay(&self) -> f64 {
        self.total_client_delay() / self.clients.len().max(1) as f64
    }

    /// Sum of client delays; infinite as soon as any client is unreachable.
    pub fn total_client_delay(&self) -> f64 {
        self.clients.values().map(|c| c.delay).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "client_id,t_c_seconds,iterations,converged")?;
        for (c, est) in &self.clients {
            writeln!(w, "{},{},{},{}", c, est.delay, self.iterations, self.converged)?;
        }
        Ok(())
    }
}

pub fn estimate(g: &OverlayGraph, generation_size: usize) -> Result<DelayReport, DelayError> {
    estimate_with(g, generation_size, EstimatorOptions::default())
}

pub fn estimate_with(
    g: &OverlayGraph,
    generation_size: usize,
    opts: EstimatorOptions,
) -> Result<DelayReport, DelayError> {
    if generation_size == 0 {
        return Err(DelayError::BadGenerationSize);
    }
    let sources: Vec<NodeId> = g.sources().collect();
    let clients: Vec<NodeId> = g.clients().collect();
    if sources.is_empty() || clients.is_empty() {
        return Err(DelayError::MissingEndpoints);
    }
    let ctx = Ctx::new(g);
    let nc_order = g.nc_processing_order();
    let relays: Vec<NodeId> = g.nodes().filter(|n| n.role.is_relay()).map(|n| n.id).collect();

    // Replication rates start at the bandwidth ratio and are refined per
    // client from the buffer model.
    let initial_rhat = |u: NodeId| {
        let b_in = g.in_bandwidth(u);
        if b_in > 0.0 {
            (g.out_bandwidth(u) / b_in).max(1.0)
        } else {
            1.0
        }
    };
    let mut rhat: BTreeMap<NodeId, BTreeMap<NodeId, f64>> = clients
        .iter()
        .map(|&c| (c, relays.iter().map(|&u| (u, initial_rhat(u))).collect()))
        .collect();

    let mut reports: BTreeMap<NodeId, ClientEstimate> = BTreeMap::new();
    let mut prev_delays: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iterations {
        iterations = iter;
        reports.clear();
        for &c in &clients {
            let rh = &rhat[&c];
            let eps0 = ctx.loss_pass(c, rh, Overrides::default());
            let mut senders: BTreeMap<NodeId, SenderEstimate> = BTreeMap::new();
            for &s in &sources {
                let b = ctx.send_bandwidth(s, Overrides::default());
                let loss = eps0[&s];
                senders.insert(
                    s,
                    SenderEstimate {
                        loss,
                        useful_rate: b * (1.0 - loss),
                        delay: over_provisioned_delay(b, loss, generation_size),
                    },
                );
            }
            let mut visited: Vec<(NodeId, f64)> = Vec::new();
            for &u in &nc_order {
                let t_sf = ctx.composite(
                    c,
                    rh,
                    Overrides {
                        as_sf: Some(u),
                        silent: None,
                    },
                    &sources,
                    &visited,
                    generation_size,
                );
                let t_silent = ctx.composite(
                    c,
                    rh,
                    Overrides {
                        as_sf: None,
                        silent: Some(u),
                    },
                    &sources,
                    &visited,
                    generation_size,
                );
                // Rate-domain difference, scaled to packets: a configuration
                // with composite delay t delivers G packets in t seconds.
                let delta = generation_size as f64 * (flow_rate(t_sf) - flow_rate(t_silent));
                let loss = eps0[&u];
                let b_out = ctx.send_bandwidth(u, Overrides::default());
                let b_in = g.in_bandwidth(u);
                let denom = if b_out >= b_in {
                    1.0 - loss.powf(rh.get(&u).copied().unwrap_or(1.0))
                } else {
                    (b_out / b_in) * (1.0 - loss)
                };
                let useful_rate = if delta > 1e-12 && denom > 1e-12 {
                    delta / denom
                } else {
                    0.0
                };
                let delay = nc_sender_delay(b_out, useful_rate, loss, generation_size);
                senders.insert(
                    u,
                    SenderEstimate {
                        loss,
                        useful_rate,
                        delay,
                    },
                );
                visited.push((u, useful_rate));
            }
            let total_rate: f64 = senders.values().map(|s| flow_rate(s.delay)).sum();
            let delay = if total_rate > 0.0 {
                1.0 / total_rate
            } else {
                f64::INFINITY
            };
            reports.insert(
                c,
                ClientEstimate {
                    delay,
                    senders,
                    loss: eps0,
                },
            );
        }

        let delays: Vec<f64> = clients.iter().map(|c| reports[c].delay).collect();
        if let Some(prev) = &prev_delays {
            let mut worst = 0.0f64;
            for (&t, &p) in delays.iter().zip(prev) {
                if t.is_finite() && p.is_finite() {
                    worst = worst.max((t - p).abs() / p.max(1e-12));
                } else if t.is_finite() != p.is_finite() {
                    worst = f64::INFINITY;
                }
            }
            if worst < opts.tolerance {
                converged = true;
                break;
            }
        }
        prev_delays = Some(delays);

        // Refine replication rates from this round's delays and losses.
        let max_delay = reports
            .values()
            .map(|r| r.delay)
            .filter(|t| t.is_finite())
            .fold(f64::NAN, f64::max);
        if !max_delay.is_finite() {
            // No client reachable; nothing will change.
            converged = true;
            break;
        }
        for &u in &relays {
            let b_in = g.in_bandwidth(u);
            let n_total = ((b_in * max_delay).round() as i64).clamp(1, 1_000_000) as usize;
            let rate = if b_in > 0.0 {
                g.out_bandwidth(u) / b_in
            } else {
                1.0
            };
            let h = g.node(u).expect("relay exists").buffer_capacity;
            for &c in &clients {
                let loss = reports[&c].loss.get(&u).copied().unwrap_or(1.0);
                let profile = ReplicationProfile::compute(h, rate, n_total, loss);
                rhat.get_mut(&c).unwrap().insert(u, profile.equivalent);
            }
        }
    }

    Ok(DelayReport {
        clients: reports,
        iterations,
        converged,
        beta_on_child: true,
    })
}

/// Potentially useful packet rate of sender `u` for client `c`, from the
/// differential probe of the full estimator.
pub fn useful_rate(
    g: &OverlayGraph,
    u: NodeId,
    c: NodeId,
    generation_size: usize,
) -> Result<f64, DelayError> {
    let report = estimate(g, generation_size)?;
    report
        .clients
        .get(&c)
        .and_then(|r| r.senders.get(&u))
        .map(|s| s.useful_rate)
        .ok_or(DelayError::UnknownNode(u))
}
