//! Analytic model of SF-node packet replication.
//!
//! An SF node with spare outgoing bandwidth replicates packets from its
//! copies buffer. How often a given packet is replicated depends on its
//! arrival position within the generation: early packets sit in the buffer
//! while it fills, mid packets see the stationary FIFO regime, and late
//! packets are cut short by the decoding deadline. The per-position counts
//! collapse into one loss-equivalent rate used by the delay estimator.

use crate::topology::{NodeId, OverlayGraph};

/// Position of the last packet that completes a full copies-buffer
/// lifecycle. Packets after it are flushed by the deadline early;
/// when fewer than 2h packets arrive the stationary range is empty.
pub fn stationary_cutoff(h: usize, n_total: usize) -> usize {
    h.max(n_total.saturating_sub(h))
}

/// Expected number of transmissions of the k-th packet (1-based) of a
/// generation through an SF node with buffer capacity `h` and average
/// replication rate `rate` = b_o/b_i, out of `n_total` packets reaching
/// the node.
///
/// With `rate` <= 1 replication is inactive and every packet is sent once;
/// the bandwidth deficit shows up as overflow loss instead.
pub fn per_packet_replication(k: usize, h: usize, rate: f64, n_total: usize) -> f64 {
    debug_assert!(k >= 1 && k <= n_total.max(1));
    debug_assert!(h >= 1);
    if rate <= 1.0 {
        return 1.0;
    }
    let cutoff = stationary_cutoff(h, n_total);
    if k <= h.min(n_total) {
        // Buffer still filling: the packet gets a 1/x share while the
        // buffer holds x packets, then a 1/h share for its remaining
        // full-buffer intervals.
        let share: f64 = (k..=h).map(|x| 1.0 / x as f64).sum();
        1.0 + (rate - 1.0) * (share + (k - 1) as f64 / h as f64)
    } else if k <= cutoff {
        rate
    } else {
        // Flushed by the deadline after h - k' + 1 of its h intervals.
        let k_prime = k - cutoff;
        1.0 + (rate - 1.0) * (h - k_prime + 1) as f64 / h as f64
    }
}

/// Loss-equivalent scalar replication rate: the single exponent that
/// preserves the expected number of deliveries at the client.
///
/// Defined by `mean_k(1 - eps^{R_k}) = 1 - eps^{R_hat}`. Degenerate inputs
/// take the analytic limit: a constant sequence returns that constant and
/// `eps = 0` returns 1 (every copy count delivers).
pub fn equivalent_replication(per_packet: &[f64], eps: f64) -> f64 {
    if per_packet.is_empty() {
        return 1.0;
    }
    let (min, max) = per_packet
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
            (lo.min(r), hi.max(r))
        });
    if max - min < 1e-12 {
        return per_packet[0];
    }
    if eps <= 0.0 {
        return 1.0;
    }
    if eps >= 1.0 {
        // lim_{eps->1} log(mean eps^R) / log(eps) = mean R.
        return per_packet.iter().sum::<f64>() / per_packet.len() as f64;
    }
    let survive = per_packet.iter().map(|&r| eps.powf(r)).sum::<f64>() / per_packet.len() as f64;
    survive.ln() / eps.ln()
}

/// Probability that a packet is dropped at a node because the outgoing
/// bandwidth cannot keep up with the incoming one.
pub fn drop_probability(b_out: f64, b_in: f64) -> f64 {
    if b_in <= 0.0 || b_out >= b_in {
        0.0
    } else {
        1.0 - b_out / b_in
    }
}

/// Per-node replication summary used by the delay estimator.
#[derive(Debug, Clone)]
pub struct ReplicationProfile {
    pub node: Option<NodeId>,
    pub h: usize,
    /// Average replication rate b_o/b_i.
    pub rate: f64,
    /// Last position completing a full buffer lifecycle.
    pub cutoff: usize,
    pub n_total: usize,
    pub per_packet: Vec<f64>,
    /// Loss-equivalent rate for the given downstream loss.
    pub equivalent: f64,
    /// Whether the stationary regime is ever reached.
    pub stationary: bool,
}

impl ReplicationProfile {
    pub fn compute(h: usize, rate: f64, n_total: usize, eps: f64) -> Self {
        let n_total = n_total.max(1);
        let per_packet: Vec<f64> = (1..=n_total)
            .map(|k| per_packet_replication(k, h, rate, n_total))
            .collect();
        let equivalent = equivalent_replication(&per_packet, eps).max(1.0);
        Self {
            node: None,
            h,
            rate,
            cutoff: stationary_cutoff(h, n_total),
            n_total,
            per_packet,
            equivalent,
            stationary: n_total > 2 * h,
        }
    }
}

/// Profile of a relay node in the graph, with `n_total` packets of the
/// generation reaching it and downstream loss `eps` toward the client.
pub fn build_profile(g: &OverlayGraph, node: NodeId, n_total: usize, eps: f64) -> ReplicationProfile {
    let rec = g.node(node).expect("profile of a known node");
    let rate = if g.in_bandwidth(node) > 0.0 {
        g.out_bandwidth(node) / g.in_bandwidth(node)
    } else {
        1.0
    };
    let mut p = ReplicationProfile::compute(rec.buffer_capacity, rate, n_total, eps);
    p.node = Some(node);
    p
}
