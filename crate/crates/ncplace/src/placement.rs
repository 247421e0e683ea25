//! Greedy placement of a budget of network-coding nodes.
//!
//! Each stage temporarily promotes every remaining SF candidate, scores the
//! resulting client delays with the analytic estimator, and keeps the best.
//! The centralized variant scores on the full graph; the local variant
//! scores each candidate on its own bounded neighborhood and a central
//! agent compares the per-candidate sums. RANDSEL draws nodes uniformly.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::delay::{estimate, DelayError};
use crate::topology::{NodeId, OverlayGraph, Role, TopologyError};

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("plan has only {have} picks, cannot apply {want}")]
    PrefixTooLong { have: usize, want: usize },
    #[error("neighborhood radius must be at least 1")]
    BadRadius,
    #[error(transparent)]
    Delay(#[from] DelayError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Centralized,
    Local { radius: usize },
    Random { seed: u64 },
}

impl Strategy {
    pub fn label(&self) -> String {
        match self {
            Strategy::Centralized => "centralized".into(),
            Strategy::Local { radius } => format!("local_d{radius}"),
            Strategy::Random { seed } => format!("random_s{seed}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pick {
    pub node: NodeId,
    /// Estimated mean client delay on the full graph after this promotion.
    pub estimated_delay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionPlan {
    pub strategy: Strategy,
    pub budget: usize,
    pub picks: Vec<Pick>,
}

impl SelectionPlan {
    pub fn nodes(&self) -> Vec<NodeId> {
        self.picks.iter().map(|p| p.node).collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank,node_id,est_delay_seconds,strategy,radius,seed")?;
        let (radius, seed) = match self.strategy {
            Strategy::Local { radius } => (radius.to_string(), String::new()),
            Strategy::Random { seed } => (String::new(), seed.to_string()),
            Strategy::Centralized => (String::new(), String::new()),
        };
        for (i, p) in self.picks.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                i + 1,
                p.node,
                p.estimated_delay,
                self.strategy.label(),
                radius,
                seed
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SelectOptions {
    /// Stop early instead of promoting a candidate that does not improve
    /// the estimated delay.
    pub early_stop: bool,
}

impl Default for SelectOptions {
    fn default() -> Self {
        Self { early_stop: false }
    }
}

fn mean_delay_after(g: &OverlayGraph, u: NodeId, generation_size: usize) -> f64 {
    match g.with_roles([(u, Role::Nc)]) {
        Ok(promoted) => match estimate(&promoted, generation_size) {
            Ok(report) => report.mean_client_delay(),
            Err(_) => f64::INFINITY,
        },
        Err(_) => f64::INFINITY,
    }
}

fn argmin_by_score(scores: &[(NodeId, f64)]) -> Option<(NodeId, f64)> {
    scores
        .iter()
        .copied()
        .min_by(|(ida, a), (idb, b)| a.total_cmp(b).then(ida.cmp(idb)))
}

/// Greedy selection with full network knowledge: at every stage every
/// remaining SF node is probed and the one minimizing the summed client
/// delay estimate is promoted. Ties break to the smallest node id.
pub fn select_centralized(
    g: &OverlayGraph,
    budget: usize,
    generation_size: usize,
) -> Result<SelectionPlan, PlacementError> {
    select_centralized_with(g, budget, generation_size, SelectOptions::default())
}

pub fn select_centralized_with(
    g: &OverlayGraph,
    budget: usize,
    generation_size: usize,
    opts: SelectOptions,
) -> Result<SelectionPlan, PlacementError> {
    let mut working = g.clone();
    let mut picks = Vec::new();
    let mut previous = if opts.early_stop {
        estimate(&working, generation_size)
            .map(|r| r.mean_client_delay())
            .unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    };
    for _ in 0..budget {
        let candidates: Vec<NodeId> = working.sf_nodes().collect();
        if candidates.is_empty() {
            break;
        }
        let scores: Vec<(NodeId, f64)> = candidates
            .par_iter()
            .map(|&u| (u, mean_delay_after(&working, u, generation_size)))
            .collect();
        let (best, score) = argmin_by_score(&scores).expect("candidates are non-empty");
        debug_assert!(scores.iter().all(|&(_, s)| score <= s));
        if opts.early_stop && score >= previous {
            break;
        }
        previous = score;
        working = working.with_roles([(best, Role::Nc)])?;
        picks.push(Pick {
            node: best,
            estimated_delay: score,
        });
    }
    Ok(SelectionPlan {
        strategy: Strategy::Centralized,
        budget,
        picks,
    })
}

/// Greedy selection from local views: each candidate is scored on its own
/// radius-bounded neighborhood (candidates promoted inside it) and a
/// central agent picks the smallest per-client delay sum.
pub fn select_local(
    g: &OverlayGraph,
    budget: usize,
    radius: usize,
    generation_size: usize,
) -> Result<SelectionPlan, PlacementError> {
    if radius == 0 {
        return Err(PlacementError::BadRadius);
    }
    let mut working = g.clone();
    let mut picks = Vec::new();
    for _ in 0..budget {
        let candidates: Vec<NodeId> = working.sf_nodes().collect();
        if candidates.is_empty() {
            break;
        }
        let scores: Vec<(NodeId, f64)> = candidates
            .par_iter()
            .map(|&u| {
                let score = working
                    .neighborhood(u, radius)
                    .and_then(|n| n.with_roles([(u, Role::Nc)]))
                    .map_err(PlacementError::from)
                    .and_then(|n| Ok(estimate(&n, generation_size)?))
                    .map(|r| r.total_client_delay())
                    .unwrap_or(f64::INFINITY);
                (u, score)
            })
            .collect();
        let (best, _) = argmin_by_score(&scores).expect("candidates are non-empty");
        working = working.with_roles([(best, Role::Nc)])?;
        let achieved = estimate(&working, generation_size)
            .map(|r| r.mean_client_delay())
            .unwrap_or(f64::INFINITY);
        picks.push(Pick {
            node: best,
            estimated_delay: achieved,
        });
    }
    Ok(SelectionPlan {
        strategy: Strategy::Local { radius },
        budget,
        picks,
    })
}

/// RANDSEL baseline: a budget of distinct SF nodes drawn uniformly,
/// reproducible per seed.
pub fn select_random(
    g: &OverlayGraph,
    budget: usize,
    seed: u64,
    generation_size: usize,
) -> Result<SelectionPlan, PlacementError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<NodeId> = g.sf_nodes().collect();
    let count = budget.min(candidates.len());
    let chosen = sample(&mut rng, candidates.len(), count);
    let mut working = g.clone();
    let mut picks = Vec::new();
    for idx in chosen.iter() {
        let node = candidates[idx];
        working = working.with_roles([(node, Role::Nc)])?;
        let achieved = estimate(&working, generation_size)
            .map(|r| r.mean_client_delay())
            .unwrap_or(f64::INFINITY);
        picks.push(Pick {
            node,
            estimated_delay: achieved,
        });
    }
    Ok(SelectionPlan {
        strategy: Strategy::Random { seed },
        budget,
        picks,
    })
}

/// Graph with the first `k` picks promoted to NC.
pub fn apply(
    g: &OverlayGraph,
    plan: &SelectionPlan,
    k: usize,
) -> Result<OverlayGraph, PlacementError> {
    if k > plan.picks.len() {
        return Err(PlacementError::PrefixTooLong {
            have: plan.picks.len(),
            want: k,
        });
    }
    Ok(g.with_roles(plan.picks[..k].iter().map(|p| (p.node, Role::Nc)))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{generate, GenerateConfig};

    fn corpus_graph(seed: u64) -> OverlayGraph {
        generate(
            &GenerateConfig {
                n_nodes: 14,
                n_clients: 2,
                parents_per_node: 3,
                ..Default::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_budget_is_an_empty_plan() {
        let g = corpus_graph(1);
        let plan = select_centralized(&g, 0, 16).unwrap();
        assert!(plan.picks.is_empty());
        assert!(apply(&g, &plan, 0).unwrap().structurally_equal(&g));
    }

    #[test]
    fn first_pick_matches_exhaustive_single_promotion() {
        let g = corpus_graph(2);
        let plan = select_centralized(&g, 1, 16).unwrap();
        let mut best: Option<(NodeId, f64)> = None;
        for u in g.sf_nodes() {
            let score = mean_delay_after(&g, u, 16);
            let better = match best {
                None => true,
                Some((bid, bs)) => score < bs || (score == bs && u < bid),
            };
            if better {
                best = Some((u, score));
            }
        }
        assert_eq!(plan.picks[0].node, best.unwrap().0);
        assert_eq!(plan.picks[0].estimated_delay, best.unwrap().1);
    }

    #[test]
    fn full_budget_enumerates_all_sf_nodes_and_matches_all_nc() {
        let g = corpus_graph(3);
        let sf: Vec<NodeId> = g.sf_nodes().collect();
        let plan = select_centralized(&g, sf.len() + 5, 16).unwrap();
        let mut picked = plan.nodes();
        picked.sort();
        assert_eq!(picked, sf);
        let all_nc = g.with_all_relays(Role::Nc);
        let want = estimate(&all_nc, 16).unwrap().mean_client_delay();
        let got = plan.picks.last().unwrap().estimated_delay;
        assert!((want - got).abs() < 1e-9);
    }

    #[test]
    fn local_with_full_radius_matches_centralized() {
        let g = corpus_graph(4);
        let central = select_centralized(&g, 3, 16).unwrap();
        let local = select_local(&g, 3, 50, 16).unwrap();
        assert_eq!(central.nodes(), local.nodes());
    }

    #[test]
    fn local_radius_one_still_yields_distinct_sf_picks() {
        let g = corpus_graph(5);
        let plan = select_local(&g, 3, 1, 16).unwrap();
        let nodes = plan.nodes();
        let mut dedup = nodes.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), nodes.len());
        for n in nodes {
            assert_eq!(g.role(n), Role::Sf);
        }
    }

    #[test]
    fn random_plans_are_seeded_and_seeds_differ() {
        let g = generate(
            &GenerateConfig {
                n_nodes: 24,
                ..Default::default()
            },
            6,
        )
        .unwrap();
        let a = select_random(&g, 4, 1, 16).unwrap();
        let b = select_random(&g, 4, 1, 16).unwrap();
        assert_eq!(a, b);
        let c = select_random(&g, 4, 2, 16).unwrap();
        assert_ne!(a.nodes(), c.nodes());
        let all = select_random(&g, usize::MAX, 3, 16).unwrap();
        assert_eq!(all.picks.len(), g.sf_nodes().count());
    }

    #[test]
    fn apply_prefix_is_idempotent_and_sets_roles() {
        let g = corpus_graph(7);
        let plan = select_centralized(&g, 2, 16).unwrap();
        let once = apply(&g, &plan, 1).unwrap();
        let twice = apply(&once, &plan, 1).unwrap();
        assert!(once.structurally_equal(&twice));
        let full = apply(&g, &plan, plan.picks.len()).unwrap();
        for p in &plan.picks {
            assert_eq!(full.role(p.node), Role::Nc);
        }
        assert!(matches!(
            apply(&g, &plan, 99),
            Err(PlacementError::PrefixTooLong { .. })
        ));
    }

    #[test]
    fn greedy_delays_do_not_increase_along_the_plan() {
        for seed in [11u64, 12] {
            let g = corpus_graph(seed);
            let plan = select_centralized(&g, 4, 16).unwrap();
            for w in plan.picks.windows(2) {
                assert!(
                    w[1].estimated_delay <= w[0].estimated_delay * (1.0 + 1e-9),
                    "seed {seed}: {:?}",
                    plan.picks
                );
            }
        }
    }
}
