use ncplace::topology::{generate, GenerateConfig, LinkModel, OverlayGraph, Role, NodeId};
use ncplace::{delay, sim, placement};
use std::time::Instant;

fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut ord: Vec<usize> = (0..v.len()).collect();
        ord.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < ord.len() {
            let mut j = i;
            while j + 1 < ord.len() && v[ord[j+1]] == v[ord[i]] { j += 1; }
            let rank = (i + j) as f64 / 2.0 + 1.0;
            for &ix in &ord[i..=j] { r[ix] = rank; }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>()/n, ry.iter().sum::<f64>()/n);
    let (mut c, mut vx, mut vy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) { c += (x-mx)*(y-my); vx += (x-mx).powi(2); vy += (y-my).powi(2); }
    if vx <= 0.0 || vy <= 0.0 { 0.0 } else { c / (vx*vy).sqrt() }
}

fn greedy_by_sim(g: &OverlayGraph, budget: usize, cfg: &sim::SimConfig) -> Vec<NodeId> {
    let mut working = g.clone();
    let mut picks = Vec::new();
    for _ in 0..budget {
        let mut best: Option<(NodeId, f64)> = None;
        for u in working.sf_nodes().collect::<Vec<_>>() {
            let p = working.with_roles([(u, Role::Nc)]).unwrap();
            let m = sim::monte_carlo(&p, cfg, 20, 11).unwrap().mean_client_delay();
            if best.map_or(true, |(_, b)| m < b) { best = Some((u, m)); }
        }
        let (u, _) = best.unwrap();
        working = working.with_roles([(u, Role::Nc)]).unwrap();
        picks.push(u);
    }
    picks
}

fn main() {
    let t0 = Instant::now();
    let mut a_est = 0; let mut a_sim = 0; let mut c_ok = 0;
    for i in 0..10u64 {
        let g = generate(&GenerateConfig {
            n_nodes: 40 + 8 * (i as usize % 3), n_sources: 1, n_clients: 3, parents_per_node: 4,
            loss_rate: 0.05, link_model: LinkModel::Uniform { min_pps: 8.0, max_pps: 40.0 },
            buffer_capacity: 16, max_rejects: 10_000,
        }, 2000 + i).unwrap();
        let est = delay::estimate(&g, 32).unwrap().mean_client_delay();
        let cfg = sim::SimConfig::new(32, 0, 100.0 * est.max(0.5));
        let all_sf = sim::monte_carlo(&g, &cfg, 100, 11).unwrap().mean_client_delay();
        let all_nc = sim::monte_carlo(&g.with_all_relays(Role::Nc), &cfg, 100, 11).unwrap().mean_client_delay();
        let plan = placement::select_centralized(&g, 2, 32).unwrap();
        let applied = placement::apply(&g, &plan, 2.min(plan.picks.len())).unwrap();
        let cent2 = sim::monte_carlo(&applied, &cfg, 100, 11).unwrap().mean_client_delay();
        let simg = greedy_by_sim(&g, 2, &cfg);
        let sim2_applied = g.with_roles(simg.iter().map(|&u| (u, Role::Nc))).unwrap();
        let sim2 = sim::monte_carlo(&sim2_applied, &cfg, 100, 11).unwrap().mean_client_delay();
        let improve = (all_sf - cent2) / all_sf;
        let improve_sim = (all_sf - sim2) / all_sf;
        if improve >= 0.20 { a_est += 1; }
        if improve_sim >= 0.20 { a_sim += 1; }
        let local = placement::select_local(&g, 1, 3, 32).unwrap();
        if local.picks[0].node == plan.picks[0].node { c_ok += 1; }
        println!("G{i}: n={} sf/nc={:.2} est2 {:.0}% sim2 {:.0}% acc {:.0}%",
            g.node_count(), all_sf/all_nc, improve*100.0, improve_sim*100.0,
            (est - all_sf).abs()/all_sf*100.0);
    }
    println!("hybrid-6: (a est) {a_est}/10 (ceiling) {a_sim}/10 (c) {c_ok}/10 t={:?}", t0.elapsed());

    let mut within = 0usize; let mut pairs = 0usize; let mut spearmen = Vec::new();
    for i in 0..20u64 {
        let g = generate(&GenerateConfig {
            n_nodes: 13 + (i as usize % 8), n_sources: 1, n_clients: 2, parents_per_node: 3,
            loss_rate: 0.05, link_model: LinkModel::Uniform { min_pps: 8.0, max_pps: 40.0 },
            buffer_capacity: 16, max_rejects: 10_000,
        }, 1000 + i).unwrap();
        let est = delay::estimate(&g, 32).unwrap();
        let cfg = sim::SimConfig::new(32, 0, 100.0 * est.mean_client_delay());
        let mc = sim::monte_carlo(&g, &cfg, 100, 42).unwrap();
        for (c, e) in &est.clients {
            let s = mc.clients[c].mean_delay;
            pairs += 1;
            if (e.delay - s).abs() / s <= 0.20 { within += 1; }
        }
        let base_est = est.mean_client_delay();
        let base_sim = mc.mean_client_delay();
        let mut eb = Vec::new(); let mut sb = Vec::new();
        for u in g.sf_nodes() {
            let p = g.with_roles([(u, Role::Nc)]).unwrap();
            let e = delay::estimate(&p, 32).map(|r| r.mean_client_delay()).unwrap_or(f64::INFINITY);
            let s = sim::monte_carlo(&p, &cfg, 100, 42).unwrap().mean_client_delay();
            eb.push(base_est - e); sb.push(base_sim - s);
        }
        spearmen.push(spearman(&eb, &sb));
    }
    println!("criterion5: within {}/{} spearman {:?}", within, pairs,
        spearmen.iter().map(|s| (s*100.0).round()/100.0).collect::<Vec<_>>());
    println!("total t={:?}", t0.elapsed());
}
