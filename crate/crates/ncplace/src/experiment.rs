//! Experiment driver: line-oriented configs, placement-vs-budget sweeps
//! with all-NC / all-SF / max-flow references, plot-ready CSV tables, and
//! cross-strategy comparison summaries.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::placement::{
    self, apply, select_centralized, select_local, select_random, Strategy,
};
use crate::sim::{monte_carlo, SimConfig, SimError};
use crate::topology::{
    generate, max_flow_bound, FlowMode, GenerateConfig, LinkModel, OverlayGraph, Role,
    TopologyError, TraceMatrix,
};
use crate::{delay, placement::PlacementError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}:{line}: {msg}")]
    Config {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
    #[error("baseline estimate is infinite; some client is unreachable")]
    UnreachableBaseline,
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error(transparent)]
    Delay(#[from] delay::DelayError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologySource {
    Generate { seed: u64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyName {
    Centralized,
    Local,
    Random,
}

impl StrategyName {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "centralized" => Some(Self::Centralized),
            "local" => Some(Self::Local),
            "random" => Some(Self::Random),
            _ => None,
        }
    }
}

/// Everything a sweep needs, expressible as `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub topology: TopologySource,
    pub nodes: usize,
    pub sources: usize,
    pub clients: usize,
    pub parents: usize,
    pub loss: f64,
    pub bandwidth_min: f64,
    pub bandwidth_max: f64,
    pub buffer: usize,
    pub trace_matrix: Option<PathBuf>,
    pub trace_scale: f64,
    pub generation_size: usize,
    pub packet_size: usize,
    pub budgets: Vec<usize>,
    pub strategies: Vec<StrategyName>,
    pub radii: Vec<usize>,
    pub selection_seeds: Vec<u64>,
    pub runs: usize,
    pub sim_seed: u64,
    pub deadline_factor: f64,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            topology: TopologySource::Generate { seed: 1 },
            nodes: 40,
            sources: 1,
            clients: 3,
            parents: 4,
            loss: 0.05,
            bandwidth_min: 8.0,
            bandwidth_max: 40.0,
            buffer: 16,
            trace_matrix: None,
            trace_scale: 1.0 / 200.0,
            generation_size: 32,
            packet_size: 512,
            budgets: vec![0, 1, 2, 3],
            strategies: vec![StrategyName::Centralized, StrategyName::Random],
            radii: vec![3],
            selection_seeds: vec![1, 2, 3],
            runs: 100,
            sim_seed: 7,
            deadline_factor: 50.0,
            output: PathBuf::from("sweep-out"),
        }
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ExperimentError>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse().map_err(|e: T::Err| ExperimentError::Value {
                key: key.into(),
                msg: e.to_string(),
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Applies one `key = value` assignment; shared by the file parser and
    /// command-line overrides.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ExperimentError> {
        let bad = |msg: &str| ExperimentError::Value {
            key: key.into(),
            msg: msg.into(),
        };
        let num = |v: &str| -> Result<f64, ExperimentError> {
            v.parse().map_err(|_| bad("expected a number"))
        };
        match key {
            "topology" => {
                self.topology = match value {
                    "generate" => TopologySource::Generate {
                        seed: match &self.topology {
                            TopologySource::Generate { seed } => *seed,
                            _ => 1,
                        },
                    },
                    "file" => TopologySource::File(PathBuf::new()),
                    _ => return Err(bad("expected `generate` or `file`")),
                }
            }
            "topology_file" => self.topology = TopologySource::File(PathBuf::from(value)),
            "topology_seed" => {
                self.topology = TopologySource::Generate {
                    seed: value.parse().map_err(|_| bad("expected an integer"))?,
                }
            }
            "nodes" => self.nodes = value.parse().map_err(|_| bad("expected an integer"))?,
            "sources" => self.sources = value.parse().map_err(|_| bad("expected an integer"))?,
            "clients" => self.clients = value.parse().map_err(|_| bad("expected an integer"))?,
            "parents" => self.parents = value.parse().map_err(|_| bad("expected an integer"))?,
            "loss" => self.loss = num(value)?,
            "bandwidth_min" => self.bandwidth_min = num(value)?,
            "bandwidth_max" => self.bandwidth_max = num(value)?,
            "buffer" => self.buffer = value.parse().map_err(|_| bad("expected an integer"))?,
            "trace_matrix" => self.trace_matrix = Some(PathBuf::from(value)),
            "trace_scale" => self.trace_scale = num(value)?,
            "generation_size" => {
                self.generation_size = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "packet_size" => {
                self.packet_size = value.parse().map_err(|_| bad("expected an integer"))?
            }
            "budgets" => self.budgets = parse_list(key, value)?,
            "strategies" => {
                self.strategies = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| StrategyName::parse(s).ok_or_else(|| ExperimentError::Value {
                        key: key.into(),
                        msg: format!("unknown strategy `{s}`"),
                    }))
                    .collect::<Result<_, _>>()?
            }
            "radii" => self.radii = parse_list(key, value)?,
            "selection_seeds" => self.selection_seeds = parse_list(key, value)?,
            "runs" => self.runs = value.parse().map_err(|_| bad("expected an integer"))?,
            "sim_seed" => self.sim_seed = value.parse().map_err(|_| bad("expected an integer"))?,
            "deadline_factor" => self.deadline_factor = num(value)?,
            "output" => self.output = PathBuf::from(value),
            _ => return Err(bad("unknown key")),
        }
        Ok(())
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, ExperimentError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ExperimentError::Config {
                    path: origin.into(),
                    line: lineno + 1,
                    msg: "expected `key = value`".into(),
                });
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| ExperimentError::Config {
                    path: origin.into(),
                    line: lineno + 1,
                    msg: e.to_string(),
                })?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::parse(
            &std::fs::read_to_string(path)?,
            &path.display().to_string(),
        )
    }

    pub fn graph_label(&self) -> String {
        match &self.topology {
            TopologySource::Generate { seed } => format!("gen-seed{seed}"),
            TopologySource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "file".into()),
        }
    }

    /// Loads or generates the substrate graph with every relay as SF.
    pub fn resolve_graph(&self) -> Result<OverlayGraph, ExperimentError> {
        let g = match &self.topology {
            TopologySource::File(path) => OverlayGraph::load(path)?.prune()?,
            TopologySource::Generate { seed } => {
                let link_model = match &self.trace_matrix {
                    Some(path) => LinkModel::Trace(TraceMatrix::load(path, self.trace_scale)?),
                    None => LinkModel::Uniform {
                        min_pps: self.bandwidth_min,
                        max_pps: self.bandwidth_max,
                    },
                };
                generate(
                    &GenerateConfig {
                        n_nodes: self.nodes,
                        n_sources: self.sources,
                        n_clients: self.clients,
                        parents_per_node: self.parents,
                        loss_rate: self.loss,
                        link_model,
                        buffer_capacity: self.buffer,
                        max_rejects: 10_000,
                    },
                    *seed,
                )?
            }
        };
        Ok(g.with_all_relays(Role::Sf))
    }

    fn strategy_instances(&self) -> Vec<Strategy> {
        let mut out = Vec::new();
        for s in &self.strategies {
            match s {
                StrategyName::Centralized => out.push(Strategy::Centralized),
                StrategyName::Local => {
                    out.extend(self.radii.iter().map(|&radius| Strategy::Local { radius }))
                }
                StrategyName::Random => out.extend(
                    self.selection_seeds
                        .iter()
                        .map(|&seed| Strategy::Random { seed }),
                ),
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub graph: String,
    pub strategy: String,
    pub a: usize,
    pub mean_delay: f64,
    pub norm_delay: f64,
    pub mean_rate: f64,
    pub norm_rate: f64,
    pub incomplete_runs: usize,
    /// Empty on success, otherwise the recorded cell failure.
    pub status: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct References {
    pub all_sf_delay: f64,
    pub all_nc_delay: f64,
    pub all_sf_rate: f64,
    pub all_nc_rate: f64,
    pub maxflow_nc: f64,
    pub maxflow_routing: f64,
    pub deadline: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub graph: String,
    pub rows: Vec<SweepRow>,
    pub references: References,
    /// Promotion order per strategy instance.
    pub plans: BTreeMap<String, Vec<u32>>,
}

/// Runs every (strategy, budget) cell plus the reference configurations,
/// and writes the result tables under the configured output directory.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput, ExperimentError> {
    let substrate = cfg.resolve_graph()?;
    let label = cfg.graph_label();
    let baseline = delay::estimate(&substrate, cfg.generation_size)?;
    let base_delay = baseline.mean_client_delay();
    if !base_delay.is_finite() {
        return Err(ExperimentError::UnreachableBaseline);
    }
    let deadline = cfg.deadline_factor * base_delay;
    let sim_cfg = SimConfig::new(cfg.generation_size, cfg.packet_size, deadline);

    let all_nc = substrate.with_all_relays(Role::Nc);
    let sf_ref = monte_carlo(&substrate, &sim_cfg, cfg.runs, cfg.sim_seed)?;
    let nc_ref = monte_carlo(&all_nc, &sim_cfg, cfg.runs, cfg.sim_seed)?;
    let references = References {
        all_sf_delay: sf_ref.mean_client_delay(),
        all_nc_delay: nc_ref.mean_client_delay(),
        all_sf_rate: sf_ref.total_useful_rate(),
        all_nc_rate: nc_ref.total_useful_rate(),
        maxflow_nc: max_flow_bound(&substrate, FlowMode::NetworkCoding),
        maxflow_routing: max_flow_bound(&substrate, FlowMode::Routing),
        deadline,
    };

    let max_budget = cfg.budgets.iter().copied().max().unwrap_or(0);
    let mut rows = Vec::new();
    let mut plans = BTreeMap::new();
    for instance in cfg.strategy_instances() {
        let plan = match instance {
            Strategy::Centralized => {
                select_centralized(&substrate, max_budget, cfg.generation_size)
            }
            Strategy::Local { radius } => {
                select_local(&substrate, max_budget, radius, cfg.generation_size)
            }
            Strategy::Random { seed } => {
                select_random(&substrate, max_budget, seed, cfg.generation_size)
            }
        };
        let strategy_label = instance.label();
        let plan = match plan {
            Ok(p) => p,
            Err(e) => {
                for &a in &cfg.budgets {
                    rows.push(failed_row(&label, &strategy_label, a, &references, &e.to_string()));
                }
                continue;
            }
        };
        plans.insert(
            strategy_label.clone(),
            plan.nodes().iter().map(|n| n.0).collect(),
        );
        for &a in &cfg.budgets {
            let row = run_cell(
                &substrate,
                &plan,
                a,
                &label,
                &strategy_label,
                &sim_cfg,
                cfg,
                &references,
            );
            rows.push(match row {
                Ok(r) => r,
                Err(e) => failed_row(&label, &strategy_label, a, &references, &e.to_string()),
            });
        }
    }

    let output = SweepOutput {
        graph: label,
        rows,
        references,
        plans,
    };
    write_sweep(cfg, &output)?;
    Ok(output)
}

#[allow(clippy::too_many_arguments)]
fn run_cell(
    substrate: &OverlayGraph,
    plan: &placement::SelectionPlan,
    a: usize,
    graph: &str,
    strategy: &str,
    sim_cfg: &SimConfig,
    cfg: &ExperimentConfig,
    references: &References,
) -> Result<SweepRow, ExperimentError> {
    let applied = apply(substrate, plan, a.min(plan.picks.len()))?;
    let mc = monte_carlo(&applied, sim_cfg, cfg.runs, cfg.sim_seed)?;
    let mean_delay = mc.mean_client_delay();
    let mean_rate = mc.total_useful_rate();
    Ok(SweepRow {
        graph: graph.into(),
        strategy: strategy.into(),
        a,
        mean_delay,
        norm_delay: mean_delay / references.all_nc_delay,
        mean_rate,
        norm_rate: mean_rate / references.all_nc_rate,
        incomplete_runs: mc.incomplete_runs,
        status: String::new(),
    })
}

fn failed_row(
    graph: &str,
    strategy: &str,
    a: usize,
    _references: &References,
    error: &str,
) -> SweepRow {
    SweepRow {
        graph: graph.into(),
        strategy: strategy.into(),
        a,
        mean_delay: f64::NAN,
        norm_delay: f64::NAN,
        mean_rate: f64::NAN,
        norm_rate: f64::NAN,
        incomplete_runs: 0,
        status: error.replace(',', ";").replace('\n', " "),
    }
}

const RESULTS_HEADER: &str =
    "graph,strategy,a,mean_delay_s,norm_delay,mean_rate_pps,norm_rate,incomplete_runs,status";

fn write_sweep(cfg: &ExperimentConfig, out: &SweepOutput) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(&cfg.output)?;
    let mut results = String::from(RESULTS_HEADER);
    results.push('\n');
    for r in &out.rows {
        results.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.graph,
            r.strategy,
            r.a,
            r.mean_delay,
            r.norm_delay,
            r.mean_rate,
            r.norm_rate,
            r.incomplete_runs,
            r.status
        ));
    }
    std::fs::write(cfg.output.join("results.csv"), results)?;

    let rf = &out.references;
    std::fs::write(
        cfg.output.join("references.csv"),
        format!(
            "graph,all_sf_delay_s,all_nc_delay_s,all_sf_rate_pps,all_nc_rate_pps,maxflow_nc_pps,maxflow_routing_pps,deadline_s\n{},{},{},{},{},{},{},{}\n",
            out.graph,
            rf.all_sf_delay,
            rf.all_nc_delay,
            rf.all_sf_rate,
            rf.all_nc_rate,
            rf.maxflow_nc,
            rf.maxflow_routing,
            rf.deadline
        ),
    )?;

    let mut plans = String::from("graph,strategy,rank,node_id\n");
    for (strategy, nodes) in &out.plans {
        for (i, n) in nodes.iter().enumerate() {
            plans.push_str(&format!("{},{},{},{}\n", out.graph, strategy, i + 1, n));
        }
    }
    std::fs::write(cfg.output.join("plans.csv"), plans)?;

    emit_plots_data(std::slice::from_ref(out), &cfg.output)?;
    Ok(())
}

impl SweepOutput {
    /// Reads a sweep directory written by `run_sweep`.
    pub fn read_dir(dir: &Path) -> Result<Self, ExperimentError> {
        let parse_err = |path: &Path, line: usize, msg: String| ExperimentError::Config {
            path: path.display().to_string(),
            line,
            msg,
        };
        let results_path = dir.join("results.csv");
        let text = std::fs::read_to_string(&results_path)?;
        let mut rows = Vec::new();
        let mut graph = String::new();
        for (i, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 9 {
                return Err(parse_err(&results_path, i + 1, "expected 9 fields".into()));
            }
            graph = f[0].to_string();
            let num = |s: &str, what: &str| -> Result<f64, ExperimentError> {
                s.parse()
                    .map_err(|_| parse_err(&results_path, i + 1, format!("bad {what}")))
            };
            rows.push(SweepRow {
                graph: f[0].into(),
                strategy: f[1].into(),
                a: f[2]
                    .parse()
                    .map_err(|_| parse_err(&results_path, i + 1, "bad budget".into()))?,
                mean_delay: num(f[3], "delay")?,
                norm_delay: num(f[4], "normalized delay")?,
                mean_rate: num(f[5], "rate")?,
                norm_rate: num(f[6], "normalized rate")?,
                incomplete_runs: f[7]
                    .parse()
                    .map_err(|_| parse_err(&results_path, i + 1, "bad incomplete count".into()))?,
                status: f[8].into(),
            });
        }
        let mut plans: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let plans_path = dir.join("plans.csv");
        if plans_path.exists() {
            let text = std::fs::read_to_string(&plans_path)?;
            for (i, line) in text.lines().enumerate().skip(1) {
                if line.trim().is_empty() {
                    continue;
                }
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 4 {
                    return Err(parse_err(&plans_path, i + 1, "expected 4 fields".into()));
                }
                plans.entry(f[1].into()).or_default().push(
                    f[3].parse()
                        .map_err(|_| parse_err(&plans_path, i + 1, "bad node id".into()))?,
                );
            }
        }
        Ok(SweepOutput {
            graph,
            rows,
            references: References {
                all_sf_delay: f64::NAN,
                all_nc_delay: f64::NAN,
                all_sf_rate: f64::NAN,
                all_nc_rate: f64::NAN,
                maxflow_nc: f64::NAN,
                maxflow_routing: f64::NAN,
                deadline: f64::NAN,
            },
            plans,
        })
    }
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub strategy: String,
    pub a: usize,
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Per (strategy, budget): graphs where the strategy beat the mean of
    /// the RANDSEL instances on simulated delay.
    pub versus_random: Vec<CompareRow>,
    /// Per strategy: fraction of graphs whose first pick matches the
    /// centralized first pick.
    pub first_pick_agreement: BTreeMap<String, f64>,
}

fn is_random(label: &str) -> bool {
    label.starts_with("random_")
}

/// Summarizes sweeps from several topologies: win/loss counts against the
/// RANDSEL mean and first-pick agreement with the centralized strategy.
pub fn compare(results: &[SweepOutput]) -> Comparison {
    let mut strategies: Vec<String> = Vec::new();
    let mut budgets: Vec<usize> = Vec::new();
    for out in results {
        for row in &out.rows {
            if !is_random(&row.strategy) && !strategies.contains(&row.strategy) {
                strategies.push(row.strategy.clone());
            }
            if !budgets.contains(&row.a) {
                budgets.push(row.a);
            }
        }
    }
    strategies.sort();
    budgets.sort_unstable();

    let cell = |out: &SweepOutput, strategy: &str, a: usize| -> Option<f64> {
        out.rows
            .iter()
            .find(|r| r.strategy == strategy && r.a == a && r.status.is_empty())
            .map(|r| r.mean_delay)
            .filter(|d| d.is_finite())
    };
    let random_mean = |out: &SweepOutput, a: usize| -> Option<f64> {
        let delays: Vec<f64> = out
            .rows
            .iter()
            .filter(|r| is_random(&r.strategy) && r.a == a && r.status.is_empty())
            .map(|r| r.mean_delay)
            .filter(|d| d.is_finite())
            .collect();
        (!delays.is_empty()).then(|| delays.iter().sum::<f64>() / delays.len() as f64)
    };

    let mut versus_random = Vec::new();
    for strategy in &strategies {
        for &a in &budgets {
            let (mut wins, mut losses, mut ties) = (0, 0, 0);
            for out in results {
                let (Some(mine), Some(rand)) = (cell(out, strategy, a), random_mean(out, a))
                else {
                    continue;
                };
                if mine < rand {
                    wins += 1;
                } else if mine > rand {
                    losses += 1;
                } else {
                    ties += 1;
                }
            }
            versus_random.push(CompareRow {
                strategy: strategy.clone(),
                a,
                wins,
                losses,
                ties,
            });
        }
    }

    let mut first_pick_agreement = BTreeMap::new();
    for strategy in results
        .iter()
        .flat_map(|o| o.plans.keys())
        .filter(|s| s.as_str() != "centralized")
        .collect::<std::collections::BTreeSet<_>>()
    {
        let mut total = 0usize;
        let mut agree = 0usize;
        for out in results {
            let (Some(mine), Some(central)) =
                (out.plans.get(strategy), out.plans.get("centralized"))
            else {
                continue;
            };
            if let (Some(&m), Some(&c)) = (mine.first(), central.first()) {
                total += 1;
                if m == c {
                    agree += 1;
                }
            }
        }
        if total > 0 {
            first_pick_agreement.insert(strategy.clone(), agree as f64 / total as f64);
        }
    }

    Comparison {
        versus_random,
        first_pick_agreement,
    }
}

impl Comparison {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "strategy,a,wins_vs_random,losses_vs_random,ties")?;
        for r in &self.versus_random {
            writeln!(w, "{},{},{},{},{}", r.strategy, r.a, r.wins, r.losses, r.ties)?;
        }
        writeln!(w)?;
        writeln!(w, "strategy,first_pick_agreement_with_centralized")?;
        for (s, f) in &self.first_pick_agreement {
            writeln!(w, "{s},{f}")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Plot data
// ---------------------------------------------------------------------------

/// Writes one CSV per metric: budget on the x axis, one normalized series
/// per strategy, averaged over the given sweeps.
pub fn emit_plots_data(results: &[SweepOutput], dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let mut strategies: Vec<String> = Vec::new();
    let mut budgets: Vec<usize> = Vec::new();
    for out in results {
        for row in &out.rows {
            if !strategies.contains(&row.strategy) {
                strategies.push(row.strategy.clone());
            }
            if !budgets.contains(&row.a) {
                budgets.push(row.a);
            }
        }
    }
    strategies.sort();
    budgets.sort_unstable();

    for (file, pick) in [
        ("plots_delay.csv", 0usize),
        ("plots_throughput.csv", 1usize),
    ] {
        let mut text = String::from("a");
        for s in &strategies {
            text.push(',');
            text.push_str(s);
        }
        text.push('\n');
        for &a in &budgets {
            text.push_str(&a.to_string());
            for s in &strategies {
                let values: Vec<f64> = results
                    .iter()
                    .flat_map(|o| o.rows.iter())
                    .filter(|r| &r.strategy == s && r.a == a && r.status.is_empty())
                    .map(|r| if pick == 0 { r.norm_delay } else { r.norm_rate })
                    .filter(|v| v.is_finite())
                    .collect();
                text.push(',');
                if !values.is_empty() {
                    let mean = values.iter().sum::<f64>() / values.len() as f64;
                    text.push_str(&mean.to_string());
                }
            }
            text.push('\n');
        }
        std::fs::write(dir.join(file), text)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parses_and_overrides() {
        let text = "\
# sweep over a small overlay
topology = generate
topology_seed = 5
nodes = 12
clients = 2
budgets = 0, 1, 2
strategies = centralized, random
selection_seeds = 4,5
runs = 3
output = /tmp/x
";
        let mut cfg = ExperimentConfig::parse(text, "test.cfg").unwrap();
        assert_eq!(cfg.topology, TopologySource::Generate { seed: 5 });
        assert_eq!(cfg.nodes, 12);
        assert_eq!(cfg.budgets, vec![0, 1, 2]);
        assert_eq!(cfg.selection_seeds, vec![4, 5]);
        cfg.set("runs", "9").unwrap();
        assert_eq!(cfg.runs, 9);
        assert!(cfg.set("no_such_key", "1").is_err());
        assert!(matches!(
            ExperimentConfig::parse("strategies = greedyest\n", "t"),
            Err(ExperimentError::Config { line: 1, .. })
        ));
        assert!(matches!(
            ExperimentConfig::parse("nonsense line\n", "t"),
            Err(ExperimentError::Config { line: 1, .. })
        ));
    }

    fn tiny_config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.topology = TopologySource::Generate { seed: 3 };
        cfg.nodes = 10;
        cfg.clients = 2;
        cfg.parents = 3;
        cfg.generation_size = 8;
        cfg.packet_size = 0;
        cfg.budgets = vec![0, 1];
        cfg.strategies = vec![StrategyName::Centralized, StrategyName::Random];
        cfg.selection_seeds = vec![1, 2];
        cfg.runs = 3;
        cfg.output = dir.to_path_buf();
        cfg
    }

    #[test]
    fn sweep_writes_tables_and_is_reproducible() {
        let dir = std::env::temp_dir().join("ncplace-sweep-test");
        std::fs::remove_dir_all(&dir).ok();
        let cfg = tiny_config(&dir);
        let first = run_sweep(&cfg).unwrap();
        let results_a = std::fs::read(dir.join("results.csv")).unwrap();
        assert!(dir.join("references.csv").exists());
        assert!(dir.join("plans.csv").exists());
        assert!(dir.join("plots_delay.csv").exists());
        assert!(dir.join("plots_throughput.csv").exists());

        let second = run_sweep(&cfg).unwrap();
        let results_b = std::fs::read(dir.join("results.csv")).unwrap();
        assert_eq!(first, second);
        assert_eq!(results_a, results_b);

        // A zero-budget centralized cell equals the all-SF baseline.
        let row = first
            .rows
            .iter()
            .find(|r| r.strategy == "centralized" && r.a == 0)
            .unwrap();
        assert!((row.mean_delay - first.references.all_sf_delay).abs() < 1e-12);

        let reread = SweepOutput::read_dir(&dir).unwrap();
        assert_eq!(reread.rows, first.rows);
        assert_eq!(reread.plans, first.plans);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn compare_counts_wins_and_agreement() {
        let mk_row = |strategy: &str, a: usize, delay: f64| SweepRow {
            graph: "g".into(),
            strategy: strategy.into(),
            a,
            mean_delay: delay,
            norm_delay: 1.0,
            mean_rate: 1.0,
            norm_rate: 1.0,
            incomplete_runs: 0,
            status: String::new(),
        };
        let refs = References {
            all_sf_delay: 1.0,
            all_nc_delay: 1.0,
            all_sf_rate: 1.0,
            all_nc_rate: 1.0,
            maxflow_nc: 1.0,
            maxflow_routing: 1.0,
            deadline: 1.0,
        };
        let out = SweepOutput {
            graph: "g".into(),
            rows: vec![
                mk_row("centralized", 1, 0.5),
                mk_row("local_d3", 1, 0.7),
                mk_row("random_s1", 1, 0.8),
                mk_row("random_s2", 1, 0.6),
            ],
            references: refs,
            plans: BTreeMap::from([
                ("centralized".into(), vec![4, 9]),
                ("local_d3".into(), vec![4, 2]),
            ]),
        };
        let cmp = compare(&[out]);
        let central = cmp
            .versus_random
            .iter()
            .find(|r| r.strategy == "centralized" && r.a == 1)
            .unwrap();
        assert_eq!((central.wins, central.losses, central.ties), (1, 0, 0));
        let local = cmp
            .versus_random
            .iter()
            .find(|r| r.strategy == "local_d3")
            .unwrap();
        assert_eq!(local.wins, 0);
        assert_eq!(cmp.first_pick_agreement["local_d3"], 1.0);
    }

    #[test]
    fn identical_strategies_tie_everywhere() {
        let refs = References {
            all_sf_delay: 1.0,
            all_nc_delay: 1.0,
            all_sf_rate: 1.0,
            all_nc_rate: 1.0,
            maxflow_nc: 1.0,
            maxflow_routing: 1.0,
            deadline: 1.0,
        };
        let row = |strategy: &str| SweepRow {
            graph: "g".into(),
            strategy: strategy.into(),
            a: 2,
            mean_delay: 0.4,
            norm_delay: 1.0,
            mean_rate: 1.0,
            norm_rate: 1.0,
            incomplete_runs: 0,
            status: String::new(),
        };
        let out = SweepOutput {
            graph: "g".into(),
            rows: vec![row("centralized"), row("random_s1")],
            references: refs,
            plans: BTreeMap::new(),
        };
        let cmp = compare(&[out]);
        let r = &cmp.versus_random[0];
        assert_eq!((r.wins, r.losses, r.ties), (0, 0, 1));
    }

    #[test]
    fn plot_data_has_header_even_when_empty() {
        let dir = std::env::temp_dir().join("ncplace-plots-test");
        std::fs::remove_dir_all(&dir).ok();
        emit_plots_data(&[], &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("plots_delay.csv")).unwrap();
        assert_eq!(text.lines().count(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }
}
