//! Exact branch-and-bound for the capacitated min-sumcut decomposition.
//!
//! Variables are the binary entries `x[v][c]` (vertex `v` in column `c`).
//! A node restricts every vertex to a set of allowed columns; the 1-branch
//! pins a vertex to one column and the 0-branch removes that column. Nodes
//! are explored best-bound first. When all columns carry identical
//! constraints, column labels are made canonical by requiring each vertex's
//! column to be at most one more than the largest column used before it.

mod flow;
mod relax;
mod repair;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::capacity::sumcut_labels;
use crate::error::{Error, Result};
use crate::netmodel::BipartiteGraph;
use crate::partition::{optimal_m, Decomposition};
use crate::rng::{stream_rng, Stream};

pub use relax::{relax_lower_bound, PartialAssignment, Relaxation};
pub use repair::round_and_repair;

/// Per-column count constraints shared by both problem forms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnConstraints {
    pub ue_min: Vec<usize>,
    pub ue_max: Vec<usize>,
    pub bs_min: Vec<usize>,
}

impl ColumnConstraints {
    /// `m` subnetworks, each with at most `k_max` UEs and at least one BS.
    pub fn capped(m: usize, k_max: usize) -> Self {
        ColumnConstraints { ue_min: vec![0; m], ue_max: vec![k_max; m], bs_min: vec![1; m] }
    }

    /// Two-way split with exact UE counts and BS floors.
    pub fn bisection(k1: usize, k2: usize, bs_floor_1: usize, bs_floor_2: usize) -> Self {
        ColumnConstraints { ue_min: vec![k1, k2], ue_max: vec![k1, k2], bs_min: vec![bs_floor_1, bs_floor_2] }
    }

    pub fn m(&self) -> usize {
        self.ue_max.len()
    }

    /// True when relabeling columns maps feasible solutions to feasible ones.
    pub fn symmetric(&self) -> bool {
        let same = |v: &[usize]| v.windows(2).all(|p| p[0] == p[1]);
        same(&self.ue_min) && same(&self.ue_max) && same(&self.bs_min)
    }

    fn check(&self, k: usize, l: usize) -> Result<()> {
        let m = self.m();
        if m == 0 || m > 64 {
            return Err(Error::invalid(format!("column count {m} outside 1..=64")));
        }
        if self.ue_min.len() != m || self.bs_min.len() != m {
            return Err(Error::invalid("constraint vectors differ in length"));
        }
        if (0..m).any(|c| self.ue_min[c] > self.ue_max[c]) {
            return Err(Error::invalid("UE lower bound above upper bound"));
        }
        let lo: usize = self.ue_min.iter().sum();
        let hi: usize = self.ue_max.iter().map(|&h| h.min(k)).sum();
        if lo > k || hi < k {
            return Err(Error::Infeasible(format!("UE counts cannot place {k} UEs")));
        }
        let floors: usize = self.bs_min.iter().sum();
        if floors > l {
            return Err(Error::Infeasible(format!("BS floors need {floors} BSs but only {l} exist")));
        }
        Ok(())
    }
}

fn default_epsilon() -> f64 {
    1e-6
}
fn default_relax_tol() -> f64 {
    1e-8
}
fn default_node_limit() -> u64 {
    10_000_000
}
fn default_relax_iters() -> usize {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative optimality-gap tolerance.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Convergence tolerance of the relaxation.
    #[serde(default = "default_relax_tol")]
    pub relax_tol: f64,
    #[serde(default = "default_node_limit")]
    pub node_limit: u64,
    /// Wall-clock cap in seconds.
    #[serde(default)]
    pub time_limit: Option<f64>,
    /// Seed for branching tie-breaks.
    #[serde(default)]
    pub seed: u64,
    /// Frank-Wolfe iterations per node; zero keeps the assignment bound alone.
    #[serde(default = "default_relax_iters")]
    pub relax_iters: usize,
    /// Record every node in the report.
    #[serde(default)]
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: default_epsilon(),
            relax_tol: default_relax_tol(),
            node_limit: default_node_limit(),
            time_limit: None,
            seed: 0,
            relax_iters: default_relax_iters(),
            trace: false,
        }
    }
}

impl SolverConfig {
    pub fn check(&self) -> Result<()> {
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.relax_tol.is_nan() || self.relax_tol <= 0.0 {
            return Err(Error::invalid("relax_tol must be positive"));
        }
        if self.node_limit == 0 {
            return Err(Error::invalid("node_limit must be at least 1"));
        }
        if matches!(self.time_limit, Some(t) if t.is_nan() || t <= 0.0) {
            return Err(Error::invalid("time_limit must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    GapReached,
    LimitHit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::GapReached => "gap-reached",
            SolveStatus::LimitHit => "limit-hit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One search-tree node.
#[derive(Debug, Clone)]
pub struct BnbNode {
    pub id: u64,
    pub depth: u32,
    pub relax_lb: f64,
    pub fixed: PartialAssignment,
}

/// Audit record of a processed node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTrace {
    pub id: u64,
    pub depth: u32,
    /// Queue key when the node was selected, i.e. the inherited bound.
    pub selected_lb: f64,
    /// Bound computed at the node, infinite when it has no completion.
    pub lb: f64,
    /// Incumbent objective when the node was processed.
    pub incumbent: Option<f64>,
    pub pruned: bool,
    pub masks: Vec<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: f64,
    pub decomposition: Decomposition,
    /// Solver column of every vertex (UEs first). Unlike the canonical
    /// decomposition labels, these keep the column order of the constraints.
    pub columns: Vec<usize>,
    pub nodes_explored: u64,
    /// Proven lower bound on the optimum.
    pub lower_bound: f64,
    pub gap: f64,
    /// Seconds.
    pub wall_time: f64,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<NodeTrace>,
}

/// Writes the node trace as CSV.
pub fn write_trace_csv<W: Write>(trace: &[NodeTrace], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "depth", "selected_lb", "lb", "incumbent", "pruned"])?;
    for t in trace {
        w.write_record([
            t.id.to_string(),
            t.depth.to_string(),
            format!("{}", t.selected_lb),
            format!("{}", t.lb),
            t.incumbent.map(|v| format!("{v}")).unwrap_or_default(),
            t.pruned.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Minimum-sumcut decomposition into `⌈K/k_max⌉` subnetworks, each holding
/// at most `k_max` UEs and at least one BS.
pub fn solve_p4(graph: &BipartiteGraph, k_max: usize, cfg: &SolverConfig) -> Result<SolveReport> {
    let m = optimal_m(graph.k(), k_max)?;
    if graph.l() < m {
        return Err(Error::Infeasible(format!("{} BSs cannot serve {m} subnetworks", graph.l())));
    }
    solve(graph, &ColumnConstraints::capped(m, k_max), cfg)
}

/// Minimum-sumcut split into exactly `k1` and `k2` UEs with at least
/// `bs_floor_1` and `bs_floor_2` BSs. Column 0 of the report is the `k1`
/// side.
pub fn solve_p5(
    subgraph: &BipartiteGraph,
    k1: usize,
    k2: usize,
    bs_floor_1: usize,
    bs_floor_2: usize,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    if k1 == 0 || k2 == 0 {
        return Err(Error::invalid("both sides of a split need at least one UE"));
    }
    if k1 + k2 != subgraph.k() {
        return Err(Error::invalid(format!("split {k1}+{k2} does not match {} UEs", subgraph.k())));
    }
    solve(subgraph, &ColumnConstraints::bisection(k1, k2, bs_floor_1, bs_floor_2), cfg)
}

/// Narrows the allowed columns until no rule fires. Returns false when some
/// vertex has no column left or a count constraint cannot be met.
fn propagate(masks: &mut [u64], k: usize, cons: &ColumnConstraints, symmetric: bool) -> bool {
    let m = cons.m();
    let n = masks.len();
    let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
    loop {
        let mut changed = false;
        if symmetric {
            let mut seen = 0u64;
            for mask in masks.iter_mut() {
                let reach = ((seen << 1) | 1) & full;
                let next = *mask & reach;
                if next != *mask {
                    *mask = next;
                    changed = true;
                }
                seen |= next;
            }
        }
        if masks.contains(&0) {
            return false;
        }
        for c in 0..m {
            let bit = 1u64 << c;
            for (range, lo, hi) in [(0..k, cons.ue_min[c], cons.ue_max[c]), (k..n, cons.bs_min[c], usize::MAX)] {
                let fixed = range.clone().filter(|&v| masks[v] == bit).count();
                let possible = range.clone().filter(|&v| masks[v] & bit != 0).count();
                if fixed > hi || possible < lo {
                    return false;
                }
                if fixed == hi && possible > fixed {
                    for v in range.clone() {
                        if masks[v] != bit && masks[v] & bit != 0 {
                            masks[v] &= !bit;
                            changed = true;
                        }
                    }
                }
                if possible == lo && possible > fixed {
                    for v in range.clone() {
                        if masks[v] & bit != 0 && masks[v] != bit {
                            masks[v] = bit;
                            changed = true;
                        }
                    }
                }
            }
        }
        if masks.contains(&0) {
            return false;
        }
        if !changed {
            return true;
        }
    }
}

struct Queued {
    node: BnbNode,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Max-heap order: lowest bound first, then deepest, then oldest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .node
            .relax_lb
            .total_cmp(&self.node.relax_lb)
            .then(self.node.depth.cmp(&other.node.depth))
            .then(other.node.id.cmp(&self.node.id))
    }
}

struct Search<'a> {
    graph: &'a BipartiteGraph,
    cons: &'a ColumnConstraints,
    cfg: &'a SolverConfig,
    degree: Vec<f64>,
    incumbent: Option<(f64, Vec<usize>)>,
    trace: Vec<NodeTrace>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.cfg.epsilon * obj.abs(),
            None => f64::INFINITY,
        }
    }

    fn offer(&mut self, labels: Vec<usize>) {
        debug_assert!(repair::is_feasible(&labels, self.graph.k(), self.cons));
        let obj = sumcut_labels(self.graph, &labels);
        let better = match &self.incumbent {
            Some((best, best_labels)) => obj < *best || (obj == *best && labels < *best_labels),
            None => true,
        };
        if better {
            self.incumbent = Some((obj, labels));
        }
    }

    fn record(&mut self, node: &BnbNode, lb: f64, pruned: bool) {
        if self.cfg.trace {
            self.trace.push(NodeTrace {
                id: node.id,
                depth: node.depth,
                selected_lb: node.relax_lb,
                lb,
                incumbent: self.incumbent.as_ref().map(|(o, _)| *o),
                pruned,
                masks: node.fixed.masks().to_vec(),
            });
        }
    }

    /// Most fractional free variable; ties go to the heavier vertex, then to
    /// the seeded generator.
    fn branch_variable(&mut self, x: &nalgebra::DMatrix<f64>, fixed: &PartialAssignment) -> (usize, usize) {
        let mut best = f64::INFINITY;
        let mut ties: Vec<(usize, usize)> = Vec::new();
        for v in 0..fixed.n() {
            if fixed.fixed_column(v).is_some() {
                continue;
            }
            for c in 0..fixed.m() {
                if !fixed.allows(v, c) {
                    continue;
                }
                let score = (x[(v, c)] - 0.5).abs();
                if score < best - 1e-9 {
                    best = score;
                    ties.clear();
                }
                if score <= best + 1e-9 {
                    ties.push((v, c));
                }
            }
        }
        let top = ties.iter().map(|&(v, _)| self.degree[v]).fold(f64::NEG_INFINITY, f64::max);
        ties.retain(|&(v, _)| self.degree[v] == top);
        if ties.len() == 1 {
            ties[0]
        } else {
            ties[self.rng.random_range(0..ties.len())]
        }
    }
}

/// Branch-and-bound over arbitrary per-column constraints.
pub fn solve(graph: &BipartiteGraph, cons: &ColumnConstraints, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.check()?;
    cons.check(graph.k(), graph.l())?;
    let k = graph.k();
    let n = graph.n();
    let m = cons.m();
    let symmetric = cons.symmetric();
    let degree = (0..n).map(|v| graph.degree()[v]).collect();
    let mut search = Search {
        graph,
        cons,
        cfg,
        degree,
        incumbent: None,
        trace: Vec::new(),
        rng: stream_rng(cfg.seed, Stream::Solver, &[]),
    };

    let mut root = PartialAssignment::free(n, m);
    if !propagate(root.masks_mut(), k, cons, symmetric) {
        return Err(Error::Infeasible("column constraints admit no assignment".into()));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Queued { node: BnbNode { id: 0, depth: 0, relax_lb: f64::NEG_INFINITY, fixed: root } });
    let mut next_id = 1u64;
    let mut explored = 0u64;
    // Smallest bound among nodes discarded against the incumbent.
    let mut pruned_lb = f64::INFINITY;
    let mut limit_hit = false;

    while let Some(Queued { node }) = heap.pop() {
        if node.relax_lb >= search.threshold() {
            // Every remaining node is at least as bad.
            pruned_lb = pruned_lb.min(node.relax_lb);
            break;
        }
        if explored >= cfg.node_limit || cfg.time_limit.is_some_and(|t| start.elapsed().as_secs_f64() >= t) {
            heap.push(Queued { node });
            limit_hit = true;
            break;
        }
        explored += 1;
        let Some(bound) = relax::node_bound(graph, cons, &node.fixed, cfg.relax_tol, cfg.relax_iters) else {
            search.record(&node, f64::INFINITY, true);
            continue;
        };
        let lb = bound.lb.max(node.relax_lb);
        if let Some(labels) = node.fixed.labels() {
            search.offer(labels);
            search.record(&node, lb, false);
            continue;
        }
        search.offer(bound.labels.clone());
        if let Some(mut labels) = repair::round_and_repair_labels(&bound.x, graph, cons) {
            repair::improve(graph, cons, &mut labels);
            search.offer(labels);
        }
        let mut polished = bound.labels;
        repair::improve(graph, cons, &mut polished);
        search.offer(polished);
        if lb >= search.threshold() {
            pruned_lb = pruned_lb.min(lb);
            search.record(&node, lb, true);
            continue;
        }
        search.record(&node, lb, false);

        let (v, c) = search.branch_variable(&bound.x, &node.fixed);
        for value in [true, false] {
            let mut fixed = node.fixed.clone();
            fixed.fix(v, c, value);
            if !propagate(fixed.masks_mut(), k, cons, symmetric) {
                continue;
            }
            heap.push(Queued { node: BnbNode { id: next_id, depth: node.depth + 1, relax_lb: lb, fixed } });
            next_id += 1;
        }
    }

    let Some((objective, columns)) = search.incumbent.take() else {
        return Err(Error::Infeasible(if limit_hit {
            "search limit reached before any feasible decomposition".into()
        } else {
            "no feasible decomposition".into()
        }));
    };
    let open_lb = heap.iter().map(|q| q.node.relax_lb).fold(f64::INFINITY, f64::min);
    let lower_bound = objective.min(pruned_lb).min(open_lb).max(0.0);
    let gap = if objective > 0.0 { ((objective - lower_bound) / objective).max(0.0) } else { 0.0 };
    // A finished search proves the incumbent within epsilon of the optimum.
    let status = if !limit_hit {
        SolveStatus::Optimal
    } else if gap <= cfg.epsilon {
        SolveStatus::GapReached
    } else {
        SolveStatus::LimitHit
    };
    let decomposition = Decomposition::from_labels(k, graph.l(), &columns)?;
    Ok(SolveReport {
        objective,
        decomposition,
        columns,
        nodes_explored: explored,
        lower_bound,
        gap,
        wall_time: start.elapsed().as_secs_f64(),
        status,
        trace: search.trace,
    })
}
