//! Node lower bounds.
//!
//! Two valid bounds are combined. The assignment bound charges every free
//! vertex its cheapest admissible crossing cost against the fixed vertices
//! and is solved exactly as a transportation problem. The relaxation bound
//! runs Frank-Wolfe on the continuous quadratic program and reports the
//! duality-gap certificate `f(X) + <grad, S - X>`, which is a lower bound at
//! every iterate.

use nalgebra::DMatrix;

use super::flow::{assign, ColumnBounds};
use super::ColumnConstraints;
use crate::netmodel::BipartiteGraph;

/// Allowed columns of every vertex, as bitmasks. A single allowed column
/// means the vertex is fixed there.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartialAssignment {
    m: usize,
    masks: Vec<u64>,
}

impl PartialAssignment {
    /// Every vertex free over `m` columns.
    pub fn free(n: usize, m: usize) -> Self {
        assert!((1..=64).contains(&m), "column count must be in 1..=64");
        let full = if m == 64 { u64::MAX } else { (1u64 << m) - 1 };
        PartialAssignment { m, masks: vec![full; n] }
    }

    pub fn from_masks(m: usize, masks: Vec<u64>) -> Self {
        PartialAssignment { m, masks }
    }

    /// Fixes a variable `x[vertex][column]` to 0 or 1.
    pub fn fix(&mut self, vertex: usize, column: usize, value: bool) {
        if value {
            self.masks[vertex] &= 1u64 << column;
        } else {
            self.masks[vertex] &= !(1u64 << column);
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.masks.len()
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub(crate) fn masks_mut(&mut self) -> &mut [u64] {
        &mut self.masks
    }

    pub fn allows(&self, vertex: usize, column: usize) -> bool {
        self.masks[vertex] >> column & 1 == 1
    }

    /// Column of a fixed vertex.
    pub fn fixed_column(&self, vertex: usize) -> Option<usize> {
        let mask = self.masks[vertex];
        (mask.count_ones() == 1).then(|| mask.trailing_zeros() as usize)
    }

    pub fn is_complete(&self) -> bool {
        self.masks.iter().all(|m| m.count_ones() == 1)
    }

    /// Labels of a complete assignment.
    pub fn labels(&self) -> Option<Vec<usize>> {
        (0..self.n()).map(|v| self.fixed_column(v)).collect()
    }
}

/// Fractional solution and certified lower bound of a node.
#[derive(Debug, Clone)]
pub struct Relaxation {
    /// `n x m` row-stochastic matrix respecting the allowed columns.
    pub x: DMatrix<f64>,
    pub lb: f64,
}

pub(crate) struct NodeBound {
    pub lb: f64,
    pub x: DMatrix<f64>,
    /// A feasible complete assignment found as a by-product.
    pub labels: Vec<usize>,
}

/// Lower bound of the best objective among completions of `fixed`.
///
/// Returns `None` when no completion meets the column constraints, which
/// means the node can be pruned.
pub fn relax_lower_bound(
    graph: &BipartiteGraph,
    constraints: &ColumnConstraints,
    fixed: &PartialAssignment,
    relax_tol: f64,
) -> Option<Relaxation> {
    node_bound(graph, constraints, fixed, relax_tol, 200).map(|b| Relaxation { x: b.x, lb: b.lb })
}

struct Side {
    vertices: Vec<usize>,
    bounds: ColumnBounds,
}

fn sides(graph: &BipartiteGraph, constraints: &ColumnConstraints, fixed: &PartialAssignment) -> Option<(Side, Side)> {
    let k = graph.k();
    let m = fixed.m();
    let mut ue_fixed = vec![0usize; m];
    let mut bs_fixed = vec![0usize; m];
    let mut free_ue = Vec::new();
    let mut free_bs = Vec::new();
    for v in 0..graph.n() {
        match fixed.fixed_column(v) {
            Some(c) if v < k => ue_fixed[c] += 1,
            Some(c) => bs_fixed[c] += 1,
            None if fixed.masks()[v] == 0 => return None,
            None if v < k => free_ue.push(v),
            None => free_bs.push(v),
        }
    }
    let mut ue_bounds = ColumnBounds { lo: vec![0; m], hi: vec![0; m] };
    let mut bs_bounds = ColumnBounds { lo: vec![0; m], hi: vec![0; m] };
    for c in 0..m {
        if ue_fixed[c] > constraints.ue_max[c] {
            return None;
        }
        ue_bounds.lo[c] = constraints.ue_min[c].saturating_sub(ue_fixed[c]);
        ue_bounds.hi[c] = constraints.ue_max[c] - ue_fixed[c];
        bs_bounds.lo[c] = constraints.bs_min[c].saturating_sub(bs_fixed[c]);
        bs_bounds.hi[c] = free_bs.len();
    }
    Some((Side { vertices: free_ue, bounds: ue_bounds }, Side { vertices: free_bs, bounds: bs_bounds }))
}

/// Solves the linear problem `min <cost, S>` over feasible completions,
/// writing the chosen columns of free vertices into `labels`.
fn linear_oracle(
    side: &Side,
    m: usize,
    cost_of: impl Fn(usize, usize) -> f64,
    fixed: &PartialAssignment,
    labels: &mut [usize],
) -> Option<f64> {
    let n = side.vertices.len();
    if n == 0 {
        return side.bounds.lo.iter().all(|&lo| lo == 0).then_some(0.0);
    }
    let mut cost = vec![0.0; n * m];
    let mut allowed = Vec::with_capacity(n);
    for (i, &v) in side.vertices.iter().enumerate() {
        allowed.push(fixed.masks()[v]);
        for c in 0..m {
            if fixed.allows(v, c) {
                cost[i * m + c] = cost_of(v, c);
            }
        }
    }
    let (total, cols) = assign(n, m, &cost, &allowed, &side.bounds)?;
    for (i, &v) in side.vertices.iter().enumerate() {
        labels[v] = cols[i];
    }
    Some(total)
}

pub(crate) fn node_bound(
    graph: &BipartiteGraph,
    constraints: &ColumnConstraints,
    fixed: &PartialAssignment,
    relax_tol: f64,
    max_iters: usize,
) -> Option<NodeBound> {
    let k = graph.k();
    let n = graph.n();
    let m = fixed.m();
    let w = graph.weights();
    let (ue_side, bs_side) = sides(graph, constraints, fixed)?;

    // Assignment bound.
    let col_of = |v: usize| fixed.fixed_column(v);
    let mut exact = 0.0;
    let mut disjoint = 0.0;
    let mut to_fixed = vec![0.0; n * m];
    let mut to_fixed_total = vec![0.0; n];
    for u in 0..k {
        for b in 0..graph.l() {
            let wt = w[(u, b)];
            if wt == 0.0 {
                continue;
            }
            let v = k + b;
            match (col_of(u), col_of(v)) {
                (Some(cu), Some(cb)) => {
                    if cu != cb {
                        exact += 2.0 * wt;
                    }
                }
                (None, Some(cb)) => {
                    to_fixed[u * m + cb] += wt;
                    to_fixed_total[u] += wt;
                }
                (Some(cu), None) => {
                    to_fixed[v * m + cu] += wt;
                    to_fixed_total[v] += wt;
                }
                (None, None) => {
                    if fixed.masks()[u] & fixed.masks()[v] == 0 {
                        disjoint += 2.0 * wt;
                    }
                }
            }
        }
    }
    let mut labels = vec![0usize; n];
    for v in 0..n {
        if let Some(c) = col_of(v) {
            labels[v] = c;
        }
    }
    let crossing = |v: usize, c: usize| 2.0 * (to_fixed_total[v] - to_fixed[v * m + c]);
    let ue_cost = linear_oracle(&ue_side, m, crossing, fixed, &mut labels)?;
    let bs_cost = linear_oracle(&bs_side, m, crossing, fixed, &mut labels)?;
    let assignment_lb = exact + disjoint + ue_cost + bs_cost;

    let mut x = DMatrix::<f64>::zeros(n, m);
    for v in 0..n {
        x[(v, labels[v])] = 1.0;
    }
    let free: Vec<usize> = ue_side.vertices.iter().chain(&bs_side.vertices).copied().collect();
    if free.is_empty() || max_iters == 0 {
        return Some(NodeBound { lb: assignment_lb, x, labels });
    }

    // Frank-Wolfe on the continuous relaxation, started from the assignment
    // solution.
    let objective = |x: &DMatrix<f64>| -> f64 {
        let mut f = 0.0;
        for u in 0..k {
            for b in 0..graph.l() {
                let wt = w[(u, b)];
                if wt == 0.0 {
                    continue;
                }
                let mut d2 = 0.0;
                for c in 0..m {
                    let d = x[(u, c)] - x[(k + b, c)];
                    d2 += d * d;
                }
                f += wt * d2;
            }
        }
        f
    };
    let gradient = |x: &DMatrix<f64>, g: &mut DMatrix<f64>| {
        g.fill(0.0);
        for u in 0..k {
            for b in 0..graph.l() {
                let wt = w[(u, b)];
                if wt == 0.0 {
                    continue;
                }
                for c in 0..m {
                    let d = 2.0 * wt * (x[(u, c)] - x[(k + b, c)]);
                    g[(u, c)] += d;
                    g[(k + b, c)] -= d;
                }
            }
        }
    };
    let mut best_lb = assignment_lb;
    let mut g = DMatrix::<f64>::zeros(n, m);
    let mut s_labels = labels.clone();
    let mut dir = DMatrix::<f64>::zeros(n, m);
    let mut f = objective(&x);
    for _ in 0..max_iters {
        gradient(&x, &mut g);
        let grad = |v: usize, c: usize| g[(v, c)];
        linear_oracle(&ue_side, m, grad, fixed, &mut s_labels)?;
        linear_oracle(&bs_side, m, grad, fixed, &mut s_labels)?;
        dir.fill(0.0);
        let mut slope = 0.0;
        for &v in &free {
            for c in 0..m {
                let s = if s_labels[v] == c { 1.0 } else { 0.0 };
                let d = s - x[(v, c)];
                dir[(v, c)] = d;
                slope += g[(v, c)] * d;
            }
        }
        let certificate = f + slope;
        if certificate > best_lb {
            best_lb = certificate;
        }
        if -slope <= relax_tol * f.abs().max(1.0) {
            break;
        }
        let curvature = objective(&dir);
        let step = if curvature > 0.0 { (-slope / (2.0 * curvature)).clamp(0.0, 1.0) } else { 1.0 };
        if step == 0.0 {
            break;
        }
        x += step * &dir;
        f = objective(&x);
    }
    Some(NodeBound { lb: best_lb, x, labels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::sumcut_labels;
    use crate::solver_bnb::ColumnConstraints;
    use rand::Rng;

    fn random_graph(k: usize, l: usize, seed: u64) -> BipartiteGraph {
        let mut rng = crate::rng::rng_from_seed(seed);
        let w = DMatrix::from_fn(k, l, |_, _| rng.random_range(0.0..1.0_f64).powi(3));
        BipartiteGraph::from_weights(w).unwrap()
    }

    #[test]
    fn zero_weights_give_zero_bound() {
        let g = BipartiteGraph::from_weights(DMatrix::zeros(3, 2)).unwrap();
        let cons = ColumnConstraints::capped(2, 2);
        let r = relax_lower_bound(&g, &cons, &PartialAssignment::free(5, 2), 1e-8).unwrap();
        assert_eq!(r.lb, 0.0);
    }

    #[test]
    fn fixed_pattern_bound_is_its_objective() {
        let g = random_graph(4, 3, 3);
        let labels = [0, 1, 1, 0, 1, 0, 0];
        let mut p = PartialAssignment::free(7, 2);
        for (v, &c) in labels.iter().enumerate() {
            p.fix(v, c, true);
        }
        let cons = ColumnConstraints::capped(2, 2);
        let r = relax_lower_bound(&g, &cons, &p, 1e-8).unwrap();
        let obj = sumcut_labels(&g, &labels);
        assert!((r.lb - obj).abs() <= 1e-12 * obj.max(1.0));
        for v in 0..7 {
            assert_eq!(r.x[(v, labels[v])], 1.0);
        }
    }

    #[test]
    fn infeasible_pattern_is_rejected() {
        let g = random_graph(3, 2, 1);
        let cons = ColumnConstraints::capped(2, 1);
        let mut p = PartialAssignment::free(5, 2);
        p.fix(0, 0, true);
        p.fix(1, 0, true);
        assert!(relax_lower_bound(&g, &cons, &p, 1e-8).is_none());
    }

    #[test]
    fn bound_below_every_completion() {
        let mut rng = crate::rng::rng_from_seed(9);
        for trial in 0..60 {
            let (k, l) = (4, 3);
            let g = random_graph(k, l, 100 + trial);
            let cons = ColumnConstraints::capped(2, 2);
            let mut p = PartialAssignment::free(k + l, 2);
            for v in 0..k + l {
                if rng.random_bool(0.3) {
                    p.fix(v, rng.random_range(0..2), rng.random_bool(0.5));
                }
            }
            let Some(r) = relax_lower_bound(&g, &cons, &p, 1e-10) else { continue };
            // Row sums and allowed columns.
            for v in 0..k + l {
                let s: f64 = r.x.row(v).sum();
                assert!((s - 1.0).abs() < 1e-9);
                for c in 0..2 {
                    if !p.allows(v, c) {
                        assert!(r.x[(v, c)].abs() < 1e-12);
                    }
                }
            }
            let mut best = f64::INFINITY;
            for code in 0..(1u32 << (k + l)) {
                let labels: Vec<usize> = (0..k + l).map(|v| (code >> v & 1) as usize).collect();
                if (0..k + l).any(|v| !p.allows(v, labels[v])) {
                    continue;
                }
                let ue0 = labels[..k].iter().filter(|&&c| c == 0).count();
                let bs0 = labels[k..].iter().filter(|&&c| c == 0).count();
                if ue0 > 2 || k - ue0 > 2 || bs0 == 0 || bs0 == l {
                    continue;
                }
                best = best.min(sumcut_labels(&g, &labels));
            }
            assert!(r.lb <= best + 1e-9, "lb {} above optimum {}", r.lb, best);
        }
    }
}
