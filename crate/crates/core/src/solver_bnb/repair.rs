//! Incumbents: rounding a fractional solution to a feasible assignment and
//! improving it by single moves and same-type swaps.

use nalgebra::DMatrix;

use super::ColumnConstraints;
use crate::netmodel::BipartiteGraph;
use crate::partition::DecisionMatrix;

/// Per-vertex weight towards every column under `labels`.
struct Affinity {
    m: usize,
    conn: Vec<f64>,
}

impl Affinity {
    fn new(graph: &BipartiteGraph, labels: &[usize], m: usize) -> Self {
        let k = graph.k();
        let w = graph.weights();
        let mut conn = vec![0.0; graph.n() * m];
        for u in 0..k {
            for b in 0..graph.l() {
                let wt = w[(u, b)];
                conn[u * m + labels[k + b]] += wt;
                conn[(k + b) * m + labels[u]] += wt;
            }
        }
        Affinity { m, conn }
    }

    fn get(&self, v: usize, c: usize) -> f64 {
        self.conn[v * self.m + c]
    }

    /// Objective change when `v` moves from column `from` to `to`.
    fn move_delta(&self, v: usize, from: usize, to: usize) -> f64 {
        2.0 * (self.get(v, from) - self.get(v, to))
    }

    fn apply_move(&mut self, graph: &BipartiteGraph, v: usize, from: usize, to: usize) {
        let k = graph.k();
        let w = graph.weights();
        let m = self.m;
        if v < k {
            for b in 0..graph.l() {
                let wt = w[(v, b)];
                self.conn[(k + b) * m + from] -= wt;
                self.conn[(k + b) * m + to] += wt;
            }
        } else {
            for u in 0..k {
                let wt = w[(u, v - k)];
                self.conn[u * m + from] -= wt;
                self.conn[u * m + to] += wt;
            }
        }
    }
}

fn counts(labels: &[usize], range: std::ops::Range<usize>, m: usize) -> Vec<usize> {
    let mut c = vec![0; m];
    for v in range {
        c[labels[v]] += 1;
    }
    c
}

pub(crate) fn is_feasible(labels: &[usize], k: usize, constraints: &ColumnConstraints) -> bool {
    let m = constraints.m();
    let ue = counts(labels, 0..k, m);
    let bs = counts(labels, k..labels.len(), m);
    (0..m).all(|c| ue[c] >= constraints.ue_min[c] && ue[c] <= constraints.ue_max[c] && bs[c] >= constraints.bs_min[c])
}

/// Rounds `x` row-wise to its largest entry, then repairs the column
/// constraints greedily.
///
/// UEs leave over-full columns lowest margin first, where the margin is the
/// lead of the chosen entry over the runner-up, and go to the admissible
/// column with the smallest objective increase. Under-full UE columns and
/// BS-deficient columns pull from donors that can spare a vertex, preferring
/// the vertex whose fractional entry favours the receiving column most.
/// Returns `None` when the counts cannot be met.
pub fn round_and_repair(
    x: &DMatrix<f64>,
    graph: &BipartiteGraph,
    constraints: &ColumnConstraints,
) -> Option<DecisionMatrix> {
    let labels = round_and_repair_labels(x, graph, constraints)?;
    let m = constraints.m();
    let mut out = DMatrix::<f64>::zeros(graph.n(), m);
    for (v, &c) in labels.iter().enumerate() {
        out[(v, c)] = 1.0;
    }
    DecisionMatrix::new(graph.k(), out).ok()
}

pub(crate) fn round_and_repair_labels(
    x: &DMatrix<f64>,
    graph: &BipartiteGraph,
    constraints: &ColumnConstraints,
) -> Option<Vec<usize>> {
    let n = graph.n();
    let k = graph.k();
    let m = constraints.m();
    if x.nrows() != n || x.ncols() != m {
        return None;
    }
    let mut labels = vec![0usize; n];
    let mut margin = vec![0.0; n];
    for v in 0..n {
        let row = x.row(v);
        let mut best = 0;
        for c in 1..m {
            if row[c] > row[best] {
                best = c;
            }
        }
        let runner = (0..m).filter(|&c| c != best).map(|c| row[c]).fold(f64::NEG_INFINITY, f64::max);
        labels[v] = best;
        margin[v] = row[best] - runner;
    }
    let mut aff = Affinity::new(graph, &labels, m);
    let mut ue = counts(&labels, 0..k, m);
    let mut bs = counts(&labels, k..n, m);

    // Over-full UE columns.
    while let Some(c) = (0..m).find(|&c| ue[c] > constraints.ue_max[c]) {
        let u = (0..k).filter(|&u| labels[u] == c).min_by(|&a, &b| margin[a].total_cmp(&margin[b]).then(a.cmp(&b)))?;
        let to = (0..m)
            .filter(|&t| t != c && ue[t] < constraints.ue_max[t])
            .min_by(|&a, &b| aff.move_delta(u, c, a).total_cmp(&aff.move_delta(u, c, b)).then(a.cmp(&b)))?;
        aff.apply_move(graph, u, c, to);
        labels[u] = to;
        ue[c] -= 1;
        ue[to] += 1;
        margin[u] = f64::INFINITY;
    }
    // Under-full UE columns.
    while let Some(c) = (0..m).find(|&c| ue[c] < constraints.ue_min[c]) {
        let u =
            (0..k).filter(|&u| labels[u] != c && ue[labels[u]] > constraints.ue_min[labels[u]]).min_by(|&a, &b| {
                let da = aff.move_delta(a, labels[a], c);
                let db = aff.move_delta(b, labels[b], c);
                da.total_cmp(&db).then(a.cmp(&b))
            })?;
        let from = labels[u];
        aff.apply_move(graph, u, from, c);
        labels[u] = c;
        ue[from] -= 1;
        ue[c] += 1;
    }
    // BS-deficient columns.
    while let Some(c) = (0..m).find(|&c| bs[c] < constraints.bs_min[c]) {
        let b =
            (k..n).filter(|&b| labels[b] != c && bs[labels[b]] > constraints.bs_min[labels[b]]).max_by(|&a, &b| {
                let pa = x[(a, c)] - x[(a, labels[a])];
                let pb = x[(b, c)] - x[(b, labels[b])];
                pa.total_cmp(&pb)
                    .then(aff.move_delta(b, labels[b], c).total_cmp(&aff.move_delta(a, labels[a], c)))
                    .then(b.cmp(&a))
            })?;
        let from = labels[b];
        aff.apply_move(graph, b, from, c);
        labels[b] = c;
        bs[from] -= 1;
        bs[c] += 1;
    }
    debug_assert!(is_feasible(&labels, k, constraints));
    Some(labels)
}

/// Best-improvement local search over single moves and swaps of two
/// vertices of the same type, keeping the column constraints satisfied.
pub(crate) fn improve(graph: &BipartiteGraph, constraints: &ColumnConstraints, labels: &mut [usize]) {
    let n = graph.n();
    let k = graph.k();
    let m = constraints.m();
    if m < 2 {
        return;
    }
    let mut aff = Affinity::new(graph, labels, m);
    let mut ue = counts(labels, 0..k, m);
    let mut bs = counts(labels, k..n, m);
    let tol = 1e-12 * graph.total_weight().max(f64::MIN_POSITIVE);
    for _ in 0..4 * n * n {
        let mut best = -tol;
        let mut action: Option<(usize, usize, Option<usize>)> = None;
        for v in 0..n {
            let from = labels[v];
            let is_ue = v < k;
            let can_leave =
                if is_ue { ue[from] > constraints.ue_min[from] } else { bs[from] > constraints.bs_min[from] };
            if !can_leave {
                continue;
            }
            for to in 0..m {
                if to == from || (is_ue && ue[to] >= constraints.ue_max[to]) {
                    continue;
                }
                let d = aff.move_delta(v, from, to);
                if d < best {
                    best = d;
                    action = Some((v, to, None));
                }
            }
        }
        for range in [0..k, k..n] {
            for a in range.clone() {
                for b in a + 1..range.end {
                    let (ca, cb) = (labels[a], labels[b]);
                    if ca == cb {
                        continue;
                    }
                    let d = aff.move_delta(a, ca, cb) + aff.move_delta(b, cb, ca);
                    if d < best {
                        best = d;
                        action = Some((a, cb, Some(b)));
                    }
                }
            }
        }
        let Some((v, to, partner)) = action else { break };
        let from = labels[v];
        aff.apply_move(graph, v, from, to);
        labels[v] = to;
        if let Some(p) = partner {
            aff.apply_move(graph, p, to, from);
            labels[p] = from;
        } else if v < k {
            ue[from] -= 1;
            ue[to] += 1;
        } else {
            bs[from] -= 1;
            bs[to] += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::sumcut_labels;
    use rand::Rng;

    fn graph(k: usize, l: usize, seed: u64) -> BipartiteGraph {
        let mut rng = crate::rng::rng_from_seed(seed);
        BipartiteGraph::from_weights(DMatrix::from_fn(k, l, |_, _| rng.random_range(0.0..1.0))).unwrap()
    }

    fn one_hot(labels: &[usize], m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(labels.len(), m, |v, c| if labels[v] == c { 1.0 } else { 0.0 })
    }

    #[test]
    fn feasible_binary_input_is_unchanged() {
        let g = graph(4, 3, 1);
        let labels = [0, 0, 1, 1, 0, 1, 1];
        let x = one_hot(&labels, 2);
        let out = round_and_repair(&x, &g, &ColumnConstraints::capped(2, 2)).unwrap();
        assert_eq!(out.matrix(), &x);
    }

    #[test]
    fn over_cap_column_loses_one_ue() {
        let g = graph(4, 3, 2);
        let labels = [0, 0, 0, 1, 0, 1, 1];
        let mut x = one_hot(&labels, 2);
        // UE 1 is the least decided member of the over-full column.
        x[(1, 0)] = 0.6;
        x[(1, 1)] = 0.4;
        let out = round_and_repair(&x, &g, &ColumnConstraints::capped(2, 2)).unwrap();
        let moved: Vec<usize> = (0..7).filter(|&v| out.matrix()[(v, labels[v])] != 1.0).collect();
        assert_eq!(moved, vec![1]);
    }

    #[test]
    fn unmeetable_floors_fail() {
        let g = graph(2, 2, 3);
        let labels = [0, 1, 0, 0];
        let x = one_hot(&labels, 3);
        assert!(round_and_repair(&x, &g, &ColumnConstraints::capped(3, 2)).is_none());
    }

    #[test]
    fn repair_output_is_feasible() {
        let mut rng = crate::rng::rng_from_seed(4);
        for seed in 0..100 {
            let (k, l, m): (usize, usize, usize) = (rng.random_range(2..9), rng.random_range(3..7), 3);
            let k_max = k.div_ceil(m).max(1) + rng.random_range(0..2);
            let g = graph(k, l, seed);
            let cons = ColumnConstraints::capped(m, k_max);
            let x = DMatrix::from_fn(k + l, m, |_, _| rng.random_range(0.0..1.0));
            if let Some(labels) = round_and_repair_labels(&x, &g, &cons) {
                assert!(is_feasible(&labels, k, &cons));
                let mut improved = labels.clone();
                improve(&g, &cons, &mut improved);
                assert!(is_feasible(&improved, k, &cons));
                assert!(sumcut_labels(&g, &improved) <= sumcut_labels(&g, &labels) + 1e-12);
            }
        }
    }
}
