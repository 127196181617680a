//! Assignment of items to a few columns with per-column count bounds.
//!
//! Solved as a min-cost flow by successive shortest paths, adding one item at
//! a time. Residual paths only ever visit column nodes (an item is reached
//! by moving it out of its column), so each augmentation is a Bellman-Ford
//! run over `m` nodes. Costs are lexicographic `(penalty, cost)` pairs: a
//! unit that lands in a column still below its lower bound earns a `-1`
//! penalty, so the flow first meets as many lower bounds as possible and
//! then minimizes cost exactly, without a big-M constant.

use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Lex(i64, f64);

impl Lex {
    const INF: Lex = Lex(i64::MAX / 4, f64::INFINITY);

    fn add(self, o: Lex) -> Lex {
        Lex(self.0 + o.0, self.1 + o.1)
    }

    fn less(self, o: Lex) -> bool {
        match self.0.cmp(&o.0) {
            Ordering::Less => true,
            Ordering::Greater => false,
            // Ignore float noise so zero-cost cycles never look negative.
            Ordering::Equal => self.1 < o.1 - 1e-12 * (1.0 + o.1.abs()),
        }
    }
}

/// Column-count bounds for [`assign`].
#[derive(Debug, Clone)]
pub(crate) struct ColumnBounds {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

/// Minimum-cost assignment of `n` items to `m` columns.
///
/// `cost[i * m + c]` is the cost of item `i` in column `c`; only columns
/// set in `allowed[i]` may be used. Returns the total cost and the column
/// of every item, or `None` when no assignment meets the bounds.
pub(crate) fn assign(
    n: usize,
    m: usize,
    cost: &[f64],
    allowed: &[u64],
    bounds: &ColumnBounds,
) -> Option<(f64, Vec<usize>)> {
    let lo_total: usize = bounds.lo.iter().sum();
    let hi_total: usize = bounds.hi.iter().map(|&h| h.min(n)).sum();
    if lo_total > n || hi_total < n {
        return None;
    }
    let mut col = vec![usize::MAX; n];
    let mut count = vec![0usize; m];
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut delta = vec![Lex::INF; m * m];
    let mut mover = vec![usize::MAX; m * m];
    let mut dist = vec![Lex::INF; m];
    let mut pred = vec![usize::MAX; m];

    for item in 0..n {
        // Cheapest single-item move between every pair of columns.
        delta.fill(Lex::INF);
        for a in 0..m {
            for &j in &members[a] {
                let base = cost[j * m + a];
                let mut mask = allowed[j] & !(1u64 << a);
                while mask != 0 {
                    let b = mask.trailing_zeros() as usize;
                    mask &= mask - 1;
                    let d = Lex(0, cost[j * m + b] - base);
                    if d.less(delta[a * m + b]) {
                        delta[a * m + b] = d;
                        mover[a * m + b] = j;
                    }
                }
            }
        }
        dist.fill(Lex::INF);
        pred.fill(usize::MAX);
        let mut mask = allowed[item];
        while mask != 0 {
            let c = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            dist[c] = Lex(0, cost[item * m + c]);
        }
        for _ in 0..m {
            let mut changed = false;
            for a in 0..m {
                if dist[a].0 >= Lex::INF.0 {
                    continue;
                }
                for b in 0..m {
                    if mover[a * m + b] == usize::MAX {
                        continue;
                    }
                    let cand = dist[a].add(delta[a * m + b]);
                    if cand.less(dist[b]) {
                        dist[b] = cand;
                        pred[b] = a;
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        let mut best = Lex::INF;
        let mut end = usize::MAX;
        for c in 0..m {
            if dist[c].0 >= Lex::INF.0 || count[c] >= bounds.hi[c] {
                continue;
            }
            let sink = if count[c] < bounds.lo[c] { Lex(-1, 0.0) } else { Lex(0, 0.0) };
            let total = dist[c].add(sink);
            if total.less(best) {
                best = total;
                end = c;
            }
        }
        if end == usize::MAX {
            return None;
        }
        // Walk back along the path shifting one item per hop.
        let mut c = end;
        let mut guard = 0;
        while pred[c] != usize::MAX {
            let a = pred[c];
            let j = mover[a * m + c];
            members[a].retain(|&x| x != j);
            members[c].push(j);
            col[j] = c;
            c = a;
            guard += 1;
            if guard > m {
                // A cycle in the predecessor chain means the path is corrupt.
                return None;
            }
        }
        members[c].push(item);
        col[item] = c;
        count[end] += 1;
    }
    if (0..m).any(|c| count[c] < bounds.lo[c]) {
        return None;
    }
    let total = (0..n).map(|i| cost[i * m + col[i]]).sum();
    Some((total, col))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn brute(n: usize, m: usize, cost: &[f64], allowed: &[u64], b: &ColumnBounds) -> Option<f64> {
        let mut best: Option<f64> = None;
        let total = m.pow(n as u32);
        for code in 0..total {
            let mut x = code;
            let mut counts = vec![0; m];
            let mut c = 0.0;
            let mut ok = true;
            for i in 0..n {
                let col = x % m;
                x /= m;
                if allowed[i] & (1 << col) == 0 {
                    ok = false;
                    break;
                }
                counts[col] += 1;
                c += cost[i * m + col];
            }
            if ok && (0..m).all(|j| counts[j] >= b.lo[j] && counts[j] <= b.hi[j]) {
                best = Some(best.map_or(c, |v: f64| v.min(c)));
            }
        }
        best
    }

    #[test]
    fn matches_enumeration() {
        let mut rng = crate::rng::rng_from_seed(42);
        for _ in 0..400 {
            let n = rng.random_range(1..7);
            let m = rng.random_range(1..4);
            let cost: Vec<f64> = (0..n * m).map(|_| rng.random_range(-2.0..5.0)).collect();
            let full = (1u64 << m) - 1;
            let allowed: Vec<u64> = (0..n)
                .map(|_| {
                    let a = rng.random_range(0..=full);
                    if a == 0 {
                        full
                    } else {
                        a
                    }
                })
                .collect();
            let lo: Vec<usize> = (0..m).map(|_| rng.random_range(0..3)).collect();
            let hi: Vec<usize> = lo.iter().map(|&l| l + rng.random_range(0..4)).collect();
            let b = ColumnBounds { lo, hi };
            let expected = brute(n, m, &cost, &allowed, &b);
            let got = assign(n, m, &cost, &allowed, &b);
            match (expected, got) {
                (None, None) => {}
                (Some(e), Some((g, cols))) => {
                    assert!((e - g).abs() < 1e-9, "expected {e}, got {g}");
                    for (i, &c) in cols.iter().enumerate() {
                        assert!(allowed[i] & (1 << c) != 0);
                    }
                }
                (e, g) => panic!("feasibility mismatch: {e:?} vs {g:?}"),
            }
        }
    }

    #[test]
    fn lower_bounds_force_expensive_choices() {
        // Both items prefer column 0, but column 1 needs one of them.
        let cost = [0.0, 3.0, 0.0, 1.0];
        let b = ColumnBounds { lo: vec![0, 1], hi: vec![2, 2] };
        let (total, cols) = assign(2, 2, &cost, &[3, 3], &b).unwrap();
        assert_eq!(total, 1.0);
        assert_eq!(cols, vec![0, 1]);
    }
}
