//! Exhaustive search over decompositions with exactly `m` subnetworks.
//!
//! BSs are enumerated as restricted growth strings with exactly `m` blocks,
//! which removes the label symmetry; every UE is then tried in every block
//! subject to the cap. Each BS keeps the power it receives from UEs in its
//! own block, which gives both objectives in O(L) per leaf.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{ChannelModel, PathGainMatrix};
use crate::partition::Decomposition;

/// Stirling number of the second kind, `S(n, m)`.
pub fn stirling2(n: usize, m: usize) -> u128 {
    let mut row = vec![0u128; m + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=m.min(i)).rev() {
            row[j] = row[j].saturating_mul(j as u128).saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[m]
}

/// Calls `visit` with every restricted growth string of length `n` that
/// uses exactly `m` labels, in lexicographic order.
pub fn for_each_rgs(n: usize, m: usize, mut visit: impl FnMut(&[usize])) {
    if m > n || (m == 0 && n > 0) {
        return;
    }
    let mut labels = vec![0usize; n];
    rgs_step(&mut labels, 0, 0, m, &mut visit);
}

fn rgs_step(labels: &mut [usize], pos: usize, used: usize, m: usize, visit: &mut impl FnMut(&[usize])) {
    let n = labels.len();
    if pos == n {
        if used == m {
            visit(labels);
        }
        return;
    }
    // Not enough positions left to open the missing labels.
    if m - used > n - pos {
        return;
    }
    let top = (used + 1).min(m);
    for c in 0..top {
        labels[pos] = c;
        rgs_step(labels, pos + 1, used.max(c + 1), m, visit);
    }
}

/// All restricted growth strings of length `n` with exactly `m` labels.
pub fn restricted_growth_strings(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_rgs(n, m, |s| out.push(s.to_vec()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationBudget {
    pub max_assignments: u128,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget { max_assignments: 100_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Minimize the sum of cuts.
    Sumcut,
    /// Maximize the approximate sum capacity.
    ApproxCapacity,
}

#[derive(Debug, Clone)]
pub struct BruteForce {
    pub decomposition: Decomposition,
    /// Objective value of the optimum (sumcut or capacity).
    pub value: f64,
    /// Number of complete decompositions evaluated.
    pub evaluated: u64,
}

/// Number of labeled assignments the search may visit.
pub fn enumeration_size(k: usize, l: usize, m: usize) -> u128 {
    stirling2(l, m).saturating_mul((m as u128).saturating_pow(k as u32))
}

/// Global optimum over decompositions with exactly `m` subnetworks, each
/// holding at most `k_max` UEs and at least one BS.
pub fn brute_force(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    k_max: usize,
    m: usize,
    objective: Objective,
    budget: EnumerationBudget,
) -> Result<BruteForce> {
    let (k, l) = (gains.k(), gains.l());
    if m == 0 || k_max == 0 {
        return Err(Error::invalid("m and k_max must be positive"));
    }
    if m > l {
        return Err(Error::Infeasible(format!("{l} BSs cannot form {m} subnetworks")));
    }
    if k > m * k_max {
        return Err(Error::Infeasible(format!("{m} subnetworks of at most {k_max} UEs cannot hold {k} UEs")));
    }
    let required = enumeration_size(k, l, m);
    if required > budget.max_assignments {
        return Err(Error::BudgetExceeded { required, budget: budget.max_assignments });
    }
    let w = gains.power_gains();
    let bs_partitions = restricted_growth_strings(l, m);
    let best = bs_partitions
        .par_iter()
        .enumerate()
        .map(|(idx, bs_labels)| {
            let mut search = UeSearch {
                w: &w,
                channel,
                objective,
                k_max,
                bs_labels,
                bs_in: vec![0.0; l],
                bs_total: (0..l).map(|b| w.column(b).sum()).collect(),
                ue_labels: vec![0; k],
                counts: vec![0; m],
                best: None,
                evaluated: 0,
            };
            search.step(0);
            (idx, search.best, search.evaluated)
        })
        .collect::<Vec<_>>();
    // Deterministic merge: best value, ties to the earliest BS partition.
    let evaluated = best.iter().map(|b| b.2).sum();
    let mut winner: Option<(f64, usize, Vec<usize>)> = None;
    for (idx, found, _) in best {
        if let Some((score, ue_labels)) = found {
            if winner.as_ref().is_none_or(|w| score < w.0) {
                winner = Some((score, idx, ue_labels));
            }
        }
    }
    let (score, idx, ue_labels) =
        winner.ok_or_else(|| Error::Infeasible("no decomposition meets the constraints".into()))?;
    let mut labels = ue_labels;
    labels.extend_from_slice(&bs_partitions[idx]);
    let value = match objective {
        Objective::Sumcut => score,
        Objective::ApproxCapacity => -score,
    };
    Ok(BruteForce { decomposition: Decomposition::from_labels(k, l, &labels)?, value, evaluated })
}

struct UeSearch<'a> {
    w: &'a nalgebra::DMatrix<f64>,
    channel: &'a ChannelModel,
    objective: Objective,
    k_max: usize,
    bs_labels: &'a [usize],
    /// Power each BS receives from UEs of its own block.
    bs_in: Vec<f64>,
    bs_total: Vec<f64>,
    ue_labels: Vec<usize>,
    counts: Vec<usize>,
    /// Minimized score (capacity is negated) and UE labels.
    best: Option<(f64, Vec<usize>)>,
    evaluated: u64,
}

impl UeSearch<'_> {
    fn step(&mut self, u: usize) {
        let k = self.ue_labels.len();
        if u == k {
            self.evaluated += 1;
            let score = self.score();
            if self.best.as_ref().is_none_or(|b| score < b.0) {
                self.best = Some((score, self.ue_labels.clone()));
            }
            return;
        }
        for c in 0..self.counts.len() {
            if self.counts[c] == self.k_max {
                continue;
            }
            self.counts[c] += 1;
            self.ue_labels[u] = c;
            for (b, &lb) in self.bs_labels.iter().enumerate() {
                if lb == c {
                    self.bs_in[b] += self.w[(u, b)];
                }
            }
            self.step(u + 1);
            for (b, &lb) in self.bs_labels.iter().enumerate() {
                if lb == c {
                    self.bs_in[b] -= self.w[(u, b)];
                }
            }
            self.counts[c] -= 1;
        }
    }

    fn score(&self) -> f64 {
        match self.objective {
            Objective::Sumcut => {
                let outside: f64 = (0..self.bs_in.len()).map(|b| self.bs_total[b] - self.bs_in[b]).sum();
                2.0 * outside
            }
            Objective::ApproxCapacity => {
                let (p, n0) = (self.channel.power_p, self.channel.noise_n0);
                let cap: f64 = (0..self.bs_in.len())
                    .map(|b| {
                        let lambda = self.bs_in[b] / (n0 + p * (self.bs_total[b] - self.bs_in[b]));
                        (1.0 + p * lambda).log2()
                    })
                    .sum();
                -cap
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::{sum_capacity_approx, sumcut};
    use crate::netmodel::{BipartiteGraph, NetworkLayout};
    use nalgebra::DMatrix;

    fn stirling_table(n: usize) -> Vec<Vec<u128>> {
        let mut s = vec![vec![0u128; n + 1]; n + 1];
        s[0][0] = 1;
        for i in 1..=n {
            for j in 1..=i {
                s[i][j] = j as u128 * s[i - 1][j] + s[i - 1][j - 1];
            }
        }
        s
    }

    #[test]
    fn rgs_counts_match_stirling() {
        let table = stirling_table(10);
        for n in 0..=10 {
            for m in 0..=n {
                let mut count = 0u128;
                let mut prev: Option<Vec<usize>> = None;
                for_each_rgs(n, m, |s| {
                    count += 1;
                    if let Some(p) = &prev {
                        assert!(p.as_slice() < s);
                    }
                    prev = Some(s.to_vec());
                });
                assert_eq!(count, table[n][m], "S({n},{m})");
                assert_eq!(stirling2(n, m), table[n][m]);
            }
        }
    }

    fn channel() -> ChannelModel {
        ChannelModel::from_snr_db(4.0, 10.0, ChannelModel::DEFAULT_D_MIN).unwrap()
    }

    #[test]
    fn single_pair() {
        let g = PathGainMatrix::from_matrix(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let r = brute_force(&g, &channel(), 1, 1, Objective::Sumcut, EnumerationBudget::default()).unwrap();
        assert_eq!(r.decomposition.assignment(), &[0, 0]);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn disconnected_pairs() {
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 1e-9, 1e-9, 1.0]);
        let g = PathGainMatrix::from_matrix(q).unwrap();
        let r = brute_force(&g, &channel(), 1, 2, Objective::Sumcut, EnumerationBudget::default()).unwrap();
        assert_eq!(r.decomposition.assignment(), &[0, 1, 0, 1]);
        assert!(r.value < 1e-16);
    }

    #[test]
    fn values_match_direct_evaluation() {
        for seed in 0..5 {
            let layout = NetworkLayout::generate(seed, 5, 4, 1.0).unwrap();
            let ch = channel();
            let g = PathGainMatrix::compute(&layout, &ch);
            let graph = BipartiteGraph::build(&g);
            let budget = EnumerationBudget::default();
            let cut = brute_force(&g, &ch, 3, 2, Objective::Sumcut, budget).unwrap();
            assert!((sumcut(&graph, &cut.decomposition).unwrap() - cut.value).abs() <= 1e-9 * cut.value);
            let cap = brute_force(&g, &ch, 3, 2, Objective::ApproxCapacity, budget).unwrap();
            let direct = sum_capacity_approx(&g, &ch, &cap.decomposition).unwrap();
            assert!((direct - cap.value).abs() <= 1e-9 * direct);
            assert!(cap.decomposition.validate(3).is_empty());
            assert_eq!(cap.evaluated as u128, {
                // UE maps with at most 3 per block, times BS partitions.
                let maps =
                    (0..32u32).filter(|c| (c.count_ones() as usize) <= 3 && 5 - c.count_ones() as usize <= 3).count();
                maps as u128 * stirling2(4, 2)
            });
        }
    }

    #[test]
    fn budget_and_guards() {
        let layout = NetworkLayout::generate(1, 6, 5, 1.0).unwrap();
        let g = PathGainMatrix::compute(&layout, &channel());
        let tiny = EnumerationBudget { max_assignments: 10 };
        match brute_force(&g, &channel(), 3, 2, Objective::Sumcut, tiny) {
            Err(Error::BudgetExceeded { required, .. }) => assert_eq!(required, 15 * 64),
            other => panic!("unexpected {other:?}"),
        }
        let b = EnumerationBudget::default();
        assert!(matches!(brute_force(&g, &channel(), 3, 6, Objective::Sumcut, b), Err(Error::Infeasible(_))));
        assert!(matches!(brute_force(&g, &channel(), 2, 2, Objective::Sumcut, b), Err(Error::Infeasible(_))));
    }
}
