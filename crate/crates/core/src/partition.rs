//! Decompositions of the vertex set into subnetworks.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest subnetwork count that can respect the per-subnetwork UE cap.
///
/// The best achievable sum capacity does not increase with the number of
/// subnetworks, so the cap alone fixes the count at `⌈k / k_max⌉`.
pub fn optimal_m(k: usize, k_max: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("UE count must be at least 1"));
    }
    if k_max == 0 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    Ok(k.div_ceil(k_max))
}

/// Assignment of every UE and BS to exactly one subnetwork.
///
/// Labels are canonical: subnetworks are numbered `0..m` by the first
/// vertex (UEs first, then BSs) that belongs to them.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Decomposition {
    k: usize,
    l: usize,
    m: usize,
    assignment: Vec<usize>,
}

/// Relabels `labels` by first occurrence; returns the new labels and count.
pub fn canonical_labels(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let out = labels
        .iter()
        .map(|&c| {
            let next = map.len();
            *map.entry(c).or_insert(next)
        })
        .collect();
    (out, map.len())
}

impl Decomposition {
    /// `labels[i]` is an arbitrary subnetwork label for vertex `i`.
    pub fn from_labels(k: usize, l: usize, labels: &[usize]) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::invalid("decomposition needs at least one UE and one BS"));
        }
        if labels.len() != k + l {
            return Err(Error::invalid(format!("assignment has {} entries, expected {}", labels.len(), k + l)));
        }
        let (assignment, m) = canonical_labels(labels);
        Ok(Self { k, l, m, assignment })
    }

    /// Builds from explicit UE and BS groups; `groups[m] = (ues, bss)`.
    pub fn from_groups(k: usize, l: usize, groups: &[(Vec<usize>, Vec<usize>)]) -> Result<Self> {
        let mut labels = vec![usize::MAX; k + l];
        for (m, (ues, bss)) in groups.iter().enumerate() {
            for &u in ues {
                Self::place(&mut labels, u, k, m)?;
            }
            for &b in bss {
                Self::place(&mut labels, k + b, k + l, m)?;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::invalid("some vertex is not covered by any group"));
        }
        Self::from_labels(k, l, &labels)
    }

    fn place(labels: &mut [usize], v: usize, bound: usize, m: usize) -> Result<()> {
        if v >= bound {
            return Err(Error::invalid(format!("vertex index {v} out of range")));
        }
        if labels[v] != usize::MAX {
            return Err(Error::invalid(format!("vertex {v} assigned twice")));
        }
        labels[v] = m;
        Ok(())
    }

    pub fn whole(k: usize, l: usize) -> Self {
        Self { k, l, m: 1, assignment: vec![0; k + l] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn ue_label(&self, ue: usize) -> usize {
        self.assignment[ue]
    }

    pub fn bs_label(&self, bs: usize) -> usize {
        self.assignment[self.k + bs]
    }

    pub fn ues(&self, m: usize) -> Vec<usize> {
        (0..self.k).filter(|&u| self.assignment[u] == m).collect()
    }

    pub fn bss(&self, m: usize) -> Vec<usize> {
        (0..self.l).filter(|&b| self.assignment[self.k + b] == m).collect()
    }

    pub fn ue_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.m];
        self.assignment[..self.k].iter().for_each(|&m| c[m] += 1);
        c
    }

    pub fn bs_counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.m];
        self.assignment[self.k..].iter().for_each(|&m| c[m] += 1);
        c
    }

    pub fn check_subnetwork(&self, m: usize) -> Result<()> {
        if m >= self.m {
            return Err(Error::InvalidDecomposition(format!("subnetwork {m} out of range (m = {})", self.m)));
        }
        if !self.assignment[self.k..].contains(&m) {
            return Err(Error::InvalidDecomposition(format!("subnetwork {m} has no BS")));
        }
        Ok(())
    }

    pub fn to_matrix(&self) -> DecisionMatrix {
        let x = DMatrix::from_fn(self.k + self.l, self.m, |i, m| if self.assignment[i] == m { 1.0 } else { 0.0 });
        DecisionMatrix { k: self.k, x }
    }

    pub fn from_matrix(x: &DecisionMatrix) -> Result<Self> {
        let labels: Vec<usize> =
            (0..x.x.nrows()).map(|i| x.x.row(i).iter().position(|v| *v == 1.0).expect("validated row")).collect();
        Self::from_labels(x.k, x.x.nrows() - x.k, &labels)
    }

    /// Every constraint violated against the UE cap `k_max`.
    pub fn validate(&self, k_max: usize) -> Vec<Violation> {
        let ue = self.ue_counts();
        let bs = self.bs_counts();
        let mut out = Vec::new();
        for m in 0..self.m {
            if ue[m] > k_max {
                out.push(Violation::UeCapExceeded { subnetwork: m, ues: ue[m], k_max });
            }
            if bs[m] == 0 {
                out.push(Violation::NoBaseStation { subnetwork: m });
            }
        }
        out
    }

    /// Returns a copy with subnetwork labels permuted by `perm` (not re-canonicalized).
    pub fn relabeled(&self, perm: &[usize]) -> Vec<usize> {
        self.assignment.iter().map(|&m| perm[m]).collect()
    }

    /// Human-readable membership listing, 1-based like the usual notation.
    pub fn listing(&self) -> String {
        let mut s = String::new();
        for m in 0..self.m {
            let ues: Vec<String> = self.ues(m).iter().map(|u| format!("u{}", u + 1)).collect();
            let bss: Vec<String> = self.bss(m).iter().map(|b| format!("b{}", b + 1)).collect();
            s.push_str(&format!("C{}: U={{{}}} B={{{}}}\n", m + 1, ues.join(","), bss.join(",")));
        }
        s
    }
}

pub fn validate(decomposition: &Decomposition, k_max: usize) -> Vec<Violation> {
    decomposition.validate(k_max)
}

/// A violated feasibility constraint, reported as data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Violation {
    UeCapExceeded { subnetwork: usize, ues: usize, k_max: usize },
    NoBaseStation { subnetwork: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UeCapExceeded { subnetwork, ues, k_max } => {
                write!(f, "subnetwork {} holds {ues} UEs > k_max = {k_max}", subnetwork + 1)
            }
            Violation::NoBaseStation { subnetwork } => {
                write!(f, "subnetwork {} has no BS", subnetwork + 1)
            }
        }
    }
}

/// Wire form: `{ "k", "l", "m", "assignment" }` with 1-based subnetwork indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct DecompositionJson {
    k: usize,
    l: usize,
    m: usize,
    assignment: Vec<usize>,
}

impl Serialize for Decomposition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecompositionJson {
            k: self.k,
            l: self.l,
            m: self.m,
            assignment: self.assignment.iter().map(|m| m + 1).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decomposition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let raw = DecompositionJson::deserialize(d)?;
        if raw.assignment.iter().any(|&m| m == 0 || m > raw.m) {
            return Err(D::Error::custom("assignment entries must lie in 1..=m"));
        }
        let labels: Vec<usize> = raw.assignment.iter().map(|m| m - 1).collect();
        let dec = Decomposition::from_labels(raw.k, raw.l, &labels).map_err(D::Error::custom)?;
        if dec.m != raw.m {
            return Err(D::Error::custom("some subnetwork index in 1..=m is empty"));
        }
        Ok(dec)
    }
}

/// Binary `(K+L) × M` indicator matrix, one 1 per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionMatrix {
    k: usize,
    x: DMatrix<f64>,
}

impl DecisionMatrix {
    pub fn new(k: usize, x: DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if k == 0 || k >= n || x.ncols() == 0 {
            return Err(Error::invalid("decision matrix needs UE rows, BS rows and a column"));
        }
        for i in 0..n {
            let row = x.row(i);
            if row.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(Error::invalid(format!("row {i} is not binary")));
            }
            if row.sum() != 1.0 {
                return Err(Error::invalid(format!("row {i} sums to {}, expected 1", row.sum())));
            }
        }
        // Total mass equals the vertex count whenever every row sums to one.
        debug_assert_eq!(x.sum(), n as f64);
        for m in 0..x.ncols() {
            if x.column(m).sum() == 0.0 {
                return Err(Error::invalid(format!("column {m} is empty")));
            }
        }
        Ok(Self { k, x })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.x
    }

    /// UEs per column.
    pub fn ue_counts(&self) -> Vec<f64> {
        (0..self.x.ncols()).map(|m| self.x.column(m).rows(0, self.k).sum()).collect()
    }

    /// BSs per column.
    pub fn bs_counts(&self) -> Vec<f64> {
        let l = self.x.nrows() - self.k;
        (0..self.x.ncols()).map(|m| self.x.column(m).rows(self.k, l).sum()).collect()
    }
}

pub fn to_matrix(d: &Decomposition) -> DecisionMatrix {
    d.to_matrix()
}

pub fn from_matrix(x: &DecisionMatrix) -> Result<Decomposition> {
    Decomposition::from_matrix(x)
}
