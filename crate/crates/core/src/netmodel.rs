//! Network geometry, path gains and the weighted bipartite graph.
//!
//! Vertices are indexed UEs first: vertex `i < K` is UE `i`, vertex `K + l`
//! is BS `l`. Every matrix over vertices in this crate uses that order.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

pub type Point = [f64; 2];

/// UE and BS positions inside the square `[0, area_side]²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkLayout {
    pub seed: u64,
    pub k: usize,
    pub l: usize,
    pub area_side: f64,
    pub ue: Vec<Point>,
    pub bs: Vec<Point>,
}

impl NetworkLayout {
    /// Samples `k` UEs and `l` BSs i.i.d. uniform over the square.
    ///
    /// UEs are drawn first, then BSs, from the layout stream of `seed`.
    pub fn generate(seed: u64, k: usize, l: usize, area_side: f64) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::invalid("layout needs at least one UE and one BS"));
        }
        if !(area_side > 0.0 && area_side.is_finite()) {
            return Err(Error::invalid(format!("area side must be positive, got {area_side}")));
        }
        let mut rng = stream_rng(seed, Stream::Layout, &[]);
        let mut draw = |n: usize| -> Vec<Point> {
            (0..n).map(|_| [rng.random::<f64>() * area_side, rng.random::<f64>() * area_side]).collect()
        };
        let ue = draw(k);
        let bs = draw(l);
        Ok(Self { seed, k, l, area_side, ue, bs })
    }

    /// Builds a layout from explicit coordinates (used by fixtures and JSON input).
    pub fn from_points(ue: Vec<Point>, bs: Vec<Point>, area_side: f64) -> Result<Self> {
        let layout = Self { seed: 0, k: ue.len(), l: bs.len(), area_side, ue, bs };
        layout.check()?;
        Ok(layout)
    }

    pub fn check(&self) -> Result<()> {
        if self.k == 0 || self.l == 0 || self.ue.len() != self.k || self.bs.len() != self.l {
            return Err(Error::invalid("layout counts do not match coordinate lists"));
        }
        if self.area_side.is_nan() || self.area_side <= 0.0 {
            return Err(Error::invalid("area side must be positive"));
        }
        let inside = |p: &Point| p.iter().all(|c| (0.0..=self.area_side).contains(c));
        if !self.ue.iter().chain(&self.bs).all(inside) {
            return Err(Error::invalid("coordinate outside the deployment square"));
        }
        Ok(())
    }

    pub fn distance(&self, ue: usize, bs: usize) -> f64 {
        let (a, b) = (self.ue[ue], self.bs[bs]);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }
}

/// Large-scale channel parameters. Distances share the layout's units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub alpha: f64,
    pub power_p: f64,
    pub noise_n0: f64,
    pub d_min: f64,
}

impl ChannelModel {
    pub const DEFAULT_D_MIN: f64 = 1e-3;

    pub fn new(alpha: f64, power_p: f64, noise_n0: f64, d_min: f64) -> Result<Self> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(alpha) && ok(power_p) && ok(noise_n0) && ok(d_min)) {
            return Err(Error::invalid("channel parameters must be positive and finite"));
        }
        Ok(Self { alpha, power_p, noise_n0, d_min })
    }

    /// `N0 = 1` and `P = 10^(dB/10)`; only the ratio enters any capacity formula.
    pub fn from_snr_db(alpha: f64, p_over_n0_db: f64, d_min: f64) -> Result<Self> {
        Self::new(alpha, 10f64.powf(p_over_n0_db / 10.0), 1.0, d_min)
    }

    pub fn snr(&self) -> f64 {
        self.power_p / self.noise_n0
    }
}

/// `q[k][l] = max(d_lk, d_min)^(-alpha/2)`, stored `K × L`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGainMatrix {
    q: DMatrix<f64>,
}

impl PathGainMatrix {
    pub fn compute(layout: &NetworkLayout, channel: &ChannelModel) -> Self {
        let q = DMatrix::from_fn(layout.k, layout.l, |k, l| {
            layout.distance(k, l).max(channel.d_min).powf(-channel.alpha / 2.0)
        });
        Self { q }
    }

    pub fn from_matrix(q: DMatrix<f64>) -> Result<Self> {
        if q.nrows() == 0 || q.ncols() == 0 {
            return Err(Error::invalid("gain matrix must be non-empty"));
        }
        if !q.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(Error::invalid("gains must be strictly positive and finite"));
        }
        Ok(Self { q })
    }

    pub fn k(&self) -> usize {
        self.q.nrows()
    }

    pub fn l(&self) -> usize {
        self.q.ncols()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// Element-wise square of the gains, i.e. the edge weights.
    pub fn power_gains(&self) -> DMatrix<f64> {
        self.q.map(|v| v * v)
    }
}

pub fn path_gains(layout: &NetworkLayout, channel: &ChannelModel) -> PathGainMatrix {
    PathGainMatrix::compute(layout, channel)
}

/// Weighted bipartite UE–BS graph with its adjacency, degree and Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    w: DMatrix<f64>,
    adjacency: DMatrix<f64>,
    degree: DVector<f64>,
    laplacian: DMatrix<f64>,
}

impl BipartiteGraph {
    /// Edge weights are the squared path gains.
    pub fn build(gains: &PathGainMatrix) -> Self {
        Self::from_weights(gains.power_gains()).expect("path gains are positive")
    }

    /// Builds the graph from a `K × L` non-negative weight matrix.
    pub fn from_weights(w: DMatrix<f64>) -> Result<Self> {
        let (k, l) = w.shape();
        if k == 0 || l == 0 {
            return Err(Error::invalid("graph needs at least one UE and one BS"));
        }
        if !w.iter().all(|v| *v >= 0.0 && v.is_finite()) {
            return Err(Error::invalid("edge weights must be non-negative and finite"));
        }
        let n = k + l;
        let mut adjacency = DMatrix::zeros(n, n);
        adjacency.view_mut((0, k), (k, l)).copy_from(&w);
        adjacency.view_mut((k, 0), (l, k)).copy_from(&w.transpose());
        let degree = DVector::from_fn(n, |i, _| adjacency.row(i).sum());
        let laplacian = DMatrix::from_diagonal(&degree) - &adjacency;
        Ok(Self { w, adjacency, degree, laplacian })
    }

    /// Subgraph induced by the given UE and BS indices (order preserved).
    pub fn induced(&self, ues: &[usize], bss: &[usize]) -> Result<Self> {
        let w = DMatrix::from_fn(ues.len(), bss.len(), |a, b| self.w[(ues[a], bss[b])]);
        Self::from_weights(w)
    }

    pub fn k(&self) -> usize {
        self.w.nrows()
    }

    pub fn l(&self) -> usize {
        self.w.ncols()
    }

    pub fn n(&self) -> usize {
        self.k() + self.l()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn degree(&self) -> &DVector<f64> {
        &self.degree
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn is_ue(&self, vertex: usize) -> bool {
        vertex < self.k()
    }

    /// Weight of the edge between two vertices (zero within a class).
    pub fn edge(&self, i: usize, j: usize) -> f64 {
        let k = self.k();
        match (i < k, j < k) {
            (true, false) => self.w[(i, j - k)],
            (false, true) => self.w[(j, i - k)],
            _ => 0.0,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.w.sum()
    }
}

pub fn build_graph(gains: &PathGainMatrix) -> BipartiteGraph {
    BipartiteGraph::build(gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn channel(alpha: f64) -> ChannelModel {
        ChannelModel::new(alpha, 10.0, 1.0, 1e-3).unwrap()
    }

    #[test]
    fn layout_single_pair_in_unit_square() {
        let layout = NetworkLayout::generate(7, 1, 1, 1.0).unwrap();
        assert_eq!(layout.ue.len(), 1);
        assert_eq!(layout.bs.len(), 1);
        layout.check().unwrap();
    }

    #[test]
    fn layout_is_deterministic_in_seed() {
        let a = NetworkLayout::generate(7, 30, 30, 1.0).unwrap();
        let b = NetworkLayout::generate(7, 30, 30, 1.0).unwrap();
        let c = NetworkLayout::generate(8, 30, 30, 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.ue, c.ue);
        assert_ne!(a.bs, c.bs);
    }

    #[test]
    fn layout_rejects_bad_arguments() {
        assert!(NetworkLayout::generate(1, 0, 3, 1.0).is_err());
        assert!(NetworkLayout::generate(1, 3, 0, 1.0).is_err());
        assert!(NetworkLayout::generate(1, 3, 3, 0.0).is_err());
        assert!(NetworkLayout::generate(1, 3, 3, -2.0).is_err());
    }

    #[test]
    fn gains_follow_inverse_square_for_alpha_four() {
        let layout =
            NetworkLayout::from_points(vec![[0.0, 0.0]], vec![[1.0, 0.0], [2.0, 0.0], [0.0, 0.0]], 2.0).unwrap();
        let q = PathGainMatrix::compute(&layout, &channel(4.0));
        assert_eq!(q.q()[(0, 0)], 1.0);
        assert_eq!(q.q()[(0, 1)], 0.25);
        assert!((q.q()[(0, 2)] - 1e6).abs() < 1e-6);
    }

    #[test]
    fn two_vertex_graph() {
        let g = BipartiteGraph::from_weights(DMatrix::from_element(1, 1, 1.0)).unwrap();
        assert_eq!(g.laplacian(), &DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn near_block_diagonal_graph() {
        let tiny = 1e-12;
        let q = PathGainMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[1.0, tiny, tiny, 1.0])).unwrap();
        let g = BipartiteGraph::build(&q);
        let lap = g.laplacian();
        // u1-b1 and u2-b2 blocks carry unit weight, cross terms ~1e-24.
        assert!((lap[(0, 2)] + 1.0).abs() < 1e-12);
        assert!((lap[(1, 3)] + 1.0).abs() < 1e-12);
        assert!(lap[(0, 3)].abs() < 1e-20);
        assert!(lap[(1, 2)].abs() < 1e-20);
    }

    #[test]
    fn graph_structure_invariants() {
        let mut rng = crate::rng::rng_from_seed(3);
        for trial in 0..100 {
            let k = rng.random_range(1..8);
            let l = rng.random_range(1..8);
            let layout = NetworkLayout::generate(trial, k, l, 1.0).unwrap();
            let g = BipartiteGraph::build(&PathGainMatrix::compute(&layout, &channel(4.0)));
            let a = g.adjacency();
            assert_eq!(a, &a.transpose());
            for i in 0..g.n() {
                for j in 0..g.n() {
                    if g.is_ue(i) == g.is_ue(j) {
                        assert_eq!(a[(i, j)], 0.0);
                    }
                }
                let row: f64 = g.laplacian().row(i).sum();
                assert!(row.abs() <= 1e-12 * g.degree()[i].max(1.0), "row sum {row}");
            }
            for _ in 0..100 {
                let x = DVector::from_fn(g.n(), |_, _| rng.random_range(-1.0..1.0));
                let quad = (x.transpose() * g.laplacian() * &x)[(0, 0)];
                let scale = g.degree().sum().max(1.0);
                assert!(quad >= -1e-12 * scale, "x^T L x = {quad}");
            }
        }
    }

    #[test]
    fn gain_decreases_with_distance() {
        let ch = channel(3.0);
        let mut prev = f64::INFINITY;
        for step in 1..50 {
            let d = 0.01 * step as f64;
            let layout = NetworkLayout::from_points(vec![[0.0, 0.0]], vec![[d, 0.0]], 1.0).unwrap();
            let q = PathGainMatrix::compute(&layout, &ch).q()[(0, 0)];
            assert!(q < prev);
            prev = q;
        }
    }

    #[test]
    fn layout_json_shape() {
        let layout = NetworkLayout::generate(1, 2, 1, 1.0).unwrap();
        let v = serde_json::to_value(&layout).unwrap();
        for key in ["seed", "k", "l", "area_side", "ue", "bs"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["ue"].as_array().unwrap().len(), 2);
        let back: NetworkLayout = serde_json::from_value(v).unwrap();
        assert_eq!(back, layout);
    }
}
