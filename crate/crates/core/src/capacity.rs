//! Subnetwork and network capacity, and the cut objectives derived from them.
//!
//! Three capacity evaluations are provided:
//!
//! - a Monte-Carlo estimate of the ergodic log-det capacity with
//!   interference from other subnetworks treated as noise,
//! - the large-system diagonal approximation, one `log2(1 + P·λ_l)` term
//!   per BS,
//! - a Jensen lower bound on the diagonal approximation that depends on the
//!   decomposition only through the total inter-subnetwork interference.
//!
//! The interference total equals half the sum of subnetwork cuts when edge
//! weights are squared path gains, which is what ties the capacity bound to
//! the Laplacian objective minimized by the solvers.

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{BipartiteGraph, ChannelModel, PathGainMatrix};
use crate::partition::Decomposition;
use crate::rng::{stream_rng, Stream};

type C64 = Complex<f64>;

/// Default Monte-Carlo sample count.
pub const DEFAULT_MC_SAMPLES: usize = 2000;

/// Samples per shard. Shard seeds depend only on the shard index, so the
/// estimate does not depend on how shards are scheduled.
const SHARD: usize = 256;

fn check_dims(gains: &PathGainMatrix, d: &Decomposition) -> Result<()> {
    if gains.k() != d.k() || gains.l() != d.l() {
        return Err(Error::invalid(format!(
            "gains are {}×{} but decomposition covers {} UEs and {} BSs",
            gains.k(),
            gains.l(),
            d.k(),
            d.l()
        )));
    }
    Ok(())
}

/// In-subnetwork and out-of-subnetwork received power sums at one BS.
fn bs_power_split(gains: &PathGainMatrix, ue_in: &[bool], bs: usize) -> (f64, f64) {
    let q = gains.q();
    let mut inside = 0.0;
    let mut outside = 0.0;
    for (k, &member) in ue_in.iter().enumerate() {
        let p = q[(k, bs)] * q[(k, bs)];
        if member {
            inside += p;
        } else {
            outside += p;
        }
    }
    (inside, outside)
}

/// Diagonal-approximation capacity of an arbitrary UE/BS set.
///
/// UEs outside `ues` interfere. Returns 0 when `ues` is empty.
pub fn set_capacity_approx(gains: &PathGainMatrix, channel: &ChannelModel, ues: &[usize], bss: &[usize]) -> f64 {
    let mut ue_in = vec![false; gains.k()];
    ues.iter().for_each(|&u| ue_in[u] = true);
    bss.iter()
        .map(|&b| {
            let (inside, outside) = bs_power_split(gains, &ue_in, b);
            let lambda = inside / (channel.noise_n0 + channel.power_p * outside);
            (1.0 + channel.power_p * lambda).log2()
        })
        .sum()
}

/// Diagonal-approximation capacity of subnetwork `m`.
pub fn subnetwork_capacity_approx(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    d: &Decomposition,
    m: usize,
) -> Result<f64> {
    check_dims(gains, d)?;
    d.check_subnetwork(m)?;
    Ok(set_capacity_approx(gains, channel, &d.ues(m), &d.bss(m)))
}

fn check_all(gains: &PathGainMatrix, d: &Decomposition) -> Result<()> {
    check_dims(gains, d)?;
    (0..d.m()).try_for_each(|m| d.check_subnetwork(m))
}

pub fn sum_capacity_approx(gains: &PathGainMatrix, channel: &ChannelModel, d: &Decomposition) -> Result<f64> {
    check_all(gains, d)?;
    Ok((0..d.m()).map(|m| set_capacity_approx(gains, channel, &d.ues(m), &d.bss(m))).sum())
}

/// `a_l = N0 + P·Σ_k q_lk²`, the total received power plus noise at each BS.
pub fn bs_constants(gains: &PathGainMatrix, channel: &ChannelModel) -> Vec<f64> {
    (0..gains.l())
        .map(|l| {
            let rx: f64 = gains.q().column(l).iter().map(|q| q * q).sum();
            channel.noise_n0 + channel.power_p * rx
        })
        .collect()
}

/// Same value as [`sum_capacity_approx`], computed as `Σ log2 a_l` minus the
/// per-BS interference-plus-noise logs.
pub fn sum_capacity_approx_split(gains: &PathGainMatrix, channel: &ChannelModel, d: &Decomposition) -> Result<f64> {
    check_all(gains, d)?;
    let a = bs_constants(gains, channel);
    let mut total: f64 = a.iter().map(|v| v.log2()).sum();
    for l in 0..d.l() {
        let m = d.bs_label(l);
        let outside: f64 = (0..d.k()).filter(|&k| d.ue_label(k) != m).map(|k| gains.q()[(k, l)].powi(2)).sum();
        total -= (channel.noise_n0 + channel.power_p * outside).log2();
    }
    Ok(total)
}

/// `Σ_m Σ_{l∈B_m} Σ_{k∉U_m} q_lk²`: received inter-subnetwork power, summed over BSs.
pub fn interference_sum(gains: &PathGainMatrix, d: &Decomposition) -> Result<f64> {
    check_dims(gains, d)?;
    let q = gains.q();
    let mut total = 0.0;
    for l in 0..d.l() {
        for k in 0..d.k() {
            if d.ue_label(k) != d.bs_label(l) {
                total += q[(k, l)] * q[(k, l)];
            }
        }
    }
    Ok(total)
}

/// Jensen lower bound `Σ log2 a_l − L·log2(N0 + (P/L)·interference)`.
pub fn sum_capacity_lower_bound(gains: &PathGainMatrix, channel: &ChannelModel, d: &Decomposition) -> Result<f64> {
    check_all(gains, d)?;
    Ok(lower_bound_from_interference(gains, channel, interference_sum(gains, d)?))
}

/// The Jensen bound as a function of the interference total alone.
pub fn lower_bound_from_interference(gains: &PathGainMatrix, channel: &ChannelModel, interference: f64) -> f64 {
    let l = gains.l() as f64;
    let base: f64 = bs_constants(gains, channel).iter().map(|v| v.log2()).sum();
    base - l * (channel.noise_n0 + channel.power_p / l * interference).log2()
}

/// Cut of subnetwork `m`: BS-side weight to outside UEs plus UE-side weight to outside BSs.
pub fn cut_value(graph: &BipartiteGraph, d: &Decomposition, m: usize) -> Result<f64> {
    check_graph(graph, d)?;
    let w = graph.weights();
    let mut cut = 0.0;
    for l in 0..d.l() {
        for k in 0..d.k() {
            let (ue_in, bs_in) = (d.ue_label(k) == m, d.bs_label(l) == m);
            if ue_in != bs_in {
                cut += w[(k, l)];
            }
        }
    }
    Ok(cut)
}

fn check_graph(graph: &BipartiteGraph, d: &Decomposition) -> Result<()> {
    if graph.k() != d.k() || graph.l() != d.l() {
        return Err(Error::invalid("graph and decomposition sizes differ"));
    }
    Ok(())
}

/// Sum of all subnetwork cuts; every crossing edge counts twice.
pub fn sumcut(graph: &BipartiteGraph, d: &Decomposition) -> Result<f64> {
    check_graph(graph, d)?;
    Ok(sumcut_labels(graph, d.assignment()))
}

/// [`sumcut`] over raw vertex labels (any labeling, no validation).
pub fn sumcut_labels(graph: &BipartiteGraph, labels: &[usize]) -> f64 {
    let (k, l) = (graph.k(), graph.l());
    let w = graph.weights();
    let mut crossing = 0.0;
    for b in 0..l {
        let lb = labels[k + b];
        for u in 0..k {
            if labels[u] != lb {
                crossing += w[(u, b)];
            }
        }
    }
    2.0 * crossing
}

/// `Σ_m x_mᵀ L x_m` for a binary decision matrix with unit row sums.
pub fn quadratic_objective(graph: &BipartiteGraph, x: &DMatrix<f64>) -> Result<f64> {
    if x.nrows() != graph.n() {
        return Err(Error::invalid("decision matrix row count differs from vertex count"));
    }
    for i in 0..x.nrows() {
        let row = x.row(i);
        if row.iter().any(|v| *v != 0.0 && *v != 1.0) || row.sum() != 1.0 {
            return Err(Error::invalid(format!("row {i} is not a partition indicator")));
        }
    }
    Ok(laplacian_form(graph, x))
}

/// `tr(Xᵀ L X)` for any real `X`.
pub fn laplacian_form(graph: &BipartiteGraph, x: &DMatrix<f64>) -> f64 {
    let lx = graph.laplacian() * x;
    x.component_mul(&lx).sum()
}

/// Monte-Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub samples: usize,
}

/// Running mean and squared-deviation sum, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let delta = o.mean - self.mean;
        Moments { n, mean: self.mean + delta * o.n / n, m2: self.m2 + o.m2 + delta * delta * self.n * o.n / n }
    }
}

/// `ln det` of a Hermitian positive-definite matrix; Cholesky first, pivoted LU otherwise.
fn ln_det_hpd(a: DMatrix<C64>) -> f64 {
    match a.clone().cholesky() {
        Some(ch) => ch.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum(),
        None => a.lu().determinant().norm().ln(),
    }
}

/// One fading draw: `g[(k, l)] ~ CN(0, 1)`.
fn draw_fading<R: Rng>(rng: &mut R, k: usize, l: usize) -> DMatrix<C64> {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(k, l, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * scale, im * scale)
    })
}

/// Instantaneous log-det capacity of one subnetwork for a given fading draw.
fn instantaneous_capacity(
    q: &DMatrix<f64>,
    g: &DMatrix<C64>,
    channel: &ChannelModel,
    ue_in: &[bool],
    bss: &[usize],
) -> f64 {
    if !ue_in.iter().any(|&b| b) {
        return 0.0;
    }
    let b = bss.len();
    let k = q.nrows();
    // h[(row, k)] = q_lk g_lk for the subnetwork's BSs.
    let h = DMatrix::from_fn(b, k, |r, u| g[(u, bss[r])] * q[(u, bss[r])]);
    let mut interf = DMatrix::<C64>::identity(b, b) * C64::new(channel.noise_n0, 0.0);
    let mut total = interf.clone();
    let p = channel.power_p;
    for u in 0..k {
        let col = h.column(u);
        let outer = col * col.adjoint() * C64::new(p, 0.0);
        if !ue_in[u] {
            interf += &outer;
        }
        total += outer;
    }
    (ln_det_hpd(total) - ln_det_hpd(interf)) / std::f64::consts::LN_2
}

fn mc_over(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    d: &Decomposition,
    subnets: &[usize],
    n_samples: usize,
    seed: u64,
) -> McEstimate {
    let (k, l) = (d.k(), d.l());
    let members: Vec<(Vec<bool>, Vec<usize>)> =
        subnets.iter().map(|&m| ((0..k).map(|u| d.ue_label(u) == m).collect(), d.bss(m))).collect();
    let shards = n_samples.div_ceil(SHARD);
    let moments: Vec<Moments> = (0..shards)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream_rng(seed, Stream::Fading, &[s as u64]);
            let count = SHARD.min(n_samples - s * SHARD);
            let mut acc = Moments::default();
            for _ in 0..count {
                let g = draw_fading(&mut rng, k, l);
                let value: f64 =
                    members.iter().map(|(ue_in, bss)| instantaneous_capacity(gains.q(), &g, channel, ue_in, bss)).sum();
                acc.push(value);
            }
            acc
        })
        .collect();
    let total = moments.into_iter().fold(Moments::default(), Moments::merge);
    let std_err = if total.n > 1.0 { (total.m2 / (total.n - 1.0) / total.n).sqrt() } else { 0.0 };
    McEstimate { mean: total.mean, std_err, samples: n_samples }
}

/// Monte-Carlo ergodic capacity of subnetwork `m`.
///
/// Each sample draws the full `K × L` fading matrix, so estimates for
/// different subnetworks with the same seed share their draws and add up to
/// [`sum_capacity_mc`].
pub fn subnetwork_capacity_mc(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    d: &Decomposition,
    m: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_dims(gains, d)?;
    d.check_subnetwork(m)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    Ok(mc_over(gains, channel, d, &[m], n_samples, seed))
}

pub fn sum_capacity_mc(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    d: &Decomposition,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    check_all(gains, d)?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be at least 1"));
    }
    let all: Vec<usize> = (0..d.m()).collect();
    Ok(mc_over(gains, channel, d, &all, n_samples, seed))
}

/// Capacity summary of one decomposition, in bits/s/Hz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityReport {
    pub sum_mc: Option<f64>,
    pub sum_approx: f64,
    pub sum_lb: f64,
    pub per_subnetwork_approx: Vec<f64>,
    pub mc_samples: usize,
    pub mc_std_err: Option<f64>,
}

/// Evaluates all capacities; Monte-Carlo runs only when `mc_samples > 0`.
pub fn evaluate(
    gains: &PathGainMatrix,
    channel: &ChannelModel,
    d: &Decomposition,
    mc_samples: usize,
    seed: u64,
) -> Result<CapacityReport> {
    check_all(gains, d)?;
    let per: Vec<f64> = (0..d.m()).map(|m| set_capacity_approx(gains, channel, &d.ues(m), &d.bss(m))).collect();
    let mc = if mc_samples > 0 { Some(sum_capacity_mc(gains, channel, d, mc_samples, seed)?) } else { None };
    Ok(CapacityReport {
        sum_mc: mc.map(|e| e.mean),
        sum_approx: per.iter().sum(),
        sum_lb: sum_capacity_lower_bound(gains, channel, d)?,
        per_subnetwork_approx: per,
        mc_samples,
        mc_std_err: mc.map(|e| e.std_err),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::NetworkLayout;
    use crate::rng::rng_from_seed;

    fn ch() -> ChannelModel {
        ChannelModel::new(4.0, 10.0, 1.0, 1e-3).unwrap()
    }

    fn gains(rows: usize, cols: usize, v: &[f64]) -> PathGainMatrix {
        PathGainMatrix::from_matrix(DMatrix::from_row_slice(rows, cols, v)).unwrap()
    }

    fn random_instance(seed: u64) -> (PathGainMatrix, Decomposition) {
        let mut rng = rng_from_seed(seed);
        let k = rng.random_range(1..10);
        let l = rng.random_range(1..10);
        let layout = NetworkLayout::generate(seed, k, l, 1.0).unwrap();
        let g = PathGainMatrix::compute(&layout, &ch());
        let m = rng.random_range(1..=l.min(4));
        // Every subnetwork gets at least one BS.
        let mut labels: Vec<usize> = (0..k).map(|_| rng.random_range(0..m)).collect();
        labels.extend((0..l).map(|b| if b < m { b } else { rng.random_range(0..m) }));
        (g, Decomposition::from_labels(k, l, &labels).unwrap())
    }

    #[test]
    fn approx_with_one_interferer() {
        let g = gains(2, 1, &[1.0, 1.0]);
        let d = Decomposition::from_labels(2, 1, &[0, 1, 0]).unwrap();
        let c = subnetwork_capacity_approx(&g, &ch(), &d, 0).unwrap();
        assert!((c - (1.0f64 + 10.0 / 11.0).log2()).abs() < 1e-12);
        assert!((c - 0.9329).abs() < 1e-4);
    }

    #[test]
    fn approx_without_interference() {
        let g = gains(1, 1, &[1.0]);
        let d = Decomposition::whole(1, 1);
        let c = subnetwork_capacity_approx(&g, &ch(), &d, 0).unwrap();
        assert!((c - 11f64.log2()).abs() < 1e-12);
        assert!((c - 3.4594).abs() < 1e-4);
    }

    #[test]
    fn empty_ue_side_gives_zero() {
        let g = gains(1, 2, &[1.0, 1.0]);
        let d = Decomposition::from_labels(1, 2, &[0, 0, 1]).unwrap();
        assert_eq!(subnetwork_capacity_approx(&g, &ch(), &d, 1).unwrap(), 0.0);
        let mc = subnetwork_capacity_mc(&g, &ch(), &d, 1, 10, 1).unwrap();
        assert_eq!(mc.mean, 0.0);
    }

    #[test]
    fn zero_bs_subnetwork_is_an_error() {
        let g = gains(2, 1, &[1.0, 1.0]);
        let d = Decomposition::from_labels(2, 1, &[0, 1, 0]).unwrap();
        assert!(matches!(subnetwork_capacity_approx(&g, &ch(), &d, 1), Err(Error::InvalidDecomposition(_))));
        assert!(subnetwork_capacity_mc(&g, &ch(), &d, 1, 10, 1).is_err());
        assert!(sum_capacity_approx(&g, &ch(), &d).is_err());
    }

    #[test]
    fn whole_network_has_no_interference_term() {
        let (g, _) = random_instance(5);
        let d = Decomposition::whole(g.k(), g.l());
        let expected: f64 = bs_constants(&g, &ch()).iter().map(|a| (a / 1.0).log2()).sum();
        let approx = sum_capacity_approx(&g, &ch(), &d).unwrap();
        assert!((approx - expected).abs() < 1e-9 * expected.abs());
        let lb = sum_capacity_lower_bound(&g, &ch(), &d).unwrap();
        assert!((lb - approx).abs() < 1e-9 * approx.abs());
    }

    #[test]
    fn split_form_matches_per_bs_form() {
        for seed in 0..50 {
            let (g, d) = random_instance(seed);
            let a = sum_capacity_approx(&g, &ch(), &d).unwrap();
            let b = sum_capacity_approx_split(&g, &ch(), &d).unwrap();
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "seed {seed}: {a} vs {b}");
        }
    }

    #[test]
    fn decoupled_pairs() {
        let tiny = 1e-12;
        let g = gains(2, 2, &[1.0, tiny, tiny, 1.0]);
        let d = Decomposition::from_labels(2, 2, &[0, 1, 0, 1]).unwrap();
        let c = sum_capacity_approx(&g, &ch(), &d).unwrap();
        assert!((c - 2.0 * 11f64.log2()).abs() < 1e-3);
    }

    #[test]
    fn jensen_bound_below_approx() {
        for seed in 0..100 {
            let (g, d) = random_instance(seed);
            let a = sum_capacity_approx(&g, &ch(), &d).unwrap();
            let lb = sum_capacity_lower_bound(&g, &ch(), &d).unwrap();
            assert!(lb <= a + 1e-9, "seed {seed}: {lb} > {a}");
        }
    }

    #[test]
    fn jensen_tight_for_equal_interference() {
        // Symmetric 2x2: each BS sees the same outside power.
        let g = gains(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let d = Decomposition::from_labels(2, 2, &[0, 1, 0, 1]).unwrap();
        let a = sum_capacity_approx(&g, &ch(), &d).unwrap();
        let lb = sum_capacity_lower_bound(&g, &ch(), &d).unwrap();
        assert!((a - lb).abs() < 1e-12);
    }

    #[test]
    fn cut_examples() {
        let eye = BipartiteGraph::from_weights(DMatrix::identity(2, 2)).unwrap();
        let d = Decomposition::from_labels(2, 2, &[0, 1, 0, 1]).unwrap();
        assert_eq!(sumcut(&eye, &d).unwrap(), 0.0);

        let ones = BipartiteGraph::from_weights(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!(cut_value(&ones, &d, 0).unwrap(), 2.0);
        assert_eq!(sumcut(&ones, &d).unwrap(), 4.0);
        let x = d.to_matrix();
        assert_eq!(quadratic_objective(&ones, x.matrix()).unwrap(), 4.0);

        let whole = Decomposition::whole(2, 2);
        assert_eq!(sumcut(&ones, &whole).unwrap(), 0.0);
        assert_eq!(quadratic_objective(&ones, whole.to_matrix().matrix()).unwrap(), 0.0);
    }

    #[test]
    fn quadratic_objective_rejects_non_partitions() {
        let ones = BipartiteGraph::from_weights(DMatrix::from_element(2, 2, 1.0)).unwrap();
        let x = DMatrix::from_element(4, 2, 0.5);
        assert!(quadratic_objective(&ones, &x).is_err());
        assert!(quadratic_objective(&ones, &DMatrix::zeros(4, 1)).is_err());
    }

    #[test]
    fn cut_identities_on_random_instances() {
        for seed in 0..100 {
            let (g, d) = random_instance(seed);
            let graph = BipartiteGraph::build(&g);
            let sc = sumcut(&graph, &d).unwrap();
            let per: f64 = (0..d.m()).map(|m| cut_value(&graph, &d, m).unwrap()).sum();
            let quad = quadratic_objective(&graph, d.to_matrix().matrix()).unwrap();
            // Floor for the cancellation in x^T L x when the cut is tiny.
            let tol = 1e-9 * sc.abs().max(quad.abs()) + 1e-12 * graph.total_weight();
            assert!((sc - per).abs() <= tol);
            assert!((sc - quad).abs() <= tol, "seed {seed}: {sc} vs {quad}");
            let interf = interference_sum(&g, &d).unwrap();
            assert!((interf - 0.5 * sc).abs() <= tol);
        }
    }

    #[test]
    fn mc_is_deterministic_and_additive() {
        let (g, d) = random_instance(11);
        let a = sum_capacity_mc(&g, &ch(), &d, 600, 9).unwrap();
        let b = sum_capacity_mc(&g, &ch(), &d, 600, 9).unwrap();
        assert_eq!(a, b);
        let parts: f64 = (0..d.m()).map(|m| subnetwork_capacity_mc(&g, &ch(), &d, m, 600, 9).unwrap().mean).sum();
        assert!((parts - a.mean).abs() < 1e-9 * a.mean.abs().max(1.0));
    }

    #[test]
    fn evaluate_report_is_consistent() {
        let (g, d) = random_instance(21);
        let r = evaluate(&g, &ch(), &d, 300, 4).unwrap();
        let s: f64 = r.per_subnetwork_approx.iter().sum();
        assert!((s - r.sum_approx).abs() <= 1e-9 * s.abs().max(1.0));
        assert!(r.sum_lb <= r.sum_approx + 1e-9);
        assert!(r.sum_mc.is_some() && r.mc_std_err.is_some());
        let r0 = evaluate(&g, &ch(), &d, 0, 4).unwrap();
        assert!(r0.sum_mc.is_none());
    }

    #[test]
    fn ln_det_falls_back_on_indefinite_input() {
        let m = DMatrix::from_row_slice(
            2,
            2,
            &[C64::new(0.0, 0.0), C64::new(2.0, 0.0), C64::new(2.0, 0.0), C64::new(0.0, 0.0)],
        );
        assert!((ln_det_hpd(m) - 4f64.ln()).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn capacity_identities_hold(seed in 0u64..10_000, k in 1usize..10, l in 1usize..8, raw in proptest::collection::vec(0usize..3, 18)) {
            let layout = NetworkLayout::generate(seed, k, l, 1.0).unwrap();
            let g = PathGainMatrix::compute(&layout, &ch());
            let graph = BipartiteGraph::build(&g);
            let d = Decomposition::from_labels(k, l, &raw[..k + l]).unwrap();
            proptest::prop_assume!((0..d.m()).all(|m| d.check_subnetwork(m).is_ok()));
            let approx = sum_capacity_approx(&g, &ch(), &d).unwrap();
            let split = sum_capacity_approx_split(&g, &ch(), &d).unwrap();
            let lb = sum_capacity_lower_bound(&g, &ch(), &d).unwrap();
            proptest::prop_assert!((approx - split).abs() <= 1e-9 * approx.abs().max(1.0));
            proptest::prop_assert!(lb <= approx + 1e-9);
            let sc = sumcut(&graph, &d).unwrap();
            let half: f64 = interference_sum(&g, &d).unwrap();
            proptest::prop_assert!((sc - 2.0 * half).abs() <= 1e-9 * sc.max(1.0));
        }
    }
}
