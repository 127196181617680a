//! Two-stage K-means baselines: cluster one node type geometrically, attach
//! the other, then repair caps and BS-less clusters.

use rand::Rng;

use crate::error::{Error, Result};
use crate::netmodel::{NetworkLayout, PathGainMatrix, Point};
use crate::partition::{optimal_m, Decomposition};
use crate::rng::{stream_rng, Stream};

const MAX_ITERS: usize = 100;

fn dist2(a: &Point, b: &Point) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn nearest(p: &Point, centers: &[Point]) -> usize {
    let mut best = 0;
    for (c, center) in centers.iter().enumerate().skip(1) {
        if dist2(p, center) < dist2(p, &centers[best]) {
            best = c;
        }
    }
    best
}

/// Lloyd's algorithm with seeded farthest-point initialization. Returns the
/// cluster of every point and the centroids. A cluster that empties is
/// reseeded at the point farthest from its own centroid.
pub fn kmeans(points: &[Point], clusters: usize, seed: u64) -> Result<(Vec<usize>, Vec<Point>)> {
    if clusters == 0 || clusters > points.len() {
        return Err(Error::invalid(format!("cannot form {clusters} clusters from {} points", points.len())));
    }
    let mut rng = crate::rng::rng_from_seed(seed);
    let mut centers = vec![points[rng.random_range(0..points.len())]];
    while centers.len() < clusters {
        let far = (0..points.len())
            .max_by(|&a, &b| {
                let da = dist2(&points[a], &centers[nearest(&points[a], &centers)]);
                let db = dist2(&points[b], &centers[nearest(&points[b], &centers)]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("non-empty");
        centers.push(points[far]);
    }
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
    for _ in 0..MAX_ITERS {
        let mut sums = vec![[0.0, 0.0]; clusters];
        let mut counts = vec![0usize; clusters];
        for (p, &c) in points.iter().zip(&labels) {
            sums[c][0] += p[0];
            sums[c][1] += p[1];
            counts[c] += 1;
        }
        for c in 0..clusters {
            if counts[c] > 0 {
                centers[c] = [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64];
            } else {
                let far = (0..points.len())
                    .max_by(|&a, &b| {
                        let da = dist2(&points[a], &centers[labels[a]]);
                        let db = dist2(&points[b], &centers[labels[b]]);
                        da.total_cmp(&db).then(b.cmp(&a))
                    })
                    .expect("non-empty");
                centers[c] = points[far];
                labels[far] = c;
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centers)).collect();
        if next == labels {
            break;
        }
        labels = next;
    }
    Ok((labels, centers))
}

fn centroid(points: &[Point], members: &[usize]) -> Point {
    let n = members.len() as f64;
    let (x, y) = members.iter().fold((0.0, 0.0), |acc, &i| (acc.0 + points[i][0], acc.1 + points[i][1]));
    [x / n, y / n]
}

/// UE-centric baseline: K-means on UEs into `⌈K/k_max⌉` clusters, binary
/// re-clustering of any cluster above the cap, then every BS joins the
/// cluster with the nearest UE centroid.
pub fn kmeans_ue_centric(layout: &NetworkLayout, k_max: usize, seed: u64) -> Result<Decomposition> {
    let (k, l) = (layout.k, layout.l);
    let m = optimal_m(k, k_max)?;
    if m > l {
        return Err(Error::Infeasible(format!("{l} BSs cannot serve {m} clusters")));
    }
    let (labels, _) = kmeans(&layout.ue, m, stream_rng_seed(seed, &[0]))?;
    let mut pending: Vec<Vec<usize>> = (0..m).map(|c| (0..k).filter(|&u| labels[u] == c).collect()).collect();
    pending.retain(|g| !g.is_empty());
    pending.reverse();
    let mut ue_groups = Vec::new();
    let mut splits = 0u64;
    while let Some(group) = pending.pop() {
        if group.len() <= k_max {
            ue_groups.push(group);
            continue;
        }
        splits += 1;
        let pts: Vec<Point> = group.iter().map(|&u| layout.ue[u]).collect();
        let (sub, _) = kmeans(&pts, 2, stream_rng_seed(seed, &[1, splits]))?;
        let mut halves = [Vec::new(), Vec::new()];
        for (i, &u) in group.iter().enumerate() {
            halves[sub[i]].push(u);
        }
        // Coincident points can defeat the split; fall back to halving.
        if halves[0].is_empty() || halves[1].is_empty() {
            let mut all = group.clone();
            let rest = all.split_off(group.len() / 2);
            halves = [all, rest];
        }
        let [a, b] = halves;
        pending.push(b);
        pending.push(a);
    }
    if ue_groups.len() > l {
        return Err(Error::Infeasible(format!("{} clusters but only {l} BSs", ue_groups.len())));
    }
    let centers: Vec<Point> = ue_groups.iter().map(|g| centroid(&layout.ue, g)).collect();
    let mut bs_label: Vec<usize> = layout.bs.iter().map(|p| nearest(p, &centers)).collect();
    // Give every BS-less cluster the nearest BS that its owner can spare.
    for c in 0..ue_groups.len() {
        if bs_label.contains(&c) {
            continue;
        }
        let spare = |b: usize| bs_label.iter().filter(|&&x| x == bs_label[b]).count() > 1;
        let pick = (0..l)
            .filter(|&b| spare(b))
            .min_by(|&a, &b| {
                dist2(&layout.bs[a], &centers[c]).total_cmp(&dist2(&layout.bs[b], &centers[c])).then(a.cmp(&b))
            })
            .ok_or_else(|| Error::Infeasible("no BS can be spared for an empty cluster".into()))?;
        bs_label[pick] = c;
    }
    let groups: Vec<(Vec<usize>, Vec<usize>)> = ue_groups
        .into_iter()
        .enumerate()
        .map(|(c, ues)| (ues, (0..l).filter(|&b| bs_label[b] == c).collect()))
        .collect();
    Decomposition::from_groups(k, l, &groups)
}

/// BS-centric baseline: K-means on BSs into `⌈K/k_max⌉` clusters, every UE
/// joins the cluster of its strongest BS, and over-cap clusters shed their
/// weakest UEs to the next-best cluster with room.
pub fn kmeans_bs_centric(
    layout: &NetworkLayout,
    gains: &PathGainMatrix,
    k_max: usize,
    seed: u64,
) -> Result<Decomposition> {
    let (k, l) = (layout.k, layout.l);
    if gains.k() != k || gains.l() != l {
        return Err(Error::invalid("gain matrix does not match the layout"));
    }
    let m = optimal_m(k, k_max)?;
    if m > l {
        return Err(Error::Infeasible(format!("{l} BSs cannot form {m} clusters")));
    }
    let (bs_label, _) = kmeans(&layout.bs, m, stream_rng_seed(seed, &[2]))?;
    let q = gains.q();
    // Strongest gain from UE u to any BS of cluster c.
    let strength =
        |u: usize, c: usize| (0..l).filter(|&b| bs_label[b] == c).map(|b| q[(u, b)]).fold(f64::NEG_INFINITY, f64::max);
    let mut ue_label: Vec<usize> = (0..k)
        .map(|u| (0..l).max_by(|&a, &b| q[(u, a)].total_cmp(&q[(u, b)]).then(b.cmp(&a))).map(|b| bs_label[b]).unwrap())
        .collect();
    let mut count = vec![0usize; m];
    ue_label.iter().for_each(|&c| count[c] += 1);
    while let Some(c) = (0..m).find(|&c| count[c] > k_max) {
        let u = (0..k)
            .filter(|&u| ue_label[u] == c)
            .min_by(|&a, &b| strength(a, c).total_cmp(&strength(b, c)).then(a.cmp(&b)))
            .expect("over-cap cluster has members");
        let to = (0..m)
            .filter(|&t| t != c && count[t] < k_max)
            .max_by(|&a, &b| strength(u, a).total_cmp(&strength(u, b)).then(b.cmp(&a)))
            .ok_or_else(|| Error::Infeasible("no cluster has room".into()))?;
        ue_label[u] = to;
        count[c] -= 1;
        count[to] += 1;
    }
    let mut labels = ue_label;
    labels.extend(bs_label);
    Decomposition::from_labels(k, l, &labels)
}

fn stream_rng_seed(seed: u64, path: &[u64]) -> u64 {
    stream_rng(seed, Stream::Baseline, path).random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netmodel::ChannelModel;

    fn blobs(mirror: bool) -> NetworkLayout {
        let mut ue = Vec::new();
        let mut bs = Vec::new();
        for i in 0..4 {
            let d = 0.01 * i as f64;
            ue.push([0.1 + d, 0.1 + d]);
            ue.push([0.9 - d, 0.9 - d]);
        }
        bs.push([0.12, 0.1]);
        bs.push([0.88, 0.9]);
        bs.push([0.1, 0.14]);
        if mirror {
            std::mem::swap(&mut ue, &mut bs);
        }
        NetworkLayout::from_points(ue, bs, 1.0).unwrap()
    }

    fn gains(layout: &NetworkLayout) -> PathGainMatrix {
        PathGainMatrix::compute(layout, &ChannelModel::from_snr_db(4.0, 10.0, ChannelModel::DEFAULT_D_MIN).unwrap())
    }

    #[test]
    fn ue_centric_finds_blobs() {
        let layout = blobs(false);
        let d = kmeans_ue_centric(&layout, 4, 7).unwrap();
        assert_eq!(d.m(), 2);
        let mut sets: Vec<Vec<usize>> = (0..2).map(|c| d.ues(c)).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]]);
        assert!(d.validate(4).is_empty());
        assert_eq!(d, kmeans_ue_centric(&layout, 4, 7).unwrap());
    }

    #[test]
    fn single_cluster_when_under_cap() {
        let layout = NetworkLayout::generate(3, 4, 3, 1.0).unwrap();
        assert_eq!(kmeans_ue_centric(&layout, 5, 1).unwrap().m(), 1);
        assert_eq!(kmeans_bs_centric(&layout, &gains(&layout), 5, 1).unwrap().m(), 1);
    }

    #[test]
    fn bs_centric_mirrors_geometry() {
        // BS blobs with three UEs near the first blob.
        let layout = blobs(true);
        let d = kmeans_bs_centric(&layout, &gains(&layout), 2, 7).unwrap();
        assert_eq!(d.m(), 2);
        let mut sets: Vec<Vec<usize>> = (0..2).map(|c| d.bss(c)).collect();
        sets.sort();
        assert_eq!(sets, vec![vec![0, 2, 4, 6], vec![1, 3, 5, 7]]);
        assert!(d.validate(2).is_empty());
    }

    #[test]
    fn bs_centric_repairs_overload() {
        // Three UEs all strongest at BS 0 with a cap of two.
        let ue = vec![[0.1, 0.1], [0.11, 0.1], [0.12, 0.1]];
        let bs = vec![[0.1, 0.11], [0.9, 0.9]];
        let layout = NetworkLayout::from_points(ue, bs, 1.0).unwrap();
        let d = kmeans_bs_centric(&layout, &gains(&layout), 2, 3).unwrap();
        assert!(d.validate(2).is_empty());
        assert_eq!(d.ue_counts().iter().max(), Some(&2));
    }

    #[test]
    fn outputs_valid_on_random_layouts() {
        for seed in 0..100 {
            let k = 3 + (seed % 15) as usize;
            let k_max = 2 + (seed % 3) as usize;
            let l = k.div_ceil(k_max) + 2 + (seed % 4) as usize;
            let layout = NetworkLayout::generate(seed, k, l, 1.0).unwrap();
            let a = kmeans_ue_centric(&layout, k_max, seed).unwrap();
            assert!(a.validate(k_max).is_empty(), "seed {seed}");
            let b = kmeans_bs_centric(&layout, &gains(&layout), k_max, seed).unwrap();
            assert!(b.validate(k_max).is_empty(), "seed {seed}");
        }
    }
}
