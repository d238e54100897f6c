use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::datagen::rng_from_seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub centroids: Vec<Vec<f64>>,
    pub assign: Vec<usize>,
    /// Sum of squared distances of points to their cluster centroid.
    pub objective: f64,
    /// Objective after each completed iteration.
    pub history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.centroids.len()];
        for &a in &self.assign {
            s[a] += 1;
        }
        s
    }
}

#[derive(Clone, Debug)]
pub struct KMeansOptions {
    pub max_iter: usize,
    /// Stop once the objective improves by less than `tol` (relative).
    pub tol: f64,
    /// Independent seedings; the run with the lowest objective wins.
    pub n_init: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            max_iter: 100,
            tol: 1e-10,
            n_init: 1,
        }
    }
}

fn restart_seed(seed: u64, i: usize) -> u64 {
    seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs `once` for each restart seed and keeps the lowest objective.
fn best_of<F>(seed: u64, opts: &KMeansOptions, mut once: F) -> ClusterAssignment
where
    F: FnMut(u64) -> ClusterAssignment,
{
    let mut best = once(seed);
    for i in 1..opts.n_init.max(1) {
        let run = once(restart_seed(seed, i));
        if run.objective < best.objective {
            best = run;
        }
    }
    best
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn check_input(x: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if k == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if k > x.len() {
        return Err(ClusterError::TooManyClusters { k, n: x.len() });
    }
    let d = x[0].len();
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(ClusterError::Dimension {
            index: i,
            expected: d,
            found: x[i].len(),
        });
    }
    Ok(d)
}

/// k-means++ seeding: extends `centroids` to `k` entries.
fn plus_plus(x: &[Vec<f64>], centroids: &mut Vec<Vec<f64>>, k: usize, rng: &mut impl Rng) {
    if centroids.is_empty() {
        centroids.push(x[rng.gen_range(0..x.len())].clone());
    }
    let mut nearest: Vec<f64> = x
        .iter()
        .map(|p| centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
        .collect();
    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut idx = x.len() - 1;
            for (i, w) in nearest.iter().enumerate() {
                if r < *w {
                    idx = i;
                    break;
                }
                r -= w;
            }
            idx
        } else {
            rng.gen_range(0..x.len())
        };
        let c = x[pick].clone();
        for (p, n) in x.iter().zip(nearest.iter_mut()) {
            *n = n.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
}

fn distances(x: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<Vec<f64>> {
    x.par_iter()
        .map(|p| centroids.iter().map(|c| sq_dist(p, c)).collect())
        .collect()
}

fn argmin(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &d) in row.iter().enumerate() {
        if d < row[best] {
            best = j;
        }
    }
    best
}

/// Size limits for the balanced variant: every cluster takes `floor` or
/// `floor + 1` points, and exactly `extra` clusters take `floor + 1`.
#[derive(Clone, Copy, Debug)]
struct Capacity {
    floor: usize,
    extra: usize,
}

fn assign_step(
    dist: &[Vec<f64>],
    pinned: &[Option<usize>],
    capacity: Option<Capacity>,
) -> Vec<usize> {
    let Some(cap) = capacity else {
        return dist
            .iter()
            .zip(pinned)
            .map(|(row, p)| p.unwrap_or_else(|| argmin(row)))
            .collect();
    };
    let k = dist[0].len();
    let mut sizes = vec![0usize; k];
    let mut assign = vec![usize::MAX; dist.len()];
    for (i, p) in pinned.iter().enumerate() {
        if let Some(c) = *p {
            assign[i] = c;
            sizes[c] += 1;
        }
    }
    let mut pairs: Vec<(f64, usize, usize)> = dist
        .iter()
        .enumerate()
        .filter(|(i, _)| pinned[*i].is_none())
        .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &d)| (d, i, j)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut extras_used = sizes.iter().filter(|&&s| s > cap.floor).count();
    for (_, i, j) in pairs {
        if assign[i] != usize::MAX {
            continue;
        }
        let room = if sizes[j] < cap.floor {
            true
        } else if sizes[j] == cap.floor && extras_used < cap.extra {
            extras_used += 1;
            true
        } else {
            false
        };
        if room {
            assign[i] = j;
            sizes[j] += 1;
        }
    }
    // Pinned overflow can leave points without room; send them to their
    // nearest cluster.
    for (i, a) in assign.iter_mut().enumerate() {
        if *a == usize::MAX {
            *a = argmin(&dist[i]);
        }
    }
    assign
}

/// Moves the free point farthest from its centroid into each empty cluster.
fn fill_empty(assign: &mut [usize], dist: &[Vec<f64>], pinned: &[Option<usize>], k: usize) {
    loop {
        let mut sizes = vec![0usize; k];
        for &a in assign.iter() {
            sizes[a] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..assign.len())
            .filter(|&i| pinned[i].is_none() && sizes[assign[i]] > 1)
            .max_by(|&a, &b| dist[a][assign[a]].total_cmp(&dist[b][assign[b]]).then(b.cmp(&a)));
        match donor {
            Some(i) => assign[i] = empty,
            None => return,
        }
    }
}

fn update_step(x: &[Vec<f64>], assign: &[usize], centroids: &mut [Vec<f64>]) {
    let d = x[0].len();
    let k = centroids.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in x.iter().zip(assign) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] > 0 {
            centroids[j] = sums[j].iter().map(|s| s / counts[j] as f64).collect();
        }
    }
}

fn objective(x: &[Vec<f64>], assign: &[usize], centroids: &[Vec<f64>]) -> f64 {
    x.iter().zip(assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

fn lloyd(
    x: &[Vec<f64>],
    mut centroids: Vec<Vec<f64>>,
    pinned: &[Option<usize>],
    capacity: Option<Capacity>,
    opts: &KMeansOptions,
) -> ClusterAssignment {
    let k = centroids.len();
    let all_pinned = pinned.iter().all(Option::is_some);
    let mut assign: Vec<usize> = Vec::new();
    let mut history = Vec::new();
    for _ in 0..opts.max_iter.max(1) {
        let dist = distances(x, &centroids);
        let mut next = assign_step(&dist, pinned, capacity);
        if capacity.is_none() {
            fill_empty(&mut next, &dist, pinned, k);
        }
        let unchanged = next == assign;
        assign = next;
        update_step(x, &assign, &mut centroids);
        let obj = objective(x, &assign, &centroids);
        let prev = history.last().copied();
        history.push(obj);
        if unchanged || all_pinned {
            break;
        }
        if let Some(prev) = prev {
            if prev - obj <= opts.tol * prev.abs().max(1e-300) && prev >= obj {
                break;
            }
        }
    }
    ClusterAssignment {
        objective: *history.last().expect("at least one iteration"),
        centroids,
        assign,
        history,
    }
}

/// Lloyd's algorithm with k-means++ seeding.
pub fn kmeans(
    x: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterAssignment, ClusterError> {
    check_input(x, k)?;
    let free = vec![None; x.len()];
    Ok(best_of(seed, opts, |s| {
        let mut rng = rng_from_seed(s);
        let mut centroids = Vec::new();
        plus_plus(x, &mut centroids, k, &mut rng);
        lloyd(x, centroids, &free, None, opts)
    }))
}

/// Semi-supervised k-means. `labeled[i] = Some(c)` pins point `i` to
/// cluster `c`; clusters with labeled points start at their class mean and
/// the rest are seeded by k-means++.
pub fn ss_kmeans(
    x: &[Vec<f64>],
    labeled: &[Option<usize>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterAssignment, ClusterError> {
    ss_kmeans_impl(x, labeled, k, seed, opts, false)
}

/// Semi-supervised k-means whose free points fill clusters up to equal
/// sizes.
pub fn ss_kmeans_balanced(
    x: &[Vec<f64>],
    labeled: &[Option<usize>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterAssignment, ClusterError> {
    ss_kmeans_impl(x, labeled, k, seed, opts, true)
}

fn ss_kmeans_impl(
    x: &[Vec<f64>],
    labeled: &[Option<usize>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
    balanced: bool,
) -> Result<ClusterAssignment, ClusterError> {
    let d = check_input(x, k)?;
    if labeled.len() != x.len() {
        return Err(ClusterError::LabelCount {
            labels: labeled.len(),
            points: x.len(),
        });
    }
    if let Some(&c) = labeled.iter().flatten().find(|&&c| c >= k) {
        return Err(ClusterError::LabelOutOfRange { label: c, k });
    }
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (p, l) in x.iter().zip(labeled) {
        if let Some(c) = *l {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
    }
    // Labeled classes keep their ids; the remaining clusters are seeded
    // after them and then slotted into the free ids.
    let seeded: Vec<Vec<f64>> = (0..k)
        .filter(|&c| counts[c] > 0)
        .map(|c| sums[c].iter().map(|s| s / counts[c] as f64).collect())
        .collect();
    let n_fixed = seeded.len();
    let capacity = balanced.then_some(Capacity {
        floor: x.len() / k,
        extra: x.len() % k,
    });
    Ok(best_of(seed, opts, |s| {
        let mut rng = rng_from_seed(s);
        let mut seeded = seeded.clone();
        plus_plus(x, &mut seeded, k, &mut rng);
        let mut fresh = seeded.into_iter().skip(n_fixed);
        let centroids: Vec<Vec<f64>> = (0..k)
            .map(|c| {
                if counts[c] > 0 {
                    sums[c].iter().map(|s| s / counts[c] as f64).collect()
                } else {
                    fresh.next().expect("one fresh centroid per free id")
                }
            })
            .collect();
        lloyd(x, centroids, labeled, capacity, opts)
    }))
}

/// k-means with every cluster holding `⌊N/K⌋` or `⌈N/K⌉` points.
pub fn balanced_kmeans(
    x: &[Vec<f64>],
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<ClusterAssignment, ClusterError> {
    check_input(x, k)?;
    let capacity = Capacity {
        floor: x.len() / k,
        extra: x.len() % k,
    };
    let free = vec![None; x.len()];
    Ok(best_of(seed, opts, |s| {
        let mut rng = rng_from_seed(s);
        let mut centroids = Vec::new();
        plus_plus(x, &mut centroids, k, &mut rng);
        lloyd(x, centroids, &free, Some(capacity), opts)
    }))
}
