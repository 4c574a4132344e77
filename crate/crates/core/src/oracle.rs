//! Brute-force reference implementations.
//!
//! Nothing here shares code with the detection engine's counting paths; these
//! functions exist to be obviously correct and serve as ground truth in tests.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::graph::Adjacency;
use crate::metric::{Dataset, ObjectId};

#[derive(Clone, Debug)]
pub struct OracleReport {
    /// Sorted ids of objects with fewer than `k` neighbors.
    pub outliers: Vec<ObjectId>,
    /// Exact, uncapped neighbor count of every object.
    pub neighbor_counts: Vec<usize>,
    pub runtime: Duration,
}

/// Full pairwise scan: uncapped neighbor counts and the outlier set.
pub fn brute_force_outliers(ds: &Dataset, r: f64, k: usize) -> OracleReport {
    let started = Instant::now();
    let neighbor_counts: Vec<usize> = (0..ds.len() as ObjectId)
        .into_par_iter()
        .map(|p| {
            (0..ds.len() as ObjectId)
                .filter(|&q| q != p && ds.distance(p, q) <= r)
                .count()
        })
        .collect();
    let outliers = neighbor_counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c < k)
        .map(|(p, _)| p as ObjectId)
        .collect();
    OracleReport {
        outliers,
        neighbor_counts,
        runtime: started.elapsed(),
    }
}

/// Classic nested loop with early termination at `k`, single-threaded.
/// Used as the timing baseline; returns sorted outlier ids.
pub fn nested_loop_outliers(ds: &Dataset, r: f64, k: usize) -> Vec<ObjectId> {
    let n = ds.len() as ObjectId;
    (0..n)
        .filter(|&p| {
            let mut count = 0;
            for q in 0..n {
                if q != p && ds.distance(p, q) <= r {
                    count += 1;
                    if count >= k {
                        return false;
                    }
                }
            }
            true
        })
        .collect()
}

/// Objects reachable from `p` along paths whose distance to `p` never decreases.
pub fn monotone_reachable_from(adjacency: &Adjacency, ds: &Dataset, p: ObjectId) -> Vec<bool> {
    let n = adjacency.len();
    let dist: Vec<f64> = (0..n as ObjectId).map(|x| ds.distance(p, x)).collect();
    let mut reached = vec![false; n];
    reached[p as usize] = true;
    let mut queue = VecDeque::from([p]);
    while let Some(u) = queue.pop_front() {
        for &w in adjacency.neighbors(u) {
            if !reached[w as usize] && dist[u as usize] <= dist[w as usize] {
                reached[w as usize] = true;
                queue.push_back(w);
            }
        }
    }
    reached
}

/// Whether a monotonic path from `p` to `q` exists.
pub fn monotone_reachability(adjacency: &Adjacency, ds: &Dataset, p: ObjectId, q: ObjectId) -> bool {
    monotone_reachable_from(adjacency, ds, p)[q as usize]
}

/// Fraction of ordered pairs `(p, q)`, `p != q`, `dist(p, q) <= r`, joined by a
/// monotonic path. Every vertex on such a path lies within `r` of `p`, so the
/// path is one that greedy counting from `p` can follow. Returns 1 when no
/// pair qualifies.
pub fn monotone_density(adjacency: &Adjacency, ds: &Dataset, r: f64) -> f64 {
    let (good, total) = (0..ds.len() as ObjectId)
        .into_par_iter()
        .map(|p| {
            let reach = monotone_reachable_from(adjacency, ds, p);
            let mut good = 0usize;
            let mut total = 0usize;
            for q in 0..ds.len() as ObjectId {
                if q != p && ds.distance(p, q) <= r {
                    total += 1;
                    good += usize::from(reach[q as usize]);
                }
            }
            (good, total)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if total == 0 {
        1.0
    } else {
        good as f64 / total as f64
    }
}
