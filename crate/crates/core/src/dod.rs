//! Two-phase exact outlier detection over a proximity graph.
//!
//! Filtering counts each object's neighbors by a greedy graph traversal that
//! stops at `k`; the count never exceeds the true count, so every object that
//! reaches `k` is an inlier. Objects carrying an exact K'-NN list are decided
//! directly from that list when `k <= K'`. The remaining candidates are
//! verified with an exact range count.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metric::{Dataset, DistCounter, ObjectId};
use crate::mrpg::Mrpg;
use crate::visit::VisitMarker;
use crate::vptree::VpTree;

/// Intrinsic dimensionality below which verification uses the VP-tree.
pub const LOW_INTRINSIC_DIM: f64 = 5.0;

const VERIFY_TREE_CAPACITY: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    VpTree,
    LinearScan,
    /// VP-tree when the estimated intrinsic dimensionality is low, else scan.
    Auto,
}

impl fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerifyMode::VpTree => "vptree",
            VerifyMode::LinearScan => "scan",
            VerifyMode::Auto => "auto",
        })
    }
}

impl FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "vptree" | "vp_tree" | "vp-tree" => Ok(VerifyMode::VpTree),
            "scan" | "linear_scan" | "linear-scan" => Ok(VerifyMode::LinearScan),
            "auto" => Ok(VerifyMode::Auto),
            other => Err(Error::Config(format!("unknown verify mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DodParams {
    /// Distance threshold.
    pub r: f64,
    /// Count threshold.
    pub k: usize,
    pub threads: usize,
    pub verify: VerifyMode,
    /// Seed of the random assignment of objects to workers.
    pub seed: u64,
    /// Let out-of-range pivots expand into further out-of-range pivots.
    pub chain_pivots: bool,
}

impl DodParams {
    pub fn new(r: f64, k: usize) -> Self {
        DodParams {
            r,
            k,
            threads: 1,
            verify: VerifyMode::Auto,
            seed: 0,
            chain_pivots: false,
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_chained_pivots(mut self, chain: bool) -> Self {
        self.chain_pivots = chain;
        self
    }

    pub fn with_verify(mut self, verify: VerifyMode) -> Self {
        self.verify = verify;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.is_nan() || self.r < 0.0 {
            return Err(Error::Config(format!("r must be non-negative, got {}", self.r)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DodResult {
    /// Sorted outlier ids.
    pub outliers: Vec<ObjectId>,
    /// Sorted ids that failed filtering and went through verification.
    pub candidates: Vec<ObjectId>,
    /// Sorted ids confirmed as outliers from their exact lists, unverified.
    pub shortcut_outliers: Vec<ObjectId>,
    /// Objects whose filtering count stayed below `k` (verified plus shortcut).
    pub candidate_count: usize,
    /// `f`: candidates that turned out to be inliers.
    pub false_positive_count: usize,
    /// `t`: number of outliers.
    pub outlier_count: usize,
    #[serde(serialize_with = "secs")]
    pub filter_time: Duration,
    #[serde(serialize_with = "secs")]
    pub verify_time: Duration,
    pub distance_evals: u64,
    /// Average vertices visited per greedy traversal.
    pub rho: f64,
    pub threads: usize,
    pub verify_mode: VerifyMode,
}

fn secs<S: serde::Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Verification strategy after resolving [`VerifyMode::Auto`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExactMode {
    VpTree,
    LinearScan,
}

/// Greedy-counting state reused across queries by one worker.
pub struct CountScratch {
    marker: VisitMarker,
    queue: VecDeque<(ObjectId, bool)>,
    pub visited: u64,
}

impl CountScratch {
    pub fn new(n: usize) -> Self {
        CountScratch {
            marker: VisitMarker::new(n),
            queue: VecDeque::new(),
            visited: 0,
        }
    }
}

/// Counts neighbors of `p` reachable by FIFO traversal, up to `k`.
///
/// A vertex within `r` is counted and expanded; a pivot outside `r` is
/// expanded too when reached from `p` or a counted vertex, so links routed
/// through a pivot stay reachable. Stored exact lists act as extra
/// out-links of their vertex.
pub fn greedy_counting(g: &Mrpg, ds: &Dataset, p: ObjectId, r: f64, k: usize) -> usize {
    let mut scratch = CountScratch::new(g.len());
    greedy_counting_with(g, ds, p, r, k, false, &mut scratch, &mut DistCounter::new())
}

#[allow(clippy::too_many_arguments)]
pub fn greedy_counting_with(
    g: &Mrpg,
    ds: &Dataset,
    p: ObjectId,
    r: f64,
    k: usize,
    chain_pivots: bool,
    scratch: &mut CountScratch,
    counter: &mut DistCounter,
) -> usize {
    if k == 0 {
        return 0;
    }
    let CountScratch {
        marker,
        queue,
        visited,
    } = scratch;
    marker.reset();
    queue.clear();
    marker.mark(p);
    queue.push_back((p, true));
    let mut count = 0;
    while let Some((v, in_range)) = queue.pop_front() {
        let extra = g.exact_list(v).map(|l| l.entries()).unwrap_or(&[]);
        let links = g
            .adjacency
            .neighbors(v)
            .iter()
            .copied()
            .chain(extra.iter().map(|e| e.id));
        for u in links {
            if !marker.mark(u) {
                continue;
            }
            *visited += 1;
            if ds.distance_counted(p, u, counter) <= r {
                count += 1;
                if count == k {
                    return count;
                }
                queue.push_back((u, true));
            } else if g.is_pivot(u) && (in_range || chain_pivots) {
                queue.push_back((u, false));
            }
        }
    }
    count
}

/// Exact neighbor count of `p`, capped at `k`.
pub fn exact_counting(
    ds: &Dataset,
    tree: Option<&VpTree>,
    p: ObjectId,
    r: f64,
    k: usize,
    mode: ExactMode,
) -> Result<usize> {
    exact_counting_with(ds, tree, p, r, k, mode, &mut DistCounter::new())
}

fn exact_counting_with(
    ds: &Dataset,
    tree: Option<&VpTree>,
    p: ObjectId,
    r: f64,
    k: usize,
    mode: ExactMode,
    counter: &mut DistCounter,
) -> Result<usize> {
    match mode {
        ExactMode::VpTree => {
            let tree = tree.ok_or_else(|| {
                Error::Config("VP-tree verification requested but no tree was provided".into())
            })?;
            Ok(tree.range_count_counted(ds, p, r, k, counter))
        }
        ExactMode::LinearScan => {
            let mut count = 0;
            if k == 0 {
                return Ok(0);
            }
            for q in ds.ids() {
                if q != p && ds.distance_counted(p, q, counter) <= r {
                    count += 1;
                    if count == k {
                        break;
                    }
                }
            }
            Ok(count)
        }
    }
}

/// Maximum-likelihood intrinsic dimensionality from `sample` objects' nearest
/// neighbor distances (`neighbors` per object), averaged over inverses.
pub fn estimate_intrinsic_dim(ds: &Dataset, sample: usize, neighbors: usize, seed: u64) -> f64 {
    let n = ds.len();
    if n < 3 {
        return 0.0;
    }
    let neighbors = neighbors.min(n - 1).max(2);
    let mut ids: Vec<ObjectId> = ds.ids().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    ids.truncate(sample.max(1));
    let inverses: Vec<f64> = ids
        .par_iter()
        .filter_map(|&p| {
            let mut d: Vec<f64> = ds
                .ids()
                .filter(|&q| q != p)
                .map(|q| ds.distance(p, q))
                .filter(|&d| d > 0.0)
                .collect();
            if d.len() < neighbors {
                return None;
            }
            d.select_nth_unstable_by(neighbors - 1, f64::total_cmp);
            d.truncate(neighbors);
            d.sort_by(f64::total_cmp);
            let t_k = d[neighbors - 1];
            let inv = d[..neighbors - 1].iter().map(|t| (t_k / t).ln()).sum::<f64>()
                / (neighbors - 1) as f64;
            Some(inv)
        })
        .collect();
    if inverses.is_empty() {
        return 0.0;
    }
    let mean_inverse = inverses.iter().sum::<f64>() / inverses.len() as f64;
    if mean_inverse <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / mean_inverse
    }
}

/// Resolves [`VerifyMode::Auto`] against the data.
pub fn resolve_verify_mode(ds: &Dataset, mode: VerifyMode, seed: u64) -> ExactMode {
    match mode {
        VerifyMode::VpTree => ExactMode::VpTree,
        VerifyMode::LinearScan => ExactMode::LinearScan,
        VerifyMode::Auto => {
            if estimate_intrinsic_dim(ds, 100, 10, seed) < LOW_INTRINSIC_DIM {
                ExactMode::VpTree
            } else {
                ExactMode::LinearScan
            }
        }
    }
}

/// Runs detection; see [`detect_partitioned`].
pub fn detect(ds: &Dataset, g: &Mrpg, tree: Option<&VpTree>, params: &DodParams) -> Result<DodResult> {
    detect_partitioned(ds, g, tree, params)
}

/// Per-worker filtering output: candidates, shortcut outliers, distance
/// counter, vertices visited and traversals run.
type FilterPart = (Vec<ObjectId>, Vec<ObjectId>, DistCounter, u64, u64);

/// Outcome of filtering one object.
enum Filtered {
    Inlier,
    Candidate,
    ShortcutOutlier,
}

/// Detection with objects randomly permuted and split into one contiguous
/// chunk per worker, for both phases. The outlier set does not depend on
/// the thread count.
pub fn detect_partitioned(
    ds: &Dataset,
    g: &Mrpg,
    tree: Option<&VpTree>,
    params: &DodParams,
) -> Result<DodResult> {
    params.validate()?;
    if g.len() != ds.len() {
        return Err(Error::Mismatch(format!(
            "graph has {} vertices but dataset has {} objects",
            g.len(),
            ds.len()
        )));
    }
    let n = ds.len();
    let (r, k) = (params.r, params.k);

    let mode = resolve_verify_mode(ds, params.verify, params.seed);
    let built_tree;
    let tree = match (mode, tree, params.verify) {
        (ExactMode::VpTree, None, VerifyMode::Auto) => {
            built_tree = VpTree::build(
                ds,
                VERIFY_TREE_CAPACITY,
                &mut ChaCha8Rng::seed_from_u64(params.seed),
            )?;
            Some(&built_tree)
        }
        (ExactMode::VpTree, None, _) => {
            return Err(Error::Config(
                "VP-tree verification requested but no tree was provided".into(),
            ))
        }
        (_, tree, _) => tree,
    };

    let mut order: Vec<ObjectId> = ds.ids().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(params.seed));
    let chunk_len = n.div_ceil(params.threads).max(1);
    let chunks: Vec<&[ObjectId]> = order.chunks(chunk_len).collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", params.threads)))?;

    let started = Instant::now();
    let filtered: Vec<FilterPart> = pool.install(|| {
        chunks
            .par_iter()
            .with_max_len(1)
            .map(|chunk| {
                let mut scratch = CountScratch::new(n);
                let mut counter = DistCounter::new();
                let (mut candidates, mut shortcut) = (Vec::new(), Vec::new());
                let mut traversals = 0u64;
                for &p in chunk.iter() {
                    let outcome = match g.exact_list(p) {
                        Some(list) if k <= list.len() => {
                            if list.count_within(r) >= k {
                                Filtered::Inlier
                            } else {
                                Filtered::ShortcutOutlier
                            }
                        }
                        _ => {
                            traversals += 1;
                            let c = greedy_counting_with(
                                g,
                                ds,
                                p,
                                r,
                                k,
                                params.chain_pivots,
                                &mut scratch,
                                &mut counter,
                            );
                            if c < k {
                                Filtered::Candidate
                            } else {
                                Filtered::Inlier
                            }
                        }
                    };
                    match outcome {
                        Filtered::Inlier => {}
                        Filtered::Candidate => candidates.push(p),
                        Filtered::ShortcutOutlier => shortcut.push(p),
                    }
                }
                (candidates, shortcut, counter, scratch.visited, traversals)
            })
            .collect()
    });
    let filter_time = started.elapsed();

    let started = Instant::now();
    let verified: Vec<Result<(Vec<ObjectId>, DistCounter)>> = pool.install(|| {
        filtered
            .par_iter()
            .with_max_len(1)
            .map(|(candidates, _, _, _, _)| {
                let mut counter = DistCounter::new();
                let mut outliers = Vec::new();
                for &p in candidates {
                    if exact_counting_with(ds, tree, p, r, k, mode, &mut counter)? < k {
                        outliers.push(p);
                    }
                }
                Ok((outliers, counter))
            })
            .collect()
    });
    let verify_time = started.elapsed();

    let mut counter = DistCounter::new();
    let (mut candidates, mut shortcut, mut outliers) = (Vec::new(), Vec::new(), Vec::new());
    let (mut visited, mut traversals) = (0u64, 0u64);
    for (c, s, cnt, vis, trav) in filtered {
        candidates.extend(c);
        shortcut.extend(s);
        counter.merge(cnt);
        visited += vis;
        traversals += trav;
    }
    for part in verified {
        let (o, cnt) = part?;
        outliers.extend(o);
        counter.merge(cnt);
    }
    outliers.extend(&shortcut);
    candidates.sort_unstable();
    shortcut.sort_unstable();
    outliers.sort_unstable();

    let candidate_count = candidates.len() + shortcut.len();
    Ok(DodResult {
        outlier_count: outliers.len(),
        false_positive_count: candidate_count - outliers.len(),
        candidate_count,
        outliers,
        candidates,
        shortcut_outliers: shortcut,
        filter_time,
        verify_time,
        distance_evals: counter.evals,
        rho: if traversals == 0 {
            0.0
        } else {
            visited as f64 / traversals as f64
        },
        threads: params.threads,
        verify_mode: match mode {
            ExactMode::VpTree => VerifyMode::VpTree,
            ExactMode::LinearScan => VerifyMode::LinearScan,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Adjacency;
    use crate::knn::BuildParams;
    use crate::metric::MetricKind;
    use crate::mrpg::{build_graph, GraphKind};
    use crate::oracle::brute_force_outliers;
    use rand_distr::{Distribution, Normal};

    fn line(points: &[f64]) -> Dataset {
        Dataset::from_vectors(points.iter().map(|&p| vec![p]).collect(), MetricKind::L1).unwrap()
    }

    fn plain(adjacency: Adjacency, pivots: Vec<bool>) -> Mrpg {
        let n = adjacency.len();
        Mrpg {
            kind: GraphKind::KGraph,
            adjacency,
            is_pivot: pivots,
            exact: vec![None; n],
            k: 1,
            k_prime: 1,
        }
    }

    fn complete(n: usize) -> Adjacency {
        let mut adj = Adjacency::new(n);
        for a in 0..n as ObjectId {
            for b in a + 1..n as ObjectId {
                adj.add_edge(a, b);
            }
        }
        adj
    }

    fn gaussian(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows = (0..n)
            .map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        Dataset::from_vectors(rows, MetricKind::L2).unwrap()
    }

    #[test]
    fn greedy_counting_examples() {
        let ds = line(&[0.0, 1.0, 2.0, 10.0]);
        let g = plain(complete(4), vec![false; 4]);
        assert_eq!(greedy_counting(&g, &ds, 0, 1.5, 3), 1);

        let mut scratch = CountScratch::new(4);
        let mut counter = DistCounter::new();
        assert_eq!(greedy_counting_with(&g, &ds, 0, 1.5, 1, false, &mut scratch, &mut counter), 1);
        // Vertex 1 is the first link of 0 and already within range.
        assert_eq!(counter.evals, 1);

        let mut star = Adjacency::new(4);
        star.add_edge(3, 0);
        let isolated = plain(star, vec![false; 4]);
        assert_eq!(greedy_counting(&isolated, &ds, 3, 1.5, 2), 0);
    }

    #[test]
    fn pivots_pass_traversal_through() {
        // 0 - 1 - 2 with 1 far away; 2 is reachable only through pivot 1.
        let ds = line(&[0.0, 50.0, 1.0]);
        let mut adj = Adjacency::new(3);
        adj.add_edge(0, 1);
        adj.add_edge(1, 2);
        let without = plain(adj.clone(), vec![false; 3]);
        assert_eq!(greedy_counting(&without, &ds, 0, 2.0, 5), 0);
        let with = plain(adj, vec![false, true, false]);
        assert_eq!(greedy_counting(&with, &ds, 0, 2.0, 5), 1);
    }

    #[test]
    fn out_of_range_pivots_chain_only_on_request() {
        // 0 - 1 - 2 - 3 with pivots 1 and 2 far away and 3 close to 0.
        let ds = line(&[0.0, 50.0, 60.0, 1.0]);
        let mut adj = Adjacency::new(4);
        adj.add_edge(0, 1);
        adj.add_edge(1, 2);
        adj.add_edge(2, 3);
        let g = plain(adj, vec![false, true, true, false]);
        let mut scratch = CountScratch::new(4);
        let mut counter = DistCounter::new();
        assert_eq!(greedy_counting_with(&g, &ds, 0, 2.0, 5, false, &mut scratch, &mut counter), 0);
        assert_eq!(greedy_counting_with(&g, &ds, 0, 2.0, 5, true, &mut scratch, &mut counter), 1);
    }

    #[test]
    fn exact_counting_modes_agree() {
        let ds = gaussian(1000, 3);
        let tree = VpTree::build(&ds, 12, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let oracle = brute_force_outliers(&ds, 0.3, usize::MAX);
        for p in (0..1000).step_by(20) {
            let truth = oracle.neighbor_counts[p as usize];
            for k in [1, 5, 40] {
                let a = exact_counting(&ds, Some(&tree), p, 0.3, k, ExactMode::VpTree).unwrap();
                let b = exact_counting(&ds, None, p, 0.3, k, ExactMode::LinearScan).unwrap();
                assert_eq!(a, truth.min(k));
                assert_eq!(b, truth.min(k));
            }
        }
        assert_eq!(exact_counting(&ds, None, 0, f64::INFINITY, 1000, ExactMode::LinearScan).unwrap(), 999);
        assert_eq!(exact_counting(&ds, None, 0, 0.0, 5, ExactMode::LinearScan).unwrap(), 0);
        assert!(matches!(
            exact_counting(&ds, None, 0, 0.3, 5, ExactMode::VpTree),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn detect_four_points() {
        let ds = line(&[0.0, 1.0, 2.0, 10.0]);
        let g = plain(complete(4), vec![false; 4]);
        for verify in [VerifyMode::LinearScan, VerifyMode::Auto] {
            let res = detect(&ds, &g, None, &DodParams::new(1.5, 1).with_verify(verify)).unwrap();
            assert_eq!(res.outliers, vec![3]);
            assert_eq!(res.false_positive_count + res.outlier_count, res.candidate_count);
        }
        let all = detect(&ds, &g, None, &DodParams::new(0.5, 1)).unwrap();
        assert_eq!(all.outliers, vec![0, 1, 2, 3]);
        let none = detect(&ds, &g, None, &DodParams::new(10.0, 3)).unwrap();
        assert!(none.outliers.is_empty());
    }

    #[test]
    fn detect_matches_oracle_for_all_variants() {
        let ds = gaussian(1500, 7);
        let params = BuildParams::new(8).with_seed(2);
        for kind in [GraphKind::KGraph, GraphKind::MrpgBasic, GraphKind::Mrpg] {
            let g = build_graph(&ds, kind, &params).unwrap().graph;
            for (r, k) in [(0.1, 3), (0.2, 10), (0.35, 25), (0.05, 1)] {
                let oracle = brute_force_outliers(&ds, r, k);
                let res = detect(&ds, &g, None, &DodParams::new(r, k)).unwrap();
                assert_eq!(res.outliers, oracle.outliers, "{kind} r={r} k={k}");
                // Filtering is a lower bound: no outlier slips through.
                for &o in &oracle.outliers {
                    assert!(
                        res.candidates.binary_search(&o).is_ok()
                            || res.shortcut_outliers.binary_search(&o).is_ok()
                    );
                }
            }
        }
    }

    #[test]
    fn greedy_count_is_lower_bound() {
        let ds = gaussian(600, 8);
        let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(6).with_seed(1))
            .unwrap()
            .graph;
        let oracle = brute_force_outliers(&ds, 0.2, usize::MAX);
        for p in 0..600u32 {
            for k in [1, 7, 30] {
                let c = greedy_counting(&g, &ds, p, 0.2, k);
                assert!(c <= oracle.neighbor_counts[p as usize].min(k));
            }
        }
    }

    #[test]
    fn shortcut_confirms_only_true_outliers() {
        let ds = gaussian(2000, 9);
        let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(6).with_seed(4))
            .unwrap()
            .graph;
        let (r, k) = (0.12, 8);
        let oracle = brute_force_outliers(&ds, r, k);
        let res = detect(&ds, &g, None, &DodParams::new(r, k)).unwrap();
        assert!(!res.shortcut_outliers.is_empty());
        for &p in &res.shortcut_outliers {
            assert!(oracle.neighbor_counts[p as usize] < k);
        }
        assert_eq!(res.outliers, oracle.outliers);
    }

    #[test]
    fn thread_counts_agree() {
        let ds = gaussian(3000, 10);
        let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(8).with_seed(5))
            .unwrap()
            .graph;
        let base = detect(&ds, &g, None, &DodParams::new(0.1, 5)).unwrap();
        for threads in [2, 4, 8] {
            let res = detect_partitioned(&ds, &g, None, &DodParams::new(0.1, 5).with_threads(threads))
                .unwrap();
            assert_eq!(res.outliers, base.outliers);
            assert_eq!(res.candidates, base.candidates);
        }
    }

    #[test]
    fn monotone_in_parameters() {
        let ds = gaussian(800, 11);
        let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(6).with_seed(6))
            .unwrap()
            .graph;
        let run = |r: f64, k: usize| detect(&ds, &g, None, &DodParams::new(r, k)).unwrap().outliers;
        let radii = [0.05, 0.1, 0.2];
        let ks = [2, 5, 10];
        for i in 0..radii.len() {
            for j in 0..ks.len() {
                let base = run(radii[i], ks[j]);
                if i + 1 < radii.len() {
                    let wider = run(radii[i + 1], ks[j]);
                    assert!(wider.iter().all(|o| base.contains(o)));
                }
                if j > 0 {
                    let smaller_k = run(radii[i], ks[j - 1]);
                    assert!(smaller_k.iter().all(|o| base.contains(o)));
                }
            }
        }
    }

    #[test]
    fn invalid_params() {
        let ds = line(&[0.0, 1.0]);
        let g = plain(complete(2), vec![false; 2]);
        assert!(detect(&ds, &g, None, &DodParams::new(-1.0, 1)).is_err());
        assert!(detect(&ds, &g, None, &DodParams::new(1.0, 0)).is_err());
        assert!(detect(&ds, &g, None, &DodParams::new(1.0, 1).with_threads(0)).is_err());
        assert!(matches!(
            detect(&ds, &g, None, &DodParams::new(1.0, 1).with_verify(VerifyMode::VpTree)),
            Err(Error::Config(_))
        ));
        let other = line(&[0.0, 1.0, 2.0]);
        assert!(matches!(detect(&other, &g, None, &DodParams::new(1.0, 1)), Err(Error::Mismatch(_))));
    }

    #[test]
    fn intrinsic_dim_estimates() {
        let low = gaussian(2000, 12);
        let d = estimate_intrinsic_dim(&low, 100, 10, 0);
        assert!(d > 1.0 && d < 3.5, "{d}");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows = (0..2000)
            .map(|_| (0..20).map(|_| normal.sample(&mut rng)).collect())
            .collect();
        let high = Dataset::from_vectors(rows, MetricKind::L2).unwrap();
        assert!(estimate_intrinsic_dim(&high, 100, 10, 0) > LOW_INTRINSIC_DIM);
        assert_eq!(resolve_verify_mode(&low, VerifyMode::Auto, 0), ExactMode::VpTree);
        assert_eq!(resolve_verify_mode(&high, VerifyMode::Auto, 0), ExactMode::LinearScan);
    }
}
