//! Approximate K-NN graph construction.
//!
//! [`nndescent`] is the basic neighbor-descent procedure with random
//! initialization. [`nndescent_plus`] seeds the lists from VP-tree partitions,
//! skips similar-object lists that did not change in the previous iteration,
//! and finishes by computing exact K'-NN lists for the objects whose
//! approximate neighbors are farthest away.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{Dataset, ObjectId};
use crate::visit::VisitMarker;
use crate::vptree::partition_for_init;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub dist: f64,
    pub id: ObjectId,
}

impl Neighbor {
    /// Lexicographic `(dist, id)` order used for every tie-break in the crate.
    #[inline]
    pub fn cmp_key(&self, other: &Neighbor) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.id.cmp(&other.id))
    }
}

/// Bounded list of nearest neighbors, sorted ascending by `(dist, id)`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborList {
    entries: Vec<Neighbor>,
    capacity: usize,
}

impl NeighborList {
    pub fn new(capacity: usize) -> Self {
        NeighborList {
            entries: Vec::with_capacity(capacity),
            capacity,
        }
    }

    /// Builds a list from arbitrary entries, keeping the best `capacity`.
    pub fn from_entries(mut entries: Vec<Neighbor>, capacity: usize) -> Self {
        entries.sort_by(Neighbor::cmp_key);
        entries.dedup_by_key(|e| e.id);
        entries.truncate(capacity);
        NeighborList { entries, capacity }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn entries(&self) -> &[Neighbor] {
        &self.entries
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        self.entries.iter().map(|e| e.id)
    }

    pub fn contains(&self, id: ObjectId) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }

    /// Largest distance held, if any.
    pub fn worst(&self) -> Option<f64> {
        self.entries.last().map(|e| e.dist)
    }

    pub fn distance_sum(&self) -> f64 {
        self.entries.iter().map(|e| e.dist).sum()
    }

    /// Inserts a candidate if it improves the list. Returns whether the list changed.
    pub fn insert(&mut self, id: ObjectId, dist: f64) -> bool {
        if self.capacity == 0 || self.contains(id) {
            return false;
        }
        let candidate = Neighbor { dist, id };
        if self.is_full() {
            let last = self.entries.last().expect("full list with positive capacity");
            if candidate.cmp_key(last) != Ordering::Less {
                return false;
            }
            self.entries.pop();
        }
        let at = self
            .entries
            .partition_point(|e| e.cmp_key(&candidate) == Ordering::Less);
        self.entries.insert(at, candidate);
        true
    }

    /// Number of stored neighbors with `dist <= r`.
    pub fn count_within(&self, r: f64) -> usize {
        self.entries.partition_point(|e| e.dist <= r)
    }
}

/// Directed approximate K-NN graph: one [`NeighborList`] per object.
#[derive(Clone, Debug)]
pub struct AknnGraph {
    pub lists: Vec<NeighborList>,
    /// Whether each object's list changed in the last executed iteration.
    pub updated: Vec<bool>,
    pub k: usize,
    /// Descent iterations actually executed.
    pub iterations: usize,
    pub dist_evals: u64,
}

impl AknnGraph {
    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn neighbors(&self, id: ObjectId) -> &NeighborList {
        &self.lists[id as usize]
    }

    pub fn total_distance(&self) -> f64 {
        self.lists.iter().map(NeighborList::distance_sum).sum()
    }
}

/// Parameters of the graph build pipeline.
///
/// Fields left as `None` are derived from `n` and `k` when the build runs.
#[derive(Clone, Debug)]
pub struct BuildParams {
    /// Out-degree of the approximate K-NN graph.
    pub k: usize,
    /// Size of the exact neighbor lists retrieved for the worst objects.
    pub k_prime: usize,
    /// Number of objects receiving exact lists; default `max(ceil(n/1000), 10)`.
    pub m: Option<usize>,
    pub max_iters: usize,
    pub repeats: usize,
    /// Partition leaf capacity; default `2k`.
    pub partition_capacity: Option<usize>,
    /// When false, every similar-object list is consulted in every iteration.
    pub skip_unchanged: bool,
    /// Pivots used as ANN-search starts when bridging components.
    pub v_piv_size: usize,
    pub ann_max_hops: usize,
    /// Objects sampled for detour removal; default `ceil(n/k)`.
    pub sample_size: Option<usize>,
    /// Pivots searched around each sampled object; default `k`.
    pub pivot_sample_size: Option<usize>,
    /// Maximum detour targets kept per sampled object; default `k^2`.
    pub detour_cap: Option<usize>,
    pub seed: u64,
}

impl BuildParams {
    pub fn new(k: usize) -> Self {
        BuildParams {
            k,
            k_prime: 4 * k,
            m: None,
            max_iters: 12,
            repeats: 3,
            partition_capacity: None,
            skip_unchanged: true,
            v_piv_size: 5,
            ann_max_hops: 10,
            sample_size: None,
            pivot_sample_size: None,
            detour_cap: None,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("K must be positive".into()));
        }
        if self.k_prime < self.k {
            return Err(Error::Config(format!(
                "K' ({}) must be at least K ({})",
                self.k_prime, self.k
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("partition repeats must be positive".into()));
        }
        if matches!(self.partition_capacity, Some(c) if c < 2) {
            return Err(Error::Config("partition capacity must be >= 2".into()));
        }
        if matches!(self.m, Some(0)) {
            return Err(Error::Config("m must be positive".into()));
        }
        Ok(())
    }

    pub fn m_for(&self, n: usize) -> usize {
        self.m.unwrap_or_else(|| n.div_ceil(1000).max(10)).min(n)
    }

    pub fn partition_capacity_for(&self) -> usize {
        self.partition_capacity.unwrap_or(2 * self.k).max(2)
    }

    pub fn sample_size_for(&self, n: usize) -> usize {
        self.sample_size.unwrap_or_else(|| n.div_ceil(self.k))
    }

    pub fn pivot_sample_size_for(&self) -> usize {
        self.pivot_sample_size.unwrap_or(self.k)
    }

    pub fn detour_cap_for(&self) -> usize {
        self.detour_cap.unwrap_or(self.k * self.k)
    }
}

/// Output of [`nndescent_plus`].
#[derive(Clone, Debug)]
pub struct PlusOutput {
    pub graph: AknnGraph,
    /// Sorted pivot ids designated by the partitioning passes.
    pub pivots: Vec<ObjectId>,
    /// Sorted ids whose lists were replaced by exact K'-NN lists.
    pub exact_flagged: Vec<ObjectId>,
}

fn check_k(ds: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::Config("K must be positive".into()));
    }
    if k >= ds.len() {
        return Err(Error::Input(format!(
            "K = {k} requires more than {k} objects, dataset has {}",
            ds.len()
        )));
    }
    Ok(())
}

/// `k` distinct random ids different from `owner`.
fn random_others<R: Rng>(rng: &mut R, n: usize, owner: ObjectId, k: usize) -> Vec<ObjectId> {
    index::sample(rng, n - 1, k)
        .into_iter()
        .map(|i| {
            let i = i as ObjectId;
            if i >= owner {
                i + 1
            } else {
                i
            }
        })
        .collect()
}

/// Basic NNDescent with random initialization.
pub fn nndescent(ds: &Dataset, k: usize, max_iters: usize, seed: u64) -> Result<AknnGraph> {
    check_k(ds, k)?;
    let n = ds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evals = 0u64;
    let mut lists: Vec<NeighborList> = (0..n as ObjectId)
        .map(|p| {
            let mut list = NeighborList::new(k);
            for q in random_others(&mut rng, n, p, k) {
                evals += 1;
                list.insert(q, ds.distance(p, q));
            }
            list
        })
        .collect();
    let (iterations, updated, descent_evals) = descend(ds, &mut lists, max_iters, false);
    Ok(AknnGraph {
        lists,
        updated,
        k,
        iterations,
        dist_evals: evals + descent_evals,
    })
}

/// Reverse-neighbor index of the current lists.
fn reverse_index(lists: &[NeighborList]) -> Vec<Vec<ObjectId>> {
    let mut reverse = vec![Vec::new(); lists.len()];
    for (p, list) in lists.iter().enumerate() {
        for q in list.ids() {
            reverse[q as usize].push(p as ObjectId);
        }
    }
    reverse
}

/// Similar-object lists: forward neighbors united with reverse neighbors.
fn similar_lists(lists: &[NeighborList]) -> Vec<Vec<ObjectId>> {
    let reverse = reverse_index(lists);
    lists
        .par_iter()
        .zip(reverse.into_par_iter())
        .map(|(list, mut ids)| {
            ids.extend(list.ids());
            ids.sort_unstable();
            ids.dedup();
            ids
        })
        .collect()
}

/// Runs descent iterations in place. Returns `(iterations, updated, evals)`.
///
/// Every iteration reads a snapshot of all lists and writes each object's new
/// list independently, so the result does not depend on thread scheduling.
/// With `skip_unchanged`, the similar-object list of `p'` is only expanded
/// when it changed between the previous two snapshots; a list that was
/// already expanded with identical contents cannot yield an improvement,
/// so skipping does not alter the trajectory.
fn descend(
    ds: &Dataset,
    lists: &mut [NeighborList],
    max_iters: usize,
    skip_unchanged: bool,
) -> (usize, Vec<bool>, u64) {
    let n = lists.len();
    let evals = AtomicU64::new(0);
    let mut updated = vec![false; n];
    let mut previous: Option<Vec<Vec<ObjectId>>> = None;
    let mut iterations = 0;
    while iterations < max_iters {
        iterations += 1;
        let similar = similar_lists(lists);
        let fresh: Vec<bool> = match (&previous, skip_unchanged) {
            (Some(prev), true) => prev.iter().zip(&similar).map(|(a, b)| a != b).collect(),
            _ => vec![true; n],
        };
        let snapshot: &[NeighborList] = lists;
        let next: Vec<(NeighborList, bool)> = (0..n)
            .into_par_iter()
            .map_init(
                || VisitMarker::new(n),
                |marker, p| {
                    marker.reset();
                    let p_id = p as ObjectId;
                    marker.mark(p_id);
                    let mut list = snapshot[p].clone();
                    let mut changed = false;
                    let mut local = 0u64;
                    for &via in &similar[p] {
                        if !fresh[via as usize] {
                            continue;
                        }
                        let direct = std::iter::once(via);
                        for cand in direct.chain(similar[via as usize].iter().copied()) {
                            if !marker.mark(cand) || list.contains(cand) {
                                continue;
                            }
                            local += 1;
                            changed |= list.insert(cand, ds.distance(p_id, cand));
                        }
                    }
                    evals.fetch_add(local, AtomicOrdering::Relaxed);
                    (list, changed)
                },
            )
            .collect();
        let mut any = false;
        for (p, (list, changed)) in next.into_iter().enumerate() {
            lists[p] = list;
            updated[p] = changed;
            any |= changed;
        }
        previous = Some(similar);
        if !any {
            break;
        }
    }
    (iterations, updated, evals.into_inner())
}

/// Exact `k_prime` nearest neighbors of `id` by linear scan.
///
/// `k_prime` is capped at `n - 1`; ties are broken by lower id.
pub fn exact_knn(ds: &Dataset, id: ObjectId, k_prime: usize) -> NeighborList {
    let k_prime = k_prime.min(ds.len().saturating_sub(1));
    let mut all: Vec<Neighbor> = ds
        .ids()
        .filter(|&q| q != id)
        .map(|q| Neighbor {
            dist: ds.distance(id, q),
            id: q,
        })
        .collect();
    if k_prime < all.len() {
        all.select_nth_unstable_by(k_prime, Neighbor::cmp_key);
        all.truncate(k_prime);
    }
    all.sort_by(Neighbor::cmp_key);
    NeighborList {
        entries: all,
        capacity: k_prime,
    }
}

/// NNDescent+: partition-seeded initialization, update-status skipping, and
/// exact K'-NN retrieval for the `m` objects with the largest neighbor
/// distance sums.
pub fn nndescent_plus(ds: &Dataset, params: &BuildParams) -> Result<PlusOutput> {
    params.validate()?;
    let k = params.k;
    check_k(ds, k)?;
    let n = ds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let partition = partition_for_init(ds, params.partition_capacity_for(), params.repeats, &mut rng)?;

    let mut evals = 0u64;
    let mut lists: Vec<NeighborList> = (0..n).map(|_| NeighborList::new(k)).collect();
    for group in &partition.groups {
        for (i, &a) in group.iter().enumerate() {
            for &b in &group[i + 1..] {
                let d = ds.distance(a, b);
                evals += 1;
                lists[a as usize].insert(b, d);
                lists[b as usize].insert(a, d);
            }
        }
    }
    // Uncovered objects, and members of undersized groups, get random fill.
    for p in 0..n as ObjectId {
        let list = &mut lists[p as usize];
        while !list.is_full() {
            let q = random_others(&mut rng, n, p, 1)[0];
            if !list.contains(q) {
                evals += 1;
                list.insert(q, ds.distance(p, q));
            }
        }
    }

    let (iterations, updated, descent_evals) =
        descend(ds, &mut lists, params.max_iters, params.skip_unchanged);
    evals += descent_evals;

    let mut ranked: Vec<(f64, ObjectId)> = lists
        .iter()
        .enumerate()
        .map(|(p, l)| (l.distance_sum(), p as ObjectId))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut exact_flagged: Vec<ObjectId> = ranked
        .iter()
        .take(params.m_for(n))
        .map(|&(_, p)| p)
        .collect();
    exact_flagged.sort_unstable();
    let exact: Vec<NeighborList> = exact_flagged
        .par_iter()
        .map(|&p| exact_knn(ds, p, params.k_prime))
        .collect();
    evals += (exact_flagged.len() * (n - 1)) as u64;
    for (&p, list) in exact_flagged.iter().zip(exact) {
        lists[p as usize] = list;
    }

    Ok(PlusOutput {
        graph: AknnGraph {
            lists,
            updated,
            k,
            iterations,
            dist_evals: evals,
        },
        pivots: partition.pivots,
        exact_flagged,
    })
}

/// Mean fraction of each object's true `k`-NN present in its list.
pub fn recall(graph: &AknnGraph, truth: &[Vec<ObjectId>]) -> f64 {
    let total: f64 = graph
        .lists
        .iter()
        .zip(truth)
        .map(|(list, exact)| {
            if exact.is_empty() {
                return 1.0;
            }
            exact.iter().filter(|&&id| list.contains(id)).count() as f64 / exact.len() as f64
        })
        .sum();
    total / graph.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::MetricKind;
    use rand_distr::{Distribution, Normal};

    fn gaussian(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let rows = (0..n)
            .map(|_| vec![normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        Dataset::from_vectors(rows, MetricKind::L2).unwrap()
    }

    /// Brute-force K-NN ids with `(dist, id)` ordering, independent of `exact_knn`.
    fn brute_knn(ds: &Dataset, k: usize) -> Vec<Vec<ObjectId>> {
        ds.ids()
            .map(|p| {
                let mut all: Vec<(f64, ObjectId)> =
                    ds.ids().filter(|&q| q != p).map(|q| (ds.distance(p, q), q)).collect();
                all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                all.into_iter().take(k).map(|(_, q)| q).collect()
            })
            .collect()
    }

    fn line(points: &[f64]) -> Dataset {
        Dataset::from_vectors(points.iter().map(|&p| vec![p]).collect(), MetricKind::L1).unwrap()
    }

    #[test]
    fn neighbor_list_keeps_best_sorted() {
        let mut list = NeighborList::new(3);
        assert!(list.insert(5, 2.0));
        assert!(list.insert(1, 2.0));
        assert!(list.insert(9, 0.5));
        assert!(!list.insert(9, 0.1), "duplicate id");
        assert!(!list.insert(7, 3.0), "worse than worst of a full list");
        assert!(list.insert(4, 1.0));
        let ids: Vec<_> = list.ids().collect();
        assert_eq!(ids, vec![9, 4, 1]);
        assert_eq!(list.count_within(1.0), 2);
    }

    #[test]
    fn exact_knn_examples() {
        let ds = line(&[0.0, 1.0, 2.0, 10.0]);
        let list = exact_knn(&ds, 0, 2);
        assert_eq!(
            list.entries(),
            &[Neighbor { dist: 1.0, id: 1 }, Neighbor { dist: 2.0, id: 2 }]
        );
        let full = exact_knn(&ds, 0, 3);
        let d: Vec<f64> = full.entries().iter().map(|e| e.dist).collect();
        assert_eq!(d, vec![1.0, 2.0, 10.0]);
        let ties = line(&[5.0, 4.0, 6.0, 0.0]);
        let ids: Vec<_> = exact_knn(&ties, 0, 2).ids().collect();
        assert_eq!(ids, vec![1, 2]);
    }

    #[test]
    fn k_must_be_below_n() {
        let ds = line(&[0.0, 1.0, 2.0]);
        assert!(matches!(nndescent(&ds, 3, 5, 0), Err(Error::Input(_))));
    }

    #[test]
    fn saturated_lists_hold_everything() {
        let ds = gaussian(11, 3);
        let g = nndescent(&ds, 10, 12, 7).unwrap();
        for (p, list) in g.lists.iter().enumerate() {
            let mut ids: Vec<_> = list.ids().collect();
            ids.sort_unstable();
            let expected: Vec<ObjectId> = (0..11).filter(|&q| q != p as ObjectId).collect();
            assert_eq!(ids, expected);
        }
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let ds = gaussian(100, 3);
        let g = nndescent(&ds, 5, 0, 7).unwrap();
        assert_eq!(g.iterations, 0);
        let again = nndescent(&ds, 5, 0, 7).unwrap();
        assert_eq!(g.lists, again.lists);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, list) in g.lists.iter().enumerate() {
            let mut expected = random_others(&mut rng, 100, p as ObjectId, 5);
            let mut got: Vec<_> = list.ids().collect();
            expected.sort_unstable();
            got.sort_unstable();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn nndescent_recall() {
        let ds = gaussian(500, 11);
        let truth = brute_knn(&ds, 10);
        let g = nndescent(&ds, 10, 12, 1).unwrap();
        let rec = recall(&g, &truth);
        assert!(rec >= 0.90, "recall {rec}");
    }

    #[test]
    fn plus_beats_one_random_iteration() {
        let ds = gaussian(500, 12);
        let truth = brute_knn(&ds, 10);
        let params = BuildParams::new(10).with_seed(4);
        let plus = nndescent_plus(&ds, &params).unwrap();
        let one = nndescent(&ds, 10, 1, 4).unwrap();
        assert!(recall(&plus.graph, &truth) >= recall(&one, &truth));
    }

    #[test]
    fn exact_flagged_lists_match_brute_force() {
        let ds = gaussian(800, 13);
        let params = BuildParams::new(8).with_seed(2);
        let out = nndescent_plus(&ds, &params).unwrap();
        assert_eq!(out.exact_flagged.len(), params.m_for(800));
        let truth = brute_knn(&ds, params.k_prime);
        for &p in &out.exact_flagged {
            let got: Vec<_> = out.graph.lists[p as usize].ids().collect();
            assert_eq!(got, truth[p as usize]);
        }
    }

    #[test]
    fn exact_flagged_capped_by_n() {
        let ds = gaussian(12, 13);
        let mut params = BuildParams::new(3);
        params.m = Some(50);
        let out = nndescent_plus(&ds, &params).unwrap();
        assert_eq!(out.exact_flagged.len(), 12);
    }

    #[test]
    fn lists_only_improve() {
        let ds = gaussian(400, 5);
        let mut prev = f64::INFINITY;
        for iters in 0..6 {
            let g = nndescent(&ds, 8, iters, 3).unwrap();
            let total = g.total_distance();
            assert!(total <= prev + 1e-9);
            prev = total;
        }
    }

    #[test]
    fn skipping_preserves_fixpoint() {
        for seed in 0..4 {
            let ds = gaussian(300, 40 + seed);
            let mut params = BuildParams::new(6).with_seed(seed);
            params.max_iters = usize::MAX;
            let skip = nndescent_plus(&ds, &params).unwrap();
            params.skip_unchanged = false;
            let full = nndescent_plus(&ds, &params).unwrap();
            assert_eq!(skip.graph.total_distance(), full.graph.total_distance());
            assert_eq!(skip.graph.iterations, full.graph.iterations);
            assert!(skip.graph.dist_evals <= full.graph.dist_evals);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let ds = gaussian(300, 8);
        let params = BuildParams::new(6).with_seed(99);
        let a = nndescent_plus(&ds, &params).unwrap();
        let b = nndescent_plus(&ds, &params).unwrap();
        assert_eq!(a.graph.lists, b.graph.lists);
        assert_eq!(a.pivots, b.pivots);
        assert_eq!(a.exact_flagged, b.exact_flagged);
    }
}
