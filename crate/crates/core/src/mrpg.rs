//! Metric randomized proximity graph construction.
//!
//! The pipeline takes the NNDescent+ output and runs four passes over an
//! undirected adjacency: symmetrize the K-NN links, bridge disconnected
//! components through pivot-guided greedy search, add links that turn
//! detours into monotonic paths, and drop links that a shared pivot already
//! makes reachable.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::Adjacency;
use crate::knn::{nndescent, nndescent_plus, AknnGraph, BuildParams, NeighborList};
use crate::metric::{Dataset, DistCounter, ObjectId};
use crate::visit::VisitMarker;

/// Largest dataset accepted by [`build_msg_oracle`].
pub const MSG_ORACLE_MAX_N: usize = 2_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GraphKind {
    /// Plain NNDescent K-NN graph: directed, no pivots, no exact lists.
    KGraph,
    /// Full pipeline with exact K-NN (not K'-NN) lists for the worst objects.
    MrpgBasic,
    Mrpg,
}

impl GraphKind {
    pub fn name(self) -> &'static str {
        match self {
            GraphKind::KGraph => "kgraph",
            GraphKind::MrpgBasic => "mrpg-basic",
            GraphKind::Mrpg => "mrpg",
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            GraphKind::KGraph => 0,
            GraphKind::MrpgBasic => 1,
            GraphKind::Mrpg => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GraphKind::KGraph),
            1 => Some(GraphKind::MrpgBasic),
            2 => Some(GraphKind::Mrpg),
            _ => None,
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "kgraph" => Ok(GraphKind::KGraph),
            "mrpg-basic" => Ok(GraphKind::MrpgBasic),
            "mrpg" => Ok(GraphKind::Mrpg),
            other => Err(Error::Config(format!("unknown graph variant `{other}`"))),
        }
    }
}

/// A proximity graph ready for outlier detection.
#[derive(Clone, Debug, PartialEq)]
pub struct Mrpg {
    pub kind: GraphKind,
    pub adjacency: Adjacency,
    pub is_pivot: Vec<bool>,
    /// Exact nearest-neighbor lists stored for flagged vertices.
    pub exact: Vec<Option<NeighborList>>,
    pub k: usize,
    pub k_prime: usize,
}

impl Mrpg {
    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    #[inline]
    pub fn is_pivot(&self, v: ObjectId) -> bool {
        self.is_pivot[v as usize]
    }

    #[inline]
    pub fn exact_list(&self, v: ObjectId) -> Option<&NeighborList> {
        self.exact[v as usize].as_ref()
    }

    pub fn pivot_count(&self) -> usize {
        self.is_pivot.iter().filter(|&&p| p).count()
    }

    pub fn exact_flagged(&self) -> Vec<ObjectId> {
        (0..self.len() as ObjectId)
            .filter(|&v| self.exact[v as usize].is_some())
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.edge_count()
    }
}

/// Wall time spent in each construction pass.
#[derive(Clone, Copy, Debug, Default)]
pub struct BuildTimings {
    pub nndescent: Duration,
    pub connect_subgraphs: Duration,
    pub remove_detours: Duration,
    pub remove_links: Duration,
}

impl BuildTimings {
    pub fn total(&self) -> Duration {
        self.nndescent + self.connect_subgraphs + self.remove_detours + self.remove_links
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct BuildStats {
    pub iterations: usize,
    pub bridges: usize,
    pub detour_links: usize,
    pub removed_links: usize,
    pub dist_evals: u64,
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub graph: Mrpg,
    pub timings: BuildTimings,
    pub stats: BuildStats,
}

/// Builds the full MRPG.
pub fn build_mrpg(ds: &Dataset, params: &BuildParams) -> Result<Mrpg> {
    build_graph(ds, GraphKind::Mrpg, params).map(|r| r.graph)
}

/// Builds any of the three graph variants, reporting per-pass timings.
pub fn build_graph(ds: &Dataset, kind: GraphKind, params: &BuildParams) -> Result<BuildReport> {
    params.validate()?;
    let n = ds.len();
    let mut params = params.clone();
    params.k = params.k.min(n.saturating_sub(1));
    params.k_prime = match kind {
        GraphKind::MrpgBasic | GraphKind::KGraph => params.k,
        GraphKind::Mrpg => params.k_prime.min(n.saturating_sub(1)),
    };
    let mut timings = BuildTimings::default();
    let mut stats = BuildStats::default();

    if params.k == 0 {
        // A single object: nothing to link.
        let graph = Mrpg {
            kind,
            adjacency: Adjacency::new(n),
            is_pivot: vec![false; n],
            exact: vec![None; n],
            k: params.k,
            k_prime: params.k_prime,
        };
        return Ok(BuildReport { graph, timings, stats });
    }

    let started = Instant::now();
    if kind == GraphKind::KGraph {
        let g = nndescent(ds, params.k, params.max_iters, params.seed)?;
        timings.nndescent = started.elapsed();
        stats.iterations = g.iterations;
        stats.dist_evals = g.dist_evals;
        let lists = g.lists.iter().map(|l| l.ids().collect()).collect();
        let graph = Mrpg {
            kind,
            adjacency: Adjacency::from_lists(lists),
            is_pivot: vec![false; n],
            exact: vec![None; n],
            k: params.k,
            k_prime: params.k,
        };
        return Ok(BuildReport { graph, timings, stats });
    }

    let plus = nndescent_plus(ds, &params)?;
    stats.iterations = plus.graph.iterations;
    stats.dist_evals = plus.graph.dist_evals;
    let mut adjacency = symmetrize(&plus.graph, &plus.exact_flagged);
    timings.nndescent = started.elapsed();

    let mut is_pivot = vec![false; n];
    for &p in &plus.pivots {
        is_pivot[p as usize] = true;
    }
    let mut exact: Vec<Option<NeighborList>> = vec![None; n];
    let AknnGraph { lists, .. } = plus.graph;
    let mut lists = lists;
    for &p in &plus.exact_flagged {
        exact[p as usize] = Some(std::mem::replace(&mut lists[p as usize], NeighborList::new(0)));
    }
    let exact_flags: Vec<bool> = exact.iter().map(Option::is_some).collect();

    let mut counter = DistCounter::new();
    let started = Instant::now();
    stats.bridges = connect_subgraphs(
        &mut adjacency,
        ds,
        &is_pivot,
        params.v_piv_size,
        params.ann_max_hops,
        &mut stream(params.seed, 1),
        &mut counter,
    );
    timings.connect_subgraphs = started.elapsed();

    let started = Instant::now();
    let detours = DetourParams {
        sample_size: params.sample_size_for(n),
        pivot_sample_size: params.pivot_sample_size_for(),
        cap: params.detour_cap_for(),
    };
    let (added, detour_evals) = remove_detours(
        &mut adjacency,
        ds,
        &is_pivot,
        &exact_flags,
        &detours,
        stream(params.seed, 2).next_u64(),
    );
    stats.detour_links = added;
    counter.evals += detour_evals;
    timings.remove_detours = started.elapsed();

    let started = Instant::now();
    stats.removed_links = remove_links(&mut adjacency, &is_pivot);
    timings.remove_links = started.elapsed();
    stats.dist_evals += counter.evals;

    let graph = Mrpg {
        kind,
        adjacency,
        is_pivot,
        exact,
        k: params.k,
        k_prime: params.k_prime,
    };
    Ok(BuildReport { graph, timings, stats })
}

/// Independent random stream `index` derived from the build seed.
fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Converts the directed K-NN lists into an undirected adjacency.
///
/// For exact-flagged objects only the first `K` entries become links; the
/// remainder of an exact K'-NN list is kept beside the graph and is neither
/// mirrored nor stored as an adjacency entry.
pub fn symmetrize(g: &AknnGraph, exact_flagged: &[ObjectId]) -> Adjacency {
    let mut flagged = vec![false; g.len()];
    for &p in exact_flagged {
        flagged[p as usize] = true;
    }
    let mut adjacency = Adjacency::new(g.len());
    for (v, list) in g.lists.iter().enumerate() {
        let take = if flagged[v] { g.k } else { list.len() };
        for u in list.ids().take(take) {
            adjacency.add_edge(v as ObjectId, u);
        }
    }
    adjacency
}

/// Greedy descent toward `query`: repeatedly move to the neighbor closest to
/// `query` while that strictly improves, for at most `max_hops` moves.
pub fn ann_search(
    adjacency: &Adjacency,
    ds: &Dataset,
    start: ObjectId,
    query: ObjectId,
    max_hops: usize,
    counter: &mut DistCounter,
) -> ObjectId {
    let mut current = start;
    let mut current_dist = ds.distance_counted(current, query, counter);
    for _ in 0..max_hops {
        let mut best: Option<(f64, ObjectId)> = None;
        for &w in adjacency.neighbors(current) {
            let d = ds.distance_counted(w, query, counter);
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && w < bid)) {
                best = Some((d, w));
            }
        }
        match best {
            Some((d, w)) if d < current_dist => {
                current = w;
                current_dist = d;
            }
            _ => break,
        }
    }
    current
}

/// Makes the graph connected. Returns the number of bridge edges added.
///
/// BFS from a random object marks one component; if objects remain, a pivot
/// among them is linked to the best greedy-search result started from a few
/// pivots of the visited part, and BFS resumes from that pivot.
pub fn connect_subgraphs<R: Rng>(
    adjacency: &mut Adjacency,
    ds: &Dataset,
    is_pivot: &[bool],
    v_piv_size: usize,
    max_hops: usize,
    rng: &mut R,
    counter: &mut DistCounter,
) -> usize {
    let n = adjacency.len();
    if n == 0 {
        return 0;
    }
    let mut visited = vec![false; n];
    let mut visited_pivots: Vec<ObjectId> = Vec::new();
    let mut visited_all: Vec<ObjectId> = Vec::new();
    let mut next_start = rng.random_range(0..n) as ObjectId;
    let mut bridges = 0;
    let mut queue = VecDeque::new();
    loop {
        visited[next_start as usize] = true;
        queue.push_back(next_start);
        while let Some(v) = queue.pop_front() {
            visited_all.push(v);
            if is_pivot[v as usize] {
                visited_pivots.push(v);
            }
            for &u in adjacency.neighbors(v) {
                if !visited[u as usize] {
                    visited[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        let remaining: Vec<ObjectId> = (0..n as ObjectId).filter(|&v| !visited[v as usize]).collect();
        if remaining.is_empty() {
            return bridges;
        }
        let remaining_pivots: Vec<ObjectId> =
            remaining.iter().copied().filter(|&v| is_pivot[v as usize]).collect();
        let target = *remaining_pivots
            .choose(rng)
            .or_else(|| remaining.choose(rng))
            .expect("remaining is non-empty");
        let pool = if visited_pivots.is_empty() { &visited_all } else { &visited_pivots };
        let starts: Vec<ObjectId> = pool.choose_multiple(rng, v_piv_size.max(1)).copied().collect();
        let mut best: Option<(f64, ObjectId)> = None;
        for s in starts {
            let found = ann_search(adjacency, ds, s, target, max_hops, counter);
            let d = ds.distance_counted(found, target, counter);
            if best.is_none_or(|(bd, bid)| d < bd || (d == bd && found < bid)) {
                best = Some((d, found));
            }
        }
        let (_, anchor) = best.expect("at least one start");
        adjacency.add_edge(target, anchor);
        bridges += 1;
        next_start = target;
    }
}

/// A target `target` for which no monotonic path from `source` was confirmed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetourPair {
    pub source: ObjectId,
    pub target: ObjectId,
    pub dist: f64,
}

struct Traversal {
    detours: Vec<DetourPair>,
    /// Pivots met during the traversal, with their distance to the source.
    pivots: Vec<(f64, ObjectId)>,
}

/// BFS from `start`, tracking distances to `p`. A vertex whose BFS-tree path
/// from `p` is not monotone, and that is not already adjacent to `p`, is
/// reported as a detour target.
#[allow(clippy::too_many_arguments)]
fn traverse_non_monotonic(
    adjacency: &Adjacency,
    ds: &Dataset,
    p: ObjectId,
    start: ObjectId,
    hop_limit: Option<usize>,
    is_pivot: Option<&[bool]>,
    marker: &mut VisitMarker,
    counter: &mut DistCounter,
) -> Traversal {
    marker.reset();
    marker.mark(p);
    marker.mark(start);
    let mut out = Traversal {
        detours: Vec::new(),
        pivots: Vec::new(),
    };
    let start_dist = ds.distance_counted(p, start, counter);
    let mut queue = VecDeque::from([(start, 0usize, start_dist, true)]);
    while let Some((y, hops, dy, mono_y)) = queue.pop_front() {
        if hop_limit.is_some_and(|limit| hops >= limit) {
            continue;
        }
        for &x in adjacency.neighbors(y) {
            if !marker.mark(x) {
                continue;
            }
            let dx = ds.distance_counted(p, x, counter);
            let mono_x = mono_y && dy <= dx;
            let adjacent_to_p = adjacency.has_arc(p, x);
            if !mono_x && !adjacent_to_p {
                out.detours.push(DetourPair {
                    source: p,
                    target: x,
                    dist: dx,
                });
            }
            if let Some(flags) = is_pivot {
                if flags[x as usize] && !adjacent_to_p {
                    out.pivots.push((dx, x));
                }
            }
            queue.push_back((x, hops + 1, dx, mono_x));
        }
    }
    out
}

fn sort_detours(detours: &mut Vec<DetourPair>, cap: usize) {
    detours.sort_by(|a, b| a.dist.total_cmp(&b.dist).then(a.target.cmp(&b.target)));
    detours.dedup_by_key(|d| d.target);
    detours.truncate(cap);
}

/// Targets reachable from `start` within `hop_limit` hops that lack a
/// confirmed monotonic path from `p`, sorted by distance and truncated to `cap`.
pub fn get_non_monotonic(
    adjacency: &Adjacency,
    ds: &Dataset,
    p: ObjectId,
    start: ObjectId,
    hop_limit: Option<usize>,
    cap: usize,
) -> Vec<DetourPair> {
    let mut marker = VisitMarker::new(adjacency.len());
    let mut counter = DistCounter::new();
    let mut detours =
        traverse_non_monotonic(adjacency, ds, p, start, hop_limit, None, &mut marker, &mut counter)
            .detours;
    sort_detours(&mut detours, cap);
    detours
}

/// Chain links for one sorted detour array: `p - A[0]`, `A[j] - A[j+1]`.
fn chain_links(p: ObjectId, detours: &[DetourPair]) -> Vec<(ObjectId, ObjectId)> {
    let mut links = Vec::with_capacity(detours.len());
    let mut prev = p;
    for d in detours {
        links.push((prev, d.target));
        prev = d.target;
    }
    links
}

#[derive(Clone, Copy, Debug)]
pub struct DetourParams {
    pub sample_size: usize,
    pub pivot_sample_size: usize,
    pub cap: usize,
}

/// Weight of a pivot relative to a regular object when sampling sources.
const PIVOT_SAMPLING_WEIGHT: f64 = 4.0;

/// Adds links that give sampled objects monotonic paths to nearby objects.
/// Returns `(links added, distance evaluations)`.
pub fn remove_detours(
    adjacency: &mut Adjacency,
    ds: &Dataset,
    is_pivot: &[bool],
    exact_flags: &[bool],
    params: &DetourParams,
    seed: u64,
) -> (usize, u64) {
    let n = adjacency.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Weighted sampling without replacement via exponential keys u^(1/w).
    let mut keyed: Vec<(f64, ObjectId)> = (0..n as ObjectId)
        .filter(|&v| !exact_flags[v as usize])
        .map(|v| {
            let w = if is_pivot[v as usize] { PIVOT_SAMPLING_WEIGHT } else { 1.0 };
            let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
            (u.powf(1.0 / w), v)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    keyed.truncate(params.sample_size);
    let mut sources: Vec<ObjectId> = keyed.into_iter().map(|(_, v)| v).collect();
    sources.sort_unstable();

    let eligible_pivots: Vec<ObjectId> = (0..n as ObjectId)
        .filter(|&v| is_pivot[v as usize] && !exact_flags[v as usize])
        .collect();
    let pass_seed = rng.next_u64();
    let snapshot: &Adjacency = adjacency;

    let per_source: Vec<(Vec<(ObjectId, ObjectId)>, u64)> = sources
        .par_iter()
        .map_init(
            || VisitMarker::new(n),
            |marker, &p| {
                let mut counter = DistCounter::new();
                let mut local_rng = ChaCha8Rng::seed_from_u64(pass_seed);
                local_rng.set_stream(p as u64);
                let Traversal { mut detours, mut pivots } = traverse_non_monotonic(
                    snapshot,
                    ds,
                    p,
                    p,
                    Some(3),
                    Some(is_pivot),
                    marker,
                    &mut counter,
                );
                pivots.retain(|&(_, v)| !exact_flags[v as usize]);
                pivots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut chosen: Vec<ObjectId> = pivots
                    .iter()
                    .take(params.pivot_sample_size)
                    .map(|&(_, v)| v)
                    .collect();
                if chosen.len() < params.pivot_sample_size {
                    let mut extra: Vec<ObjectId> = eligible_pivots
                        .iter()
                        .copied()
                        .filter(|&v| v != p && !snapshot.has_arc(p, v) && !chosen.contains(&v))
                        .collect();
                    extra.shuffle(&mut local_rng);
                    extra.truncate(params.pivot_sample_size - chosen.len());
                    chosen.extend(extra);
                }
                for pivot in chosen {
                    let found = traverse_non_monotonic(
                        snapshot,
                        ds,
                        p,
                        pivot,
                        Some(2),
                        None,
                        marker,
                        &mut counter,
                    );
                    detours.extend(found.detours);
                }
                sort_detours(&mut detours, params.cap);
                (chain_links(p, &detours), counter.evals)
            },
        )
        .collect();

    let mut added = 0;
    let mut evals = 0;
    for (links, e) in per_source {
        evals += e;
        for (a, b) in links {
            if adjacency.add_edge(a, b) {
                added += 1;
            }
        }
    }
    (added, evals)
}

/// Drops links from non-pivot objects to objects also linked to one of
/// their pivot neighbors. Returns the number of edges removed.
///
/// Candidate removals are planned in parallel and committed serially; each
/// removal is re-checked against the live graph, so the two-hop detour
/// through the pivot always exists when a link is dropped.
pub fn remove_links(adjacency: &mut Adjacency, is_pivot: &[bool]) -> usize {
    let n = adjacency.len() as ObjectId;
    let snapshot: &Adjacency = adjacency;
    let plan: Vec<(ObjectId, ObjectId, ObjectId)> = (0..n)
        .into_par_iter()
        .filter(|&p| !is_pivot[p as usize])
        .flat_map_iter(|p| {
            let mine = snapshot.neighbors(p);
            let mut out = Vec::new();
            for &pivot in mine.iter().filter(|&&q| is_pivot[q as usize]) {
                let theirs = snapshot.neighbors(pivot);
                let (mut i, mut j) = (0, 0);
                while i < mine.len() && j < theirs.len() {
                    match mine[i].cmp(&theirs[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            let x = mine[i];
                            if x != p && x != pivot {
                                out.push((p, pivot, x));
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
            out
        })
        .collect();

    let mut removed = 0;
    for (p, pivot, x) in plan {
        if adjacency.has_arc(p, x)
            && adjacency.has_arc(p, pivot)
            && adjacency.has_arc(pivot, x)
            && adjacency.degree(p) > 1
            && adjacency.degree(x) > 1
        {
            adjacency.remove_edge(p, x);
            removed += 1;
        }
    }
    removed
}

/// Turns `base` into a monotonic search graph by unbounded detour search
/// from every object. Quadratic; refuses more than [`MSG_ORACLE_MAX_N`] objects.
pub fn build_msg_oracle(ds: &Dataset, base: &Adjacency) -> Result<Adjacency> {
    let n = base.len();
    if n > MSG_ORACLE_MAX_N {
        return Err(Error::Config(format!(
            "MSG oracle is limited to {MSG_ORACLE_MAX_N} objects, got {n}"
        )));
    }
    let links: Vec<Vec<(ObjectId, ObjectId)>> = (0..n as ObjectId)
        .into_par_iter()
        .map_init(
            || VisitMarker::new(n),
            |marker, p| {
                let mut counter = DistCounter::new();
                let mut detours =
                    traverse_non_monotonic(base, ds, p, p, None, None, marker, &mut counter)
                        .detours;
                // Objects in other components have no path at all.
                for x in 0..n as ObjectId {
                    if !marker.is_marked(x) {
                        detours.push(DetourPair {
                            source: p,
                            target: x,
                            dist: ds.distance(p, x),
                        });
                    }
                }
                sort_detours(&mut detours, usize::MAX);
                chain_links(p, &detours)
            },
        )
        .collect();
    let mut out = base.clone();
    for (a, b) in links.into_iter().flatten() {
        out.add_edge(a, b);
    }
    Ok(out)
}
