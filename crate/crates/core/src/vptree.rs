//! Ball-partitioned vantage-point tree.
//!
//! The same splitting rule serves two purposes: exact range counting with
//! early termination during verification, and the randomized partitioning
//! passes that seed the K-NN graph and designate pivots.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metric::{Dataset, DistCounter, ObjectId};

#[derive(Clone, Debug)]
pub enum VpNode {
    Internal {
        vantage: ObjectId,
        /// Mean distance from the vantage to the members of this node.
        mu: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        members: Vec<ObjectId>,
    },
}

#[derive(Clone, Debug)]
pub struct VpTree {
    nodes: Vec<VpNode>,
    root: usize,
    capacity: usize,
    n: usize,
}

/// Result of one ball split: members with `dist <= mu` go left, the rest right.
struct Split {
    vantage: ObjectId,
    mu: f64,
    left: Vec<ObjectId>,
    right: Vec<ObjectId>,
}

/// Splits `members` around a random vantage. Returns `None` when every member
/// lands on the same side, which only happens for duplicate-heavy subsets.
fn split<R: Rng>(ds: &Dataset, members: &[ObjectId], rng: &mut R) -> Option<Split> {
    let vantage = *members.choose(rng)?;
    let dists: Vec<f64> = members.iter().map(|&m| ds.distance(vantage, m)).collect();
    let mu = dists.iter().sum::<f64>() / dists.len() as f64;
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for (&m, &d) in members.iter().zip(&dists) {
        if d <= mu {
            left.push(m);
        } else {
            right.push(m);
        }
    }
    if right.is_empty() || left.is_empty() {
        return None;
    }
    Some(Split {
        vantage,
        mu,
        left,
        right,
    })
}

/// True when a triangle-inequality lower bound rules out every object within `r`.
/// The relative slack keeps pruning conservative under floating-point rounding.
#[inline]
fn bound_exceeds(lower_bound: f64, r: f64, scale: f64) -> bool {
    lower_bound > r + 1e-9 * scale
}

impl VpTree {
    /// Builds a tree whose leaves hold at most `capacity` objects.
    pub fn build<R: Rng>(ds: &Dataset, capacity: usize, rng: &mut R) -> Result<Self> {
        if capacity < 2 {
            return Err(Error::Config(format!("VP-tree leaf capacity must be >= 2, got {capacity}")));
        }
        let mut tree = VpTree {
            nodes: Vec::new(),
            root: 0,
            capacity,
            n: ds.len(),
        };
        let all: Vec<ObjectId> = ds.ids().collect();
        tree.root = tree.build_node(ds, all, rng);
        Ok(tree)
    }

    fn build_node<R: Rng>(&mut self, ds: &Dataset, members: Vec<ObjectId>, rng: &mut R) -> usize {
        if members.len() > self.capacity {
            if let Some(s) = split(ds, &members, rng) {
                let left = self.build_node(ds, s.left, rng);
                let right = self.build_node(ds, s.right, rng);
                self.nodes.push(VpNode::Internal {
                    vantage: s.vantage,
                    mu: s.mu,
                    left,
                    right,
                });
                return self.nodes.len() - 1;
            }
        }
        self.nodes.push(VpNode::Leaf { members });
        self.nodes.len() - 1
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of objects indexed.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn root(&self) -> &VpNode {
        &self.nodes[self.root]
    }

    pub fn node(&self, index: usize) -> &VpNode {
        &self.nodes[index]
    }

    /// Counts objects other than `q` within distance `r` of `q`, stopping as
    /// soon as the count reaches `k`.
    pub fn range_count(&self, ds: &Dataset, q: ObjectId, r: f64, k: usize) -> usize {
        let mut counter = DistCounter::new();
        self.range_count_counted(ds, q, r, k, &mut counter)
    }

    pub fn range_count_counted(
        &self,
        ds: &Dataset,
        q: ObjectId,
        r: f64,
        k: usize,
        counter: &mut DistCounter,
    ) -> usize {
        if k == 0 {
            return 0;
        }
        let mut count = 0;
        let mut stack = vec![self.root];
        while let Some(index) = stack.pop() {
            match &self.nodes[index] {
                VpNode::Leaf { members } => {
                    for &m in members {
                        if m != q && ds.distance_counted(q, m, counter) <= r {
                            count += 1;
                            if count == k {
                                return count;
                            }
                        }
                    }
                }
                VpNode::Internal {
                    vantage,
                    mu,
                    left,
                    right,
                } => {
                    let d = ds.distance_counted(q, *vantage, counter);
                    let scale = d + mu + r;
                    let visit_left = !bound_exceeds(d - mu, r, scale);
                    let visit_right = !bound_exceeds(mu - d, r, scale);
                    // Push the far side first so the near side is explored first.
                    if d <= *mu {
                        if visit_right {
                            stack.push(*right);
                        }
                        if visit_left {
                            stack.push(*left);
                        }
                    } else {
                        if visit_left {
                            stack.push(*left);
                        }
                        if visit_right {
                            stack.push(*right);
                        }
                    }
                }
            }
        }
        count
    }

    /// All leaves in depth-first order, for structural checks.
    pub fn leaves(&self) -> Vec<&[ObjectId]> {
        let mut out = Vec::new();
        let mut stack = vec![self.root];
        while let Some(index) = stack.pop() {
            match &self.nodes[index] {
                VpNode::Leaf { members } => out.push(members.as_slice()),
                VpNode::Internal { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        out
    }
}

/// Output of the repeated partitioning used to initialize NNDescent+.
#[derive(Clone, Debug, Default)]
pub struct PartitionOutput {
    /// Leaf member lists that are left children (or a root leaf), from all passes.
    pub groups: Vec<Vec<ObjectId>>,
    /// Sorted vantage objects whose left child became a leaf in some pass.
    pub pivots: Vec<ObjectId>,
    /// Sorted objects that never appeared in any group.
    pub uncovered: Vec<ObjectId>,
}

/// Runs `repeats` independent partitioning passes with capacity `c`.
pub fn partition_for_init<R: Rng>(
    ds: &Dataset,
    c: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<PartitionOutput> {
    if c < 2 {
        return Err(Error::Config(format!("partition capacity must be >= 2, got {c}")));
    }
    let mut out = PartitionOutput::default();
    let mut is_pivot = vec![false; ds.len()];
    let mut covered = vec![false; ds.len()];
    for _ in 0..repeats {
        let all: Vec<ObjectId> = ds.ids().collect();
        partition_pass(ds, all, true, c, rng, &mut out.groups, &mut is_pivot);
    }
    for group in &out.groups {
        for &id in group {
            covered[id as usize] = true;
        }
    }
    out.pivots = ids_where(&is_pivot, true);
    out.uncovered = ids_where(&covered, false);
    Ok(out)
}

fn ids_where(flags: &[bool], value: bool) -> Vec<ObjectId> {
    flags
        .iter()
        .enumerate()
        .filter(|(_, &f)| f == value)
        .map(|(i, _)| i as ObjectId)
        .collect()
}

/// One recursive pass. Returns whether the node built from `members` is a leaf.
fn partition_pass<R: Rng>(
    ds: &Dataset,
    members: Vec<ObjectId>,
    is_left: bool,
    c: usize,
    rng: &mut R,
    groups: &mut Vec<Vec<ObjectId>>,
    is_pivot: &mut [bool],
) -> bool {
    if members.len() > c {
        if let Some(s) = split(ds, &members, rng) {
            let left_is_leaf = partition_pass(ds, s.left, true, c, rng, groups, is_pivot);
            partition_pass(ds, s.right, false, c, rng, groups, is_pivot);
            if left_is_leaf {
                is_pivot[s.vantage as usize] = true;
            }
            return false;
        }
    }
    if is_left {
        groups.push(members);
    }
    true
}
