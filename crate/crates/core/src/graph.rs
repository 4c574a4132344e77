//! Adjacency storage and connectivity helpers shared by the graph passes.

use crate::metric::ObjectId;

/// Per-vertex neighbor lists, each kept sorted and free of duplicates.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Adjacency {
    lists: Vec<Vec<ObjectId>>,
}

impl Adjacency {
    pub fn new(n: usize) -> Self {
        Adjacency {
            lists: vec![Vec::new(); n],
        }
    }

    /// Wraps raw lists, sorting and deduplicating each one.
    pub fn from_lists(mut lists: Vec<Vec<ObjectId>>) -> Self {
        for (v, list) in lists.iter_mut().enumerate() {
            list.retain(|&u| u as usize != v);
            list.sort_unstable();
            list.dedup();
        }
        Adjacency { lists }
    }

    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    #[inline]
    pub fn neighbors(&self, v: ObjectId) -> &[ObjectId] {
        &self.lists[v as usize]
    }

    pub fn degree(&self, v: ObjectId) -> usize {
        self.lists[v as usize].len()
    }

    #[inline]
    pub fn has_arc(&self, from: ObjectId, to: ObjectId) -> bool {
        self.lists[from as usize].binary_search(&to).is_ok()
    }

    /// Adds the directed arc `from -> to`. Returns whether it was new.
    pub fn add_arc(&mut self, from: ObjectId, to: ObjectId) -> bool {
        if from == to {
            return false;
        }
        let list = &mut self.lists[from as usize];
        match list.binary_search(&to) {
            Ok(_) => false,
            Err(at) => {
                list.insert(at, to);
                true
            }
        }
    }

    pub fn remove_arc(&mut self, from: ObjectId, to: ObjectId) -> bool {
        let list = &mut self.lists[from as usize];
        match list.binary_search(&to) {
            Ok(at) => {
                list.remove(at);
                true
            }
            Err(_) => false,
        }
    }

    /// Adds an undirected edge. Returns whether either direction was new.
    pub fn add_edge(&mut self, a: ObjectId, b: ObjectId) -> bool {
        let ab = self.add_arc(a, b);
        let ba = self.add_arc(b, a);
        ab || ba
    }

    pub fn remove_edge(&mut self, a: ObjectId, b: ObjectId) -> bool {
        let ab = self.remove_arc(a, b);
        let ba = self.remove_arc(b, a);
        ab || ba
    }

    /// Total number of stored arcs.
    pub fn arc_count(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// Number of distinct vertex pairs joined in at least one direction.
    pub fn edge_count(&self) -> usize {
        let mut count = 0;
        for (v, list) in self.lists.iter().enumerate() {
            let v = v as ObjectId;
            for &u in list {
                if u > v || !self.has_arc(u, v) {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn is_symmetric(&self) -> bool {
        self.lists
            .iter()
            .enumerate()
            .all(|(v, list)| list.iter().all(|&u| self.has_arc(u, v as ObjectId)))
    }

    /// Whether lists are sorted, duplicate-free, and loop-free.
    pub fn is_simple(&self) -> bool {
        self.lists.iter().enumerate().all(|(v, list)| {
            list.windows(2).all(|w| w[0] < w[1]) && list.iter().all(|&u| u as usize != v)
        })
    }

    /// Connected components when arcs are read as undirected edges.
    pub fn component_count(&self) -> usize {
        let mut sets = DisjointSet::new(self.len());
        for (v, list) in self.lists.iter().enumerate() {
            for &u in list {
                sets.union(v, u as usize);
            }
        }
        sets.count()
    }

    pub fn into_lists(self) -> Vec<Vec<ObjectId>> {
        self.lists
    }

    pub fn lists(&self) -> &[Vec<ObjectId>] {
        &self.lists
    }
}

/// Union-find with path halving and union by size.
#[derive(Clone, Debug)]
pub struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
    sets: usize,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
            sets: n,
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the sets of `a` and `b`; returns false if already merged.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        self.sets -= 1;
        true
    }

    pub fn count(&self) -> usize {
        self.sets
    }
}
