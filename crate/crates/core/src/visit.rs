use crate::metric::ObjectId;

/// Per-query visitation marks over `n` vertices.
///
/// Each mark stores the epoch of the query that set it, so starting a new
/// query is a single increment instead of clearing `n` slots.
#[derive(Clone, Debug)]
pub struct VisitMarker {
    stamps: Vec<u32>,
    epoch: u32,
}

impl VisitMarker {
    pub fn new(n: usize) -> Self {
        VisitMarker {
            stamps: vec![0; n],
            epoch: 1,
        }
    }

    /// Forgets all marks.
    pub fn reset(&mut self) {
        if self.epoch == u32::MAX {
            self.stamps.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        } else {
            self.epoch += 1;
        }
    }

    /// Marks `id` and returns whether it was unmarked before.
    #[inline]
    pub fn mark(&mut self, id: ObjectId) -> bool {
        let slot = &mut self.stamps[id as usize];
        if *slot == self.epoch {
            false
        } else {
            *slot = self.epoch;
            true
        }
    }

    #[inline]
    pub fn is_marked(&self, id: ObjectId) -> bool {
        self.stamps[id as usize] == self.epoch
    }

    pub fn len(&self) -> usize {
        self.stamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stamps.is_empty()
    }
}
