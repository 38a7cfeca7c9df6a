use crate::kdtree::KdTree;
use crate::Vec2d;

use super::{SlotId, ADJACENT_MAX_DIST, ADJACENT_MIN_DIST, ASSOCIATE_MAX_DIST, CREATE_MIN_DIST};

/// Nearest-neighbour index over global slot midpoints. Holds a kd-tree over the
/// last rebuild plus a short list of slots inserted since.
#[derive(Debug, Clone)]
pub struct SlotIndex {
    ids: Vec<SlotId>,
    tree: KdTree<f64>,
    pending: Vec<(SlotId, Vec2d)>,
}

impl Default for SlotIndex {
    fn default() -> Self {
        Self::build(std::iter::empty())
    }
}

impl SlotIndex {
    pub fn build(entries: impl IntoIterator<Item = (SlotId, Vec2d)>) -> Self {
        let (ids, points): (Vec<_>, Vec<_>) = entries.into_iter().unzip();
        Self {
            tree: KdTree::build(&points),
            ids,
            pending: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len() + self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn insert(&mut self, id: SlotId, position: Vec2d) {
        self.pending.push((id, position));
    }

    /// Nearest slot and its distance. Equal distances resolve to the smaller id.
    pub fn nearest(&self, q: Vec2d) -> Option<(SlotId, f64)> {
        let mut best = self
            .tree
            .nearest(q)
            .map(|(i, d2)| (self.ids[i], d2));
        for &(id, p) in &self.pending {
            let d2 = (p - q).norm_squared();
            best = match best {
                Some((bid, bd)) if bd < d2 || (bd == d2 && bid < id) => Some((bid, bd)),
                _ => Some((id, d2)),
            };
        }
        best.map(|(id, d2)| (id, d2.sqrt()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssociationOutcome {
    Associated(SlotId),
    CreateNew,
    Discard,
}

/// Classifies a world-frame observation by its distance to the nearest global slot.
pub fn associate(obs_world: Vec2d, index: &SlotIndex) -> AssociationOutcome {
    match index.nearest(obs_world) {
        None => AssociationOutcome::CreateNew,
        Some((id, d)) if d <= ASSOCIATE_MAX_DIST => AssociationOutcome::Associated(id),
        Some((_, d)) if d >= CREATE_MIN_DIST => AssociationOutcome::CreateNew,
        Some(_) => AssociationOutcome::Discard,
    }
}

/// Pairs of slots seen in one keyframe whose observed midpoints are adjacent.
/// Returned pairs are `(min id, max id)`, sorted and unique.
pub fn find_adjacent_pairs(frame_obs: &[(SlotId, Vec2d)]) -> Vec<(SlotId, SlotId)> {
    let mut pairs = Vec::new();
    for (i, &(a, pa)) in frame_obs.iter().enumerate() {
        for &(b, pb) in &frame_obs[i + 1..] {
            if a == b {
                continue;
            }
            let d = pa.distance(pb);
            if (ADJACENT_MIN_DIST..=ADJACENT_MAX_DIST).contains(&d) {
                pairs.push((a.min(b), a.max(b)));
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}
