//! Global slot management: association of per-frame detections to global slots,
//! the unstable-slot filter, and weighted fusion of observations.

mod association;
mod filter;
mod weighting;

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::{Pose2d, Vec2d};

pub use association::{associate, find_adjacent_pairs, AssociationOutcome, SlotIndex};
pub use filter::{filter_step, FilterAction};
pub(crate) use weighting::push_anchor;
pub use weighting::{angle_weight, fuse_weighted, observation_weight, reregister_all, update_slot, weight_from_parts};

pub type SlotId = u64;

/// Distance bands for association, in meters. Fixed values.
pub const ASSOCIATE_MAX_DIST: f64 = 1.0;
pub const CREATE_MIN_DIST: f64 = 2.0;
pub const ADJACENT_MIN_DIST: f64 = 2.0;
pub const ADJACENT_MAX_DIST: f64 = 2.5;

/// Unstable-slot filter thresholds.
pub const STABILIZE_OBS_COUNT: u32 = 9;
pub const DELETE_EXIST_COUNT: u32 = 30;

/// Number of most recent observations kept per slot for re-registration.
pub const MAX_ANCHORS: usize = 20;

/// One detection of a slot's entry edge in the car frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotObservation {
    pub midpoint_car: Vec2d,
    /// Unit direction along the entry edge.
    pub entry_dir_car: Vec2d,
    /// Measured entry-edge length (distance between the two detected endpoints).
    pub entry_width: f64,
    pub confidence: f64,
    /// Reliability from image-center distance; 1 at the center, 0 at the detection range.
    pub dist_ic: f64,
    pub roll: f64,
    pub pitch: f64,
    pub frame: u64,
    /// Simulator ground-truth slot id. Evaluation only; the pipeline never reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_id: Option<u64>,
}

impl SlotObservation {
    /// Entry-edge vector in the car frame (direction × width).
    pub fn entry_vec_car(&self) -> Vec2d {
        self.entry_dir_car.scale(self.entry_width)
    }

    pub fn validate(&self) -> crate::Result<()> {
        let ok = self.midpoint_car.is_finite()
            && ((self.entry_dir_car.norm() - 1.0).abs() <= 1e-9)
            && (0.0..=1.0).contains(&self.confidence)
            && (0.0..=1.0).contains(&self.dist_ic)
            && self.entry_width.is_finite()
            && self.entry_width > 0.0
            && self.roll.is_finite()
            && self.pitch.is_finite();
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidInput(format!("malformed slot observation in frame {}", self.frame)))
        }
    }
}

/// A stored observation used to re-register the slot after the car poses move.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub frame: u64,
    pub weight: f64,
    pub obs: SlotObservation,
}

/// Fused world-frame slot state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalSlot {
    pub id: SlotId,
    /// Entry-edge midpoint with heading along the entry edge.
    pub node: Pose2d,
    /// Entry-edge vector in the world frame; its length is the slot width.
    pub entry_vec: Vec2d,
    pub weight: f64,
    pub obs_count: u32,
    pub exist_count: u32,
    pub stable: bool,
    pub created_frame: u64,
    pub anchors: VecDeque<Anchor>,
}

impl GlobalSlot {
    /// A freshly created slot. Its counters are zero until the filter counts the
    /// creating frame; `update_slot` then sets the state from the first observation.
    pub fn new(id: SlotId, created_frame: u64) -> Self {
        Self {
            id,
            node: Pose2d::identity(),
            entry_vec: Vec2d::new(1.0, 0.0),
            weight: 1.0,
            obs_count: 0,
            exist_count: 0,
            stable: false,
            created_frame,
            anchors: VecDeque::new(),
        }
    }

    pub fn midpoint(&self) -> Vec2d {
        self.node.translation()
    }

    pub fn width(&self) -> f64 {
        self.entry_vec.norm()
    }

    /// True when most stored observations came from a real slot. Uses the
    /// simulator's labels, so only meaningful for evaluation.
    pub fn is_true_detection(&self) -> bool {
        let real = self.anchors.iter().filter(|a| a.obs.truth_id.is_some()).count();
        2 * real > self.anchors.len()
    }

    /// Majority ground-truth id among stored observations.
    pub fn truth_id(&self) -> Option<u64> {
        let mut votes: BTreeMap<u64, usize> = BTreeMap::new();
        for a in &self.anchors {
            if let Some(t) = a.obs.truth_id {
                *votes.entry(t).or_default() += 1;
            }
        }
        votes.into_iter().max_by_key(|&(id, n)| (n, std::cmp::Reverse(id))).map(|(id, _)| id)
    }
}

/// Owning collection of global slots plus the spatial index over their midpoints.
#[derive(Debug, Clone, Default)]
pub struct SlotStore {
    slots: BTreeMap<SlotId, GlobalSlot>,
    index: SlotIndex,
    next_id: SlotId,
}

impl SlotStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn get(&self, id: SlotId) -> Option<&GlobalSlot> {
        self.slots.get(&id)
    }

    pub fn get_mut(&mut self, id: SlotId) -> Option<&mut GlobalSlot> {
        self.slots.get_mut(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &GlobalSlot> {
        self.slots.values()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut GlobalSlot> {
        self.slots.values_mut()
    }

    pub fn stable(&self) -> impl Iterator<Item = &GlobalSlot> {
        self.slots.values().filter(|s| s.stable)
    }

    pub fn index(&self) -> &SlotIndex {
        &self.index
    }

    /// Creates an empty slot at `position` and indexes it.
    pub fn create(&mut self, position: Vec2d, frame: u64) -> SlotId {
        let id = self.next_id;
        self.next_id += 1;
        let mut slot = GlobalSlot::new(id, frame);
        slot.node = Pose2d::new(position.x, position.y, 0.0);
        self.slots.insert(id, slot);
        self.index.insert(id, position);
        id
    }

    pub fn remove(&mut self, id: SlotId) -> Option<GlobalSlot> {
        let s = self.slots.remove(&id);
        if s.is_some() {
            self.rebuild_index();
        }
        s
    }

    pub fn rebuild_index(&mut self) {
        self.index = SlotIndex::build(self.slots.values().map(|s| (s.id, s.midpoint())));
    }

    /// Replaces every slot with its re-registered state and rebuilds the index.
    pub fn replace_all(&mut self, slots: Vec<GlobalSlot>) {
        self.slots = slots.into_iter().map(|s| (s.id, s)).collect();
        self.rebuild_index();
    }

    pub fn to_vec(&self) -> Vec<GlobalSlot> {
        self.slots.values().cloned().collect()
    }
}
