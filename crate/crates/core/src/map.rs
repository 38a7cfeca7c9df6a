//! Global map: fused parking slots, their adjacency and the semantic point cloud.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cloud::{sample_segment, SemanticClass, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::graph::GlobalDirection;
use crate::metrics::AdjacentPair;
use crate::simworld::{slot_outline, CLOUD_SPACING};
use crate::Vec2d;

pub const MAP_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSlot {
    pub id: u64,
    /// Entry-edge midpoint.
    pub x: f64,
    pub y: f64,
    /// Heading of the entry edge.
    pub theta: f64,
    pub width: f64,
    pub weight: f64,
    pub obs_count: u32,
    pub stable: bool,
    /// Simulator label of the detections behind this slot; absent for spurious slots.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_id: Option<u64>,
}

impl MapSlot {
    pub fn midpoint(&self) -> Vec2d {
        Vec2d::new(self.x, self.y)
    }

    pub fn entry_vec(&self) -> Vec2d {
        Vec2d::from_angle(self.theta).scale(self.width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDocument {
    pub version: u32,
    pub slot_depth: f64,
    pub slots: Vec<MapSlot>,
    /// Adjacent slot pairs `(min id, max id)`.
    pub adjacent_pairs: Vec<(u64, u64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub global_direction: Option<Vec2d>,
    pub semantic_cloud: SemanticPointCloud,
}

impl MapDocument {
    pub fn empty(slot_depth: f64) -> Self {
        Self {
            version: MAP_VERSION,
            slot_depth,
            slots: Vec::new(),
            adjacent_pairs: Vec::new(),
            global_direction: None,
            semantic_cloud: SemanticPointCloud::default(),
        }
    }

    pub fn check_version(&self) -> Result<()> {
        if self.version != MAP_VERSION {
            return Err(Error::Version {
                what: "map",
                found: self.version,
                expected: MAP_VERSION,
            });
        }
        Ok(())
    }

    pub fn slot(&self, id: u64) -> Option<&MapSlot> {
        self.slots.iter().find(|s| s.id == id)
    }

    /// Adjacent pairs whose slots are both in the map, as metric inputs.
    pub fn metric_pairs(&self) -> Vec<AdjacentPair<f64>> {
        let by_id: BTreeMap<u64, &MapSlot> = self.slots.iter().map(|s| (s.id, s)).collect();
        self.adjacent_pairs
            .iter()
            .filter_map(|(a, b)| {
                let (sa, sb) = (by_id.get(a)?, by_id.get(b)?);
                // k is the later slot; metrics do not depend on the choice
                Some(AdjacentPair {
                    sk: sb.midpoint(),
                    wk: sb.entry_vec(),
                    sp: sa.midpoint(),
                    wp: sa.entry_vec(),
                })
            })
            .collect()
    }

    /// The stored direction, or one derived from the first five slots by id.
    pub fn direction(&self) -> Option<GlobalDirection<f64>> {
        if let Some(d) = self.global_direction {
            return GlobalDirection::new(d);
        }
        let vecs: Vec<Vec2d> = self.slots.iter().map(MapSlot::entry_vec).collect();
        crate::graph::compute_global_direction(&vecs)
    }

    /// Slots whose detections were mostly spurious.
    pub fn false_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.stable && s.truth_id.is_none()).count()
    }
}

/// Slot outlines drawn from fused slot poses, labeled as slot lines.
pub fn slot_line_cloud(slots: &[MapSlot], depth: f64) -> SemanticPointCloud {
    let mut cloud = SemanticPointCloud::default();
    for s in slots {
        let dir = Vec2d::from_angle(s.theta);
        for (a, b) in slot_outline(s.midpoint(), dir, s.width, depth) {
            for p in sample_segment(a, b, CLOUD_SPACING) {
                cloud.push(p, SemanticClass::SlotLine);
            }
        }
    }
    cloud
}
