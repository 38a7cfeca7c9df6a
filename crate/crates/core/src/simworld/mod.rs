//! Synthetic parking lot, ground-truth trajectory, drifting odometry and noisy
//! detections standing in for the vehicle's sensors and perception.

mod bev;
mod detections;
mod lot;
mod odometry;
mod trajectory;

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cloud::SemanticPointCloud;
use crate::error::{Error, Result};
use crate::slots::SlotObservation;
use crate::{Pose2d, Vec2d};

pub use bev::{simulate_semantic_frames, BevConfig, SemanticFrame};
pub use detections::simulate_detections;
pub use lot::{generate_lot, LotLayout, INCLINED_SPACING, LANE_WIDTH, SIDE_MARGIN};
pub(crate) use lot::slot_outline;
pub use odometry::simulate_odometry;
pub use trajectory::generate_trajectory;

pub const DEFAULT_SLOT_WIDTH: f64 = 2.5;
pub const DEFAULT_SLOT_DEPTH: f64 = 5.3;
pub const DEFAULT_DETECT_RADIUS: f64 = 8.0;
pub const DEFAULT_STEP: f64 = 0.1;
/// Spacing of points sampled along painted lines.
pub const CLOUD_SPACING: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueSlot {
    pub id: u64,
    pub entry_mid: Vec2d,
    /// Unit direction along the entry edge.
    pub entry_dir: Vec2d,
    pub inclined: bool,
}

/// A driving lane, as the segment along its center line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lane {
    pub start: Vec2d,
    pub end: Vec2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub lot_width: f64,
    pub lot_height: f64,
    pub slots: Vec<TrueSlot>,
    pub semantic_cloud: SemanticPointCloud,
    pub true_slot_width: f64,
    pub true_slot_depth: f64,
    pub lanes: Vec<Lane>,
}

impl WorldModel {
    pub fn contains(&self, p: Vec2d) -> bool {
        (0.0..=self.lot_width).contains(&p.x) && (0.0..=self.lot_height).contains(&p.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometrySample {
    pub frame: u64,
    pub pose: Pose2d,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionFrame {
    pub frame: u64,
    pub true_pose: Pose2d,
    pub roll: f64,
    pub pitch: f64,
    pub detections: Vec<SlotObservation>,
}

/// Noise model of the simulated sensors. Odometry sigmas scale with the square root
/// of distance traveled (random walk per meter); the yaw bias scales linearly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimNoiseConfig {
    pub odo_trans_sigma: f64,
    pub odo_rot_sigma: f64,
    pub odo_drift_bias: f64,
    pub det_pos_sigma: f64,
    pub det_dir_sigma: f64,
    pub false_positive_rate: f64,
    pub miss_rate: f64,
    pub speed_bump_frames: BTreeSet<u64>,
    pub bump_roll_pitch: f64,
    pub seed: u64,
}

impl Default for SimNoiseConfig {
    fn default() -> Self {
        Self {
            odo_trans_sigma: 0.01,
            odo_rot_sigma: 0.002,
            odo_drift_bias: 5e-4,
            det_pos_sigma: 0.05,
            det_dir_sigma: 0.01,
            false_positive_rate: 0.05,
            miss_rate: 0.05,
            speed_bump_frames: BTreeSet::new(),
            bump_roll_pitch: 0.08,
            seed: 0,
        }
    }
}

impl SimNoiseConfig {
    /// Every noise source off.
    pub fn noiseless(seed: u64) -> Self {
        Self {
            odo_trans_sigma: 0.0,
            odo_rot_sigma: 0.0,
            odo_drift_bias: 0.0,
            det_pos_sigma: 0.0,
            det_dir_sigma: 0.0,
            false_positive_rate: 0.0,
            miss_rate: 0.0,
            speed_bump_frames: BTreeSet::new(),
            bump_roll_pitch: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("odo_trans_sigma", self.odo_trans_sigma),
            ("odo_rot_sigma", self.odo_rot_sigma),
            ("det_pos_sigma", self.det_pos_sigma),
            ("det_dir_sigma", self.det_dir_sigma),
            ("bump_roll_pitch", self.bump_roll_pitch),
        ];
        for (name, v) in sigmas {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value ≥ 0, got {v}")));
            }
        }
        if !self.odo_drift_bias.is_finite() {
            return Err(Error::Config("odo_drift_bias must be finite".into()));
        }
        for (name, v) in [("false_positive_rate", self.false_positive_rate), ("miss_rate", self.miss_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }
}

/// Independent random streams derived from one seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Lot = 1,
    Odometry = 2,
    Detections = 3,
    Semantic = 4,
}

pub(crate) fn rng_for(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
