use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{wrap_angle, Vec2};
use crate::scalar::Real;
use crate::{Pose2d, Vec2d};

use super::{Anchor, GlobalSlot, SlotObservation, MAX_ANCHORS};

/// Plane-violation weight from roll and pitch: `exp(-10 (|roll| + |pitch|) / 2)`.
pub fn angle_weight<T: Real>(roll: T, pitch: T) -> T {
    (T::lit(-10.0) * (roll.abs() + pitch.abs()) / T::lit(2.0)).exp()
}

/// Overall observation weight `0.2·conf + 0.5·dist_ic + 0.3·w_rp`, kept strictly positive.
pub fn weight_from_parts<T: Real>(confidence: T, dist_ic: T, roll: T, pitch: T) -> T {
    let w = T::lit(0.2) * confidence + T::lit(0.5) * dist_ic + T::lit(0.3) * angle_weight(roll, pitch);
    w.max(T::min_positive_value())
}

pub fn observation_weight(obs: &SlotObservation) -> f64 {
    weight_from_parts(obs.confidence, obs.dist_ic, obs.roll, obs.pitch)
}

/// Weighted running fusion of a quantity. `count` is the observation count including
/// the new one. Returns the fused value and the new slot weight.
pub fn fuse_weighted<T: Real>(current: T, weight: T, count: u32, observed: T, w_obs: T) -> (T, T) {
    let prior = weight * T::lit(count.saturating_sub(1) as f64);
    let total = prior + w_obs;
    if prior == T::zero() {
        return (observed, total / T::lit(count.max(1) as f64));
    }
    let value = (current * prior + observed * w_obs) / total;
    (value, total / T::lit(count.max(1) as f64))
}

/// Angle form of the fusion: the correction is interpolated along the shortest arc.
fn fuse_angle(current: f64, weight: f64, count: u32, observed: f64, w_obs: f64) -> f64 {
    let prior = weight * count.saturating_sub(1) as f64;
    let delta = wrap_angle(observed - current);
    wrap_angle(current + delta * w_obs / (prior + w_obs))
}

/// Entry edges are undirected lines; flip `observed` by π when it points away from `reference`.
fn align_direction(reference: f64, observed: f64) -> f64 {
    if wrap_angle(observed - reference).abs() > std::f64::consts::FRAC_PI_2 {
        wrap_angle(observed + std::f64::consts::PI)
    } else {
        observed
    }
}

/// Folds one world-frame observation into `slot`. `slot.obs_count` must already count it.
pub fn update_slot(slot: &GlobalSlot, position: Vec2d, entry_vec: Vec2d, w_obs: f64) -> GlobalSlot {
    let mut out = slot.clone();
    let c = slot.obs_count.max(1);
    let (x, w_new) = fuse_weighted(slot.node.x, slot.weight, c, position.x, w_obs);
    let (y, _) = fuse_weighted(slot.node.y, slot.weight, c, position.y, w_obs);
    let (width, _) = fuse_weighted(slot.width(), slot.weight, c, entry_vec.norm(), w_obs);
    let current_dir = slot.entry_vec.angle();
    let obs_dir = if c == 1 { entry_vec.angle() } else { align_direction(current_dir, entry_vec.angle()) };
    let dir = fuse_angle(current_dir, slot.weight, c, obs_dir, w_obs);
    out.entry_vec = Vec2::from_angle(dir).scale(width);
    out.node = Pose2d::new(x, y, dir);
    out.weight = w_new;
    out
}

/// Records an observation on the slot, dropping the oldest beyond the anchor cap.
pub(crate) fn push_anchor(slot: &mut GlobalSlot, obs: &SlotObservation, weight: f64) {
    slot.anchors.push_back(Anchor {
        frame: obs.frame,
        weight,
        obs: obs.clone(),
    });
    while slot.anchors.len() > MAX_ANCHORS {
        slot.anchors.pop_front();
    }
}

/// Recomputes each slot's midpoint and entry edge by replaying its stored
/// observations, in order, through the weighted fusion using the given car poses.
pub fn reregister_all(slots: &[GlobalSlot], poses: &BTreeMap<u64, Pose2d>) -> Result<Vec<GlobalSlot>> {
    slots
        .iter()
        .map(|slot| {
            if slot.anchors.is_empty() {
                return Ok(slot.clone());
            }
            let mut replay = slot.clone();
            replay.weight = 1.0;
            for (i, a) in slot.anchors.iter().enumerate() {
                let pose = poses.get(&a.frame).ok_or(Error::MissingPose(a.frame))?;
                let position = pose.transform_point(a.obs.midpoint_car);
                let entry = a.obs.entry_vec_car().rotate(pose.theta);
                replay.obs_count = i as u32 + 1;
                replay = update_slot(&replay, position, entry, a.weight);
            }
            let mut out = slot.clone();
            out.node = replay.node;
            out.entry_vec = replay.entry_vec;
            Ok(out)
        })
        .collect()
}
