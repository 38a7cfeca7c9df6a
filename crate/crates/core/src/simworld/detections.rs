use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Vec2;
use crate::kdtree::KdTree;
use crate::slots::SlotObservation;
use crate::Pose2d;

use super::{rng_for, DetectionFrame, SimNoiseConfig, Stream, WorldModel};

/// False positives keep at least this distance from every true slot midpoint.
pub const FALSE_POSITIVE_CLEARANCE: f64 = 0.5;

/// Per-frame slot detections in the car frame.
///
/// On speed-bump frames the planar assumption fails: detections are displaced
/// radially by `range · tan(bump)` and the frame reports the bump angle as roll and pitch.
pub fn simulate_detections(
    world: &WorldModel,
    traj: &[Pose2d],
    noise: &SimNoiseConfig,
    detect_radius: f64,
) -> Vec<DetectionFrame> {
    let mut rng = rng_for(noise.seed, Stream::Detections);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mids: Vec<_> = world.slots.iter().map(|s| s.entry_mid).collect();
    let tree = KdTree::build(&mids);

    let mut frames = Vec::with_capacity(traj.len());
    for (k, pose) in traj.iter().enumerate() {
        let frame = k as u64;
        let bump = noise.speed_bump_frames.contains(&frame);
        let tilt = if bump { noise.bump_roll_pitch } else { 0.0 };
        let mut detections = Vec::new();
        for i in tree.within_radius(pose.translation(), detect_radius) {
            let slot = &world.slots[i];
            // draw every variate so the stream does not depend on the miss outcome
            let miss = rng.random::<f64>() < noise.miss_rate;
            let (nx, ny, nd, nw): (f64, f64, f64, f64) =
                (unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng), unit.sample(&mut rng));
            let confidence = rng.random_range(0.5..=1.0);
            if miss {
                continue;
            }
            let mut mid = pose.inverse_transform_point(slot.entry_mid);
            if bump {
                mid = mid.scale(1.0 + tilt.tan());
            }
            mid = mid + Vec2::new(nx, ny).scale(noise.det_pos_sigma);
            let range = mid.norm();
            if range > detect_radius {
                continue;
            }
            let dir = slot.entry_dir.angle() - pose.theta + noise.det_dir_sigma * nd;
            detections.push(SlotObservation {
                midpoint_car: mid,
                entry_dir_car: Vec2::from_angle(dir),
                entry_width: (world.true_slot_width + noise.det_pos_sigma * nw).max(0.1),
                confidence,
                dist_ic: dist_ic(range, detect_radius),
                roll: tilt,
                pitch: tilt,
                frame,
                truth_id: Some(slot.id),
            });
        }
        if noise.false_positive_rate > 0.0 && rng.random::<f64>() < noise.false_positive_rate {
            if let Some(mid) = false_positive_position(&mut rng, pose, &tree, detect_radius) {
                let range = mid.norm();
                detections.push(SlotObservation {
                    midpoint_car: mid,
                    entry_dir_car: Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)),
                    entry_width: rng.random_range(2.0..3.0),
                    confidence: rng.random_range(0.2..=0.7),
                    dist_ic: dist_ic(range, detect_radius),
                    roll: tilt,
                    pitch: tilt,
                    frame,
                    truth_id: None,
                });
            }
        }
        frames.push(DetectionFrame {
            frame,
            true_pose: *pose,
            roll: tilt,
            pitch: tilt,
            detections,
        });
    }
    frames
}

/// `1 − range / radius`, clamped to [0, 1].
pub fn dist_ic(range: f64, radius: f64) -> f64 {
    (1.0 - range / radius).clamp(0.0, 1.0)
}

fn false_positive_position<R: Rng>(rng: &mut R, pose: &Pose2d, tree: &KdTree<f64>, radius: f64) -> Option<crate::Vec2d> {
    for _ in 0..64 {
        let r = radius * rng.random::<f64>().sqrt();
        let a = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
        let local = Vec2::from_angle(a).scale(r);
        let world = pose.transform_point(local);
        let clear = tree
            .nearest(world)
            .is_none_or(|(_, d2)| d2.sqrt() >= FALSE_POSITIVE_CLEARANCE);
        if clear {
            return Some(local);
        }
    }
    None
}
