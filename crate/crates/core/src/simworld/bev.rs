use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::{LabeledPoint, SemanticClass, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::kdtree::KdTree;
use crate::Pose2d;

use super::{rng_for, Stream, WorldModel};

/// Simulated bird's-eye-view segmentation: painted markings near the car, in the car frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BevConfig {
    /// Visible range around the car, meters.
    pub range: f64,
    /// Emit a cloud every this many frames.
    pub every: u64,
    /// Probability that a marking point survives segmentation.
    pub keep_prob: f64,
    pub point_sigma: f64,
    /// Expected number of spurious blobs per frame (stains, reflections).
    pub clutter_blobs: f64,
    pub clutter_points: usize,
    /// Blob radius, meters.
    pub clutter_radius: f64,
}

impl Default for BevConfig {
    fn default() -> Self {
        Self {
            range: 10.0,
            every: 10,
            keep_prob: 0.5,
            point_sigma: 0.03,
            clutter_blobs: 2.0,
            clutter_points: 40,
            clutter_radius: 0.4,
        }
    }
}

impl BevConfig {
    pub fn noiseless() -> Self {
        Self {
            keep_prob: 1.0,
            point_sigma: 0.0,
            clutter_blobs: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.range > 0.0) || self.every == 0 {
            return Err(Error::Config("bev range and cadence must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.keep_prob) || !(self.point_sigma >= 0.0) || !(self.clutter_blobs >= 0.0) {
            return Err(Error::Config("bev noise parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticFrame {
    pub frame: u64,
    pub cloud: SemanticPointCloud,
}

/// Car-frame segmentation clouds on every `cfg.every`-th frame.
pub fn simulate_semantic_frames(world: &WorldModel, traj: &[Pose2d], cfg: &BevConfig, seed: u64) -> Vec<SemanticFrame> {
    let mut rng = rng_for(seed, Stream::Semantic);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let pts: Vec<_> = world.semantic_cloud.points.iter().map(|lp| lp.p).collect();
    let tree = KdTree::build(&pts);
    let mut out = Vec::new();
    for (k, pose) in traj.iter().enumerate() {
        let frame = k as u64;
        if frame % cfg.every != 0 {
            continue;
        }
        let mut cloud = SemanticPointCloud::default();
        for i in tree.within_radius(pose.translation(), cfg.range) {
            let keep = rng.random::<f64>() < cfg.keep_prob;
            let (nx, ny): (f64, f64) = (unit.sample(&mut rng), unit.sample(&mut rng));
            if !keep {
                continue;
            }
            let lp = world.semantic_cloud.points[i];
            let local = pose.inverse_transform_point(lp.p) + Vec2::new(nx, ny).scale(cfg.point_sigma);
            cloud.points.push(LabeledPoint { p: local, class: lp.class });
        }
        // Poisson-distributed blob count via Bernoulli trials
        let trials = (cfg.clutter_blobs.ceil() as usize).max(1) * 4;
        let p = (cfg.clutter_blobs / trials as f64).min(1.0);
        for _ in 0..trials {
            if rng.random::<f64>() >= p {
                continue;
            }
            let r = cfg.range * rng.random::<f64>().sqrt();
            let center = Vec2::from_angle(rng.random_range(-std::f64::consts::PI..std::f64::consts::PI)).scale(r);
            let class = SemanticClass::ALL[rng.random_range(0..SemanticClass::ALL.len())];
            for _ in 0..cfg.clutter_points {
                let off = Vec2::new(unit.sample(&mut rng), unit.sample(&mut rng)).scale(cfg.clutter_radius / 2.0);
                cloud.points.push(LabeledPoint { p: center + off, class });
            }
        }
        out.push(SemanticFrame { frame, cloud });
    }
    out
}
