//! Incremental mapping: keyframe selection, slot management and joint optimization
//! of car poses and parking slots.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cloud::{SemanticClass, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::graph::{
    compute_global_direction, Factor, FactorGraph, GlobalDirection, Information, NodeKey, OptimizationReport,
    OptimizerSettings, GLOBAL_DIRECTION_SLOTS,
};
use crate::map::{slot_line_cloud, MapDocument, MapSlot, MAP_VERSION};
use crate::simworld::{DetectionFrame, OdometrySample, SemanticFrame, DEFAULT_SLOT_DEPTH};
use crate::slots::{
    associate, filter_step, find_adjacent_pairs, observation_weight, push_anchor, reregister_all, update_slot,
    AssociationOutcome, FilterAction, SlotId, SlotObservation, SlotStore,
};
use crate::{Pose2d, Vec2d};

/// Odometry uncertainty used to weight odometry factors: per-edge variance
/// `trans_sigma²·d` for translation and `rot_sigma²·d + (drift_bias·d)²` for heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OdometryNoiseModel {
    pub trans_sigma: f64,
    pub rot_sigma: f64,
    pub drift_bias: f64,
    /// Variance floors keep noiseless runs well conditioned.
    pub min_trans_sigma: f64,
    pub min_rot_sigma: f64,
}

impl Default for OdometryNoiseModel {
    fn default() -> Self {
        Self {
            trans_sigma: 0.01,
            rot_sigma: 0.002,
            drift_bias: 5e-4,
            min_trans_sigma: 1e-3,
            min_rot_sigma: 1e-4,
        }
    }
}

impl OdometryNoiseModel {
    pub fn information(&self, dist: f64) -> Result<Information<f64>> {
        let d = dist.max(0.0);
        let vt = self.trans_sigma.powi(2) * d + self.min_trans_sigma.powi(2);
        let vr = self.rot_sigma.powi(2) * d + (self.drift_bias * d).powi(2) + self.min_rot_sigma.powi(2);
        Information::diagonal(&[1.0 / vt, 1.0 / vt, 1.0 / vr])
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.trans_sigma, self.rot_sigma, self.drift_bias, self.min_trans_sigma, self.min_rot_sigma];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) || self.min_trans_sigma <= 0.0 || self.min_rot_sigma <= 0.0 {
            return Err(Error::Config("odometry noise model must be non-negative with positive floors".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GcslamConfig {
    /// Odometry distance between keyframes, meters.
    pub keyframe_dist: f64,
    /// Optimize after this many keyframes.
    pub optimize_every: usize,
    /// Disables optimization entirely (poses stay on the odometry chain).
    pub optimize: bool,
    pub prior_information: f64,
    pub odometry: OdometryNoiseModel,
    pub registration_information: f64,
    pub adjacent_information: f64,
    pub vertical_information: f64,
    pub max_iters: usize,
    /// Depth used to redraw slot outlines in the exported map.
    pub slot_depth: f64,
    /// Grid cell for thinning the accumulated marking cloud, meters.
    pub map_voxel: f64,
    pub no_aet: bool,
    pub no_gvet: bool,
    pub no_filter: bool,
}

impl Default for GcslamConfig {
    fn default() -> Self {
        Self {
            keyframe_dist: 0.5,
            optimize_every: 1,
            optimize: true,
            prior_information: 1e6,
            odometry: OdometryNoiseModel::default(),
            registration_information: 400.0,
            adjacent_information: 25.0,
            vertical_information: 25.0,
            max_iters: 30,
            slot_depth: DEFAULT_SLOT_DEPTH,
            map_voxel: 0.05,
            no_aet: false,
            no_gvet: false,
            no_filter: false,
        }
    }
}

impl GcslamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.keyframe_dist > 0.0) || !self.keyframe_dist.is_finite() {
            return Err(Error::Config("keyframe_dist must be positive".into()));
        }
        if self.optimize_every == 0 || self.max_iters == 0 {
            return Err(Error::Config("optimize_every and max_iters must be positive".into()));
        }
        let weights = [
            self.prior_information,
            self.registration_information,
            self.adjacent_information,
            self.vertical_information,
            self.slot_depth,
            self.map_voxel,
        ];
        if weights.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::Config("information weights, slot_depth and map_voxel must be positive".into()));
        }
        self.odometry.validate()
    }

    fn settings(&self) -> OptimizerSettings<f64> {
        OptimizerSettings {
            max_iters: self.max_iters,
            ..Default::default()
        }
    }
}

/// Pose of a new node from the previous node and two odometry readings:
/// `prev_node · prev_odo⁻¹ · cur_odo`.
pub fn chain_pose(prev_node: &Pose2d, prev_odo: &Pose2d, cur_odo: &Pose2d) -> Pose2d {
    prev_node.compose(&prev_odo.between(cur_odo))
}

/// One optimization run, as logged by the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationLogEntry {
    pub keyframe: u64,
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub converged: bool,
    pub poses: usize,
    pub slots: usize,
    pub factors: usize,
}

impl OptimizationLogEntry {
    fn new(keyframe: u64, r: &OptimizationReport<f64>, g: &FactorGraph<f64>) -> Self {
        Self {
            keyframe,
            iterations: r.iterations,
            initial_cost: r.initial_cost,
            final_cost: r.final_cost,
            converged: r.converged,
            poses: g.num_poses(),
            slots: g.num_slots(),
            factors: g.factors().len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Gcslam {
    config: GcslamConfig,
    graph: FactorGraph<f64>,
    store: SlotStore,
    direction: Option<GlobalDirection<f64>>,
    /// Slots in the order they became stable; the first five define the direction.
    stabilized: Vec<SlotId>,
    last_frame: Option<u64>,
    /// Last keyframe: id, odometry reading.
    last_keyframe: Option<(u64, Pose2d)>,
    last_odometry: Option<OdometrySample>,
    keyframes: Vec<u64>,
    adjacent: BTreeSet<(SlotId, SlotId)>,
    vertical: BTreeSet<(SlotId, SlotId)>,
    since_optimize: usize,
    log: Vec<OptimizationLogEntry>,
    /// Marking points per semantic frame: the keyframe they hang off, their offset
    /// from it, and the car-frame cloud.
    markings: Vec<(u64, Pose2d, SemanticPointCloud)>,
}

impl Gcslam {
    pub fn new(config: GcslamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            graph: FactorGraph::new(),
            store: SlotStore::new(),
            direction: None,
            stabilized: Vec::new(),
            last_frame: None,
            last_keyframe: None,
            last_odometry: None,
            keyframes: Vec::new(),
            adjacent: BTreeSet::new(),
            vertical: BTreeSet::new(),
            since_optimize: 0,
            log: Vec::new(),
            markings: Vec::new(),
        })
    }

    pub fn config(&self) -> &GcslamConfig {
        &self.config
    }

    pub fn graph(&self) -> &FactorGraph<f64> {
        &self.graph
    }

    pub fn slots(&self) -> &SlotStore {
        &self.store
    }

    pub fn global_direction(&self) -> Option<GlobalDirection<f64>> {
        self.direction
    }

    pub fn keyframes(&self) -> &[u64] {
        &self.keyframes
    }

    pub fn optimization_log(&self) -> &[OptimizationLogEntry] {
        &self.log
    }

    pub fn adjacent_pairs(&self) -> &BTreeSet<(SlotId, SlotId)> {
        &self.adjacent
    }

    /// Current keyframe poses in frame order.
    pub fn trajectory(&self) -> Vec<(u64, Pose2d)> {
        self.graph.poses().collect()
    }

    /// Feeds one frame. Returns whether it became a keyframe.
    pub fn process_frame(&mut self, odo: &OdometrySample, det: &DetectionFrame) -> Result<bool> {
        if odo.frame != det.frame {
            return Err(Error::InvalidInput(format!(
                "odometry frame {} paired with detection frame {}",
                odo.frame, det.frame
            )));
        }
        if let Some(last) = self.last_frame {
            if odo.frame <= last {
                return Err(Error::OutOfOrder { last, got: odo.frame });
            }
        }
        if !odo.pose.is_finite() {
            return Err(Error::NonFinite("odometry pose"));
        }
        for obs in &det.detections {
            obs.validate()?;
        }
        self.last_frame = Some(odo.frame);
        self.last_odometry = Some(*odo);

        let frame = odo.frame;
        let pose = match self.last_keyframe {
            None => {
                self.graph.add_pose(frame, odo.pose)?;
                let p = self.config.prior_information;
                self.graph.add_prior(frame, odo.pose, Information::diagonal(&[p, p, p])?)?;
                odo.pose
            }
            Some((prev_id, prev_odo)) => {
                let dist = prev_odo.translation().distance(odo.pose.translation());
                if dist < self.config.keyframe_dist {
                    return Ok(false);
                }
                let prev_node = self.graph.pose(prev_id).ok_or(Error::MissingPose(prev_id))?;
                let pose = chain_pose(&prev_node, &prev_odo, &odo.pose);
                self.graph.add_pose(frame, pose)?;
                self.graph.add_factor(Factor::Odometry {
                    from: prev_id,
                    to: frame,
                    relative: prev_odo.between(&odo.pose),
                    info: self.config.odometry.information(dist)?,
                })?;
                pose
            }
        };
        self.last_keyframe = Some((frame, odo.pose));
        self.keyframes.push(frame);

        self.manage_slots(frame, &pose, &det.detections)?;

        self.since_optimize += 1;
        if self.config.optimize && self.since_optimize >= self.config.optimize_every {
            self.optimize_now(frame)?;
        }
        Ok(true)
    }

    /// Keeps the marking points of the most recently processed frame for the exported
    /// map. They are attached to the latest keyframe through the odometry offset.
    pub fn add_semantic_frame(&mut self, frame: &SemanticFrame) -> Result<()> {
        let (Some(odo), Some((key, key_odo))) = (self.last_odometry, self.last_keyframe) else {
            return Err(Error::InvalidInput("semantic frame before any odometry".into()));
        };
        if odo.frame != frame.frame {
            return Err(Error::InvalidInput(format!(
                "semantic frame {} does not match the last processed frame {}",
                frame.frame, odo.frame
            )));
        }
        let mut cloud = SemanticPointCloud::default();
        for lp in &frame.cloud.points {
            if lp.class != SemanticClass::SlotLine {
                cloud.points.push(*lp);
            }
        }
        let offset = key_odo.between(&odo.pose);
        self.markings.push((key, offset, cloud.voxel_downsample(self.config.map_voxel)));
        Ok(())
    }

    fn manage_slots(&mut self, frame: u64, pose: &Pose2d, detections: &[SlotObservation]) -> Result<()> {
        // association; the heaviest detection wins when several hit one slot
        let mut hits: BTreeMap<SlotId, (f64, &SlotObservation)> = BTreeMap::new();
        let mut created = BTreeSet::new();
        for obs in detections {
            let world = pose.transform_point(obs.midpoint_car);
            let w = observation_weight(obs);
            let id = match associate(world, self.store.index()) {
                AssociationOutcome::Associated(id) => id,
                AssociationOutcome::CreateNew => {
                    let id = self.store.create(world, frame);
                    created.insert(id);
                    if self.config.no_filter {
                        self.store.get_mut(id).expect("just created").stable = true;
                    }
                    id
                }
                AssociationOutcome::Discard => continue,
            };
            match hits.get(&id) {
                Some((best, _)) if *best >= w => {}
                _ => {
                    hits.insert(id, (w, obs));
                }
            }
        }
        let observed: BTreeSet<SlotId> = hits.keys().copied().collect();

        // unstable-slot filter; stable slots keep counting observations here
        let actions = filter_step(self.store.iter_mut().filter(|s| !s.stable), &observed);
        for s in self.store.iter_mut().filter(|s| s.stable) {
            if !actions.iter().any(|a| matches!(a, FilterAction::Stabilize(id) if *id == s.id)) {
                s.exist_count += 1;
                if observed.contains(&s.id) {
                    s.obs_count += 1;
                }
            }
        }
        if self.config.no_filter {
            self.stabilized.extend(created.iter().copied());
        }
        let mut deleted = BTreeSet::new();
        for action in &actions {
            match *action {
                FilterAction::Stabilize(id) => self.stabilized.push(id),
                FilterAction::Delete(id) => {
                    self.store.remove(id);
                    self.graph.remove_slot(id);
                    self.adjacent.retain(|&(a, b)| a != id && b != id);
                    self.vertical.retain(|&(a, b)| a != id && b != id);
                    deleted.insert(id);
                }
                FilterAction::Keep(_) => {}
            }
        }

        // fusion and registration factors
        let reg_info = Information::isotropic(2, self.config.registration_information)?;
        let mut frame_obs = Vec::new();
        for (&id, &(w, obs)) in &hits {
            if deleted.contains(&id) {
                continue;
            }
            let world = pose.transform_point(obs.midpoint_car);
            let entry = obs.entry_vec_car().rotate(pose.theta);
            let slot = self.store.get(id).expect("hit slot exists");
            let mut updated = update_slot(slot, world, entry, w);
            push_anchor(&mut updated, obs, w);
            let (position, entry_vec) = (updated.midpoint(), updated.entry_vec);
            *self.store.get_mut(id).expect("hit slot exists") = updated;
            if self.graph.slot(id).is_none() {
                self.graph.add_slot(id, position, entry_vec)?;
            } else {
                self.graph.set_slot_entry(id, entry_vec)?;
            }
            self.graph.add_factor(Factor::Registration {
                pose: frame,
                slot: id,
                obs: obs.midpoint_car,
                info: reg_info,
            })?;
            frame_obs.push((id, world));
        }
        self.store.rebuild_index();

        if self.direction.is_none() && self.stabilized.len() >= GLOBAL_DIRECTION_SLOTS {
            let vecs: Vec<Vec2d> = self.stabilized[..GLOBAL_DIRECTION_SLOTS]
                .iter()
                .filter_map(|id| self.store.get(*id).map(|s| s.entry_vec))
                .collect();
            self.direction = compute_global_direction(&vecs);
            if self.direction.is_some() {
                // pairs seen before the direction existed
                for pair in self.adjacent.clone() {
                    self.add_vertical(pair)?;
                }
            }
        }

        for pair in find_adjacent_pairs(&frame_obs) {
            if !self.adjacent.insert(pair) {
                continue;
            }
            if !self.config.no_aet {
                self.graph.add_factor(Factor::Adjacent {
                    k: pair.1,
                    p: pair.0,
                    info: Information::isotropic(2, self.config.adjacent_information)?,
                })?;
            }
            self.add_vertical(pair)?;
        }
        Ok(())
    }

    fn add_vertical(&mut self, pair: (SlotId, SlotId)) -> Result<()> {
        let Some(dir) = self.direction else { return Ok(()) };
        if self.config.no_gvet || !self.vertical.insert(pair) {
            return Ok(());
        }
        self.graph.add_factor(Factor::GlobalVertical {
            k: pair.1,
            p: pair.0,
            dir,
            info: Information::scalar(self.config.vertical_information)?,
        })
    }

    fn optimize_now(&mut self, keyframe: u64) -> Result<()> {
        self.since_optimize = 0;
        let report = self.graph.optimize(&self.config.settings())?;
        self.log.push(OptimizationLogEntry::new(keyframe, &report, &self.graph));
        let poses: BTreeMap<u64, Pose2d> = self.graph.poses().collect();
        let slots = reregister_all(&self.store.to_vec(), &poses)?;
        for s in &slots {
            if self.graph.slot(s.id).is_some() {
                self.graph.set_slot_entry(s.id, s.entry_vec)?;
            }
        }
        self.store.replace_all(slots);
        Ok(())
    }

    /// Runs a final optimization if keyframes arrived since the last one.
    pub fn finish(&mut self) -> Result<()> {
        if self.config.optimize && self.since_optimize > 0 {
            let last = *self.keyframes.last().expect("keyframe exists when counter is positive");
            self.optimize_now(last)?;
        }
        Ok(())
    }

    /// Stable slots at their optimized positions, with fused heading and width.
    pub fn map_slots(&self) -> Vec<MapSlot> {
        self.store
            .stable()
            .map(|s| {
                let position = self.graph.slot(s.id).map_or(s.midpoint(), |n| n.position);
                MapSlot {
                    id: s.id,
                    x: position.x,
                    y: position.y,
                    theta: s.entry_vec.angle(),
                    width: s.width(),
                    weight: s.weight,
                    obs_count: s.obs_count,
                    stable: s.stable,
                    truth_id: if s.is_true_detection() { s.truth_id() } else { None },
                }
            })
            .collect()
    }

    /// Global map: stable slots, their adjacency, redrawn slot outlines and the
    /// marking points of every keyframe placed at its optimized pose.
    pub fn export_map(&self) -> MapDocument {
        let slots = self.map_slots();
        let ids: BTreeSet<u64> = slots.iter().map(|s| s.id).collect();
        let adjacent_pairs = self
            .adjacent
            .iter()
            .filter(|(a, b)| ids.contains(a) && ids.contains(b))
            .copied()
            .collect();
        let mut cloud = slot_line_cloud(&slots, self.config.slot_depth);
        let mut markings = SemanticPointCloud::default();
        for (key, offset, local) in &self.markings {
            if let Some(pose) = self.graph.pose(*key) {
                markings.extend(&local.transformed(&pose.compose(offset)));
            }
        }
        cloud.extend(&markings.voxel_downsample(self.config.map_voxel));
        MapDocument {
            version: MAP_VERSION,
            slot_depth: self.config.slot_depth,
            slots,
            adjacent_pairs,
            global_direction: self.direction.map(|d| d.dir()),
            semantic_cloud: cloud,
        }
    }

    pub fn is_fixed(&self, frame: u64) -> bool {
        self.graph.is_fixed(NodeKey::Pose(frame))
    }
}

/// Runs the pipeline over a whole dataset.
pub fn run_gcslam(
    config: &GcslamConfig,
    odometry: &[OdometrySample],
    detections: &[DetectionFrame],
    semantic: &[SemanticFrame],
) -> Result<Gcslam> {
    if odometry.len() != detections.len() {
        return Err(Error::InvalidInput(format!(
            "{} odometry samples but {} detection frames",
            odometry.len(),
            detections.len()
        )));
    }
    let semantic: BTreeMap<u64, &SemanticFrame> = semantic.iter().map(|f| (f.frame, f)).collect();
    let mut slam = Gcslam::new(config.clone())?;
    for (odo, det) in odometry.iter().zip(detections) {
        slam.process_frame(odo, det)?;
        if let Some(sf) = semantic.get(&odo.frame) {
            slam.add_semantic_frame(sf)?;
        }
    }
    slam.finish()?;
    Ok(slam)
}
