//! Localization against a prior global map: semantic ICP, jump rejection and a
//! sliding-window graph fusing odometry with ICP poses.

use serde::{Deserialize, Serialize};

use crate::cloud::{SemanticClass, SemanticPointCloud};
use crate::error::{Error, Result};
use crate::gcslam::{chain_pose, OdometryNoiseModel};
use crate::graph::{Factor, FactorGraph, Information, NodeKey, OptimizerSettings};
use crate::kdtree::KdTree;
use crate::simworld::OdometrySample;
use crate::{wrap_angle, Pose2d, Vec2d};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SflocConfig {
    /// Side of the square local map, meters.
    pub local_map_size: f64,
    /// Run ICP on every this many frames.
    pub icp_every: u64,
    /// ICP poses further than this from the previous accepted one are rejected, meters.
    pub jump_threshold: f64,
    pub icp_max_iters: usize,
    /// Pose change below which ICP stops, meters and radians.
    pub icp_tol: f64,
    pub max_corr_dist: f64,
    pub min_correspondences: usize,
    /// Diagonal information of ICP pose factors (x, y, θ).
    pub icp_information: [f64; 3],
    /// Number of pose nodes kept in the window.
    pub window: usize,
    pub odometry: OdometryNoiseModel,
}

impl Default for SflocConfig {
    fn default() -> Self {
        Self {
            local_map_size: 30.0,
            icp_every: 10,
            jump_threshold: 2.0,
            icp_max_iters: 50,
            icp_tol: 1e-4,
            max_corr_dist: 1.0,
            min_correspondences: 10,
            icp_information: [100.0, 100.0, 400.0],
            window: 100,
            odometry: OdometryNoiseModel::default(),
        }
    }
}

impl SflocConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.local_map_size, self.jump_threshold, self.icp_tol, self.max_corr_dist];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Config("sfloc sizes and thresholds must be positive".into()));
        }
        if self.icp_every == 0 || self.icp_max_iters == 0 || self.window < 2 {
            return Err(Error::Config("icp_every and icp_max_iters must be positive, window at least 2".into()));
        }
        Information::diagonal(&self.icp_information).map_err(|e| Error::Config(e.to_string()))?;
        self.odometry.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpResult {
    pub pose: Pose2d,
    pub iterations: usize,
    pub converged: bool,
    /// Mean correspondence distance at the final pose, meters.
    pub mean_residual: f64,
    /// Fraction of current points with a correspondence at the final pose.
    pub inlier_fraction: f64,
    pub correspondences: usize,
}

/// Points of `global` inside the axis-aligned `size × size` square centered on `center`.
pub fn extract_local_map(global: &SemanticPointCloud, center: &Pose2d, size: f64) -> Result<SemanticPointCloud> {
    if !(size > 0.0) {
        return Err(Error::InvalidInput("local map size must be positive".into()));
    }
    let half = size / 2.0;
    let points = global
        .points
        .iter()
        .filter(|lp| (lp.p.x - center.x).abs() <= half && (lp.p.y - center.y).abs() <= half)
        .copied()
        .collect();
    Ok(SemanticPointCloud::new(points))
}

/// Per-class nearest-neighbor structure over a map cloud.
#[derive(Debug, Clone)]
pub struct IcpTarget {
    classes: Vec<(Vec<Vec2d>, KdTree<f64>)>,
}

impl IcpTarget {
    pub fn new(cloud: &SemanticPointCloud) -> Self {
        let classes = SemanticClass::ALL
            .iter()
            .map(|&c| {
                let pts: Vec<Vec2d> = cloud.of_class(c).collect();
                let tree = KdTree::build(&pts);
                (pts, tree)
            })
            .collect();
        Self { classes }
    }

    pub fn is_empty(&self) -> bool {
        self.classes.iter().all(|(p, _)| p.is_empty())
    }

    /// Nearest map point of the same class within `max_dist`: (class, index within class, distance).
    pub fn nearest(&self, p: Vec2d, class: SemanticClass, max_dist: f64) -> Option<(usize, f64)> {
        let (_, tree) = &self.classes[class.index()];
        tree.nearest_within(p, max_dist).map(|(i, d2)| (i, d2.sqrt()))
    }

    pub fn point(&self, class: SemanticClass, i: usize) -> Vec2d {
        self.classes[class.index()].0[i]
    }
}

/// A matched pair: index into the current cloud, class, index into that class's map points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub source: usize,
    pub class: SemanticClass,
    pub target: usize,
    pub distance: f64,
}

/// Same-class nearest neighbors of the current cloud placed at `pose`.
pub fn correspondences(current: &SemanticPointCloud, target: &IcpTarget, pose: &Pose2d, max_dist: f64) -> Vec<Correspondence> {
    current
        .points
        .iter()
        .enumerate()
        .filter_map(|(i, lp)| {
            let world = pose.transform_point(lp.p);
            target.nearest(world, lp.class, max_dist).map(|(t, d)| Correspondence {
                source: i,
                class: lp.class,
                target: t,
                distance: d,
            })
        })
        .collect()
}

/// Closed-form rigid alignment of matched 2-D point pairs, mapping `src` onto `dst`.
pub fn align_pairs(src: &[Vec2d], dst: &[Vec2d]) -> Option<Pose2d> {
    if src.is_empty() || src.len() != dst.len() {
        return None;
    }
    let n = src.len() as f64;
    let centroid = |v: &[Vec2d]| v.iter().fold(Vec2d::zero(), |a, &b| a + b).scale(1.0 / n);
    let (cs, cd) = (centroid(src), centroid(dst));
    let (mut sdot, mut scross) = (0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (*s - cs, *d - cd);
        sdot += a.dot(b);
        scross += a.cross(b);
    }
    let theta = scross.atan2(sdot);
    let t = cd - cs.rotate(theta);
    Some(Pose2d::new(t.x, t.y, theta))
}

pub fn semantic_icp(current: &SemanticPointCloud, local: &SemanticPointCloud, init: &Pose2d, cfg: &SflocConfig) -> Result<IcpResult> {
    if local.is_empty() {
        return Err(Error::Empty("local map"));
    }
    icp_against(current, &IcpTarget::new(local), init, cfg)
}

/// ICP against a prebuilt target.
pub fn icp_against(current: &SemanticPointCloud, target: &IcpTarget, init: &Pose2d, cfg: &SflocConfig) -> Result<IcpResult> {
    if current.is_empty() {
        return Err(Error::Empty("current cloud"));
    }
    if target.is_empty() {
        return Err(Error::Empty("local map"));
    }
    let mut pose = *init;
    let mut converged = false;
    let mut iterations = 0;
    let mut starved = false;
    while iterations < cfg.icp_max_iters {
        iterations += 1;
        let matches = correspondences(current, target, &pose, cfg.max_corr_dist);
        if matches.len() < cfg.min_correspondences {
            starved = true;
            break;
        }
        let src: Vec<Vec2d> = matches.iter().map(|m| current.points[m.source].p).collect();
        let dst: Vec<Vec2d> = matches.iter().map(|m| target.point(m.class, m.target)).collect();
        let next = align_pairs(&src, &dst).expect("nonempty matches");
        let dt = next.translation().distance(pose.translation());
        let dth = wrap_angle(next.theta - pose.theta).abs();
        pose = next;
        if dt < cfg.icp_tol && dth < cfg.icp_tol {
            converged = true;
            break;
        }
    }
    let matches = correspondences(current, target, &pose, cfg.max_corr_dist);
    let mean_residual = if matches.is_empty() {
        f64::INFINITY
    } else {
        matches.iter().map(|m| m.distance).sum::<f64>() / matches.len() as f64
    };
    let converged = converged && !starved && matches.len() >= cfg.min_correspondences;
    Ok(IcpResult {
        pose,
        iterations,
        converged,
        mean_residual,
        inlier_fraction: matches.len() as f64 / current.len() as f64,
        correspondences: matches.len(),
    })
}

/// True when two ICP poses are more than `threshold` meters apart.
pub fn detect_jump(prev_icp: &Pose2d, cur_icp: &Pose2d, threshold: f64) -> bool {
    prev_icp.translation().distance(cur_icp.translation()) > threshold
}

/// One ICP attempt, for diagnostics output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpDiagnostic {
    pub frame: u64,
    pub converged: bool,
    pub iterations: usize,
    pub correspondences: usize,
    pub mean_residual: f64,
    pub inlier_fraction: f64,
    pub jump: bool,
    pub accepted: bool,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Gate shared by the localizer and the ICP-only baselines: the last accepted ICP
/// pose, carried forward by odometry for comparison with the next result.
#[derive(Debug, Clone, Copy)]
struct JumpGate {
    last: Option<(Pose2d, Pose2d)>,
}

impl JumpGate {
    fn is_jump(&self, icp: &Pose2d, odo: &Pose2d, threshold: f64) -> bool {
        match self.last {
            Some((prev_icp, prev_odo)) => detect_jump(&chain_pose(&prev_icp, &prev_odo, odo), icp, threshold),
            None => false,
        }
    }

    fn accept(&mut self, icp: Pose2d, odo: Pose2d) {
        self.last = Some((icp, odo));
    }
}

/// Map-based localizer.
#[derive(Debug, Clone)]
pub struct SfLoc {
    cfg: SflocConfig,
    map: SemanticPointCloud,
    graph: FactorGraph<f64>,
    last: Option<(u64, Pose2d)>,
    gate: JumpGate,
    diagnostics: Vec<IcpDiagnostic>,
    start: Pose2d,
}

impl SfLoc {
    /// `start` is the known pose of the first frame.
    pub fn new(map: SemanticPointCloud, cfg: SflocConfig, start: Pose2d) -> Result<Self> {
        cfg.validate()?;
        if map.is_empty() {
            return Err(Error::Empty("global map"));
        }
        Ok(Self {
            cfg,
            map,
            graph: FactorGraph::new(),
            last: None,
            gate: JumpGate { last: None },
            diagnostics: Vec::new(),
            start,
        })
    }

    pub fn diagnostics(&self) -> &[IcpDiagnostic] {
        &self.diagnostics
    }

    pub fn graph(&self) -> &FactorGraph<f64> {
        &self.graph
    }

    /// Adds the frame, runs ICP on the cadence and returns the current pose estimate.
    pub fn localize_frame(&mut self, odo: &OdometrySample, cloud: Option<&SemanticPointCloud>) -> Result<Pose2d> {
        let due = odo.frame % self.cfg.icp_every == 0;
        let prev_estimate = self.last.map(|(id, _)| self.graph.pose(id).expect("window holds last node"));
        let icp = match (due, cloud) {
            (true, Some(c)) if !c.is_empty() => {
                let predicted = self.predict(odo)?;
                let center = prev_estimate.unwrap_or(predicted);
                let local = extract_local_map(&self.map, &center, self.cfg.local_map_size)?;
                if local.is_empty() {
                    None
                } else {
                    Some(semantic_icp(c, &local, &predicted, &self.cfg)?)
                }
            }
            _ => None,
        };
        self.ingest(odo, icp)
    }

    fn predict(&self, odo: &OdometrySample) -> Result<Pose2d> {
        Ok(match self.last {
            None => self.start,
            Some((id, prev_odo)) => chain_pose(&self.graph.pose(id).expect("window holds last node"), &prev_odo, &odo.pose),
        })
    }

    /// Graph update given this frame's ICP outcome, if any.
    pub(crate) fn ingest(&mut self, odo: &OdometrySample, icp: Option<IcpResult>) -> Result<Pose2d> {
        if let Some((last, _)) = self.last {
            if odo.frame <= last {
                return Err(Error::OutOfOrder { last, got: odo.frame });
            }
        }
        if !odo.pose.is_finite() {
            return Err(Error::NonFinite("odometry pose"));
        }
        let pose = self.predict(odo)?;
        self.graph.add_pose(odo.frame, pose)?;
        match self.last {
            None => self.graph.set_fixed(NodeKey::Pose(odo.frame), true)?,
            Some((prev, prev_odo)) => {
                let dist = prev_odo.translation().distance(odo.pose.translation());
                self.graph.add_factor(Factor::Odometry {
                    from: prev,
                    to: odo.frame,
                    relative: prev_odo.between(&odo.pose),
                    info: self.cfg.odometry.information(dist)?,
                })?;
            }
        }
        self.last = Some((odo.frame, odo.pose));

        let mut added = false;
        if let Some(r) = icp {
            let jump = r.converged && self.gate.is_jump(&r.pose, &odo.pose, self.cfg.jump_threshold);
            let accepted = r.converged && !jump;
            if accepted {
                self.gate.accept(r.pose, odo.pose);
                self.graph.add_factor(Factor::IcpUnary {
                    pose: odo.frame,
                    measured: r.pose,
                    info: Information::diagonal(&self.cfg.icp_information)?,
                })?;
                added = true;
            }
            self.diagnostics.push(IcpDiagnostic {
                frame: odo.frame,
                converged: r.converged,
                iterations: r.iterations,
                correspondences: r.correspondences,
                mean_residual: r.mean_residual,
                inlier_fraction: r.inlier_fraction,
                jump,
                accepted,
                x: r.pose.x,
                y: r.pose.y,
                theta: r.pose.theta,
            });
        }

        while self.graph.num_poses() > self.cfg.window {
            let oldest = self.graph.poses().next().map(|(id, _)| id).expect("window nonempty");
            self.graph.remove_pose(oldest);
            let next = self.graph.poses().next().map(|(id, _)| id).expect("window nonempty");
            self.graph.set_fixed(NodeKey::Pose(next), true)?;
        }
        if added {
            self.graph.optimize(&OptimizerSettings::default())?;
        }
        Ok(self.graph.pose(odo.frame).expect("node just added"))
    }
}

/// Runs the localizer over a traversal. `clouds` is indexed by frame.
pub fn run_sfloc(
    map: &SemanticPointCloud,
    cfg: &SflocConfig,
    start: Pose2d,
    odometry: &[OdometrySample],
    clouds: &std::collections::BTreeMap<u64, &SemanticPointCloud>,
) -> Result<(Vec<(u64, Pose2d)>, Vec<IcpDiagnostic>)> {
    let mut loc = SfLoc::new(map.clone(), cfg.clone(), start)?;
    let mut out = Vec::with_capacity(odometry.len());
    for odo in odometry {
        let est = loc.localize_frame(odo, clouds.get(&odo.frame).copied())?;
        out.push((odo.frame, est));
    }
    Ok((out, loc.diagnostics))
}

/// Baseline without fusion: the pose is the accepted ICP result when one is available
/// and is otherwise carried forward by odometry. With `label_blind`, every point of
/// map and scan is treated as one class.
pub fn run_icp_only(
    map: &SemanticPointCloud,
    cfg: &SflocConfig,
    start: Pose2d,
    odometry: &[OdometrySample],
    clouds: &std::collections::BTreeMap<u64, &SemanticPointCloud>,
    label_blind: bool,
) -> Result<(Vec<(u64, Pose2d)>, Vec<IcpDiagnostic>)> {
    cfg.validate()?;
    if map.is_empty() {
        return Err(Error::Empty("global map"));
    }
    let map = if label_blind { map.label_blind() } else { map.clone() };
    let mut gate = JumpGate { last: None };
    let mut out = Vec::with_capacity(odometry.len());
    let mut diags = Vec::new();
    let mut last: Option<(Pose2d, Pose2d)> = None;
    for odo in odometry {
        let predicted = match last {
            None => start,
            Some((est, prev_odo)) => chain_pose(&est, &prev_odo, &odo.pose),
        };
        let mut est = predicted;
        let cloud = clouds.get(&odo.frame).filter(|c| !c.is_empty());
        if let (true, Some(c)) = (odo.frame % cfg.icp_every == 0, cloud) {
            let center = last.map_or(predicted, |(e, _)| e);
            let local = extract_local_map(&map, &center, cfg.local_map_size)?;
            if !local.is_empty() {
                let scan = if label_blind { c.label_blind() } else { (*c).clone() };
                let r = semantic_icp(&scan, &local, &predicted, cfg)?;
                let jump = r.converged && gate.is_jump(&r.pose, &odo.pose, cfg.jump_threshold);
                let accepted = r.converged && !jump;
                if accepted {
                    gate.accept(r.pose, odo.pose);
                    est = r.pose;
                }
                diags.push(IcpDiagnostic {
                    frame: odo.frame,
                    converged: r.converged,
                    iterations: r.iterations,
                    correspondences: r.correspondences,
                    mean_residual: r.mean_residual,
                    inlier_fraction: r.inlier_fraction,
                    jump,
                    accepted,
                    x: r.pose.x,
                    y: r.pose.y,
                    theta: r.pose.theta,
                });
            }
        }
        last = Some((est, odo.pose));
        out.push((odo.frame, est));
    }
    Ok((out, diags))
}
