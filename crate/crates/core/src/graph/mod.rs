//! Factor graph over car poses and parking-slot midpoints.

mod dump;
pub mod factors;
mod solver;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::scalar::Real;

pub use factors::{compute_global_direction, GlobalDirection, GLOBAL_DIRECTION_SLOTS};
pub use factors::{
    adjacent_residual, odometry_residual, registration_residual, relative_residual, unary_residual,
    vertical_residual,
};
pub use solver::{KindStats, OptimizationReport, OptimizerSettings};

/// Identifies a variable. Pose ids are frame numbers, slot ids are slot-store ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKey {
    Pose(u64),
    Slot(u64),
}

impl fmt::Display for NodeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKey::Pose(id) => write!(f, "pose {id}"),
            NodeKey::Slot(id) => write!(f, "slot {id}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FactorKind {
    Prior,
    Odometry,
    Registration,
    Adjacent,
    GlobalVertical,
    IcpUnary,
}

impl FactorKind {
    pub const ALL: [FactorKind; 6] = [
        FactorKind::Prior,
        FactorKind::Odometry,
        FactorKind::Registration,
        FactorKind::Adjacent,
        FactorKind::GlobalVertical,
        FactorKind::IcpUnary,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FactorKind::Prior => "prior",
            FactorKind::Odometry => "odometry",
            FactorKind::Registration => "registration",
            FactorKind::Adjacent => "adjacent",
            FactorKind::GlobalVertical => "global-vertical",
            FactorKind::IcpUnary => "icp-unary",
        }
    }

    /// Residual dimension.
    pub fn dim(self) -> usize {
        match self {
            FactorKind::Prior | FactorKind::Odometry | FactorKind::IcpUnary => 3,
            FactorKind::Registration | FactorKind::Adjacent => 2,
            FactorKind::GlobalVertical => 1,
        }
    }
}

impl fmt::Display for FactorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symmetric positive-definite weight of dimension 1, 2 or 3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Information<T> {
    dim: usize,
    m: [[T; 3]; 3],
}

impl<T: Real> Information<T> {
    pub fn diagonal(diag: &[T]) -> Result<Self> {
        if diag.is_empty() || diag.len() > 3 {
            return Err(Error::InvalidInput(format!("information dimension {}", diag.len())));
        }
        if diag.iter().any(|d| !d.is_finite() || *d <= T::zero()) {
            return Err(Error::InvalidInput("information diagonal must be positive".into()));
        }
        let mut m = [[T::zero(); 3]; 3];
        for (i, &d) in diag.iter().enumerate() {
            m[i][i] = d;
        }
        Ok(Self { dim: diag.len(), m })
    }

    pub fn scalar(w: T) -> Result<Self> {
        Self::diagonal(&[w])
    }

    pub fn isotropic(dim: usize, w: T) -> Result<Self> {
        Self::diagonal(&vec![w; dim])
    }

    /// Full matrix; the leading `dim × dim` block must be symmetric positive definite.
    pub fn from_matrix(dim: usize, m: [[T; 3]; 3]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidInput(format!("information dimension {dim}")));
        }
        let mut l = [[T::zero(); 3]; 3];
        for i in 0..dim {
            for j in 0..dim {
                if !m[i][j].is_finite() || m[i][j] != m[j][i] {
                    return Err(Error::InvalidInput("information must be finite and symmetric".into()));
                }
            }
        }
        for j in 0..dim {
            let mut d = m[j][j];
            for k in 0..j {
                d -= l[j][k] * l[j][k];
            }
            if d <= T::zero() {
                return Err(Error::InvalidInput("information must be positive definite".into()));
            }
            l[j][j] = d.sqrt();
            for i in j + 1..dim {
                let mut s = m[i][j];
                for k in 0..j {
                    s -= l[i][k] * l[j][k];
                }
                l[i][j] = s / l[j][j];
            }
        }
        let mut clean = [[T::zero(); 3]; 3];
        for i in 0..dim {
            clean[i][..dim].copy_from_slice(&m[i][..dim]);
        }
        Ok(Self { dim, m: clean })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.m[i][j]
    }

    /// `eᵀ Ω e` over the leading `dim` components.
    pub fn quadratic(&self, e: &[T; 3]) -> T {
        let mut s = T::zero();
        for i in 0..self.dim {
            for j in 0..self.dim {
                s += e[i] * self.m[i][j] * e[j];
            }
        }
        s
    }
}

/// A factor and its measurement. Adjacent factors read the entry vectors stored on
/// the slot nodes at linearization time.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor<T> {
    Prior {
        pose: u64,
        measured: Pose2<T>,
        info: Information<T>,
    },
    Odometry {
        from: u64,
        to: u64,
        relative: Pose2<T>,
        info: Information<T>,
    },
    Registration {
        pose: u64,
        slot: u64,
        obs: Vec2<T>,
        info: Information<T>,
    },
    Adjacent {
        k: u64,
        p: u64,
        info: Information<T>,
    },
    GlobalVertical {
        k: u64,
        p: u64,
        dir: GlobalDirection<T>,
        info: Information<T>,
    },
    IcpUnary {
        pose: u64,
        measured: Pose2<T>,
        info: Information<T>,
    },
}

impl<T: Real> Factor<T> {
    pub fn kind(&self) -> FactorKind {
        match self {
            Factor::Prior { .. } => FactorKind::Prior,
            Factor::Odometry { .. } => FactorKind::Odometry,
            Factor::Registration { .. } => FactorKind::Registration,
            Factor::Adjacent { .. } => FactorKind::Adjacent,
            Factor::GlobalVertical { .. } => FactorKind::GlobalVertical,
            Factor::IcpUnary { .. } => FactorKind::IcpUnary,
        }
    }

    pub fn info(&self) -> &Information<T> {
        match self {
            Factor::Prior { info, .. }
            | Factor::Odometry { info, .. }
            | Factor::Registration { info, .. }
            | Factor::Adjacent { info, .. }
            | Factor::GlobalVertical { info, .. }
            | Factor::IcpUnary { info, .. } => info,
        }
    }

    pub fn keys(&self) -> Vec<NodeKey> {
        match *self {
            Factor::Prior { pose, .. } | Factor::IcpUnary { pose, .. } => vec![NodeKey::Pose(pose)],
            Factor::Odometry { from, to, .. } => vec![NodeKey::Pose(from), NodeKey::Pose(to)],
            Factor::Registration { pose, slot, .. } => vec![NodeKey::Pose(pose), NodeKey::Slot(slot)],
            Factor::Adjacent { k, p, .. } | Factor::GlobalVertical { k, p, .. } => {
                vec![NodeKey::Slot(k), NodeKey::Slot(p)]
            }
        }
    }

    pub fn touches(&self, key: NodeKey) -> bool {
        self.keys().contains(&key)
    }
}

/// Slot variable: the optimized midpoint plus the fused entry-edge vector, which is
/// carried along as metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotNode<T> {
    pub position: Vec2<T>,
    pub entry: Vec2<T>,
}

impl<T: Real> SlotNode<T> {
    /// Midpoint pose with heading along the entry vector.
    pub fn pose(&self) -> Pose2<T> {
        Pose2::from_parts(self.position, self.entry.angle())
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry<V> {
    value: V,
    fixed: bool,
}

#[derive(Debug, Clone)]
pub struct FactorGraph<T> {
    poses: BTreeMap<u64, Entry<Pose2<T>>>,
    slots: BTreeMap<u64, Entry<SlotNode<T>>>,
    factors: Vec<Factor<T>>,
    has_prior: bool,
}

impl<T: Real> Default for FactorGraph<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> FactorGraph<T> {
    pub fn new() -> Self {
        Self {
            poses: BTreeMap::new(),
            slots: BTreeMap::new(),
            factors: Vec::new(),
            has_prior: false,
        }
    }

    pub fn add_pose(&mut self, id: u64, value: Pose2<T>) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("pose node"));
        }
        if self.poses.contains_key(&id) {
            return Err(Error::InvalidInput(format!("duplicate pose node {id}")));
        }
        self.poses.insert(id, Entry { value, fixed: false });
        Ok(())
    }

    pub fn add_slot(&mut self, id: u64, position: Vec2<T>, entry: Vec2<T>) -> Result<()> {
        if !position.is_finite() || !entry.is_finite() {
            return Err(Error::NonFinite("slot node"));
        }
        if self.slots.contains_key(&id) {
            return Err(Error::InvalidInput(format!("duplicate slot node {id}")));
        }
        let value = SlotNode { position, entry };
        self.slots.insert(id, Entry { value, fixed: false });
        Ok(())
    }

    pub fn contains(&self, key: NodeKey) -> bool {
        match key {
            NodeKey::Pose(id) => self.poses.contains_key(&id),
            NodeKey::Slot(id) => self.slots.contains_key(&id),
        }
    }

    pub fn set_fixed(&mut self, key: NodeKey, fixed: bool) -> Result<()> {
        let flag = match key {
            NodeKey::Pose(id) => self.poses.get_mut(&id).map(|e| &mut e.fixed),
            NodeKey::Slot(id) => self.slots.get_mut(&id).map(|e| &mut e.fixed),
        };
        *flag.ok_or_else(|| Error::UnknownNode(key.to_string()))? = fixed;
        Ok(())
    }

    pub fn is_fixed(&self, key: NodeKey) -> bool {
        match key {
            NodeKey::Pose(id) => self.poses.get(&id).is_some_and(|e| e.fixed),
            NodeKey::Slot(id) => self.slots.get(&id).is_some_and(|e| e.fixed),
        }
    }

    pub fn pose(&self, id: u64) -> Option<Pose2<T>> {
        self.poses.get(&id).map(|e| e.value)
    }

    pub fn slot(&self, id: u64) -> Option<SlotNode<T>> {
        self.slots.get(&id).map(|e| e.value)
    }

    pub fn set_pose(&mut self, id: u64, value: Pose2<T>) -> Result<()> {
        let e = self.poses.get_mut(&id).ok_or_else(|| Error::UnknownNode(NodeKey::Pose(id).to_string()))?;
        e.value = value;
        Ok(())
    }

    pub fn set_slot_position(&mut self, id: u64, position: Vec2<T>) -> Result<()> {
        let e = self.slots.get_mut(&id).ok_or_else(|| Error::UnknownNode(NodeKey::Slot(id).to_string()))?;
        e.value.position = position;
        Ok(())
    }

    pub fn set_slot_entry(&mut self, id: u64, entry: Vec2<T>) -> Result<()> {
        let e = self.slots.get_mut(&id).ok_or_else(|| Error::UnknownNode(NodeKey::Slot(id).to_string()))?;
        e.value.entry = entry;
        Ok(())
    }

    pub fn poses(&self) -> impl Iterator<Item = (u64, Pose2<T>)> + '_ {
        self.poses.iter().map(|(&id, e)| (id, e.value))
    }

    pub fn slots(&self) -> impl Iterator<Item = (u64, SlotNode<T>)> + '_ {
        self.slots.iter().map(|(&id, e)| (id, e.value))
    }

    pub fn num_poses(&self) -> usize {
        self.poses.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn factors(&self) -> &[Factor<T>] {
        &self.factors
    }

    pub fn has_prior(&self) -> bool {
        self.has_prior
    }

    pub fn add_prior(&mut self, pose: u64, measured: Pose2<T>, info: Information<T>) -> Result<()> {
        self.add_factor(Factor::Prior { pose, measured, info })
    }

    pub fn add_factor(&mut self, factor: Factor<T>) -> Result<()> {
        for key in factor.keys() {
            if !self.contains(key) {
                return Err(Error::UnknownNode(key.to_string()));
            }
        }
        let kind = factor.kind();
        if factor.info().dim() != kind.dim() {
            return Err(Error::InvalidInput(format!(
                "{kind} factor needs {}-dimensional information, got {}",
                kind.dim(),
                factor.info().dim()
            )));
        }
        let finite = match &factor {
            Factor::Prior { measured, .. } | Factor::IcpUnary { measured, .. } => measured.is_finite(),
            Factor::Odometry { relative, .. } => relative.is_finite(),
            Factor::Registration { obs, .. } => obs.is_finite(),
            Factor::Adjacent { k, p, .. } | Factor::GlobalVertical { k, p, .. } => k != p,
        };
        if !finite {
            return Err(Error::InvalidInput(format!("invalid {kind} measurement")));
        }
        if kind == FactorKind::Prior {
            if self.has_prior {
                return Err(Error::DuplicatePrior);
            }
            self.has_prior = true;
        }
        self.factors.push(factor);
        Ok(())
    }

    /// Removes a slot node and every factor attached to it.
    pub fn remove_slot(&mut self, id: u64) -> Option<SlotNode<T>> {
        let removed = self.slots.remove(&id)?;
        self.factors.retain(|f| !f.touches(NodeKey::Slot(id)));
        Some(removed.value)
    }

    /// Removes a pose node and every factor attached to it.
    pub fn remove_pose(&mut self, id: u64) -> Option<Pose2<T>> {
        let removed = self.poses.remove(&id)?;
        self.factors.retain(|f| !f.touches(NodeKey::Pose(id)));
        self.has_prior = self.factors.iter().any(|f| f.kind() == FactorKind::Prior);
        Some(removed.value)
    }

    /// Drops factors matching the predicate.
    pub fn retain_factors(&mut self, keep: impl FnMut(&Factor<T>) -> bool) {
        self.factors.retain(keep);
        self.has_prior = self.factors.iter().any(|f| f.kind() == FactorKind::Prior);
    }

    /// Residual of one factor at the current values.
    pub fn residual(&self, factor: &Factor<T>) -> Result<Vec<T>> {
        let pose = |id: u64| self.pose(id).ok_or_else(|| Error::UnknownNode(NodeKey::Pose(id).to_string()));
        let slot = |id: u64| self.slot(id).ok_or_else(|| Error::UnknownNode(NodeKey::Slot(id).to_string()));
        Ok(match factor {
            Factor::Prior { pose: id, measured, .. } | Factor::IcpUnary { pose: id, measured, .. } => {
                unary_residual(&pose(*id)?, measured).to_vec()
            }
            Factor::Odometry { from, to, relative, .. } => relative_residual(&pose(*from)?, &pose(*to)?, relative).to_vec(),
            Factor::Registration { pose: p, slot: s, obs, .. } => {
                registration_residual(&pose(*p)?, slot(*s)?.position, *obs).to_vec()
            }
            Factor::Adjacent { k, p, .. } => {
                let (sk, sp) = (slot(*k)?, slot(*p)?);
                adjacent_residual(sk.position, sk.entry, sp.position, sp.entry).to_vec()
            }
            Factor::GlobalVertical { k, p, dir, .. } => {
                vec![vertical_residual(slot(*k)?.position, slot(*p)?.position, dir)]
            }
        })
    }

    /// Total weighted squared error `Σ eᵀ Ω e`.
    pub fn total_cost(&self) -> Result<T> {
        let mut cost = T::zero();
        for f in &self.factors {
            let r = self.residual(f)?;
            let mut e = [T::zero(); 3];
            e[..r.len()].copy_from_slice(&r);
            cost += f.info().quadratic(&e);
        }
        Ok(cost)
    }

    /// True when the pose gauge is anchored by a prior, a unary factor or a fixed node.
    pub fn gauge_anchored(&self) -> bool {
        self.has_prior
            || self.factors.iter().any(|f| f.kind() == FactorKind::IcpUnary)
            || self.poses.values().any(|e| e.fixed)
            || (self.poses.is_empty() && (self.slots.values().any(|e| e.fixed) || self.slots.is_empty()))
    }

    pub fn optimize(&mut self, settings: &OptimizerSettings<T>) -> Result<OptimizationReport<T>> {
        solver::optimize(self, settings)
    }

    /// Structured dump of nodes and factors with residuals.
    pub fn dump(&self) -> Result<serde_json::Value> {
        dump::dump(self)
    }
}

#[cfg(test)]
mod tests;
