//! Labeled 2-D point clouds.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::{Pose2d, Vec2d};

/// Ground-marking classes produced by the segmentation front end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SemanticClass {
    SlotLine,
    LaneMarking,
    Arrow,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; 3] = [Self::SlotLine, Self::LaneMarking, Self::Arrow];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::SlotLine => "slot-line",
            Self::LaneMarking => "lane-marking",
            Self::Arrow => "arrow",
        }
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SemanticClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown semantic class {s:?}"))
    }
}

/// Serialized as `[x, y, class]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, SemanticClass)", into = "(f64, f64, SemanticClass)")]
pub struct LabeledPoint {
    pub p: Vec2d,
    pub class: SemanticClass,
}

impl From<(f64, f64, SemanticClass)> for LabeledPoint {
    fn from((x, y, class): (f64, f64, SemanticClass)) -> Self {
        Self { p: Vec2d::new(x, y), class }
    }
}

impl From<LabeledPoint> for (f64, f64, SemanticClass) {
    fn from(lp: LabeledPoint) -> Self {
        (lp.p.x, lp.p.y, lp.class)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SemanticPointCloud {
    pub points: Vec<LabeledPoint>,
}

impl SemanticPointCloud {
    pub fn new(points: Vec<LabeledPoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn push(&mut self, p: Vec2d, class: SemanticClass) {
        self.points.push(LabeledPoint { p, class });
    }

    pub fn extend(&mut self, other: &SemanticPointCloud) {
        self.points.extend_from_slice(&other.points);
    }

    pub fn transformed(&self, pose: &Pose2d) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|lp| LabeledPoint {
                    p: pose.transform_point(lp.p),
                    class: lp.class,
                })
                .collect(),
        )
    }

    pub fn of_class(&self, class: SemanticClass) -> impl Iterator<Item = Vec2d> + '_ {
        self.points.iter().filter(move |lp| lp.class == class).map(|lp| lp.p)
    }

    pub fn is_finite(&self) -> bool {
        self.points.iter().all(|lp| lp.p.is_finite())
    }

    /// Keeps one point per `cell`-sized grid cell and class (the first one seen).
    pub fn voxel_downsample(&self, cell: f64) -> Self {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for lp in &self.points {
            let key = (
                lp.class,
                (lp.p.x / cell).floor() as i64,
                (lp.p.y / cell).floor() as i64,
            );
            if seen.insert(key) {
                out.push(*lp);
            }
        }
        Self::new(out)
    }

    /// Same points with every label collapsed to a single class.
    pub fn label_blind(&self) -> Self {
        Self::new(
            self.points
                .iter()
                .map(|lp| LabeledPoint {
                    p: lp.p,
                    class: SemanticClass::SlotLine,
                })
                .collect(),
        )
    }
}

/// Points every `spacing` meters along the segment `a → b`, both ends included.
pub fn sample_segment(a: Vec2d, b: Vec2d, spacing: f64) -> Vec<Vec2d> {
    let len = a.distance(b);
    let n = (len / spacing).round().max(1.0) as usize;
    (0..=n)
        .map(|i| {
            let t = i as f64 / n as f64;
            Vec2::new(a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t)
        })
        .collect()
}
