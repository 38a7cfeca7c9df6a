//! Semantic-constrained factor-graph SLAM for parking lots.

pub mod cloud;
pub mod error;
pub mod experiment;
pub mod gcslam;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod map;
pub mod metrics;
pub mod scalar;
pub mod sfloc;
pub mod simworld;
pub mod slots;
pub mod sparse;
pub mod svg;

pub use error::{Error, Result};
pub use geometry::{normalize_angle, wrap_angle, Pose2, Vec2};
pub use scalar::Real;

pub type Pose2d = Pose2<f64>;
pub type Vec2d = Vec2<f64>;
pub type Pose2f = Pose2<f32>;
pub type Vec2f = Vec2<f32>;
