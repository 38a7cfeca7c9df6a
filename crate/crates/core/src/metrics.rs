//! Trajectory and map accuracy metrics.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geometry::{Pose2, Vec2};
use crate::graph::{adjacent_residual, GlobalDirection};
use crate::scalar::Real;

/// Root-mean-square translation error over frames present in both trajectories.
/// No alignment is applied: both are expected in the same world frame.
pub fn ate_rmse<T: Real>(estimated: &[(u64, Pose2<T>)], reference: &[(u64, Pose2<T>)]) -> Result<T> {
    let est: BTreeMap<u64, Pose2<T>> = estimated.iter().copied().collect();
    let reference: BTreeMap<u64, Pose2<T>> = reference.iter().copied().collect();
    let mut sum = T::zero();
    let mut n = 0usize;
    for (frame, r) in &reference {
        if let Some(e) = est.get(frame) {
            let d = e.translation() - r.translation();
            sum += d.norm_squared();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Empty("trajectory intersection"));
    }
    Ok((sum / T::lit(n as f64)).sqrt())
}

/// Translation error of the last frame common to both trajectories.
pub fn final_pose_error<T: Real>(estimated: &[(u64, Pose2<T>)], reference: &[(u64, Pose2<T>)]) -> Result<T> {
    let est: BTreeMap<u64, Pose2<T>> = estimated.iter().copied().collect();
    reference
        .iter()
        .rev()
        .find_map(|(f, r)| est.get(f).map(|e| e.translation().distance(r.translation())))
        .ok_or(Error::Empty("trajectory intersection"))
}

/// RMSE as a percentage of trajectory length.
pub fn nees<T: Real>(rmse: T, length: T) -> Result<T> {
    if !(length > T::zero()) || !length.is_finite() {
        return Err(Error::InvalidInput("trajectory length must be positive".into()));
    }
    if rmse < T::zero() || !rmse.is_finite() {
        return Err(Error::InvalidInput("rmse must be finite and non-negative".into()));
    }
    Ok(T::lit(100.0) * rmse / length)
}

pub fn trajectory_length<T: Real>(poses: &[Pose2<T>]) -> Result<T> {
    if poses.len() < 2 {
        return Err(Error::InvalidInput("trajectory length needs at least two poses".into()));
    }
    Ok(poses.windows(2).map(|w| w[0].distance(&w[1])).fold(T::zero(), |a, b| a + b))
}

/// A pair of adjacent mapped slots: midpoints and entry-edge vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdjacentPair<T> {
    pub sk: Vec2<T>,
    pub wk: Vec2<T>,
    pub sp: Vec2<T>,
    pub wp: Vec2<T>,
}

/// |mean adjacent-midpoint spacing − true width|, in centimeters.
pub fn slot_width_error<T: Real>(pairs: &[AdjacentPair<T>], true_width: T) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Empty("adjacent slot pairs"));
    }
    let mean = pairs.iter().map(|p| p.sk.distance(p.sp)).fold(T::zero(), |a, b| a + b) / T::lit(pairs.len() as f64);
    Ok(T::lit(100.0) * (mean - true_width).abs())
}

/// Mean norm of the adjacency residual over pairs, in centimeters.
pub fn adjacent_error<T: Real>(pairs: &[AdjacentPair<T>]) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Empty("adjacent slot pairs"));
    }
    let sum = pairs
        .iter()
        .map(|p| {
            let r = adjacent_residual(p.sk, p.wk, p.sp, p.wp);
            (r[0] * r[0] + r[1] * r[1]).sqrt()
        })
        .fold(T::zero(), |a, b| a + b);
    Ok(T::lit(100.0) * sum / T::lit(pairs.len() as f64))
}

/// Mean angle, in degrees, between each pair's midpoint difference and the nearer of
/// the global direction and its perpendicular.
pub fn row_orientation_deviation<T: Real>(pairs: &[AdjacentPair<T>], d: &GlobalDirection<T>) -> Result<T> {
    if pairs.is_empty() {
        return Err(Error::Empty("adjacent slot pairs"));
    }
    let quarter = T::FRAC_PI_2();
    let sum = pairs
        .iter()
        .map(|p| {
            let delta = p.sk - p.sp;
            let a = delta.cross(d.dir()).atan2(delta.dot(d.dir())).abs() % quarter;
            a.min(quarter - a)
        })
        .fold(T::zero(), |a, b| a + b);
    Ok((sum / T::lit(pairs.len() as f64)).to_degrees())
}
