use crate::error::{Error, Result};
use crate::{Pose2d, Vec2d};

use super::WorldModel;

/// Samples poses every `step` meters of arc length along the polyline `route`,
/// heading along the current segment. The final waypoint is always included.
pub fn generate_trajectory(world: &WorldModel, route: &[Vec2d], step: f64) -> Result<Vec<Pose2d>> {
    if route.len() < 2 {
        return Err(Error::InvalidInput("route needs at least two waypoints".into()));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Config(format!("trajectory step must be positive, got {step}")));
    }
    if let Some(p) = route.iter().find(|p| !world.contains(**p)) {
        return Err(Error::InvalidInput(format!("waypoint ({}, {}) outside the lot", p.x, p.y)));
    }
    let segments: Vec<(Vec2d, Vec2d, f64)> = route
        .windows(2)
        .filter_map(|w| {
            let len = w[0].distance(w[1]);
            (len > 0.0).then_some((w[0], w[1], len))
        })
        .collect();
    if segments.is_empty() {
        return Err(Error::InvalidInput("route has zero length".into()));
    }
    let total: f64 = segments.iter().map(|s| s.2).sum();
    let n = (total / step + 1e-9).floor() as usize;

    let mut poses = Vec::with_capacity(n + 2);
    let mut seg = 0;
    let mut seg_start = 0.0;
    for k in 0..=n {
        let s = (k as f64 * step).min(total);
        while seg + 1 < segments.len() && s >= seg_start + segments[seg].2 {
            seg_start += segments[seg].2;
            seg += 1;
        }
        let (a, b, len) = segments[seg];
        let t = ((s - seg_start) / len).clamp(0.0, 1.0);
        let dir = b - a;
        poses.push(Pose2d::new(a.x + dir.x * t, a.y + dir.y * t, dir.angle()));
    }
    let (a, b, _) = *segments.last().expect("nonempty");
    let end = Pose2d::new(b.x, b.y, (b - a).angle());
    if poses.last().is_some_and(|p| p.distance(&end) > 1e-9) {
        poses.push(end);
    }
    Ok(poses)
}
