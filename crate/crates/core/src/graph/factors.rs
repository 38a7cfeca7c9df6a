//! Error terms and their analytic Jacobians.
//!
//! Pose variables are `(x, y, θ)` in the world frame with additive updates (θ wrapped);
//! slot variables are the midpoint `(x, y)`.

use crate::geometry::{rotate_derivative, Pose2, Vec2};
use crate::scalar::Real;

/// Dense row-major Jacobian block, at most 3×3; unused entries are zero.
pub type Block<T> = [[T; 3]; 3];

pub(crate) fn zero_block<T: Real>() -> Block<T> {
    [[T::zero(); 3]; 3]
}

/// Unit direction shared by all rows of slots, used by the vertical term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalDirection<T> {
    dir: Vec2<T>,
}

impl<T: Real> GlobalDirection<T> {
    pub fn new(dir: Vec2<T>) -> Option<Self> {
        dir.normalized().map(|dir| Self { dir })
    }

    pub fn dir(&self) -> Vec2<T> {
        self.dir
    }

    pub fn perp(&self) -> Vec2<T> {
        self.dir.perp()
    }
}

/// Number of initial slots averaged into the global direction.
pub const GLOBAL_DIRECTION_SLOTS: usize = 5;

/// Normalized mean of the first five entry vectors, each flipped into the half-plane
/// of the first. `None` until five are available.
pub fn compute_global_direction<T: Real>(first_slots: &[Vec2<T>]) -> Option<GlobalDirection<T>> {
    if first_slots.len() < GLOBAL_DIRECTION_SLOTS {
        return None;
    }
    let reference = first_slots[0];
    let sum = first_slots[..GLOBAL_DIRECTION_SLOTS]
        .iter()
        .fold(Vec2::zero(), |acc, &w| acc + if w.dot(reference) < T::zero() { -w } else { w });
    GlobalDirection::new(sum)
}

/// Odometry term: tangent coordinates of `(Ti⁻¹Tj)⁻¹ (odo_i⁻¹ odo_j)`.
pub fn odometry_residual<T: Real>(ti: &Pose2<T>, tj: &Pose2<T>, odo_i: &Pose2<T>, odo_j: &Pose2<T>) -> [T; 3] {
    relative_residual(ti, tj, &odo_i.between(odo_j))
}

/// Odometry term against a precomputed relative measurement `z = odo_i⁻¹ odo_j`.
pub fn relative_residual<T: Real>(ti: &Pose2<T>, tj: &Pose2<T>, z: &Pose2<T>) -> [T; 3] {
    ti.between(tj).between(z).to_vector()
}

/// Residual and Jacobians `(∂e/∂Ti, ∂e/∂Tj)` of [`relative_residual`].
pub fn relative_jacobians<T: Real>(ti: &Pose2<T>, tj: &Pose2<T>, z: &Pose2<T>) -> ([T; 3], Block<T>, Block<T>) {
    let e = relative_residual(ti, tj, z);
    let tz = z.translation();
    let dt = tj.translation() - ti.translation();
    let d_ti = rotate_derivative(ti.theta - tj.theta, tz);
    let d_tj = -d_ti + rotate_derivative(-tj.theta, dt);
    let (s, c) = tj.theta.sin_cos();
    // R(-θj) = [[c, s], [-s, c]]
    let (o, z0) = (T::one(), T::zero());
    let ji = [[c, s, d_ti.x], [-s, c, d_ti.y], [z0, z0, o]];
    let jj = [[-c, -s, d_tj.x], [s, -c, d_tj.y], [z0, z0, -o]];
    (e, ji, jj)
}

/// Registration term: the observation mapped through the car pose minus the slot midpoint.
pub fn registration_residual<T: Real>(ti: &Pose2<T>, slot: Vec2<T>, obs: Vec2<T>) -> [T; 2] {
    let r = ti.transform_point(obs) - slot;
    [r.x, r.y]
}

/// Residual and Jacobians `(∂e/∂Ti, ∂e/∂S)` of [`registration_residual`].
pub fn registration_jacobians<T: Real>(ti: &Pose2<T>, slot: Vec2<T>, obs: Vec2<T>) -> ([T; 2], Block<T>, Block<T>) {
    let e = registration_residual(ti, slot, obs);
    let d = rotate_derivative(ti.theta, obs);
    let (o, z) = (T::one(), T::zero());
    let jp = [[o, z, d.x], [z, o, d.y], [z, z, z]];
    let js = [[-o, z, z], [z, -o, z], [z, z, z]];
    (e, jp, js)
}

/// Mean entry-edge vector, canonicalized: `w_p` is flipped into `w_k`'s half-plane and
/// the mean is then oriented along the midpoint difference, so neither stored
/// vector's sign matters.
pub fn canonical_mean_entry<T: Real>(wk: Vec2<T>, wp: Vec2<T>, delta: Vec2<T>) -> Vec2<T> {
    let wp = if wk.dot(wp) < T::zero() { -wp } else { wp };
    let mean = (wk + wp).scale(T::lit(0.5));
    if mean.dot(delta) < T::zero() {
        -mean
    } else {
        mean
    }
}

/// Adjacency term: mean entry-edge vector minus the midpoint difference `S_k − S_p`.
pub fn adjacent_residual<T: Real>(sk: Vec2<T>, wk: Vec2<T>, sp: Vec2<T>, wp: Vec2<T>) -> [T; 2] {
    let delta = sk - sp;
    let r = canonical_mean_entry(wk, wp, delta) - delta;
    [r.x, r.y]
}

/// Residual and Jacobians `(∂e/∂S_k, ∂e/∂S_p)`; the entry vectors are measurements.
pub fn adjacent_jacobians<T: Real>(sk: Vec2<T>, wk: Vec2<T>, sp: Vec2<T>, wp: Vec2<T>) -> ([T; 2], Block<T>, Block<T>) {
    let e = adjacent_residual(sk, wk, sp, wp);
    let (o, z) = (T::one(), T::zero());
    let jk = [[-o, z, z], [z, -o, z], [z, z, z]];
    let jp = [[o, z, z], [z, o, z], [z, z, z]];
    (e, jk, jp)
}

/// Vertical term: the smaller of the absolute projections of `S_k − S_p` onto the
/// global direction and its perpendicular.
pub fn vertical_residual<T: Real>(sk: Vec2<T>, sp: Vec2<T>, d: &GlobalDirection<T>) -> T {
    vertical_branch(sk, sp, d).0
}

/// `(residual, signed gradient wrt S_k)`. Ties take the along-direction branch.
fn vertical_branch<T: Real>(sk: Vec2<T>, sp: Vec2<T>, d: &GlobalDirection<T>) -> (T, Vec2<T>) {
    let delta = sk - sp;
    let (a, b) = (delta.dot(d.dir()), delta.dot(d.perp()));
    let (v, u) = if a.abs() <= b.abs() { (a, d.dir()) } else { (b, d.perp()) };
    let sign = if v < T::zero() { -T::one() } else { T::one() };
    (v.abs(), u.scale(sign))
}

/// Residual and Jacobians `(∂e/∂S_k, ∂e/∂S_p)` as 1×2 rows.
pub fn vertical_jacobians<T: Real>(sk: Vec2<T>, sp: Vec2<T>, d: &GlobalDirection<T>) -> (T, Block<T>, Block<T>) {
    let (r, g) = vertical_branch(sk, sp, d);
    let mut jk = zero_block();
    let mut jp = zero_block();
    jk[0][0] = g.x;
    jk[0][1] = g.y;
    jp[0][0] = -g.x;
    jp[0][1] = -g.y;
    (r, jk, jp)
}

/// Absolute-pose term: tangent coordinates of `M⁻¹ T`. Used by the prior and by
/// registration-derived unary factors.
pub fn unary_residual<T: Real>(t: &Pose2<T>, measured: &Pose2<T>) -> [T; 3] {
    measured.between(t).to_vector()
}

pub fn unary_jacobian<T: Real>(t: &Pose2<T>, measured: &Pose2<T>) -> ([T; 3], Block<T>) {
    let e = unary_residual(t, measured);
    let (s, c) = measured.theta.sin_cos();
    let (o, z) = (T::one(), T::zero());
    (e, [[c, s, z], [-s, c, z], [z, z, o]])
}
