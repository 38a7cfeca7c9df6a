//! SE(2) pose algebra and angle handling.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Wraps an angle into (−π, π]. Non-finite input propagates as NaN.
#[inline]
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = theta % two_pi;
    if r > T::PI() {
        r -= two_pi;
    } else if r <= -T::PI() {
        r += two_pi;
    }
    r
}

/// Normalizes an angle into (−π, π], rejecting non-finite input.
pub fn normalize_angle<T: Real>(theta: T) -> Result<T> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap_angle(theta))
}

/// 2-D vector in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at angle `theta`.
    #[inline]
    pub fn from_angle(theta: T) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    #[inline]
    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(self.scale(n.recip()))
        } else {
            None
        }
    }

    #[inline]
    pub fn rotate(self, theta: T) -> Self {
        let (s, c) = theta.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn cast<U: Real>(self) -> Vec2<U> {
        Vec2::new(U::lit(self.x.to_f64_lossy()), U::lit(self.y.to_f64_lossy()))
    }
}

impl<T: Real> Add for Vec2<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Vec2<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Vec2<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> Mul<T> for Vec2<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

/// Planar rigid transform. `theta` is kept in (−π, π] by every constructor and operation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose2<T> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose2<T> {
    #[inline]
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    #[inline]
    pub fn identity() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn from_parts(t: Vec2<T>, theta: T) -> Self {
        Self::new(t.x, t.y, theta)
    }

    #[inline]
    pub fn translation(&self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    /// `self ∘ other`.
    #[inline]
    pub fn compose(&self, other: &Self) -> Self {
        let t = self.translation() + other.translation().rotate(self.theta);
        Self::new(t.x, t.y, self.theta + other.theta)
    }

    #[inline]
    pub fn inverse(&self) -> Self {
        let t = (-self.translation()).rotate(-self.theta);
        Self::new(t.x, t.y, -self.theta)
    }

    /// Relative pose `self⁻¹ ∘ other`.
    #[inline]
    pub fn between(&self, other: &Self) -> Self {
        let t = (other.translation() - self.translation()).rotate(-self.theta);
        Self::new(t.x, t.y, other.theta - self.theta)
    }

    #[inline]
    pub fn transform_point(&self, p: Vec2<T>) -> Vec2<T> {
        p.rotate(self.theta) + self.translation()
    }

    #[inline]
    pub fn inverse_transform_point(&self, p: Vec2<T>) -> Vec2<T> {
        (p - self.translation()).rotate(-self.theta)
    }

    /// Tangent coordinates `(x, y, θ)` of this pose, angle already wrapped.
    #[inline]
    pub fn to_vector(&self) -> [T; 3] {
        [self.x, self.y, self.theta]
    }

    /// Euclidean distance between translations.
    #[inline]
    pub fn distance(&self, other: &Self) -> T {
        self.translation().distance(other.translation())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    pub fn cast<U: Real>(self) -> Pose2<U> {
        Pose2::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.theta.to_f64_lossy()),
        )
    }
}

/// Rotation matrix derivative `dR(θ)/dθ` applied to `v`.
#[inline]
pub(crate) fn rotate_derivative<T: Real>(theta: T, v: Vec2<T>) -> Vec2<T> {
    v.rotate(theta).perp()
}
