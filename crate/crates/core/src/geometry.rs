//! Transverse-plane vectors and the rotation algebra of the perp operator.
//!
//! `J = [[0, -1], [1, 0]]` acts as `z ↦ z⊥ = (-z2, z1)`. Everything the
//! implicit schemes need from it reduces to closed-form 2×2 solves.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or vector in the 2D transverse plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x1: f64,
    pub x2: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x2: 0.0 };

    #[inline]
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    #[inline]
    pub fn dot(self, other: Vec2) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x2.is_finite()
    }

    /// Midpoint `(self + other) / 2`.
    #[inline]
    pub fn midpoint(self, other: Vec2) -> Vec2 {
        (self + other) * 0.5
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x1, v.x2]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x1 + rhs.x1, self.x2 + rhs.x2)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, rhs: Vec2) {
        self.x1 += rhs.x1;
        self.x2 += rhs.x2;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x1 - rhs.x1, self.x2 - rhs.x2)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x2)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 * s, self.x2 * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl Div<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn div(self, s: f64) -> Vec2 {
        Vec2::new(self.x1 / s, self.x2 / s)
    }
}

/// Direct orthogonal rotation `z⊥ = Jz = (-z2, z1)`.
#[inline]
pub fn perp(z: Vec2) -> Vec2 {
    Vec2::new(-z.x2, z.x1)
}

/// `(I + αJ)⁻¹ z`, evaluated as `(z - αJz) / (1 + α²)`.
///
/// The result has norm `‖z‖ / √(1 + α²)`.
#[inline]
pub fn cayley_solve(alpha: f64, z: Vec2) -> Vec2 {
    let denom = 1.0 + alpha * alpha;
    Vec2::new(
        (z.x1 + alpha * z.x2) / denom,
        (z.x2 - alpha * z.x1) / denom,
    )
}

/// `(I + αJ)⁻¹ (I - αJ) z`, a rotation: the result has the same norm as `z`.
#[inline]
pub fn cayley_rotate(alpha: f64, z: Vec2) -> Vec2 {
    // (1 - α²)/(1 + α²) and 2α/(1 + α²) are cos and -sin of the rotation angle.
    let denom = 1.0 + alpha * alpha;
    let c = (1.0 - alpha * alpha) / denom;
    let s = 2.0 * alpha / denom;
    Vec2::new(c * z.x1 + s * z.x2, c * z.x2 - s * z.x1)
}
