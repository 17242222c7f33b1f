//! Minimal 3-vector arithmetic.
//!
//! The toolkit only ever needs dot/cross products, norms and a deterministic
//! way to complete a unit vector to an orthonormal frame, so a hand-rolled
//! `Copy` struct keeps call sites readable without pulling in a linear
//! algebra crate.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};

/// A vector (or point) in `R^3`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };
    pub const EX: Vec3 = Vec3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const EY: Vec3 = Vec3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const EZ: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 1.0 };

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the direction of `self`.
    ///
    /// Panics on the zero vector; directions come from user input and are
    /// validated before they reach numerical kernels.
    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        self / n
    }

    /// Squared distance to another point.
    pub fn dist_sq(self, o: Vec3) -> f64 {
        (self - o).norm_sq()
    }

    pub fn dist(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    /// A deterministic unit vector orthogonal to `self` (assumed unit).
    ///
    /// Picks the coordinate axis least aligned with `self` and projects it
    /// out, so nearby inputs give nearby outputs except at axis ties.
    pub fn any_orthonormal(self) -> Vec3 {
        let ax = self.x.abs();
        let ay = self.y.abs();
        let az = self.z.abs();
        let seed = if ax <= ay && ax <= az {
            Vec3::EX
        } else if ay <= az {
            Vec3::EY
        } else {
            Vec3::EZ
        };
        (seed - self * seed.dot(self)).normalized()
    }

    /// Orthonormal frame `(e1, e2)` completing `self` (assumed unit) to a
    /// right-handed basis: `e1 × e2 = self`.
    pub fn orthonormal_frame(self) -> (Vec3, Vec3) {
        let e1 = self.any_orthonormal();
        let e2 = self.cross(e1);
        (e1, e2)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl SubAssign for Vec3 {
    fn sub_assign(&mut self, o: Vec3) {
        *self = *self - o;
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_product_is_right_handed() {
        assert_eq!(Vec3::EX.cross(Vec3::EY), Vec3::EZ);
        assert_eq!(Vec3::EY.cross(Vec3::EZ), Vec3::EX);
    }

    #[test]
    fn frame_is_orthonormal_and_right_handed() {
        let dirs = [
            Vec3::new(0.3, -0.4, 0.86).normalized(),
            Vec3::EZ,
            Vec3::new(-1.0, 1.0, 1.0).normalized(),
            Vec3::new(1e-9, 1.0, 1e-9).normalized(),
        ];
        for v in dirs {
            let (e1, e2) = v.orthonormal_frame();
            assert!(e1.dot(v).abs() < 1e-14);
            assert!(e2.dot(v).abs() < 1e-14);
            assert!(e1.dot(e2).abs() < 1e-14);
            assert!((e1.norm() - 1.0).abs() < 1e-14);
            assert!((e1.cross(e2) - v).norm() < 1e-14);
        }
    }
}
