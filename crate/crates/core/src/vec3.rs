//! Real 3-vectors and orthonormal frames.

use core::ops::{Add, Index, Mul, Neg, Sub};

use crate::error::CoreError;

/// Orthonormality tolerance used by frame constructors.
pub const ORTHO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3(pub [f64; 3]);

impl Vec3 {
    pub const ZERO: Vec3 = Vec3([0.0; 3]);
    pub const E1: Vec3 = Vec3([1.0, 0.0, 0.0]);
    pub const E2: Vec3 = Vec3([0.0, 1.0, 0.0]);
    pub const E3: Vec3 = Vec3([0.0, 0.0, 1.0]);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3([x, y, z])
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        let [a, b, c] = self.0;
        let [x, y, z] = o.0;
        Vec3([b * z - c * y, c * x - a * z, a * y - b * x])
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3([self.0[0] * s, self.0[1] * s, self.0[2] * s])
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0).then(|| self.scale(1.0 / n))
    }

    /// Some unit vector orthogonal to `self` (assumed nonzero).
    pub fn any_orthogonal(self) -> Vec3 {
        let [x, y, z] = self.0;
        let trial = if libm::fabs(x) <= libm::fabs(y) && libm::fabs(x) <= libm::fabs(z) {
            Vec3::E1
        } else if libm::fabs(y) <= libm::fabs(z) {
            Vec3::E2
        } else {
            Vec3::E3
        };
        self.cross(trial).normalized().unwrap_or(Vec3::E1)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        self.scale(s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// An orthonormal frame `{e1, e2, e3}`, i.e. the columns of `U ∈ O(3)`.
///
/// `e3` is stored rather than derived so that improper frames
/// (`det U = -1`) are representable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub e1: Vec3,
    pub e2: Vec3,
    pub e3: Vec3,
}

impl Frame {
    pub const STANDARD: Frame = Frame {
        e1: Vec3::E1,
        e2: Vec3::E2,
        e3: Vec3::E3,
    };

    /// Checked constructor from three columns.
    pub fn new(e1: Vec3, e2: Vec3, e3: Vec3) -> Result<Self, CoreError> {
        let f = Frame { e1, e2, e3 };
        if f.orthonormality_defect() > ORTHO_TOL {
            return Err(CoreError::NotOrthonormal);
        }
        Ok(f)
    }

    /// Right-handed frame completing an orthonormal pair.
    pub fn from_pair(e1: Vec3, e2: Vec3) -> Result<Self, CoreError> {
        Frame::new(e1, e2, e1.cross(e2))
    }

    /// Frame whose columns are the columns of the row-major matrix `m`.
    pub fn from_columns(m: [[f64; 3]; 3]) -> Result<Self, CoreError> {
        let col = |j: usize| Vec3([m[0][j], m[1][j], m[2][j]]);
        Frame::new(col(0), col(1), col(2))
    }

    /// Largest entry of `|UᵀU − I|`.
    pub fn orthonormality_defect(&self) -> f64 {
        let c = [self.e1, self.e2, self.e3];
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(c[i].dot(c[j]) - target));
            }
        }
        worst
    }

    pub fn det(&self) -> f64 {
        self.e1.dot(self.e2.cross(self.e3))
    }

    /// `U v`: frame coordinates to world coordinates.
    pub fn apply(&self, v: Vec3) -> Vec3 {
        self.e1 * v[0] + self.e2 * v[1] + self.e3 * v[2]
    }

    /// `Uᵀ v`: world coordinates to frame coordinates.
    pub fn coords(&self, v: Vec3) -> Vec3 {
        Vec3([self.e1.dot(v), self.e2.dot(v), self.e3.dot(v)])
    }

    /// Matrix entry `U[i][j]` (row `i`, column `j`).
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        [self.e1, self.e2, self.e3][j][i]
    }

    /// Composition `V U` where `self = V`.
    pub fn compose(&self, u: &Frame) -> Frame {
        Frame {
            e1: self.apply(u.e1),
            e2: self.apply(u.e2),
            e3: self.apply(u.e3),
        }
    }

    /// The frame `(e1, -e2, -e3)`: same `e1`, opposite in-plane orientation.
    pub fn flip_e2(&self) -> Frame {
        Frame {
            e1: self.e1,
            e2: -self.e2,
            e3: -self.e3,
        }
    }

    /// The 9 entries of `U`, row-major.
    pub fn entries(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for i in 0..3 {
            for j in 0..3 {
                out[3 * i + j] = self.entry(i, j);
            }
        }
        out
    }
}
