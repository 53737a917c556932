//! Unit-quaternion rotation math.
//!
//! Scalar-first storage `(w, x, y, z)`. All rotation-producing operations
//! return quaternions in canonical sign form: `w >= 0`, and when `w == 0`
//! the first nonzero vector component is positive. `q` and `-q` encode the
//! same rotation, and every consumer in this crate treats them identically;
//! the canonical form only pins the stored representative so that
//! serialized series are byte-stable.

use crate::error::{Error, Result};

/// Tolerance under which a quaternion norm counts as zero.
const ZERO_NORM: f64 = 1e-12;

/// Middle-angle proximity to +-pi/2 that flags gimbal lock.
const GIMBAL_LOCK_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    /// Raw component constructor. Does not normalize; use [`Quaternion::normalize`]
    /// before treating the value as a rotation.
    pub const fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Self { w, x, y, z }
    }

    pub const fn identity() -> Self {
        Self::new(1.0, 0.0, 0.0, 0.0)
    }

    /// Rotation of `angle` radians about `axis` (normalized internally).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n < ZERO_NORM {
            return Self::identity();
        }
        let (s, c) = (angle / 2.0).sin_cos();
        Self::new(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n).canonicalized()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Scale to unit norm, preserving direction.
    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n < ZERO_NORM || !n.is_finite() {
            return Err(Error::InvalidRotation { norm: n });
        }
        Ok(Self::new(self.w / n, self.x / n, self.y / n, self.z / n).canonicalized())
    }

    /// Whether the norm is within `tol` of 1.
    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn conjugate(&self) -> Self {
        Self::new(self.w, -self.x, -self.y, -self.z)
    }

    /// Hamilton product `self (x) rhs`.
    pub fn multiply(&self, rhs: &Self) -> Self {
        let (aw, ax, ay, az) = (self.w, self.x, self.y, self.z);
        let (bw, bx, by, bz) = (rhs.w, rhs.x, rhs.y, rhs.z);
        Self::new(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )
        .canonicalized()
    }

    /// Rotation taking `a` to `b`: `a^-1 (x) b`, so `a.multiply(&relative(a, b)) == b`.
    pub fn relative(a: &Self, b: &Self) -> Self {
        a.conjugate().multiply(b)
    }

    /// Sign-invariant Euclidean distance on the 4-vector representatives:
    /// `min(||a - b||, ||a + b||)`. Zero iff `a` and `b` are the same rotation.
    pub fn dist(a: &Self, b: &Self) -> f64 {
        let sub = (a.w - b.w).powi(2) + (a.x - b.x).powi(2) + (a.y - b.y).powi(2) + (a.z - b.z).powi(2);
        let add = (a.w + b.w).powi(2) + (a.x + b.x).powi(2) + (a.y + b.y).powi(2) + (a.z + b.z).powi(2);
        sub.min(add).sqrt()
    }

    /// Geodesic rotation angle between `a` and `b`, in [0, pi].
    pub fn geodesic_angle(a: &Self, b: &Self) -> f64 {
        let d = a.dot(b).abs().min(1.0);
        2.0 * d.acos()
    }

    /// Rotation angle of this quaternion, in [0, pi].
    pub fn angle(&self) -> f64 {
        let v = (self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        2.0 * v.atan2(self.w.abs())
    }

    /// Rotation axis and angle. The identity rotation reports the z axis and
    /// angle zero.
    pub fn axis_angle(&self) -> ([f64; 3], f64) {
        let q = if self.w < 0.0 { self.negated() } else { *self };
        let v = (q.x * q.x + q.y * q.y + q.z * q.z).sqrt();
        if v < ZERO_NORM {
            return ([0.0, 0.0, 1.0], 0.0);
        }
        ([q.x / v, q.y / v, q.z / v], 2.0 * v.atan2(q.w))
    }

    /// Apply the rotation to a 3-vector: `q (x) (0, v) (x) q*`.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        // Expanded sandwich product; one fewer quaternion multiply.
        let tx = 2.0 * (y * v[2] - z * v[1]);
        let ty = 2.0 * (z * v[0] - x * v[2]);
        let tz = 2.0 * (x * v[1] - y * v[0]);
        [
            v[0] + w * tx + y * tz - z * ty,
            v[1] + w * ty + z * tx - x * tz,
            v[2] + w * tz + x * ty - y * tx,
        ]
    }

    pub fn negated(&self) -> Self {
        Self::new(-self.w, -self.x, -self.y, -self.z)
    }

    /// Canonical sign representative: `w > 0`, or `w == 0` and the first
    /// nonzero vector component positive.
    pub fn canonicalized(&self) -> Self {
        if self.w < 0.0 {
            return self.negated();
        }
        if self.w == 0.0 {
            for c in [self.x, self.y, self.z] {
                if c != 0.0 {
                    return if c < 0.0 { self.negated() } else { *self };
                }
            }
        }
        *self
    }

    /// Spherical linear interpolation from `self` to `other` at parameter
    /// `t` in [0, 1], along the shorter arc.
    pub fn slerp(&self, other: &Self, t: f64) -> Self {
        let mut b = *other;
        let mut d = self.dot(&b);
        if d < 0.0 {
            b = b.negated();
            d = -d;
        }
        d = d.min(1.0);
        let theta = d.acos();
        if theta < 1e-9 {
            // Nearly parallel: linear blend then renormalize.
            let lerp = Self::new(
                self.w + (b.w - self.w) * t,
                self.x + (b.x - self.x) * t,
                self.y + (b.y - self.y) * t,
                self.z + (b.z - self.z) * t,
            );
            return lerp.normalize().unwrap_or(*self);
        }
        let sa = ((1.0 - t) * theta).sin() / theta.sin();
        let sb = (t * theta).sin() / theta.sin();
        Self::new(
            sa * self.w + sb * b.w,
            sa * self.x + sb * b.x,
            sa * self.y + sb * b.y,
            sa * self.z + sb * b.z,
        )
        .canonicalized()
    }

    /// Shortest rotation mapping direction `from` onto direction `to`
    /// (inputs need not be unit length; zero vectors give the identity).
    pub fn between(from: [f64; 3], to: [f64; 3]) -> Self {
        let dot = from[0] * to[0] + from[1] * to[1] + from[2] * to[2];
        let cross = [
            from[1] * to[2] - from[2] * to[1],
            from[2] * to[0] - from[0] * to[2],
            from[0] * to[1] - from[1] * to[0],
        ];
        let cn = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
        if cn < ZERO_NORM {
            if dot >= 0.0 {
                return Self::identity();
            }
            // Antiparallel: half turn about any perpendicular axis.
            let perp = if from[0].abs() < 0.9 * from_norm(from) {
                [0.0, -from[2], from[1]]
            } else {
                [-from[1], from[0], 0.0]
            };
            return Self::from_axis_angle(perp, std::f64::consts::PI);
        }
        Self::from_axis_angle(cross, cn.atan2(dot))
    }

    /// Decompose into `swing (x) twist` where `twist` is the rotation about
    /// `axis` (unit vector) and `swing` has no component about it. Returns
    /// `(swing, twist, twist_angle)` with the angle wrapped to (-pi, pi].
    pub fn swing_twist(&self, axis: [f64; 3]) -> (Self, Self, f64) {
        let q = self.canonicalized();
        let p = q.x * axis[0] + q.y * axis[1] + q.z * axis[2];
        let raw = Self::new(q.w, p * axis[0], p * axis[1], p * axis[2]);
        let n = raw.norm();
        if n < ZERO_NORM {
            // Rotation axis perpendicular to `axis`: no twist component.
            return (q, Self::identity(), 0.0);
        }
        let twist = Self::new(raw.w / n, raw.x / n, raw.y / n, raw.z / n);
        let angle = wrap_angle(2.0 * p.atan2(q.w));
        let swing = q.multiply(&twist.conjugate());
        (swing, twist.canonicalized(), angle)
    }

    /// 3x3 rotation matrix (row-major) mapping local-frame vectors to the
    /// parent frame.
    pub fn rotation_matrix(&self) -> [[f64; 3]; 3] {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }

    /// Intrinsic Euler decomposition. Near gimbal lock (middle angle within
    /// 1e-4 rad of +-pi/2) the third angle is zeroed by convention and the
    /// result is flagged.
    pub fn to_euler(&self, sequence: EulerSequence) -> EulerAngles {
        let m = self.rotation_matrix();
        match sequence {
            EulerSequence::Zxy => {
                let s = m[2][1].clamp(-1.0, 1.0);
                let middle = s.asin();
                let locked = (middle.abs() - std::f64::consts::FRAC_PI_2).abs() < GIMBAL_LOCK_MARGIN;
                let (first, third) = if locked {
                    let first = if middle > 0.0 {
                        m[0][2].atan2(m[0][0])
                    } else {
                        (-m[0][2]).atan2(m[0][0])
                    };
                    (first, 0.0)
                } else {
                    ((-m[0][1]).atan2(m[1][1]), (-m[2][0]).atan2(m[2][2]))
                };
                EulerAngles {
                    sequence,
                    angles: [wrap_angle(first), middle, wrap_angle(third)],
                    gimbal_lock: locked,
                }
            }
            EulerSequence::Zyx => {
                let s = (-m[2][0]).clamp(-1.0, 1.0);
                let middle = s.asin();
                let locked = (middle.abs() - std::f64::consts::FRAC_PI_2).abs() < GIMBAL_LOCK_MARGIN;
                let (first, third) = if locked {
                    let first = if middle > 0.0 {
                        (-m[0][1]).atan2(m[0][2])
                    } else {
                        (-m[0][1]).atan2(-m[0][2])
                    };
                    (first, 0.0)
                } else {
                    (m[1][0].atan2(m[0][0]), m[2][1].atan2(m[2][2]))
                };
                EulerAngles {
                    sequence,
                    angles: [wrap_angle(first), middle, wrap_angle(third)],
                    gimbal_lock: locked,
                }
            }
        }
    }
}

impl Default for Quaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl std::ops::Mul for Quaternion {
    type Output = Quaternion;

    fn mul(self, rhs: Quaternion) -> Quaternion {
        self.multiply(&rhs)
    }
}

/// Intrinsic rotation orders supported for display. Internal computation
/// never leaves quaternion space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerSequence {
    /// First about Z, then the new X, then the new Y. Crate display default.
    Zxy,
    /// Yaw-pitch-roll.
    Zyx,
}

/// Intrinsic Euler angles in radians, each wrapped to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub sequence: EulerSequence,
    pub angles: [f64; 3],
    /// True when the middle angle was within 1e-4 rad of +-pi/2; the third
    /// angle has been zeroed by convention.
    pub gimbal_lock: bool,
}

impl EulerAngles {
    pub fn new(sequence: EulerSequence, angles: [f64; 3]) -> Self {
        Self {
            sequence,
            angles,
            gimbal_lock: false,
        }
    }

    pub fn to_quaternion(&self) -> Quaternion {
        let [a, b, c] = self.angles;
        let qa = Quaternion::from_axis_angle([0.0, 0.0, 1.0], a);
        let (qb, qc) = match self.sequence {
            EulerSequence::Zxy => (
                Quaternion::from_axis_angle([1.0, 0.0, 0.0], b),
                Quaternion::from_axis_angle([0.0, 1.0, 0.0], c),
            ),
            EulerSequence::Zyx => (
                Quaternion::from_axis_angle([0.0, 1.0, 0.0], b),
                Quaternion::from_axis_angle([1.0, 0.0, 0.0], c),
            ),
        };
        qa.multiply(&qb).multiply(&qc)
    }
}

fn from_norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut r = a.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}
