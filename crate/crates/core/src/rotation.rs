//! Rotations in SO(3) stored as canonical unit quaternions.
//!
//! The quaternion `(w, x, y, z)` is the storage form. Matrices and Euler
//! angles are derived views. `q` and `-q` describe the same rotation, so every
//! constructor canonicalizes to `w >= 0` (ties broken on `x`, then `y`, then
//! `z`), which makes equality of rotations equality of stored components.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Mul;

use rand::Rng;
use rand_distr::StandardNormal;

// quaternion components below this are treated as exact gimbal lock
const GIMBAL_EPS: f64 = 1e-12;

pub type Mat3 = [[f64; 3]; 3];
pub type Vec3 = [f64; 3];

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Rotation {
    q: [f64; 4],
}

/// Intrinsic X-Y-X Euler angles: `R = Rx(alpha) * Ry(beta) * Rx(gamma)`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct EulerXYX {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

/// Z-Y-Z Euler angles: `R = Rz(alpha) * Ry(beta) * Rz(gamma)`.
///
/// This is the factorization used by the Wigner matrices and the SO(3) grids.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct EulerZYZ {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn canonical(mut q: [f64; 4]) -> [f64; 4] {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    // leave already-unit input untouched so stored quaternions roundtrip
    if (n - 1.0).abs() > 4.0 * f64::EPSILON {
        for c in q.iter_mut() {
            *c /= n;
        }
    }
    let flip = q
        .iter()
        .find(|c| **c != 0.0)
        .map(|c| *c < 0.0)
        .unwrap_or(false);
    if flip {
        for c in q.iter_mut() {
            *c = -*c;
        }
    }
    // -0.0 would break bitwise determinism of serialized files
    for c in q.iter_mut() {
        if *c == 0.0 {
            *c = 0.0;
        }
    }
    q
}

/// Wrap an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let t = (a + PI).rem_euclid(2.0 * PI) - PI;
    if t >= PI {
        t - 2.0 * PI
    } else {
        t
    }
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation {
        q: [1.0, 0.0, 0.0, 0.0],
    };

    pub fn identity() -> Self {
        Self::IDENTITY
    }

    /// Build from any non-zero quaternion `(w, x, y, z)`; the input is
    /// normalized and canonicalized.
    pub fn from_quaternion(w: f64, x: f64, y: f64, z: f64) -> Self {
        Rotation {
            q: canonical([w, x, y, z]),
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (s, c) = (angle / 2.0).sin_cos();
        Self::from_quaternion(c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n)
    }

    pub fn rot_x(angle: f64) -> Self {
        Self::from_axis_angle([1.0, 0.0, 0.0], angle)
    }

    pub fn rot_y(angle: f64) -> Self {
        Self::from_axis_angle([0.0, 1.0, 0.0], angle)
    }

    pub fn rot_z(angle: f64) -> Self {
        Self::from_axis_angle([0.0, 0.0, 1.0], angle)
    }

    /// Quaternion components `(w, x, y, z)`.
    pub fn quaternion(&self) -> [f64; 4] {
        self.q
    }

    pub fn inverse(&self) -> Self {
        let [w, x, y, z] = self.q;
        Self::from_quaternion(w, -x, -y, -z)
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &Rotation) -> Self {
        let [a1, b1, c1, d1] = self.q;
        let [a2, b2, c2, d2] = other.q;
        Self::from_quaternion(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )
    }

    pub fn to_matrix(&self) -> Mat3 {
        let [w, x, y, z] = self.q;
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

    /// Inverse of [`Rotation::to_matrix`] for a proper orthogonal matrix
    /// (Shepperd's method).
    pub fn from_matrix(m: &Mat3) -> Self {
        let tr = m[0][0] + m[1][1] + m[2][2];
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            Self::from_quaternion(
                0.25 * s,
                (m[2][1] - m[1][2]) / s,
                (m[0][2] - m[2][0]) / s,
                (m[1][0] - m[0][1]) / s,
            )
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Self::from_quaternion(
                (m[2][1] - m[1][2]) / s,
                0.25 * s,
                (m[0][1] + m[1][0]) / s,
                (m[0][2] + m[2][0]) / s,
            )
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Self::from_quaternion(
                (m[0][2] - m[2][0]) / s,
                (m[0][1] + m[1][0]) / s,
                0.25 * s,
                (m[1][2] + m[2][1]) / s,
            )
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Self::from_quaternion(
                (m[1][0] - m[0][1]) / s,
                (m[0][2] + m[2][0]) / s,
                (m[1][2] + m[2][1]) / s,
                0.25 * s,
            )
        }
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        mat_vec(&self.to_matrix(), v)
    }

    /// Rotation angle in `[0, pi]`.
    pub fn angle(&self) -> f64 {
        let [w, x, y, z] = self.q;
        2.0 * (x * x + y * y + z * z).sqrt().atan2(w.abs())
    }

    /// Absolute quaternion inner product; monotone in geodesic closeness.
    #[inline]
    pub fn abs_dot(&self, other: &Rotation) -> f64 {
        let a = self.q;
        let b = other.q;
        (a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]).abs()
    }

    /// ZYZ Euler angles with the same gimbal folding as
    /// [`Rotation::to_euler_xyx`].
    pub fn to_euler_zyz(&self) -> EulerZYZ {
        let [w, x, y, z] = self.q;
        let beta = 2.0 * (x * x + y * y).sqrt().atan2((w * w + z * z).sqrt());
        let sum = 2.0 * z.atan2(w);
        let diff = 2.0 * (-x).atan2(y);
        let (alpha, gamma) = if x.hypot(y) < GIMBAL_EPS {
            (sum, 0.0)
        } else if w.hypot(z) < GIMBAL_EPS {
            (diff, 0.0)
        } else {
            ((sum + diff) / 2.0, (sum - diff) / 2.0)
        };
        EulerZYZ {
            alpha: wrap_angle(alpha),
            beta,
            gamma: wrap_angle(gamma),
        }
    }

    pub fn from_euler_zyz(e: &EulerZYZ) -> Self {
        Rotation::rot_z(e.alpha)
            .compose(&Rotation::rot_y(e.beta))
            .compose(&Rotation::rot_z(e.gamma))
    }

    /// XYX Euler angles. In the gimbal cases `beta ∈ {0, pi}` the whole
    /// rotation about x is folded into `alpha` and `gamma = 0`.
    pub fn to_euler_xyx(&self) -> EulerXYX {
        let [w, x, y, z] = self.q;
        let beta = 2.0 * (y * y + z * z).sqrt().atan2((w * w + x * x).sqrt());
        let sum = 2.0 * x.atan2(w);
        let diff = 2.0 * z.atan2(y);
        let (alpha, gamma) = if y.hypot(z) < GIMBAL_EPS {
            (sum, 0.0)
        } else if w.hypot(x) < GIMBAL_EPS {
            (diff, 0.0)
        } else {
            ((sum + diff) / 2.0, (sum - diff) / 2.0)
        };
        EulerXYX {
            alpha: wrap_angle(alpha),
            beta,
            gamma: wrap_angle(gamma),
        }
    }

    pub fn from_euler_xyx(e: &EulerXYX) -> Self {
        Rotation::rot_x(e.alpha)
            .compose(&Rotation::rot_y(e.beta))
            .compose(&Rotation::rot_x(e.gamma))
    }

    pub fn to_le_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for (i, c) in self.q.iter().enumerate() {
            out[i * 8..(i + 1) * 8].copy_from_slice(&c.to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(b: &[u8; 32]) -> Self {
        let mut q = [0.0; 4];
        for (i, c) in q.iter_mut().enumerate() {
            let mut buf = [0u8; 8];
            buf.copy_from_slice(&b[i * 8..(i + 1) * 8]);
            *c = f64::from_le_bytes(buf);
        }
        Self::from_quaternion(q[0], q[1], q[2], q[3])
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        self.compose(&rhs)
    }
}

impl fmt::Display for Rotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.q;
        write!(f, "Rotation(w={w:.6}, x={x:.6}, y={y:.6}, z={z:.6})")
    }
}

/// Angle of `r1⁻¹ r2` in radians, in `[0, pi]`.
pub fn geodesic_distance(r1: &Rotation, r2: &Rotation) -> f64 {
    r1.inverse().compose(r2).angle()
}

/// Trace form `arccos((tr(R1ᵀR2) - 1) / 2)` with clamping; agrees with
/// [`geodesic_distance`] but loses precision near 0 and pi.
pub fn geodesic_distance_trace(r1: &Rotation, r2: &Rotation) -> f64 {
    let a = r1.to_matrix();
    let b = r2.to_matrix();
    let mut tr = 0.0;
    for i in 0..3 {
        for k in 0..3 {
            tr += a[k][i] * b[k][i];
        }
    }
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Haar-uniform rotation: a normalized 4D standard Gaussian.
pub fn sample_uniform<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    loop {
        let q: [f64; 4] = [
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
            rng.sample(StandardNormal),
        ];
        let n2 = q.iter().map(|c| c * c).sum::<f64>();
        if n2 > 1e-20 {
            return Rotation::from_quaternion(q[0], q[1], q[2], q[3]);
        }
    }
}

pub fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn transpose(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                m = m.max((a[i][j] - b[i][j]).abs());
            }
        }
        m
    }

    const I3: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

    #[test]
    fn identity_matrix() {
        assert_eq!(Rotation::identity().to_matrix(), I3);
    }

    #[test]
    fn quarter_turn_about_z() {
        let h = (PI / 4.0).cos();
        let r = Rotation::from_quaternion(h, 0.0, 0.0, (PI / 4.0).sin());
        let want = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(max_abs_diff(&r.to_matrix(), &want) < 1e-15);
    }

    #[test]
    fn random_matrices_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let m = sample_uniform(&mut rng).to_matrix();
            let p = mat_mul(&m, &transpose(&m));
            assert!(max_abs_diff(&p, &I3) < 1e-12);
            let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
            assert!((det - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geodesic_examples() {
        let i = Rotation::identity();
        assert_eq!(geodesic_distance(&i, &i), 0.0);
        assert!((geodesic_distance(&i, &Rotation::rot_z(PI)) - PI).abs() < 1e-12);
        let d = geodesic_distance(&Rotation::rot_z(PI / 4.0), &Rotation::rot_z(3.0 * PI / 4.0));
        assert!((d - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn geodesic_matches_trace_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let a = sample_uniform(&mut rng);
            let b = sample_uniform(&mut rng);
            let d1 = geodesic_distance(&a, &b);
            let d2 = geodesic_distance_trace(&a, &b);
            assert!((d1 - d2).abs() < 1e-6, "{d1} vs {d2}");
            assert!((0.0..=PI).contains(&d1));
        }
    }

    #[test]
    fn double_cover_canonicalization() {
        let a = Rotation::from_quaternion(-0.5, 0.5, -0.5, 0.5);
        let b = Rotation::from_quaternion(0.5, -0.5, 0.5, -0.5);
        assert_eq!(a, b);
        assert!(a.quaternion()[0] >= 0.0);
        let [w, x, y, z] = a.quaternion();
        assert_eq!(Rotation::from_quaternion(w, x, y, z), a);
        // w == 0 tie-break on x
        let c = Rotation::from_quaternion(0.0, -1.0, 0.0, 0.0);
        assert_eq!(c.quaternion(), [0.0, 1.0, 0.0, 0.0]);
        let d = Rotation::from_quaternion(0.0, 0.0, 0.0, -2.0);
        assert_eq!(d.quaternion(), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn euler_xyx_examples() {
        let e = Rotation::identity().to_euler_xyx();
        assert_eq!((e.alpha, e.beta, e.gamma), (0.0, 0.0, 0.0));
        let e = Rotation::rot_x(0.3).to_euler_xyx();
        assert!((e.alpha - 0.3).abs() < 1e-15 && e.beta == 0.0 && e.gamma == 0.0);
    }

    #[test]
    fn euler_roundtrips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let r = sample_uniform(&mut rng);
            let e = r.to_euler_xyx();
            assert!((0.0..=PI).contains(&e.beta));
            assert!((-PI..PI).contains(&e.alpha) && (-PI..PI).contains(&e.gamma));
            assert!(geodesic_distance(&r, &Rotation::from_euler_xyx(&e)) < 1e-9);
            let z = r.to_euler_zyz();
            assert!(geodesic_distance(&r, &Rotation::from_euler_zyz(&z)) < 1e-9);
        }
        // gimbal cases
        for r in [
            Rotation::rot_y(PI),
            Rotation::rot_y(PI) * Rotation::rot_x(0.7),
            Rotation::rot_x(-2.0),
        ] {
            let e = r.to_euler_xyx();
            assert_eq!(e.gamma, 0.0);
            assert!(geodesic_distance(&r, &Rotation::from_euler_xyx(&e)) < 1e-9);
        }
        for r in [Rotation::rot_y(PI) * Rotation::rot_z(0.4), Rotation::rot_z(1.1)] {
            let e = r.to_euler_zyz();
            assert!(geodesic_distance(&r, &Rotation::from_euler_zyz(&e)) < 1e-9);
        }
    }

    #[test]
    fn matrix_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..200 {
            let r = sample_uniform(&mut rng);
            let back = Rotation::from_matrix(&r.to_matrix());
            assert!(geodesic_distance(&r, &back) < 1e-7);
        }
    }

    #[test]
    fn byte_roundtrip() {
        let r = Rotation::from_quaternion(0.3, -0.2, 0.9, 0.1);
        assert_eq!(Rotation::from_le_bytes(&r.to_le_bytes()), r);
    }
}
