//! Real-basis Wigner matrices.
//!
//! `D(l, R)` is defined by `Y(R x) = D(l, R) Y(x)` for the degree-`l` vector
//! of real harmonics, so `D(l, R1 R2) = D(l, R1) D(l, R2)`. Entries are
//! indexed `[(m + l) * (2l + 1) + (n + l)]`.
//!
//! Rotations about z act on each `(k, -k)` pair as a plane rotation. The
//! y-rotation factor is obtained by conjugating a z-rotation with the fixed
//! matrix `J = D(l, Rx(pi/2))`, using `Ry(b) = Rx(-pi/2) Rz(b) Rx(pi/2)`.
//! `J` is computed once per degree by exact quadrature of `Y(Rx(pi/2) x)`
//! against `Y(x)`, which stays accurate through `l = 16` with no factorials.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use super::sh::ShBasis;
use super::{so3_block_offset, so3_len, L_MAX};
use crate::error::{Error, Result};
use crate::grids::quadrature_s2;
use crate::rotation::Rotation;

fn j_blocks() -> &'static [f64] {
    static J: OnceLock<Vec<f64>> = OnceLock::new();
    J.get_or_init(|| {
        let q = quadrature_s2(L_MAX).expect("band limit within range");
        let r = Rotation::rot_x(FRAC_PI_2);
        let rotated: Vec<_> = q.points.iter().map(|p| r.apply(p)).collect();
        let plain = ShBasis::new(L_MAX, &q.points);
        let moved = ShBasis::new(L_MAX, &rotated);
        let mut out = vec![0.0; so3_len(L_MAX)];
        for p in 0..q.len() {
            let w = q.weights[p];
            let a = moved.row(p);
            let b = plain.row(p);
            for l in 0..=L_MAX {
                let d = 2 * l + 1;
                let off = so3_block_offset(l);
                let s = l * l;
                for i in 0..d {
                    let wa = w * a[s + i];
                    let row = &mut out[off + i * d..off + (i + 1) * d];
                    for (o, bj) in row.iter_mut().zip(&b[s..s + d]) {
                        *o += wa * bj;
                    }
                }
            }
        }
        // entries that are zero by parity come out at ~1e-17; snap them
        for v in out.iter_mut() {
            if v.abs() < 1e-14 {
                *v = 0.0;
            }
        }
        out
    })
}

fn j_block(l: usize) -> &'static [f64] {
    let d = 2 * l + 1;
    let off = so3_block_offset(l);
    &j_blocks()[off..off + d * d]
}

fn check_degree(l: usize) -> Result<()> {
    if l > L_MAX {
        Err(Error::BandLimit {
            requested: l,
            max: L_MAX,
        })
    } else {
        Ok(())
    }
}

/// `(cos, sin)` of `k * angle` for `k = 0..=l`.
fn harmonics_of(l: usize, angle: f64) -> Vec<(f64, f64)> {
    (0..=l)
        .map(|k| {
            let (s, c) = (k as f64 * angle).sin_cos();
            (c, s)
        })
        .collect()
}

/// Real-basis matrix of the rotation by `angle` about z.
pub fn z_rotation(l: usize, angle: f64) -> Vec<f64> {
    let d = 2 * l + 1;
    let li = l as i64;
    let cs = harmonics_of(l, angle);
    let mut out = vec![0.0; d * d];
    let at = |m: i64, n: i64| ((m + li) * d as i64 + n + li) as usize;
    out[at(0, 0)] = 1.0;
    for k in 1..=li {
        let (c, s) = cs[k as usize];
        out[at(k, k)] = c;
        out[at(k, -k)] = -s;
        out[at(-k, -k)] = c;
        out[at(-k, k)] = s;
    }
    out
}

/// Left-multiply a `d x d` block by a z-rotation given its harmonics table.
fn z_left(l: usize, cs: &[(f64, f64)], a: &[f64], out: &mut [f64]) {
    let d = 2 * l + 1;
    out[l * d..(l + 1) * d].copy_from_slice(&a[l * d..(l + 1) * d]);
    for k in 1..=l {
        let (c, s) = cs[k];
        let p = (l + k) * d;
        let n = (l - k) * d;
        for j in 0..d {
            let ap = a[p + j];
            let an = a[n + j];
            out[p + j] = c * ap - s * an;
            out[n + j] = s * ap + c * an;
        }
    }
}

/// Right-multiply a `d x d` block by a z-rotation in place.
fn z_right(l: usize, cs: &[(f64, f64)], a: &mut [f64]) {
    let d = 2 * l + 1;
    for row in a.chunks_mut(d) {
        for k in 1..=l {
            let (c, s) = cs[k];
            let ap = row[l + k];
            let an = row[l - k];
            // column k: a[.,k] c + a[.,-k] s ; column -k: -a[.,k] s + a[.,-k] c
            row[l + k] = ap * c + an * s;
            row[l - k] = -ap * s + an * c;
        }
    }
}

fn small_d_into(l: usize, beta: f64, out: &mut [f64]) {
    let d = 2 * l + 1;
    if l == 0 || beta == 0.0 {
        out.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..d {
            out[i * d + i] = 1.0;
        }
        return;
    }
    let j = j_block(l);
    let cs = harmonics_of(l, beta);
    let mut zj = vec![0.0; d * d];
    z_left(l, &cs, j, &mut zj);
    // out = J^T (Z J)
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in 0..d {
        let jrow = &j[a * d..(a + 1) * d];
        let zrow = &zj[a * d..(a + 1) * d];
        for (i, &ji) in jrow.iter().enumerate() {
            if ji == 0.0 {
                continue;
            }
            let orow = &mut out[i * d..(i + 1) * d];
            for (o, z) in orow.iter_mut().zip(zrow) {
                *o += ji * z;
            }
        }
    }
}

/// Real-basis matrix of the rotation by `beta` about y, the real counterpart
/// of the small-d matrix. Orthogonal, with the `(0, 0)` entry equal to the
/// Legendre polynomial `P_l(cos beta)`.
pub fn wigner_d(l: usize, beta: f64) -> Result<Vec<f64>> {
    check_degree(l)?;
    let d = 2 * l + 1;
    let mut out = vec![0.0; d * d];
    small_d_into(l, beta, &mut out);
    Ok(out)
}

/// Fault injection for the self-test: while armed, every `D(l, r)` block of
/// the chosen degree is multiplied by a constant.
pub mod fault {
    use std::sync::atomic::{AtomicU64, Ordering};

    // degree + 1 (0 = disarmed) and the factor's bit pattern
    static DEGREE: AtomicU64 = AtomicU64::new(0);
    static FACTOR: AtomicU64 = AtomicU64::new(0);

    pub fn arm(l: usize, factor: f64) {
        FACTOR.store(factor.to_bits(), Ordering::SeqCst);
        DEGREE.store(l as u64 + 1, Ordering::SeqCst);
    }

    pub fn disarm() {
        DEGREE.store(0, Ordering::SeqCst);
    }

    pub(super) fn factor_for(l: usize) -> Option<f64> {
        let d = DEGREE.load(Ordering::Relaxed);
        (d == l as u64 + 1).then(|| f64::from_bits(FACTOR.load(Ordering::SeqCst)))
    }
}

fn big_d_into(l: usize, r: &Rotation, out: &mut [f64]) {
    let e = r.to_euler_zyz();
    let d = 2 * l + 1;
    let mut small = vec![0.0; d * d];
    small_d_into(l, e.beta, &mut small);
    z_left(l, &harmonics_of(l, e.alpha), &small, out);
    z_right(l, &harmonics_of(l, e.gamma), out);
    if let Some(f) = fault::factor_for(l) {
        out.iter_mut().for_each(|v| *v *= f);
    }
}

/// Real-basis Wigner matrix `D(l, r) = Z(alpha) d(beta) Z(gamma)` from the
/// Z-Y-Z Euler angles of `r`.
#[allow(non_snake_case)]
pub fn wigner_D(l: usize, r: &Rotation) -> Result<Vec<f64>> {
    check_degree(l)?;
    let d = 2 * l + 1;
    let mut out = vec![0.0; d * d];
    big_d_into(l, r, &mut out);
    Ok(out)
}

/// All blocks `l = 0..=lmax` of [`wigner_D`], concatenated in the SO(3)
/// coefficient layout.
#[allow(non_snake_case)]
pub fn wigner_D_all(lmax: usize, r: &Rotation) -> Result<Vec<f64>> {
    check_degree(lmax)?;
    let mut out = vec![0.0; so3_len(lmax)];
    for l in 0..=lmax {
        let d = 2 * l + 1;
        let off = so3_block_offset(l);
        big_d_into(l, r, &mut out[off..off + d * d]);
    }
    Ok(out)
}

/// All blocks `l = 0..=lmax` of [`wigner_d`] in the SO(3) coefficient layout.
pub fn wigner_d_all(lmax: usize, beta: f64) -> Result<Vec<f64>> {
    check_degree(lmax)?;
    let mut out = vec![0.0; so3_len(lmax)];
    for l in 0..=lmax {
        let d = 2 * l + 1;
        let off = so3_block_offset(l);
        small_d_into(l, beta, &mut out[off..off + d * d]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::sh::sh_all;
    use crate::harmonics::s2_len;
    use crate::rotation::sample_uniform;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                for j in 0..d {
                    out[i * d + j] += a[i * d + k] * b[k * d + j];
                }
            }
        }
        out
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    fn identity(d: usize) -> Vec<f64> {
        let mut m = vec![0.0; d * d];
        for i in 0..d {
            m[i * d + i] = 1.0;
        }
        m
    }

    #[test]
    fn small_d_examples() {
        assert_eq!(wigner_d(0, 0.7).unwrap(), vec![1.0]);
        for beta in [0.0, 0.3, 1.2, std::f64::consts::FRAC_PI_2, 2.9] {
            let d1 = wigner_d(1, beta).unwrap();
            assert!((d1[4] - beta.cos()).abs() < 1e-12);
        }
        assert!(wigner_d(1, FRAC_PI_2).unwrap()[4].abs() < 1e-12);
        assert!(wigner_d(17, 0.1).is_err());
    }

    #[test]
    fn small_d_orthogonal_through_l16() {
        for l in 0..=L_MAX {
            let d = 2 * l + 1;
            let m = wigner_d(l, 1.234).unwrap();
            let mut mt = vec![0.0; d * d];
            for i in 0..d {
                for j in 0..d {
                    mt[j * d + i] = m[i * d + j];
                }
            }
            assert!(max_diff(&matmul(&m, &mt, d), &identity(d)) < 1e-10, "l={l}");
        }
    }

    #[test]
    fn identity_and_homomorphism() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for l in [0usize, 1, 2, 5, 9, 16] {
            let d = 2 * l + 1;
            let id = wigner_D(l, &Rotation::identity()).unwrap();
            assert!(max_diff(&id, &identity(d)) < 1e-12);
            for _ in 0..5 {
                let a = sample_uniform(&mut rng);
                let b = sample_uniform(&mut rng);
                let lhs = wigner_D(l, &(a * b)).unwrap();
                let rhs = matmul(&wigner_D(l, &a).unwrap(), &wigner_D(l, &b).unwrap(), d);
                assert!(max_diff(&lhs, &rhs) < 1e-9, "l={l}");
            }
        }
    }

    #[test]
    fn rotates_harmonics_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lmax = 8;
        for _ in 0..20 {
            let r = sample_uniform(&mut rng);
            let z: f64 = rng.gen_range(-1.0..1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let s = (1.0 - z * z).sqrt();
            let x = [s * phi.cos(), s * phi.sin(), z];
            let mut yx = vec![0.0; s2_len(lmax)];
            let mut yrx = vec![0.0; s2_len(lmax)];
            sh_all(lmax, &x, &mut yx);
            sh_all(lmax, &r.apply(&x), &mut yrx);
            for l in 0..=lmax {
                let d = 2 * l + 1;
                let m = wigner_D(l, &r).unwrap();
                for i in 0..d {
                    let got: f64 = (0..d).map(|j| m[i * d + j] * yx[l * l + j]).sum();
                    assert!((got - yrx[l * l + i]).abs() < 1e-10);
                }
            }
        }
        // z rotation of Y(1,1) ~ x
        let m = wigner_D(1, &Rotation::rot_z(0.4)).unwrap();
        assert!((m[2 * 3 + 2] - 0.4f64.cos()).abs() < 1e-12);
        assert!((m[2 * 3] + 0.4f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn z_rotation_matches_wigner() {
        for l in [1usize, 3, 7] {
            let a = z_rotation(l, 0.9);
            let b = wigner_D(l, &Rotation::rot_z(0.9)).unwrap();
            assert!(max_diff(&a, &b) < 1e-12);
        }
    }
}
